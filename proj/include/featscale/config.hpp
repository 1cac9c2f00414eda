#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "featscale/diversity.hpp"
#include "featscale/errors.hpp"
#include "featscale/grids.hpp"
#include "featscale/sampler.hpp"
#include "featscale/scalespace.hpp"
#include "featscale/simulate.hpp"
#include "featscale/variogram.hpp"

namespace featscale {

using json = nlohmann::json;

namespace cfgdetail {

inline void check_keys(const json& obj, const std::string& section,
                       const std::set<std::string>& allowed) {
    if (!obj.is_object()) throw ConfigInvalid("section '" + section + "' must be an object");
    for (const auto& [key, _] : obj.items())
        if (!allowed.count(key))
            throw ConfigInvalid("unknown key '" + key + "' in section '" + section + "'");
}

template <typename T>
T get_or(const json& obj, const std::string& key, T fallback) {
    if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
    return obj.at(key).get<T>();
}

}  // namespace cfgdetail

struct MissingBlockSpec {
    int top_row = 0, left_col = 0, height = 0, width = 0;
};

struct SimFieldSpec {
    double range = 1.0;
    double partial_sill = 1.0;
    double nugget = 0.0;
    double smoothness = 0.5;
    double scale_x = 1.0;
    double scale_y = 1.0;
    Region region = Region::whole;
};

struct SimulateConfig {
    std::vector<SimFieldSpec> fields;
    double noise_sd = 0.25;
    std::optional<MissingBlockSpec> missing_block;
};

/// Resolved run configuration; every subcommand reads the sections it
/// needs and writes the whole resolved object next to its artifacts.
struct RunConfig {
    std::uint64_t seed = 0;
    int threads = 0;  // 0: FEATSCALE_THREADS env or hardware count
    std::string output = "out";

    // inputs
    std::string input_grid_csv;
    std::string input_active_mask_csv;
    std::string input_chain_dir;
    std::string input_details_dir;
    std::string input_scales_json;
    std::vector<std::string> input_trait_csvs;

    int n1 = 100, n2 = 100;
    double spacing = 1.0 / 99.0;
    AnisotropyWeights anisotropy;
    HyperParams hyper;
    ChainConfig chain;
    ScaleGrid scale_grid = ScaleGrid::make(-1.0, 5.0, 30);
    Norm norm = Norm::maximum;
    VariogramConfig variogram;
    double credibility_alpha = 0.95;
    double diversity_radius = 0.0;
    DiversityIndex diversity_index = DiversityIndex::frich;
    bool keep_draw_details = true;
    SimulateConfig simulate;

    int resolved_threads() const { return threads > 0 ? threads : default_thread_count(); }
};

inline Norm norm_from_name(const std::string& s) {
    if (s == "maximum" || s == "max") return Norm::maximum;
    if (s == "euclidean") return Norm::euclidean;
    throw ConfigInvalid("unknown norm: " + s);
}

inline const char* norm_name(Norm n) { return n == Norm::maximum ? "maximum" : "euclidean"; }

inline Direction direction_from_name(const std::string& s) {
    if (s == "omni") return Direction::omni;
    if (s == "EW" || s == "ew") return Direction::ew;
    if (s == "NS" || s == "ns") return Direction::ns;
    throw ConfigInvalid("unknown variogram direction: " + s);
}

inline Region region_from_name(const std::string& s) {
    if (s == "whole") return Region::whole;
    if (s == "lower-half") return Region::lower_half;
    if (s == "upper-half") return Region::upper_half;
    throw ConfigInvalid("unknown region: " + s);
}

inline const char* region_name(Region r) {
    switch (r) {
        case Region::whole: return "whole";
        case Region::lower_half: return "lower-half";
        default: return "upper-half";
    }
}

inline DiversityIndex diversity_index_from_name(const std::string& s) {
    if (s == "frich") return DiversityIndex::frich;
    if (s == "fdiv") return DiversityIndex::fdiv;
    if (s == "feve") return DiversityIndex::feve;
    throw ConfigInvalid("unknown diversity index: " + s);
}

inline const char* diversity_index_name(DiversityIndex i) {
    switch (i) {
        case DiversityIndex::frich: return "frich";
        case DiversityIndex::fdiv: return "fdiv";
        default: return "feve";
    }
}

inline InitX init_x_from_name(const std::string& s) {
    if (s == "observed-with-zero-fill") return InitX::observed_zero_fill;
    if (s == "neighbor-mean-fill") return InitX::neighbor_mean_fill;
    throw ConfigInvalid("unknown init_x: " + s);
}

inline const char* init_x_name(InitX i) {
    return i == InitX::observed_zero_fill ? "observed-with-zero-fill" : "neighbor-mean-fill";
}

inline RunConfig parse_config(const json& root) {
    using cfgdetail::check_keys;
    using cfgdetail::get_or;
    check_keys(root, "(top level)",
               {"seed", "threads", "output", "input", "lattice", "anisotropy", "hyperparams",
                "chain", "scale_grid", "norm", "variogram", "credibility", "diversity",
                "keep_draw_details", "simulate"});
    RunConfig cfg;
    cfg.seed = get_or<std::uint64_t>(root, "seed", 0);
    cfg.threads = get_or<int>(root, "threads", 0);
    cfg.output = get_or<std::string>(root, "output", "out");
    cfg.keep_draw_details = get_or<bool>(root, "keep_draw_details", true);

    if (root.contains("input")) {
        const auto& in = root.at("input");
        check_keys(in, "input",
                   {"grid_csv", "active_mask_csv", "chain_dir", "details_dir", "scales_json",
                    "trait_csvs"});
        cfg.input_grid_csv = get_or<std::string>(in, "grid_csv", "");
        cfg.input_active_mask_csv = get_or<std::string>(in, "active_mask_csv", "");
        cfg.input_chain_dir = get_or<std::string>(in, "chain_dir", "");
        cfg.input_details_dir = get_or<std::string>(in, "details_dir", "");
        cfg.input_scales_json = get_or<std::string>(in, "scales_json", "");
        cfg.input_trait_csvs = get_or<std::vector<std::string>>(in, "trait_csvs", {});
    }
    if (root.contains("lattice")) {
        const auto& l = root.at("lattice");
        check_keys(l, "lattice", {"n1", "n2", "spacing"});
        cfg.n1 = get_or<int>(l, "n1", 100);
        cfg.n2 = get_or<int>(l, "n2", 100);
        cfg.spacing = get_or<double>(l, "spacing", 1.0 / 99.0);
    }
    if (root.contains("anisotropy")) {
        const auto& a = root.at("anisotropy");
        check_keys(a, "anisotropy", {"alpha1", "alpha2"});
        cfg.anisotropy.alpha1 = get_or<double>(a, "alpha1", 1.0);
        cfg.anisotropy.alpha2 = get_or<double>(a, "alpha2", 1.0);
        cfg.anisotropy.validate();
    }
    if (root.contains("hyperparams")) {
        const auto& h = root.at("hyperparams");
        check_keys(h, "hyperparams", {"alpha_x", "alpha_y", "beta_x", "beta_y"});
        cfg.hyper.alpha_x = get_or<double>(h, "alpha_x", 1.0);
        cfg.hyper.alpha_y = get_or<double>(h, "alpha_y", 10.0);
        cfg.hyper.beta_x = get_or<double>(h, "beta_x", 0.1);
        cfg.hyper.beta_y = get_or<double>(h, "beta_y", 1.0);
        cfg.hyper.validate();
    }
    if (root.contains("chain")) {
        const auto& c = root.at("chain");
        check_keys(c, "chain",
                   {"burn_in", "n_samples", "thin", "init_kappa_x", "init_kappa_y", "init_x",
                    "fix_kappas"});
        cfg.chain.burn_in = get_or<int>(c, "burn_in", 2000);
        cfg.chain.n_samples = get_or<int>(c, "n_samples", 200);
        cfg.chain.thin = get_or<int>(c, "thin", 1);
        cfg.chain.init_kappa_x = get_or<double>(c, "init_kappa_x", 1.0);
        cfg.chain.init_kappa_y = get_or<double>(c, "init_kappa_y", 10.0);
        cfg.chain.init_x = init_x_from_name(
            get_or<std::string>(c, "init_x", "observed-with-zero-fill"));
        cfg.chain.fix_kappas = get_or<bool>(c, "fix_kappas", false);
        cfg.chain.validate();
    } else {
        cfg.chain.burn_in = 2000;
        cfg.chain.n_samples = 200;
        cfg.chain.init_kappa_y = 10.0;
    }
    cfg.chain.seed = cfg.seed;
    if (root.contains("scale_grid")) {
        const auto& s = root.at("scale_grid");
        check_keys(s, "scale_grid", {"log_lo", "log_hi", "points_per_decade"});
        cfg.scale_grid = ScaleGrid::make(get_or<double>(s, "log_lo", -1.0),
                                         get_or<double>(s, "log_hi", 5.0),
                                         get_or<int>(s, "points_per_decade", 30));
    }
    if (root.contains("norm")) cfg.norm = norm_from_name(root.at("norm").get<std::string>());
    if (root.contains("variogram")) {
        const auto& v = root.at("variogram");
        check_keys(v, "variogram",
                   {"direction", "n_bins", "max_lag", "angle_tol_deg", "subsample_keep_one_of",
                    "smoothness_cap"});
        cfg.variogram.direction =
            direction_from_name(get_or<std::string>(v, "direction", "omni"));
        cfg.variogram.n_bins = get_or<int>(v, "n_bins", 40);
        cfg.variogram.max_lag = get_or<double>(v, "max_lag", 0.0);
        cfg.variogram.angle_tol_deg = get_or<double>(v, "angle_tol_deg", 22.5);
        cfg.variogram.subsample_keep_one_of = get_or<int>(v, "subsample_keep_one_of", 1);
        cfg.variogram.smoothness_cap = get_or<double>(v, "smoothness_cap", 5.0);
    }
    cfg.variogram.subsample_seed = cfg.seed;
    if (root.contains("credibility")) {
        const auto& c = root.at("credibility");
        check_keys(c, "credibility", {"alpha"});
        cfg.credibility_alpha = get_or<double>(c, "alpha", 0.95);
    }
    if (root.contains("diversity")) {
        const auto& d = root.at("diversity");
        check_keys(d, "diversity", {"radius", "index"});
        cfg.diversity_radius = get_or<double>(d, "radius", 0.0);
        cfg.diversity_index =
            diversity_index_from_name(get_or<std::string>(d, "index", "frich"));
    }
    if (root.contains("simulate")) {
        const auto& s = root.at("simulate");
        check_keys(s, "simulate", {"fields", "noise_sd", "missing_block"});
        cfg.simulate.noise_sd = get_or<double>(s, "noise_sd", 0.25);
        if (s.contains("fields")) {
            for (const auto& f : s.at("fields")) {
                check_keys(f, "simulate.fields[]",
                           {"range", "partial_sill", "nugget", "smoothness", "scale_x", "scale_y",
                            "region"});
                SimFieldSpec fs;
                fs.range = get_or<double>(f, "range", 1.0);
                fs.partial_sill = get_or<double>(f, "partial_sill", 1.0);
                fs.nugget = get_or<double>(f, "nugget", 0.0);
                fs.smoothness = get_or<double>(f, "smoothness", 0.5);
                fs.scale_x = get_or<double>(f, "scale_x", 1.0);
                fs.scale_y = get_or<double>(f, "scale_y", 1.0);
                fs.region = region_from_name(get_or<std::string>(f, "region", "whole"));
                cfg.simulate.fields.push_back(fs);
            }
        }
        if (s.contains("missing_block") && !s.at("missing_block").is_null()) {
            const auto& b = s.at("missing_block");
            check_keys(b, "simulate.missing_block", {"top_row", "left_col", "height", "width"});
            MissingBlockSpec mb;
            mb.top_row = get_or<int>(b, "top_row", 0);
            mb.left_col = get_or<int>(b, "left_col", 0);
            mb.height = get_or<int>(b, "height", 0);
            mb.width = get_or<int>(b, "width", 0);
            cfg.simulate.missing_block = mb;
        }
    }
    return cfg;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputMissing("config file not found: " + path);
    json root;
    try {
        in >> root;
    } catch (const json::exception& e) {
        throw ConfigInvalid(std::string("config parse error: ") + e.what());
    }
    try {
        return parse_config(root);
    } catch (const json::exception& e) {
        throw ConfigInvalid(std::string("config type error: ") + e.what());
    }
}

inline json config_to_json(const RunConfig& cfg) {
    json root;
    root["seed"] = cfg.seed;
    root["threads"] = cfg.threads;
    root["output"] = cfg.output;
    root["keep_draw_details"] = cfg.keep_draw_details;
    root["input"] = {{"grid_csv", cfg.input_grid_csv},
                     {"active_mask_csv", cfg.input_active_mask_csv},
                     {"chain_dir", cfg.input_chain_dir},
                     {"details_dir", cfg.input_details_dir},
                     {"scales_json", cfg.input_scales_json},
                     {"trait_csvs", cfg.input_trait_csvs}};
    root["lattice"] = {{"n1", cfg.n1}, {"n2", cfg.n2}, {"spacing", cfg.spacing}};
    root["anisotropy"] = {{"alpha1", cfg.anisotropy.alpha1}, {"alpha2", cfg.anisotropy.alpha2}};
    root["hyperparams"] = {{"alpha_x", cfg.hyper.alpha_x},
                           {"alpha_y", cfg.hyper.alpha_y},
                           {"beta_x", cfg.hyper.beta_x},
                           {"beta_y", cfg.hyper.beta_y}};
    root["chain"] = {{"burn_in", cfg.chain.burn_in},
                     {"n_samples", cfg.chain.n_samples},
                     {"thin", cfg.chain.thin},
                     {"init_kappa_x", cfg.chain.init_kappa_x},
                     {"init_kappa_y", cfg.chain.init_kappa_y},
                     {"init_x", init_x_name(cfg.chain.init_x)},
                     {"fix_kappas", cfg.chain.fix_kappas}};
    root["scale_grid"] = {{"log_lo", cfg.scale_grid.log_lo},
                          {"log_hi", cfg.scale_grid.log_hi},
                          {"points_per_decade", cfg.scale_grid.points_per_decade}};
    root["norm"] = norm_name(cfg.norm);
    root["variogram"] = {{"direction", direction_name(cfg.variogram.direction)},
                         {"n_bins", cfg.variogram.n_bins},
                         {"max_lag", cfg.variogram.max_lag},
                         {"angle_tol_deg", cfg.variogram.angle_tol_deg},
                         {"subsample_keep_one_of", cfg.variogram.subsample_keep_one_of},
                         {"smoothness_cap", cfg.variogram.smoothness_cap}};
    root["credibility"] = {{"alpha", cfg.credibility_alpha}};
    root["diversity"] = {{"radius", cfg.diversity_radius},
                         {"index", diversity_index_name(cfg.diversity_index)}};
    json fields = json::array();
    for (const auto& f : cfg.simulate.fields)
        fields.push_back({{"range", f.range},
                          {"partial_sill", f.partial_sill},
                          {"nugget", f.nugget},
                          {"smoothness", f.smoothness},
                          {"scale_x", f.scale_x},
                          {"scale_y", f.scale_y},
                          {"region", region_name(f.region)}});
    root["simulate"] = {{"fields", fields}, {"noise_sd", cfg.simulate.noise_sd}};
    if (cfg.simulate.missing_block) {
        root["simulate"]["missing_block"] = {{"top_row", cfg.simulate.missing_block->top_row},
                                             {"left_col", cfg.simulate.missing_block->left_col},
                                             {"height", cfg.simulate.missing_block->height},
                                             {"width", cfg.simulate.missing_block->width}};
    } else {
        root["simulate"]["missing_block"] = nullptr;
    }
    return root;
}

}  // namespace featscale
