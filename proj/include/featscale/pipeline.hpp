#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "featscale/config.hpp"
#include "featscale/diversity.hpp"
#include "featscale/grids.hpp"
#include "featscale/sampler.hpp"
#include "featscale/scalespace.hpp"
#include "featscale/simulate.hpp"
#include "featscale/variogram.hpp"
#include "featscale/version.hpp"

namespace featscale {

namespace fs = std::filesystem;

/// Wall-clock stage log. Timings land in a plain-text file on purpose:
/// every CSV/JSON artifact stays byte-identical across reruns.
class StageTimer {
  public:
    explicit StageTimer(fs::path dir) : dir_(std::move(dir)) {}

    template <typename Fn>
    auto stage(const std::string& name, Fn&& fn) {
        const auto t0 = std::chrono::steady_clock::now();
        if constexpr (std::is_void_v<decltype(fn())>) {
            fn();
            record(name, t0);
        } else {
            auto result = fn();
            record(name, t0);
            return result;
        }
    }

    void flush() const {
        std::ofstream out(dir_ / "timings.txt");
        for (const auto& [name, sec] : entries_) out << name << ' ' << sec << "s\n";
    }

  private:
    void record(const std::string& name, std::chrono::steady_clock::time_point t0) {
        const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        entries_.emplace_back(name, sec);
        std::cerr << "[featscale] " << name << ": " << sec << " s\n";
    }
    fs::path dir_;
    std::vector<std::pair<std::string, double>> entries_;
};

inline void write_json_file(const json& j, const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputMissing("cannot open for writing: " + path.string());
    out << j.dump(2) << '\n';
}

inline json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw InputMissing("cannot open: " + path.string());
    json j;
    in >> j;
    return j;
}

/// Resolved config + version + seed: written into every artifact directory.
inline void write_manifest(const RunConfig& cfg, const std::string& subcommand, const fs::path& dir) {
    json manifest;
    manifest["tool"] = "featscale";
    manifest["version"] = kVersion;
    manifest["subcommand"] = subcommand;
    manifest["seed"] = cfg.seed;
    manifest["config"] = config_to_json(cfg);
    write_json_file(manifest, dir / "run_manifest.json");
}

inline json lambda_to_json(double lambda) { return json(format_double(lambda)); }

inline double lambda_from_json(const json& j) {
    const std::string s = j.get<std::string>();
    if (s == "inf") return kLambdaInf;
    return std::stod(s);
}

inline json scale_set_to_json(const ScaleSet& set) {
    json j;
    j["norm"] = norm_name(set.source_norm);
    json arr = json::array();
    for (double l : set.lambdas) arr.push_back(lambda_to_json(l));
    j["lambdas"] = arr;
    return j;
}

inline ScaleSet scale_set_from_json(const json& j) {
    ScaleSet set;
    set.source_norm = norm_from_name(j.at("norm").get<std::string>());
    for (const auto& l : j.at("lambdas")) set.lambdas.push_back(lambda_from_json(l));
    set.validate();
    return set;
}

// ---------------------------------------------------------------------------
// chain persistence

inline void write_mask_grid(const Lattice& lat, const std::vector<char>& mask, const fs::path& path) {
    GridData g = GridData::make(lat.n1, lat.n2, lat.spacing);
    for (int i = 0; i < lat.grid_size(); ++i) g.values[i] = mask[i] ? 1.0 : 0.0;
    write_grid_csv(g, path.string());
}

inline std::vector<char> read_mask_grid(const fs::path& path, const Lattice& lat) {
    const GridData g = read_grid_csv(path.string());
    if (g.n1 != lat.n1 || g.n2 != lat.n2) throw DimensionMismatch("mask shape mismatch");
    std::vector<char> mask(static_cast<std::size_t>(lat.grid_size()));
    for (int i = 0; i < lat.grid_size(); ++i) mask[i] = g.values[i] != 0.0 ? 1 : 0;
    return mask;
}

inline void save_chain(const PosteriorChain& chain, const Lattice& lat, const RunConfig& cfg,
                       const fs::path& dir) {
    write_matrix_f64(chain.x_draws, (dir / "chain_x.f64").string());
    {
        std::ofstream out(dir / "chain_kappas.csv", std::ios::binary);
        out << "sample,kappa_x,kappa_y\n";
        for (int s = 0; s < chain.n_samples(); ++s)
            out << s << ',' << format_double(chain.kappa_x_draws[s]) << ','
                << format_double(chain.kappa_y_draws[s]) << '\n';
    }
    write_mask_grid(lat, lat.active, dir / "active_mask.csv");
    write_mask_grid(lat, lat.observed, dir / "observed_mask.csv");

    const DiagnosticsReport diag = chain.n_samples() >= 10 ? chain_diagnostics(chain)
                                                           : DiagnosticsReport{};
    json meta;
    meta["n"] = chain.n;
    meta["n_samples"] = chain.n_samples();
    meta["lattice"] = {{"n1", lat.n1}, {"n2", lat.n2}, {"spacing", lat.spacing}};
    meta["anisotropy"] = {{"alpha1", cfg.anisotropy.alpha1}, {"alpha2", cfg.anisotropy.alpha2}};
    meta["hyperparams"] = {{"alpha_x", cfg.hyper.alpha_x},
                           {"alpha_y", cfg.hyper.alpha_y},
                           {"beta_x", cfg.hyper.beta_x},
                           {"beta_y", cfg.hyper.beta_y}};
    meta["chain"] = {{"burn_in", cfg.chain.burn_in},
                     {"n_samples", cfg.chain.n_samples},
                     {"thin", cfg.chain.thin},
                     {"seed", cfg.chain.seed},
                     {"init_kappa_x", cfg.chain.init_kappa_x},
                     {"init_kappa_y", cfg.chain.init_kappa_y},
                     {"init_x", init_x_name(cfg.chain.init_x)},
                     {"fix_kappas", cfg.chain.fix_kappas}};
    json diag_json = json::array();
    for (const auto& s : diag.series) {
        json d;
        d["name"] = s.name;
        d["ess"] = s.ess;
        d["degenerate"] = s.degenerate;
        d["acf"] = s.acf;
        diag_json.push_back(d);
    }
    meta["diagnostics"] = diag_json;
    write_json_file(meta, dir / "chain_meta.json");
}

struct LoadedChain {
    PosteriorChain chain;
    Lattice lattice;
    AnisotropyWeights anisotropy;
};

inline LoadedChain load_chain(const fs::path& dir) {
    const json meta = read_json_file(dir / "chain_meta.json");
    LoadedChain lc;
    lc.lattice.n1 = meta.at("lattice").at("n1").get<int>();
    lc.lattice.n2 = meta.at("lattice").at("n2").get<int>();
    lc.lattice.spacing = meta.at("lattice").at("spacing").get<double>();
    lc.lattice.active.assign(static_cast<std::size_t>(lc.lattice.grid_size()), 1);
    lc.lattice.observed = lc.lattice.active;
    lc.lattice.active = read_mask_grid(dir / "active_mask.csv", lc.lattice);
    lc.lattice.observed = read_mask_grid(dir / "observed_mask.csv", lc.lattice);
    lc.anisotropy.alpha1 = meta.at("anisotropy").at("alpha1").get<double>();
    lc.anisotropy.alpha2 = meta.at("anisotropy").at("alpha2").get<double>();
    lc.chain.n = meta.at("n").get<int>();
    const int n_samples = meta.at("n_samples").get<int>();
    lc.chain.x_draws = read_matrix_f64((dir / "chain_x.f64").string(),
                                       static_cast<std::size_t>(n_samples) * lc.chain.n);
    lc.chain.kappa_x_draws.resize(n_samples);
    lc.chain.kappa_y_draws.resize(n_samples);
    {
        std::ifstream in(dir / "chain_kappas.csv");
        if (!in) throw InputMissing("missing chain_kappas.csv in " + dir.string());
        std::string line;
        std::getline(in, line);  // header
        for (int s = 0; s < n_samples; ++s) {
            std::getline(in, line);
            std::istringstream row(line);
            std::string tok;
            std::getline(row, tok, ',');
            std::getline(row, tok, ',');
            lc.chain.kappa_x_draws[s] = std::stod(tok);
            std::getline(row, tok, ',');
            lc.chain.kappa_y_draws[s] = std::stod(tok);
        }
    }
    return lc;
}

// ---------------------------------------------------------------------------
// subcommand bodies

/// Per-node empirical quantile interval width across draws.
inline std::vector<double> interval_width(const PosteriorChain& chain, double level) {
    const double tail = 0.5 * (1.0 - level);
    std::vector<double> width(static_cast<std::size_t>(chain.n));
    std::vector<double> column(static_cast<std::size_t>(chain.n_samples()));
    for (int i = 0; i < chain.n; ++i) {
        for (int s = 0; s < chain.n_samples(); ++s) column[s] = chain.draw(s)[i];
        width[i] = quantile(column, 1.0 - tail) - quantile(column, tail);
    }
    return width;
}

struct ResampleResult {
    Lattice lattice;
    PosteriorChain chain;
    SparseMatrix q;
};

inline ResampleResult resample_grid(const GridData& data, const GridData* active_mask,
                                    const RunConfig& cfg) {
    ResampleResult res;
    res.lattice = lattice_from_grids(data, active_mask);
    res.lattice.validate();
    std::vector<int> isolated;
    res.q = build_lattice_q(res.lattice, cfg.anisotropy, &isolated);
    if (!isolated.empty())
        std::cerr << "[featscale] warning: " << isolated.size()
                  << " active node(s) have no active neighbor\n";
    const SelectionOperator H = selection_operator(res.lattice);
    // y = observed values in active order
    std::vector<double> y;
    y.reserve(static_cast<std::size_t>(res.lattice.n_observed()));
    for (int g = 0; g < res.lattice.grid_size(); ++g)
        if (res.lattice.active[g] && res.lattice.observed[g]) y.push_back(data.values[g]);
    ChainConfig ccfg = cfg.chain;
    ccfg.seed = cfg.seed;
    if (H.is_identity())
        res.chain = gibbs_complete(y, res.q, cfg.hyper, ccfg);
    else
        res.chain = gibbs_missing(y, res.q, H, cfg.hyper, ccfg);
    return res;
}

inline void run_simulate(const RunConfig& cfg, const fs::path& out) {
    if (cfg.simulate.fields.empty()) throw ConfigInvalid("simulate: no fields configured");
    RngState rng(cfg.seed);
    std::vector<std::vector<double>> fields;
    for (std::size_t k = 0; k < cfg.simulate.fields.size(); ++k) {
        const auto& f = cfg.simulate.fields[k];
        FieldSpec spec;
        spec.params = MaternParams{f.range, f.partial_sill, f.nugget, f.smoothness, 0.0};
        spec.n1 = cfg.n1;
        spec.n2 = cfg.n2;
        spec.spacing = cfg.spacing;
        spec.scale_x = f.scale_x;
        spec.scale_y = f.scale_y;
        spec.region = f.region;
        fields.push_back(sample_grf(spec, rng));
        GridData g = GridData::make(cfg.n1, cfg.n2, cfg.spacing);
        g.values = fields.back();
        write_grid_csv(g, (out / ("truth_field_" + std::to_string(k + 1) + ".csv")).string());
    }
    const std::vector<double> composite = compose(fields, cfg.simulate.noise_sd, rng);
    GridData g = GridData::make(cfg.n1, cfg.n2, cfg.spacing);
    g.values = composite;
    write_grid_csv(g, (out / "composite.csv").string());

    GridData y = g;
    if (cfg.simulate.missing_block) {
        const auto& b = *cfg.simulate.missing_block;
        Lattice lat = Lattice::full(cfg.n1, cfg.n2, cfg.spacing);
        lat = insert_missing_block(lat, b.top_row, b.left_col, b.height, b.width);
        for (int i = 0; i < lat.grid_size(); ++i)
            if (!lat.observed[i]) y.values[i] = GridData::na();
    }
    write_grid_csv(y, (out / "y.csv").string());
    write_heatmap(y, (out / "y.ppm").string());
}

inline void run_resample(const RunConfig& cfg, const fs::path& out) {
    if (cfg.input_grid_csv.empty()) throw ConfigInvalid("resample: input.grid_csv required");
    const GridData data = read_grid_csv(cfg.input_grid_csv);
    std::optional<GridData> mask;
    if (!cfg.input_active_mask_csv.empty()) mask = read_grid_csv(cfg.input_active_mask_csv);
    const ResampleResult res = resample_grid(data, mask ? &*mask : nullptr, cfg);
    save_chain(res.chain, res.lattice, cfg, out);
    const std::vector<double> mean = posterior_mean(res.chain);
    write_grid_csv(field_to_grid(mean, res.lattice), (out / "posterior_mean.csv").string());
    write_heatmap(field_to_grid(mean, res.lattice), (out / "posterior_mean.ppm").string());
    const std::vector<double> width = interval_width(res.chain, 0.90);
    write_grid_csv(field_to_grid(width, res.lattice), (out / "interval_width90.csv").string());
    write_heatmap(field_to_grid(width, res.lattice), (out / "interval_width90.ppm").string(),
                  Palette::gray);
}

struct ScalesResult {
    std::vector<double> max_curve, euclid_curve;
    ScaleSet scales;
    ScaleUncertainty uncertainty;
    bool has_uncertainty = false;
};

inline void write_scales_outputs(const ScalesResult& res, const ScaleGrid& grid,
                                 const fs::path& out) {
    {
        std::ofstream curve(out / "norm_curve.csv", std::ios::binary);
        curve << "lambda,maximum_norm,euclidean_norm\n";
        for (std::size_t i = 0; i < grid.lambdas.size(); ++i)
            curve << format_double(grid.lambdas[i]) << ',' << format_double(res.max_curve[i]) << ','
                  << format_double(res.euclid_curve[i]) << '\n';
    }
    json sj = scale_set_to_json(res.scales);
    if (res.has_uncertainty) {
        json unc;
        json pts = json::array(), lo = json::array(), hi = json::array();
        for (std::size_t i = 0; i < res.uncertainty.point_lambdas.size(); ++i) {
            pts.push_back(lambda_to_json(res.uncertainty.point_lambdas[i]));
            lo.push_back(lambda_to_json(res.uncertainty.lower[i]));
            hi.push_back(lambda_to_json(res.uncertainty.upper[i]));
        }
        unc["point_lambdas"] = pts;
        unc["lower95"] = lo;
        unc["upper95"] = hi;
        unc["matched_draws"] = res.uncertainty.matched_draws;
        unc["mismatch_fraction"] = res.uncertainty.mismatch_fraction;
        sj["uncertainty"] = unc;
    }
    write_json_file(sj, out / "scales.json");
}

inline ScalesResult scales_for_chain(const PosteriorChain& chain, const Smoother& smoother,
                                     const RunConfig& cfg) {
    ScalesResult res;
    const std::vector<double> mean = posterior_mean(chain);
    res.max_curve = norm_curve(mean, smoother, cfg.scale_grid, Norm::maximum);
    res.euclid_curve = norm_curve(mean, smoother, cfg.scale_grid, Norm::euclidean);
    const auto& curve = (cfg.norm == Norm::maximum) ? res.max_curve : res.euclid_curve;
    res.scales = select_scales(curve, cfg.scale_grid, cfg.norm);
    res.uncertainty =
        scale_uncertainty(chain, smoother, cfg.scale_grid, cfg.norm, cfg.resolved_threads());
    res.has_uncertainty = true;
    return res;
}

inline void run_scales(const RunConfig& cfg, const fs::path& out) {
    if (!cfg.input_chain_dir.empty()) {
        const LoadedChain lc = load_chain(cfg.input_chain_dir);
        RunConfig local = cfg;
        local.anisotropy = lc.anisotropy;
        const SparseMatrix q = build_lattice_q(lc.lattice, lc.anisotropy);
        Smoother smoother(q);
        const ScalesResult res = scales_for_chain(lc.chain, smoother, local);
        write_scales_outputs(res, cfg.scale_grid, out);
        return;
    }
    if (cfg.input_grid_csv.empty())
        throw ConfigInvalid("scales: input.chain_dir or input.grid_csv required");
    const GridData data = read_grid_csv(cfg.input_grid_csv);
    // plain grid: NA cells fall outside the area of interest
    Lattice lat;
    lat.n1 = data.n1;
    lat.n2 = data.n2;
    lat.spacing = data.spacing;
    lat.active.assign(static_cast<std::size_t>(lat.grid_size()), 1);
    for (int i = 0; i < lat.grid_size(); ++i)
        if (std::isnan(data.values[i])) lat.active[i] = 0;
    lat.observed = lat.active;
    lat.validate();
    const SparseMatrix q = build_lattice_q(lat, cfg.anisotropy);
    Smoother smoother(q);
    const std::vector<double> field = grid_to_field(data, lat);
    ScalesResult res;
    res.max_curve = norm_curve(field, smoother, cfg.scale_grid, Norm::maximum);
    res.euclid_curve = norm_curve(field, smoother, cfg.scale_grid, Norm::euclidean);
    const auto& curve = (cfg.norm == Norm::maximum) ? res.max_curve : res.euclid_curve;
    res.scales = select_scales(curve, cfg.scale_grid, cfg.norm);
    write_scales_outputs(res, cfg.scale_grid, out);
}

inline void save_details(const DetailStack& stack, const Lattice& lat, bool keep_draws,
                         const fs::path& out) {
    json meta;
    meta["levels"] = stack.levels;
    meta["n"] = stack.n;
    meta["n_draws"] = keep_draws ? stack.n_draws : 0;
    meta["scales"] = scale_set_to_json(stack.scales);
    for (int l = 0; l < stack.levels; ++l) {
        write_grid_csv(field_to_grid(stack.mean_detail(l), lat),
                       (out / ("detail_mean_" + std::to_string(l + 1) + ".csv")).string());
        write_heatmap(field_to_grid(stack.mean_detail(l), lat),
                      (out / ("detail_mean_" + std::to_string(l + 1) + ".ppm")).string());
    }
    if (keep_draws && stack.n_draws > 0)
        write_matrix_f64(stack.draw_details, (out / "detail_draws.f64").string());
    write_mask_grid(lat, lat.active, out / "active_mask.csv");
    write_mask_grid(lat, lat.observed, out / "observed_mask.csv");
    meta["lattice"] = {{"n1", lat.n1}, {"n2", lat.n2}, {"spacing", lat.spacing}};
    write_json_file(meta, out / "decompose_meta.json");
}

struct LoadedDetails {
    DetailStack stack;
    Lattice lattice;
};

inline LoadedDetails load_details(const fs::path& dir) {
    const json meta = read_json_file(dir / "decompose_meta.json");
    LoadedDetails ld;
    ld.lattice.n1 = meta.at("lattice").at("n1").get<int>();
    ld.lattice.n2 = meta.at("lattice").at("n2").get<int>();
    ld.lattice.spacing = meta.at("lattice").at("spacing").get<double>();
    ld.lattice.active.assign(static_cast<std::size_t>(ld.lattice.grid_size()), 1);
    ld.lattice.observed = ld.lattice.active;
    ld.lattice.active = read_mask_grid(dir / "active_mask.csv", ld.lattice);
    ld.lattice.observed = read_mask_grid(dir / "observed_mask.csv", ld.lattice);
    ld.stack.levels = meta.at("levels").get<int>();
    ld.stack.n = meta.at("n").get<int>();
    ld.stack.n_draws = meta.at("n_draws").get<int>();
    ld.stack.scales = scale_set_from_json(meta.at("scales"));
    ld.stack.mean_details.resize(static_cast<std::size_t>(ld.stack.levels) * ld.stack.n);
    for (int l = 0; l < ld.stack.levels; ++l) {
        const GridData g =
            read_grid_csv((dir / ("detail_mean_" + std::to_string(l + 1) + ".csv")).string());
        const std::vector<double> field = grid_to_field(g, ld.lattice);
        std::copy(field.begin(), field.end(),
                  ld.stack.mean_details.begin() + static_cast<std::size_t>(l) * ld.stack.n);
    }
    if (ld.stack.n_draws > 0)
        ld.stack.draw_details = read_matrix_f64(
            (dir / "detail_draws.f64").string(),
            static_cast<std::size_t>(ld.stack.n_draws) * ld.stack.levels * ld.stack.n);
    return ld;
}

inline void run_decompose(const RunConfig& cfg, const fs::path& out) {
    if (cfg.input_chain_dir.empty()) throw ConfigInvalid("decompose: input.chain_dir required");
    if (cfg.input_scales_json.empty()) throw ConfigInvalid("decompose: input.scales_json required");
    const LoadedChain lc = load_chain(cfg.input_chain_dir);
    const ScaleSet scales = scale_set_from_json(read_json_file(cfg.input_scales_json));
    const SparseMatrix q = build_lattice_q(lc.lattice, lc.anisotropy);
    Smoother smoother(q);
    const DetailStack stack = decompose(lc.chain, smoother, scales, cfg.resolved_threads());
    save_details(stack, lc.lattice, cfg.keep_draw_details, out);
}

inline void run_credibility(const RunConfig& cfg, const fs::path& out) {
    if (cfg.input_details_dir.empty()) throw ConfigInvalid("credibility: input.details_dir required");
    const LoadedDetails ld = load_details(cfg.input_details_dir);
    if (ld.stack.n_draws == 0)
        throw InputMissing("credibility: detail draws were not retained; rerun decompose");
    json meta;
    meta["alpha"] = cfg.credibility_alpha;
    json counts = json::array();
    for (int l = 0; l < ld.stack.levels; ++l) {
        const CredibilityMap map = credibility_map(ld.stack, l, cfg.credibility_alpha);
        GridData g = GridData::make(ld.lattice.n1, ld.lattice.n2, ld.lattice.spacing,
                                    GridData::na());
        int slot = 0;
        for (int i = 0; i < ld.lattice.grid_size(); ++i)
            if (ld.lattice.active[i]) g.values[i] = map.labels[slot++];
        write_grid_csv(g, (out / ("credibility_" + std::to_string(l + 1) + ".csv")).string());
        write_heatmap(g, (out / ("credibility_" + std::to_string(l + 1) + ".ppm")).string());
        counts.push_back({{"level", l + 1},
                          {"positive", map.count(1)},
                          {"negative", map.count(-1)},
                          {"not_credible", map.count(0)}});
    }
    meta["counts"] = counts;
    write_json_file(meta, out / "credibility_meta.json");
}

inline json fit_report_to_json(const FitReport& r) {
    json j;
    j["range"] = r.params.range;
    j["partial_sill"] = r.params.partial_sill;
    j["nugget"] = r.params.nugget;
    j["smoothness"] = r.params.smoothness;
    j["effective_range"] = r.params.effective_range;
    j["weighted_sse"] = r.weighted_sse;
    j["converged"] = r.converged;
    j["cap_reached"] = r.cap_reached;
    j["censored"] = r.censored;
    j["flagged"] = r.flagged;
    if (r.n_draws > 0) {
        j["n_draws"] = r.n_draws;
        j["n_failed"] = r.n_failed;
        j["range_ci"] = {r.range_lo, r.range_hi};
        j["sill_ci"] = {r.sill_lo, r.sill_hi};
        j["smoothness_ci"] = {r.smoothness_lo, r.smoothness_hi};
        j["effective_range_ci"] = {r.eff_lo, r.eff_hi};
        j["draw_range"] = r.draw_range;
        j["draw_sill"] = r.draw_sill;
        j["draw_smoothness"] = r.draw_smoothness;
        j["draw_effective_range"] = r.draw_eff;
    }
    return j;
}

inline void write_fit_table(const std::vector<std::pair<std::string, FitReport>>& rows,
                            Direction dir, const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    out << "detail,direction,range,range_lo,range_hi,partial_sill,sill_lo,sill_hi,"
           "smoothness,smoothness_lo,smoothness_hi,effective_range,eff_lo,eff_hi,"
           "cap_reached,censored,flagged\n";
    for (const auto& [name, r] : rows) {
        out << name << ',' << direction_name(dir) << ',';
        out << format_double(r.params.range) << ',';
        if (r.n_draws > 0)
            out << format_double(r.range_lo) << ',' << format_double(r.range_hi) << ',';
        else
            out << ",,";
        out << format_double(r.params.partial_sill) << ',';
        if (r.n_draws > 0)
            out << format_double(r.sill_lo) << ',' << format_double(r.sill_hi) << ',';
        else
            out << ",,";
        out << format_double(r.params.smoothness) << ',';
        if (r.n_draws > 0 && !r.cap_reached)
            out << format_double(r.smoothness_lo) << ',' << format_double(r.smoothness_hi) << ',';
        else
            out << "-,-,";  // pinned smoothness has no meaningful interval
        out << format_double(r.params.effective_range) << ',';
        if (r.n_draws > 0)
            out << format_double(r.eff_lo) << ',' << format_double(r.eff_hi) << ',';
        else
            out << ",,";
        out << (r.cap_reached ? 1 : 0) << ',' << (r.censored ? 1 : 0) << ',' << (r.flagged ? 1 : 0)
            << '\n';
    }
}

inline void run_variogram(const RunConfig& cfg, const fs::path& out) {
    if (cfg.input_details_dir.empty()) throw ConfigInvalid("variogram: input.details_dir required");
    const LoadedDetails ld = load_details(cfg.input_details_dir);
    const Lattice vlat = ld.lattice.fully_observed();
    std::vector<std::pair<std::string, FitReport>> rows;
    for (int l = 0; l + 1 < ld.stack.levels; ++l) {  // the mean level carries no spatial structure
        const std::string name = "z" + std::to_string(l + 1);
        const VariogramBins bins =
            variogram_for_config(ld.stack.mean_detail(l), vlat, cfg.variogram);
        {
            std::ofstream bout(out / ("variogram_" + name + ".csv"), std::ios::binary);
            bout << "lag,semivariance,pairs\n";
            for (std::size_t b = 0; b < bins.lag_centers.size(); ++b)
                bout << format_double(bins.lag_centers[b]) << ','
                     << format_double(bins.semivariances[b]) << ',' << bins.pair_counts[b] << '\n';
        }
        FitReport report;
        if (ld.stack.n_draws >= 20) {
            report = range_uncertainty(ld.stack, l, ld.lattice, cfg.variogram,
                                       cfg.resolved_threads());
        } else {
            report = fit_matern(bins, cfg.variogram.smoothness_cap);
            report.max_resolvable =
                vlat.spacing * std::hypot(vlat.n1 - 1, vlat.n2 - 1);
            report.censored = report.params.effective_range > report.max_resolvable;
        }
        write_json_file(fit_report_to_json(report), out / ("fit_" + name + ".json"));
        rows.emplace_back(name, report);
    }
    write_fit_table(rows, cfg.variogram.direction, out / "fits.csv");
}

inline void run_diversity(const RunConfig& cfg, const fs::path& out) {
    if (cfg.input_trait_csvs.empty()) throw ConfigInvalid("diversity: input.trait_csvs required");
    if (!(cfg.diversity_radius > 0.0)) throw ConfigInvalid("diversity: radius must be positive");
    std::vector<GridData> grids;
    for (const auto& path : cfg.input_trait_csvs) grids.push_back(read_grid_csv(path));
    for (const auto& g : grids)
        if (g.n1 != grids.front().n1 || g.n2 != grids.front().n2)
            throw DimensionMismatch("diversity: trait grids must share a shape");
    Lattice lat = lattice_from_grids(grids.front());
    // a pixel enters communities only when every trait is defined there
    for (const auto& g : grids)
        for (int i = 0; i < lat.grid_size(); ++i)
            if (std::isnan(g.values[i])) {
                lat.active[i] = 0;
                lat.observed[i] = 0;
            }
    TraitStack stack;
    stack.n_traits = static_cast<int>(grids.size());
    stack.lattice = &lat;
    for (const auto& g : grids) stack.traits.push_back(g.values);
    const IndexMap map = index_map(stack, cfg.diversity_radius, cfg.diversity_index,
                                   cfg.resolved_threads());
    GridData g = GridData::make(lat.n1, lat.n2, lat.spacing, GridData::na());
    g.values = map.values;
    const std::string name = diversity_index_name(cfg.diversity_index);
    write_grid_csv(g, (out / (name + "_map.csv")).string());
    write_heatmap(g, (out / (name + "_map.ppm")).string(), Palette::gray);
    json meta;
    meta["index"] = name;
    meta["radius"] = cfg.diversity_radius;
    meta["radius_grid_points"] = cfg.diversity_radius / lat.spacing;
    meta["degenerate_count"] = map.degenerate_count;
    meta["evaluated_count"] = map.evaluated_count;
    write_json_file(meta, out / "diversity_meta.json");
}

}  // namespace featscale
