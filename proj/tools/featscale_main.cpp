#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "featscale/illustration.hpp"
#include "featscale/pipeline.hpp"
#include "featscale/version.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitInput = 3;
constexpr int kExitStage = 4;
constexpr int kExitAcceptance = 5;

struct CliOptions {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
};

int dispatch(const std::string& subcommand, const CliOptions& opts) {
    using namespace featscale;
    RunConfig cfg;
    try {
        if (!opts.config_path.empty())
            cfg = load_config(opts.config_path);
        else if (subcommand != "reproduce-illustration")
            throw ConfigInvalid("--config is required for this subcommand");
        else
            cfg = default_illustration_config(opts.seed.value_or(0));
        if (opts.seed) {
            cfg.seed = *opts.seed;
            cfg.chain.seed = *opts.seed;
            cfg.variogram.subsample_seed = *opts.seed;
        }
        if (opts.threads) cfg.threads = *opts.threads;
        if (!opts.out_dir.empty()) cfg.output = opts.out_dir;
    } catch (const ConfigInvalid& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const InputMissing& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return kExitInput;
    }

    const fs::path out = cfg.output;
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) {
        std::cerr << "input error: cannot create output directory " << out << '\n';
        return kExitInput;
    }

    try {
        StageTimer timer(out);
        write_manifest(cfg, subcommand, out);
        if (subcommand == "simulate") {
            timer.stage("simulate", [&] { run_simulate(cfg, out); });
        } else if (subcommand == "resample") {
            timer.stage("resample", [&] { run_resample(cfg, out); });
        } else if (subcommand == "scales") {
            timer.stage("scales", [&] { run_scales(cfg, out); });
        } else if (subcommand == "decompose") {
            timer.stage("decompose", [&] { run_decompose(cfg, out); });
        } else if (subcommand == "credibility") {
            timer.stage("credibility", [&] { run_credibility(cfg, out); });
        } else if (subcommand == "variogram") {
            timer.stage("variogram", [&] { run_variogram(cfg, out); });
        } else if (subcommand == "diversity") {
            timer.stage("diversity", [&] { run_diversity(cfg, out); });
        } else if (subcommand == "reproduce-illustration") {
            const IllustrationResult result =
                timer.stage("reproduce-illustration", [&] { return run_illustration(cfg); });
            write_illustration_outputs(result, out);
            timer.flush();
            const auto checks = illustration_checks(result);
            int failures = 0;
            for (const auto& c : checks) {
                std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << " -- " << c.detail << '\n';
                failures += c.pass ? 0 : 1;
            }
            if (failures > 0) {
                std::cerr << failures << " reproduction check(s) failed\n";
                return kExitAcceptance;
            }
            return kExitOk;
        } else {
            std::cerr << "unknown subcommand: " << subcommand << '\n';
            return kExitConfig;
        }
        timer.flush();
        return kExitOk;
    } catch (const ConfigInvalid& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const InputMissing& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "stage failure in '" << subcommand << "': " << e.what() << '\n';
        return kExitStage;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"featscale: scale-dependent feature identification for gridded spatial data"};
    app.set_version_flag("--version", featscale::kVersion);
    app.require_subcommand(1);

    CliOptions opts;
    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opts.config_path, "JSON run configuration");
        sub->add_option("--out", opts.out_dir, "output directory (overrides config)");
        sub->add_option("--seed", opts.seed, "RNG seed (overrides config)");
        sub->add_option("--threads", opts.threads, "worker thread cap (overrides config)");
    };

    const char* subcommands[] = {"simulate",    "resample",  "scales",
                                 "decompose",   "credibility", "variogram",
                                 "diversity",   "reproduce-illustration"};
    const char* descriptions[] = {
        "draw synthetic Matern fields, compose them with noise, insert missing blocks",
        "Gibbs-resample a gridded dataset under the hierarchical model",
        "scale-derivative norm curves and smoothing-scale selection",
        "multiresolution detail decomposition at selected scales",
        "pointwise credibility maps from detail draws",
        "empirical variograms, Matern fits, effective ranges with uncertainty",
        "moving-window functional diversity index maps",
        "full synthetic benchmark: simulate, resample, scales, details, variograms"};
    for (std::size_t i = 0; i < std::size(subcommands); ++i)
        add_common(app.add_subcommand(subcommands[i], descriptions[i]));

    CLI11_PARSE(app, argc, argv);
    return dispatch(app.get_subcommands().front()->get_name(), opts);
}
