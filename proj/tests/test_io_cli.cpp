#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "featscale/config.hpp"
#include "featscale/grids.hpp"
#include "featscale/illustration.hpp"
#include "featscale/pipeline.hpp"

using namespace featscale;
namespace stdfs = std::filesystem;

namespace {

stdfs::path temp_dir(const std::string& tag) {
    const stdfs::path dir = stdfs::temp_directory_path() / ("featscale_test_" + tag);
    stdfs::remove_all(dir);
    stdfs::create_directories(dir);
    return dir;
}

std::string slurp(const stdfs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("grid CSV round trip preserves values, NA cells, and bytes") {
    const auto dir = temp_dir("grid");
    GridData g = GridData::make(3, 4, 0.25);
    for (int i = 0; i < 12; ++i) g.values[i] = i * 0.3 - 1.0;
    g.at(1, 2) = GridData::na();
    const std::string path = (dir / "g.csv").string();
    write_grid_csv(g, path);

    const GridData r = read_grid_csv(path);
    REQUIRE(r.n1 == 3);
    REQUIRE(r.n2 == 4);
    REQUIRE(r.spacing == 0.25);
    for (int i = 0; i < 12; ++i) {
        if (i == 6)
            REQUIRE(std::isnan(r.values[i]));
        else
            REQUIRE(r.values[i] == g.values[i]);
    }
    write_grid_csv(r, (dir / "g2.csv").string());
    REQUIRE(slurp(dir / "g.csv") == slurp(dir / "g2.csv"));

    REQUIRE_THROWS_AS(read_grid_csv((dir / "absent.csv").string()), InputMissing);
}

TEST_CASE("lattices are derived from data plus optional activity masks") {
    GridData data = GridData::make(2, 3, 1.0, 1.0);
    data.at(0, 1) = GridData::na();
    GridData mask = GridData::make(2, 3, 1.0, 1.0);
    mask.at(1, 2) = 0.0;
    const Lattice lat = lattice_from_grids(data, &mask);
    REQUIRE(lat.n_active() == 5);
    REQUIRE(lat.n_observed() == 4);  // NA cell remains active but unobserved
    REQUIRE(lat.active[lat.index(1, 2)] == 0);
    REQUIRE(lat.observed[lat.index(0, 1)] == 0);

    const std::vector<double> field = grid_to_field(data, lat);
    REQUIRE(field.size() == 5);
    const GridData back = field_to_grid(field, lat);
    REQUIRE(std::isnan(back.at(1, 2)));
    REQUIRE(back.at(0, 0) == 1.0);
}

TEST_CASE("heatmaps map extremes, flats, and no-data deterministically") {
    const auto dir = temp_dir("ppm");
    GridData checker = GridData::make(2, 2, 1.0);
    checker.values = {0.0, 1.0, 1.0, 0.0};
    write_heatmap(checker, (dir / "c.ppm").string(), Palette::gray);
    const std::string c = slurp(dir / "c.ppm");
    REQUIRE(c.substr(0, 2) == "P6");
    // header then 4 RGB triples: gray levels 0,255,255,0
    const std::string pix = c.substr(c.size() - 12);
    REQUIRE(static_cast<unsigned char>(pix[0]) == 0);
    REQUIRE(static_cast<unsigned char>(pix[3]) == 255);
    REQUIRE(static_cast<unsigned char>(pix[6]) == 255);
    REQUIRE(static_cast<unsigned char>(pix[9]) == 0);

    GridData flat = GridData::make(2, 2, 1.0, 7.0);
    write_heatmap(flat, (dir / "f.ppm").string(), Palette::gray);
    const std::string f = slurp(dir / "f.ppm");
    for (int k = 0; k < 12; ++k)
        REQUIRE(static_cast<unsigned char>(f[f.size() - 12 + k]) == 128);

    GridData holey = GridData::make(2, 2, 1.0);
    holey.values = {0.0, 1.0, GridData::na(), 0.5};
    write_heatmap(holey, (dir / "h.ppm").string(), Palette::diverging);
    const std::string h = slurp(dir / "h.ppm");
    int magenta = 0;
    for (std::size_t p = h.size() - 12; p + 2 < h.size(); p += 3)
        magenta += (static_cast<unsigned char>(h[p]) == 255 &&
                    static_cast<unsigned char>(h[p + 1]) == 0 &&
                    static_cast<unsigned char>(h[p + 2]) == 255);
    REQUIRE(magenta == 1);

    write_heatmap(checker, (dir / "c2.ppm").string(), Palette::gray);
    REQUIRE(slurp(dir / "c.ppm") == slurp(dir / "c2.ppm"));
}

TEST_CASE("config parsing rejects unknown keys and round trips") {
    json root;
    root["seed"] = 7;
    root["lattice"] = {{"n1", 10}, {"n2", 12}, {"spacing", 0.5}};
    root["typo_section"] = 1;
    REQUIRE_THROWS_AS(parse_config(root), ConfigInvalid);
    root.erase("typo_section");
    root["chain"] = {{"burn_in", 5}, {"n_samples", 10}, {"bogus", 1}};
    REQUIRE_THROWS_AS(parse_config(root), ConfigInvalid);
    root["chain"].erase("bogus");

    RunConfig cfg = parse_config(root);
    REQUIRE(cfg.seed == 7);
    REQUIRE(cfg.n1 == 10);
    REQUIRE(cfg.chain.burn_in == 5);
    REQUIRE(cfg.chain.seed == 7);

    // round trip through the resolved-config serialization
    const RunConfig cfg2 = parse_config(config_to_json(cfg));
    REQUIRE(cfg2.n1 == cfg.n1);
    REQUIRE(cfg2.chain.n_samples == cfg.chain.n_samples);
    REQUIRE(cfg2.variogram.n_bins == cfg.variogram.n_bins);
    REQUIRE(cfg2.norm == cfg.norm);
}

TEST_CASE("lambda JSON encoding writes infinity as the string inf") {
    ScaleSet set;
    set.lambdas = {0.0, 30.0, kLambdaInf};
    const json j = scale_set_to_json(set);
    REQUIRE(j.at("lambdas")[2].get<std::string>() == "inf");
    const ScaleSet back = scale_set_from_json(j);
    REQUIRE(back.lambdas.size() == 3);
    REQUIRE(back.lambdas[1] == 30.0);
    REQUIRE(std::isinf(back.lambdas[2]));
}

TEST_CASE("chain save and load round trip") {
    const auto dir = temp_dir("chain");
    Lattice lat = Lattice::full(4, 4, 1.0);
    lat.observed[5] = 0;
    const SparseMatrix q = build_lattice_q(lat, {1.0, 1.0});
    const SelectionOperator h = selection_operator(lat);
    std::vector<double> y;
    RngState rng(2);
    for (int r = 0; r < h.m(); ++r) y.push_back(rng.normal());
    RunConfig cfg;
    cfg.chain.burn_in = 10;
    cfg.chain.n_samples = 12;
    cfg.chain.seed = 3;
    const PosteriorChain chain = gibbs_missing(y, q, h, cfg.hyper, cfg.chain);
    save_chain(chain, lat, cfg, dir);

    const LoadedChain lc = load_chain(dir);
    REQUIRE(lc.chain.n == chain.n);
    REQUIRE(lc.chain.x_draws == chain.x_draws);
    REQUIRE(lc.chain.kappa_x_draws.size() == chain.kappa_x_draws.size());
    for (int s = 0; s < chain.n_samples(); ++s) {
        REQUIRE(lc.chain.kappa_x_draws[s] == chain.kappa_x_draws[s]);
        REQUIRE(lc.chain.kappa_y_draws[s] == chain.kappa_y_draws[s]);
    }
    REQUIRE(lc.lattice.observed[5] == 0);
    REQUIRE(lc.lattice.n_active() == 16);
}

TEST_CASE("pipeline subcommands chain together on a small grid") {
    const auto base = temp_dir("pipe");
    RunConfig cfg;
    cfg.seed = 31;
    cfg.threads = 2;
    cfg.n1 = 20;
    cfg.n2 = 20;
    cfg.spacing = 1.0 / 19.0;
    cfg.simulate.fields = {{2.0 * cfg.spacing, 1.0, 0.0, 1.0, 1.0, 1.0, Region::whole}};
    cfg.simulate.noise_sd = 0.1;
    cfg.simulate.missing_block = MissingBlockSpec{8, 8, 3, 3};
    cfg.chain.burn_in = 60;
    cfg.chain.n_samples = 24;
    cfg.chain.seed = cfg.seed;
    cfg.scale_grid = ScaleGrid::make(-1.0, 3.0, 6);
    cfg.variogram.n_bins = 14;
    cfg.variogram.max_lag = 8.0 * cfg.spacing;

    const auto sim_dir = base / "sim";
    stdfs::create_directories(sim_dir);
    run_simulate(cfg, sim_dir);
    REQUIRE(stdfs::exists(sim_dir / "y.csv"));
    REQUIRE(stdfs::exists(sim_dir / "truth_field_1.csv"));
    {
        const GridData y = read_grid_csv((sim_dir / "y.csv").string());
        int na = 0;
        for (double v : y.values) na += std::isnan(v);
        REQUIRE(na == 9);
    }

    RunConfig rcfg = cfg;
    rcfg.input_grid_csv = (sim_dir / "y.csv").string();
    const auto chain_dir = base / "chain";
    stdfs::create_directories(chain_dir);
    run_resample(rcfg, chain_dir);
    REQUIRE(stdfs::exists(chain_dir / "chain_x.f64"));
    REQUIRE(stdfs::exists(chain_dir / "posterior_mean.csv"));
    REQUIRE(stdfs::exists(chain_dir / "interval_width90.csv"));

    RunConfig scfg = cfg;
    scfg.input_chain_dir = chain_dir.string();
    const auto scales_dir = base / "scales";
    stdfs::create_directories(scales_dir);
    run_scales(scfg, scales_dir);
    REQUIRE(stdfs::exists(scales_dir / "scales.json"));
    REQUIRE(stdfs::exists(scales_dir / "norm_curve.csv"));

    RunConfig dcfg = cfg;
    dcfg.input_chain_dir = chain_dir.string();
    dcfg.input_scales_json = (scales_dir / "scales.json").string();
    const auto details_dir = base / "details";
    stdfs::create_directories(details_dir);
    run_decompose(dcfg, details_dir);
    REQUIRE(stdfs::exists(details_dir / "detail_mean_1.csv"));
    REQUIRE(stdfs::exists(details_dir / "detail_draws.f64"));

    RunConfig ccfg = cfg;
    ccfg.input_details_dir = details_dir.string();
    const auto cred_dir = base / "cred";
    stdfs::create_directories(cred_dir);
    run_credibility(ccfg, cred_dir);
    REQUIRE(stdfs::exists(cred_dir / "credibility_1.csv"));
    {
        const json meta = read_json_file(cred_dir / "credibility_meta.json");
        const auto& counts = meta.at("counts").at(0);
        REQUIRE(counts.at("positive").get<int>() + counts.at("negative").get<int>() +
                    counts.at("not_credible").get<int>() ==
                400);
    }

    RunConfig vcfg = cfg;
    vcfg.input_details_dir = details_dir.string();
    const auto vario_dir = base / "vario";
    stdfs::create_directories(vario_dir);
    run_variogram(vcfg, vario_dir);
    REQUIRE(stdfs::exists(vario_dir / "fits.csv"));
    REQUIRE(stdfs::exists(vario_dir / "variogram_z1.csv"));

    // reruns are byte-identical
    const auto sim2 = base / "sim2";
    stdfs::create_directories(sim2);
    run_simulate(cfg, sim2);
    REQUIRE(slurp(sim_dir / "y.csv") == slurp(sim2 / "y.csv"));
    const auto chain2 = base / "chain2";
    stdfs::create_directories(chain2);
    run_resample(rcfg, chain2);
    REQUIRE(slurp(chain_dir / "posterior_mean.csv") == slurp(chain2 / "posterior_mean.csv"));
    REQUIRE(slurp(chain_dir / "chain_kappas.csv") == slurp(chain2 / "chain_kappas.csv"));
}

TEST_CASE("scales subcommand on a constant grid selects only the trivial scales") {
    const auto dir = temp_dir("scales_const");
    GridData g = GridData::make(6, 6, 1.0, 4.2);
    write_grid_csv(g, (dir / "c.csv").string());
    RunConfig cfg;
    cfg.input_grid_csv = (dir / "c.csv").string();
    cfg.scale_grid = ScaleGrid::make(-1.0, 2.0, 4);
    const auto out = dir / "out";
    stdfs::create_directories(out);
    run_scales(cfg, out);
    const json sj = read_json_file(out / "scales.json");
    REQUIRE(sj.at("lambdas").size() == 2);
    REQUIRE(sj.at("lambdas")[0].get<std::string>() == "0");
    REQUIRE(sj.at("lambdas")[1].get<std::string>() == "inf");
    // the norm curve is identically zero
    std::ifstream curve(out / "norm_curve.csv");
    std::string line;
    std::getline(curve, line);
    while (std::getline(curve, line)) {
        const auto c1 = line.find(','), c2 = line.rfind(',');
        REQUIRE(std::stod(line.substr(c1 + 1, c2 - c1 - 1)) < 1e-12);
        REQUIRE(std::stod(line.substr(c2 + 1)) < 1e-12);
    }
}

TEST_CASE("pipeline rejects missing inputs and bad configs") {
    const auto dir = temp_dir("err");
    RunConfig cfg;
    REQUIRE_THROWS_AS(run_resample(cfg, dir), ConfigInvalid);
    REQUIRE_THROWS_AS(run_decompose(cfg, dir), ConfigInvalid);
    REQUIRE_THROWS_AS(run_variogram(cfg, dir), ConfigInvalid);
    REQUIRE_THROWS_AS(run_diversity(cfg, dir), ConfigInvalid);
    cfg.input_grid_csv = (dir / "nope.csv").string();
    REQUIRE_THROWS_AS(run_resample(cfg, dir), InputMissing);
}

TEST_CASE("diversity subcommand writes maps and metadata") {
    const auto dir = temp_dir("div");
    RngState rng(5);
    for (int t = 0; t < 3; ++t) {
        GridData g = GridData::make(8, 8, 6.0);
        for (auto& v : g.values) v = rng.normal();
        if (t == 0) g.at(0, 0) = GridData::na();  // undefined trait pixel drops out
        write_grid_csv(g, (dir / ("trait" + std::to_string(t) + ".csv")).string());
    }
    RunConfig cfg;
    cfg.input_trait_csvs = {(dir / "trait0.csv").string(), (dir / "trait1.csv").string(),
                            (dir / "trait2.csv").string()};
    cfg.diversity_radius = 13.0;
    cfg.diversity_index = DiversityIndex::frich;
    cfg.threads = 2;
    const auto out = dir / "out";
    stdfs::create_directories(out);
    run_diversity(cfg, out);
    REQUIRE(stdfs::exists(out / "frich_map.csv"));
    REQUIRE(stdfs::exists(out / "frich_map.ppm"));
    const GridData map = read_grid_csv((out / "frich_map.csv").string());
    REQUIRE(std::isnan(map.at(0, 0)));
    REQUIRE(map.at(4, 4) > 0.0);
    const json meta = read_json_file(out / "diversity_meta.json");
    REQUIRE(meta.at("radius_grid_points").get<double>() == Catch::Approx(13.0 / 6.0));
}

TEST_CASE("manifests carry the resolved config, version, and seed") {
    const auto dir = temp_dir("manifest");
    RunConfig cfg;
    cfg.seed = 77;
    write_manifest(cfg, "scales", dir);
    const json m = read_json_file(dir / "run_manifest.json");
    REQUIRE(m.at("version").get<std::string>() == std::string(kVersion));
    REQUIRE(m.at("seed").get<std::uint64_t>() == 77);
    REQUIRE(m.at("subcommand").get<std::string>() == "scales");
    REQUIRE(m.at("config").contains("variogram"));
}
