#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "featscale/diversity.hpp"
#include "featscale/rng.hpp"
#include "oracles.hpp"

using namespace featscale;

namespace {

using Points = std::vector<std::vector<double>>;

TraitStack make_stack(const Lattice& lat, const std::vector<std::vector<double>>& layers) {
    TraitStack stack;
    stack.n_traits = static_cast<int>(layers.size());
    stack.traits = layers;
    stack.lattice = &lat;
    return stack;
}

}  // namespace

TEST_CASE("community membership follows the inclusive disc") {
    Lattice lat = Lattice::full(5, 5, 1.0);
    const int center = lat.index(2, 2);
    REQUIRE(community(lat, center, 0.5).size() == 1);
    REQUIRE(community(lat, center, 1.0).size() == 5);
    REQUIRE(community(lat, center, std::sqrt(2.0) + 1e-9).size() == 9);
    // brute-force distance enumeration cross-check at a larger radius
    const double radius = 2.3;
    const Community com = community(lat, center, radius);
    int expected = 0;
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j)
            if (std::hypot(i - 2.0, j - 2.0) <= radius) ++expected;
    REQUIRE(com.size() == expected);

    // only active+observed pixels join
    lat.observed[lat.index(2, 3)] = 0;
    REQUIRE(community(lat, center, 1.0).size() == 4);
    REQUIRE_THROWS_AS(community(lat, lat.index(2, 3), 1.0), DimensionMismatch);
}

TEST_CASE("divergence: symmetric configurations score 1") {
    // equilateral triangle in 2-trait space
    const Points tri{{0.0, 0.0}, {1.0, 0.0}, {0.5, std::sqrt(3.0) / 2.0}};
    const IndexValue v = fdiv(tri);
    REQUIRE(!v.degenerate);
    REQUIRE(v.value == Catch::Approx(1.0).margin(1e-12));

    const Points pair{{0.0, 1.0}, {4.0, -3.0}};
    REQUIRE(fdiv(pair).value == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("divergence: hand-computed three-point case") {
    const Points pts{{0.0, 0.0}, {0.0, 0.0}, {0.0, 4.0}};
    const IndexValue v = fdiv(pts);
    REQUIRE(!v.degenerate);
    REQUIRE(v.value == Catch::Approx(0.75).margin(1e-12));
}

TEST_CASE("divergence: degenerate and scale-invariance") {
    REQUIRE(fdiv({{1.0, 1.0}, {1.0, 1.0}}).degenerate);
    REQUIRE(fdiv({{1.0, 1.0}}).degenerate);
    RngState rng(3);
    Points pts;
    for (int i = 0; i < 9; ++i) pts.push_back({rng.normal(), rng.normal(), rng.normal()});
    const double base = fdiv(pts).value;
    Points scaled = pts;
    for (auto& p : scaled)
        for (auto& c : p) c *= 37.5;
    REQUIRE(fdiv(scaled).value == Catch::Approx(base).margin(1e-12));
    REQUIRE(base > 0.0);
    REQUIRE(base <= 1.0);
}

TEST_CASE("evenness: equal branch lengths score 1") {
    const Points collinear{{0.0, 0.0}, {1.0, 0.0}, {2.0, 0.0}};
    REQUIRE(feve(collinear).value == Catch::Approx(1.0).margin(1e-12));

    RngState rng(5);
    // any configuration with all-equal MST branches is perfectly even
    const Points square{{0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}, {0.0, 1.0}};
    REQUIRE(feve(square).value == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("evenness: hand-computed branch ratio 1:3") {
    const Points pts{{0.0, 0.0}, {1.0, 0.0}, {4.0, 0.0}};
    const IndexValue v = feve(pts);
    REQUIRE(!v.degenerate);
    REQUIRE(v.value == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("evenness: degenerate cases and scale invariance") {
    REQUIRE(feve({{0.0}, {1.0}}).degenerate);
    REQUIRE(feve({{1.0, 2.0}, {1.0, 2.0}, {1.0, 2.0}}).degenerate);
    // duplicate points allowed as long as the tree has positive length
    const Points dup{{0.0, 0.0}, {0.0, 0.0}, {1.0, 0.0}, {2.0, 0.0}};
    const IndexValue v = feve(dup);
    REQUIRE(!v.degenerate);
    REQUIRE(v.value >= 0.0);
    REQUIRE(v.value <= 1.0);

    RngState rng(8);
    Points pts;
    for (int i = 0; i < 7; ++i) pts.push_back({rng.normal(), rng.normal()});
    const double base = feve(pts).value;
    Points scaled = pts;
    for (auto& p : scaled)
        for (auto& c : p) c *= 0.004;
    REQUIRE(feve(scaled).value == Catch::Approx(base).margin(1e-12));
}

TEST_CASE("MST length matches brute-force Prim on small communities") {
    RngState rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        Points pts;
        const int c = 4 + static_cast<int>(rng.uniform() * 9.0);
        for (int i = 0; i < c; ++i) pts.push_back({rng.normal(), rng.normal(), rng.normal()});
        const std::vector<double> branches = mst_branch_lengths(pts);
        double total = 0.0;
        for (double b : branches) total += b;
        REQUIRE(total == Catch::Approx(oracle::brute_mst_length(pts)).epsilon(1e-12));
    }
}

TEST_CASE("richness: unit tetrahedron volume is exactly one sixth") {
    const Points tetra{{0.0, 0.0, 0.0}, {1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}};
    const IndexValue v = frich(tetra);
    REQUIRE(!v.degenerate);
    REQUIRE(v.value == 1.0 / 6.0);
}

TEST_CASE("richness: coplanar sets are degenerate with volume zero") {
    const Points plane{{0.0, 0.0, 0.0}, {1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {1.0, 1.0, 0.0},
                       {0.3, 0.4, 0.0}};
    const IndexValue v = frich(plane);
    REQUIRE(v.degenerate);
    REQUIRE(v.value == 0.0);
    REQUIRE(frich({{0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}}).degenerate);
}

TEST_CASE("richness: unit cube and hull invariance to interior points") {
    Points cube;
    for (int i = 0; i < 8; ++i)
        cube.push_back({static_cast<double>(i & 1), static_cast<double>((i >> 1) & 1),
                        static_cast<double>((i >> 2) & 1)});
    REQUIRE(frich(cube).value == Catch::Approx(1.0).margin(1e-12));

    RngState rng(13);
    Points with_interior = cube;
    for (int k = 0; k < 30; ++k)
        with_interior.push_back({0.1 + 0.8 * rng.uniform(), 0.1 + 0.8 * rng.uniform(),
                                 0.1 + 0.8 * rng.uniform()});
    REQUIRE(frich(with_interior).value == Catch::Approx(1.0).margin(1e-12));
    REQUIRE_THROWS_AS(frich({{1.0, 2.0}}), DimensionMismatch);
}

TEST_CASE("richness: random hulls contain their point subsets monotonically") {
    RngState rng(17);
    for (int trial = 0; trial < 5; ++trial) {
        Points pts;
        for (int i = 0; i < 16; ++i) pts.push_back({rng.normal(), rng.normal(), rng.normal()});
        const double full = frich(pts).value;
        Points subset(pts.begin(), pts.begin() + 8);
        REQUIRE(frich(subset).value <= full + 1e-12);
    }
}

TEST_CASE("index maps: constants, whole-grid windows, per-pixel oracle") {
    Lattice lat = Lattice::full(4, 4, 1.0);
    const std::vector<double> ones(16, 1.0);
    TraitStack const_stack = make_stack(lat, {ones, ones, ones});

    const IndexMap frich_map = index_map(const_stack, 1.5, DiversityIndex::frich, 2);
    for (double v : frich_map.values) REQUIRE(v == 0.0);
    const IndexMap fdiv_map = index_map(const_stack, 1.5, DiversityIndex::fdiv, 2);
    for (double v : fdiv_map.values) REQUIRE(std::isnan(v));
    REQUIRE(fdiv_map.degenerate_count == 16);

    // a window spanning the whole grid gives one shared value
    RngState rng(19);
    std::vector<std::vector<double>> layers(3, std::vector<double>(16));
    for (auto& layer : layers)
        for (auto& v : layer) v = rng.normal();
    TraitStack stack = make_stack(lat, layers);
    const IndexMap whole = index_map(stack, 100.0, DiversityIndex::feve, 2);
    for (double v : whole.values) REQUIRE(v == Catch::Approx(whole.values[0]).margin(1e-12));

    // map values equal a direct per-pixel recomputation
    const double radius = 1.8;
    const IndexMap map = index_map(stack, radius, DiversityIndex::fdiv, 2);
    for (int g = 0; g < 16; ++g) {
        const Community com = community(lat, g, radius);
        std::vector<std::vector<double>> pts;
        for (int m : com.members) pts.push_back(stack.point(m));
        REQUIRE(map.values[g] == Catch::Approx(fdiv(pts).value).margin(1e-14));
    }
}

TEST_CASE("richness maps grow with the window radius at every pixel") {
    Lattice lat = Lattice::full(10, 10, 1.0);
    RngState rng(23);
    std::vector<std::vector<double>> layers(3, std::vector<double>(100));
    for (auto& layer : layers)
        for (auto& v : layer) v = rng.normal();
    TraitStack stack = make_stack(lat, layers);
    IndexMap prev = index_map(stack, 1.0, DiversityIndex::frich, 2);
    for (double radius : {1.5, 2.2, 3.0, 4.5}) {
        const IndexMap next = index_map(stack, radius, DiversityIndex::frich, 2);
        for (int g = 0; g < 100; ++g) REQUIRE(next.values[g] >= prev.values[g] - 1e-12);
        prev = next;
    }
}
