#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "pdmp/kernel.hpp"
#include "pdmp/metric.hpp"
#include "pdmp/rng.hpp"

using namespace pdmp;

namespace {

EmpiricalMeasure random_measure(Rng& rng, int atoms) {
    std::vector<StatePoint> pts;
    std::vector<double> w;
    double total = 0.0;
    for (int k = 0; k < atoms; ++k) {
        pts.push_back(state1d(rng.uniform(-2, 2), rng.u01() < 0.5 ? 1 : 2));
        w.push_back(0.05 + rng.u01());
        total += w.back();
    }
    for (double& x : w) x /= total;
    return EmpiricalMeasure::from_points(std::move(pts), std::move(w));
}

}  // namespace

TEST_CASE("identical measures are at distance zero") {
    HybridMetric m{1.0};
    Rng rng(71, 0, 0);
    for (int k = 0; k < 20; ++k) {
        const EmpiricalMeasure mu = random_measure(rng, 5);
        const FmResult r = fm_distance(mu, mu, m);
        CHECK(r.value == 0.0);
        CHECK(r.gap <= 1e-12);
    }
}

TEST_CASE("two-Dirac distances equal min(rho_c, 2) exactly") {
    HybridMetric m{1.0};
    CHECK(fm_distance(EmpiricalMeasure::dirac(state1d(0, 1)), EmpiricalMeasure::dirac(state1d(1, 1)), m).value ==
          Catch::Approx(1.0).margin(1e-9));
    CHECK(fm_distance(EmpiricalMeasure::dirac(state1d(0, 1)), EmpiricalMeasure::dirac(state1d(5, 1)), m).value ==
          Catch::Approx(2.0).margin(1e-9));

    Rng rng(72, 0, 0);
    for (int k = 0; k < 200; ++k) {
        HybridMetric mc{rng.uniform(0.2, 3.0)};
        const StatePoint a = state1d(rng.uniform(-3, 3), rng.u01() < 0.5 ? 1 : 2);
        const StatePoint b = state1d(rng.uniform(-3, 3), rng.u01() < 0.5 ? 1 : 2);
        if (a == b) continue;
        const double expect = std::min(rho_c(mc, a, b), 2.0);
        CHECK(fm_distance(EmpiricalMeasure::dirac(a), EmpiricalMeasure::dirac(b), mc).value ==
              Catch::Approx(expect).margin(1e-9));
    }
}

TEST_CASE("three-point hand instance") {
    HybridMetric m{1.0};
    const EmpiricalMeasure mu =
        EmpiricalMeasure::from_points({state1d(0, 1), state1d(2, 1)}, {0.5, 0.5});
    const EmpiricalMeasure nu = EmpiricalMeasure::dirac(state1d(1, 1));
    CHECK(fm_distance(mu, nu, m).value == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("LP matches the grid-search oracle on random small instances") {
    Rng rng(73, 0, 0);
    for (int k = 0; k < 200; ++k) {
        HybridMetric m{rng.uniform(0.5, 3.0)};
        const EmpiricalMeasure mu = random_measure(rng, 2);
        const EmpiricalMeasure nu = random_measure(rng, 2);
        const double lp = fm_distance(mu, nu, m).value;
        const double brute = fm_bruteforce(mu, nu, m, 33);
        CHECK(std::abs(lp - brute) <= 2e-3);
    }
}

TEST_CASE("grid-search oracle reproduces the two-Dirac values at fine resolution") {
    HybridMetric m{1.0};
    const EmpiricalMeasure a = EmpiricalMeasure::dirac(state1d(0, 1));
    const EmpiricalMeasure b = EmpiricalMeasure::dirac(state1d(1, 1));
    const EmpiricalMeasure c = EmpiricalMeasure::dirac(state1d(5, 1));
    CHECK(fm_bruteforce(a, b, m, 2001) == Catch::Approx(1.0).margin(1e-3));
    CHECK(fm_bruteforce(a, c, m, 2001) == Catch::Approx(2.0).margin(1e-3));
    CHECK(fm_bruteforce(a, a, m, 2001) == 0.0);
}

TEST_CASE("flat distance is a bounded metric on empirical measures") {
    HybridMetric m{1.5};
    Rng rng(74, 0, 0);
    for (int k = 0; k < 40; ++k) {
        const EmpiricalMeasure a = random_measure(rng, 4);
        const EmpiricalMeasure b = random_measure(rng, 3);
        const EmpiricalMeasure c = random_measure(rng, 4);
        const double ab = fm_distance(a, b, m).value;
        const double ba = fm_distance(b, a, m).value;
        const double ac = fm_distance(a, c, m).value;
        const double cb = fm_distance(c, b, m).value;
        CHECK(std::abs(ab - ba) <= 1e-12);
        CHECK(ab <= 2.0);
        CHECK(ab <= ac + cb + 1e-9);
    }
}

TEST_CASE("doubling all distances cannot shrink the optimum") {
    Rng rng(75, 0, 0);
    for (int k = 0; k < 40; ++k) {
        HybridMetric m{rng.uniform(0.5, 2.0)};
        HybridMetric doubled{2.0 * m.c};
        EmpiricalMeasure a = random_measure(rng, 3);
        EmpiricalMeasure b = random_measure(rng, 3);
        EmpiricalMeasure a2 = a, b2 = b;
        for (auto& p : a2.support) p.y[0] *= 2.0;
        for (auto& p : b2.support) p.y[0] *= 2.0;
        const double base = fm_distance(a, b, m).value;
        const double scaled = fm_distance(a2, b2, doubled).value;
        CHECK(scaled >= base - 1e-9);
    }
}

TEST_CASE("unnormalized inputs are rejected") {
    HybridMetric m{1.0};
    EmpiricalMeasure bad;
    bad.support = {state1d(0, 1)};
    bad.weights = {0.7};
    CHECK_THROWS_AS(fm_distance(bad, EmpiricalMeasure::dirac(state1d(1, 1)), m), ModelError);
}

TEST_CASE("duplicate support points merge") {
    const EmpiricalMeasure m =
        EmpiricalMeasure::from_points({state1d(1, 1), state1d(1, 1), state1d(2, 1)}, {0.25, 0.25, 0.5});
    REQUIRE(m.support.size() == 2);
    CHECK(m.weights[0] == 0.5);
}

TEST_CASE("empirical measures from chain ensembles") {
    const ModelSpec model = lm1d();
    const ChainPath single = run_chain(model, state1d(1, 1), 5, SeedSpec{11, 0});
    const EmpiricalMeasure dirac = empirical_from_chains({single}, 3);
    CHECK(dirac.support.size() == 1);
    CHECK(dirac.weights[0] == 1.0);

    // two identical paths collapse to one support point
    const ChainPath twin = run_chain(model, state1d(1, 1), 5, SeedSpec{11, 0});
    const EmpiricalMeasure merged = empirical_from_chains({single, twin}, 3);
    CHECK(merged.support.size() == 1);
    CHECK(merged.weights[0] == 1.0);

    CHECK_THROWS_AS(empirical_from_chains({single}, 9), ModelError);
}

TEST_CASE("oversized supports are deterministically subsampled") {
    Rng rng(76, 0, 0);
    std::vector<StatePoint> pts_a, pts_b;
    for (int k = 0; k < 700; ++k) {
        pts_a.push_back(state1d(rng.u01(), 1));
        pts_b.push_back(state1d(rng.u01(), 1));
    }
    const EmpiricalMeasure a =
        EmpiricalMeasure::from_points(pts_a, std::vector<double>(700, 1.0 / 700));
    const EmpiricalMeasure b =
        EmpiricalMeasure::from_points(pts_b, std::vector<double>(700, 1.0 / 700));
    HybridMetric m{1.0};
    const FmResult r1 = fm_distance(a, b, m);
    const FmResult r2 = fm_distance(a, b, m);
    CHECK(r1.subsampled);
    CHECK(r1.subsample_seed == r2.subsample_seed);
    CHECK(r1.value == r2.value);  // same inputs, same derived seed, same value
    CHECK(r1.value >= 0.0);
    CHECK(r1.value < 0.5);  // same law, noise only
}

TEST_CASE("consecutive-step laws of a long chain sit at the sampling noise floor") {
    const ModelSpec model = lm1d();
    const HybridMetric metric{2.0 * std::exp(1.0) + 4.0};  // chain-scale regime weight
    const int n_paths = 10000;
    auto ensemble = [&](std::uint64_t seed) {
        std::vector<ChainPath> paths;
        paths.reserve(n_paths);
        for (int k = 0; k < n_paths; ++k)
            paths.push_back(run_chain(model, state1d(1, 1), 31, SeedSpec{seed, static_cast<std::uint64_t>(k)}));
        return paths;
    };
    const auto paths_a = ensemble(501);
    const auto paths_b = ensemble(502);
    const auto paths_c = ensemble(503);
    const double consecutive =
        fm_distance(empirical_from_chains(paths_a, 30), empirical_from_chains(paths_a, 31), metric).value;
    const double floor =
        fm_distance(empirical_from_chains(paths_b, 30), empirical_from_chains(paths_c, 30), metric).value;
    CHECK(consecutive <= 2.0 * floor);
    CHECK(consecutive <= 0.2);
}
