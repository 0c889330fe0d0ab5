#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "pdmp/kernel.hpp"
#include "pdmp/stats.hpp"
#include "support/oracles.hpp"

using namespace pdmp;

TEST_CASE("wait times from the origin follow the 1 - e^{-2t} law") {
    const ModelSpec m = lm1d();
    const StatePoint x0 = state1d(0, 1);
    std::vector<double> waits;
    waits.reserve(100000);
    SeedSpec seed{101, 0};
    for (int k = 0; k < 100000; ++k) {
        Rng rng = seed.at_step(k);
        waits.push_back(sample_wait(m, x0, rng));
    }
    CHECK(*std::min_element(waits.begin(), waits.end()) >= 0.0);
    std::vector<double> sorted = waits;
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    CHECK(sorted[sorted.size() / 2] == Catch::Approx(std::log(2.0) / 2.0).margin(0.01));
}

TEST_CASE("constant-rate model gives exponential waits (KS at 1%)") {
    const ModelSpec m = const1d(1.7);
    const StatePoint x0 = state1d(2.0, 1);
    std::vector<double> waits;
    SeedSpec seed{202, 0};
    for (int k = 0; k < 50000; ++k) {
        Rng rng = seed.at_step(k);
        waits.push_back(sample_wait(m, x0, rng));
    }
    const auto ks = stats::ks_one_sample(waits, [](double t) { return 1.0 - std::exp(-1.7 * t); });
    CHECK(ks.p_value > 0.01);
}

TEST_CASE("inversion sampler agrees with a thinning oracle") {
    const ModelSpec m = lm1d();
    const StatePoint x0 = state1d(1.5, 2);
    std::vector<double> inv, thin;
    SeedSpec seed{303, 0};
    for (int k = 0; k < 50000; ++k) {
        Rng rng = seed.at_step(k);
        inv.push_back(sample_wait(m, x0, rng));
        Rng rng2 = seed.with_chain(1).at_step(k);
        thin.push_back(oracles::thinning_wait(m, x0, rng2));
    }
    const auto ks = stats::ks_two_sample(inv, thin);
    CHECK(ks.p_value > 0.01);
}

TEST_CASE("marks follow the place-dependent density") {
    SeedSpec seed{404, 0};

    // uniform density: mean 1/2
    const ModelSpec uni = lm1d();
    std::vector<double> us;
    for (int k = 0; k < 100000; ++k) {
        Rng rng = seed.at_step(k);
        us.push_back(sample_theta(uni, Vec{1.0}, rng));
    }
    CHECK(stats::mean_se(us).mean == Catch::Approx(0.5).margin(0.005));

    // triangular density 2*theta: mean 2/3
    ModelSpec tri = lm1d();
    tri.density = [](double th, const Vec&) { return 2.0 * th; };
    tri.density_max = 2.0;
    std::vector<double> ts;
    for (int k = 0; k < 100000; ++k) {
        Rng rng = seed.with_chain(1).at_step(k);
        ts.push_back(sample_theta(tri, Vec{1.0}, rng));
    }
    CHECK(stats::mean_se(ts).mean == Catch::Approx(2.0 / 3.0).margin(0.005));
}

TEST_CASE("an undersized envelope raises an envelope violation") {
    ModelSpec m = lm1d();
    m.density_max = 0.5;  // true density is 1
    Rng rng(1, 0, 0);
    CHECK_THROWS_AS(sample_theta(m, Vec{1.0}, rng), NumericError);
}

TEST_CASE("regime draws follow the switching row") {
    SeedSpec seed{505, 0};
    const ModelSpec m = lm1d();
    long ones = 0;
    const int n = 100000;
    for (int k = 0; k < n; ++k) {
        Rng rng = seed.at_step(k);
        if (sample_regime(m, 1, Vec{0.2}, rng) == 1) ++ones;
    }
    CHECK(std::abs(static_cast<double>(ones) / n - 0.5) < 0.005);

    ModelSpec det = lm1d();
    det.switching = [](int, const Vec&) { return std::vector<double>{1.0, 0.0}; };
    for (int k = 0; k < 200; ++k) {
        Rng rng = seed.with_chain(1).at_step(k);
        CHECK(sample_regime(det, 2, Vec{0.2}, rng) == 1);
    }

    ModelSpec skew = lm1d();
    skew.switching = [](int, const Vec&) { return std::vector<double>{0.3, 0.7}; };
    long first = 0;
    for (int k = 0; k < n; ++k) {
        Rng rng = seed.with_chain(2).at_step(k);
        if (sample_regime(skew, 1, Vec{0.2}, rng) == 1) ++first;
    }
    CHECK(std::abs(static_cast<double>(first) / n - 0.3) < 0.005);

    ModelSpec broken = lm1d();
    broken.switching = [](int, const Vec&) { return std::vector<double>{0.6, 0.6}; };
    Rng rng(9, 0, 0);
    CHECK_THROWS_AS(sample_regime(broken, 1, Vec{0.2}, rng), ModelError);
}

TEST_CASE("kernel step composes the pieces") {
    const ModelSpec m = lm1d();
    SeedSpec seed{606, 0};

    // from (0,1): the flow stays at 0, so every post-jump point is 0
    for (int k = 0; k < 200; ++k) {
        Rng rng = seed.at_step(k);
        const JumpEvent ev = step(m, state1d(0, 1), rng);
        CHECK(ev.pre_jump_y[0] == 0.0);
        CHECK(ev.post_jump.y[0] == 0.0);
        CHECK((ev.next_regime == 1 || ev.next_regime == 2));
    }

    // degenerate jump map: constant target
    ModelSpec degen = const1d(1.0);
    degen.jump = [](double, const Vec&) { return Vec{0.75}; };
    for (int k = 0; k < 100; ++k) {
        Rng rng = seed.with_chain(1).at_step(k);
        CHECK(step(degen, state1d(3.0, 1), rng).post_jump.y[0] == 0.75);
    }
}

TEST_CASE("one-step drift bound E V(next) <= a V + b + 3 SE") {
    const ModelSpec m = lm1d();
    const double a = 0.5, b = 0.5;
    SeedSpec seed{707, 0};
    int chain = 0;
    for (double y : {0.0, 0.5, 1.0, 2.0, 4.0}) {
        for (int i : {1, 2}) {
            std::vector<double> vnext;
            for (int k = 0; k < 20000; ++k) {
                Rng rng = seed.with_chain(chain).at_step(k);
                vnext.push_back(step(m, state1d(y, i), rng).post_jump.y[0]);
            }
            const auto ms = stats::mean_se(vnext);
            CHECK(ms.mean <= a * y + b + 3.0 * ms.se);
            ++chain;
        }
    }
}

TEST_CASE("step depends on the state only, not the history") {
    const ModelSpec m = lm1d();
    const StatePoint x = state1d(0.8, 2);
    // same (seed, chain, step) coordinates, different prior history
    Rng fresh(33, 4, 9);
    Rng replay(33, 4, 9);
    const JumpEvent e1 = step(m, x, fresh);
    const JumpEvent e2 = step(m, x, replay);
    CHECK(e1.wait == e2.wait);
    CHECK(e1.theta == e2.theta);
    CHECK(e1.next_regime == e2.next_regime);
    CHECK(e1.post_jump.y == e2.post_jump.y);
}

TEST_CASE("run_chain basics") {
    const ModelSpec m = lm1d();
    const ChainPath empty = run_chain(m, state1d(1, 1), 0, SeedSpec{1, 0});
    REQUIRE(empty.states.size() == 1);
    CHECK(empty.states[0].y[0] == 1.0);

    const ChainPath p = run_chain(m, state1d(2, 1), 10000, SeedSpec{808, 0});
    REQUIRE(p.states.size() == 10001);
    for (std::size_t k = 0; k < p.states.size(); ++k) {
        CHECK(p.states[k].y[0] >= 0.0);
        if (k > 0) CHECK(p.times[k] > p.times[k - 1]);
    }

    // time averages stable across seeds within 2%
    auto avg = [&](std::uint64_t s) {
        const ChainPath q = run_chain(m, state1d(2, 1), 80000, SeedSpec{s, 0});
        double sum = 0.0;
        for (std::size_t k = 10000; k < q.states.size(); ++k) sum += q.states[k].y[0];
        return sum / static_cast<double>(q.states.size() - 10000);
    };
    const double a1 = avg(900), a2 = avg(901);
    CHECK(std::abs(a1 - a2) / a1 < 0.02);
}

TEST_CASE("continuous paths agree with the embedded chain") {
    const ModelSpec m = lm1d();
    const SeedSpec seed{909, 0};
    const PdmpPath path = run_pdmp_path(m, state1d(0.5, 2), 20.0, 0.05, seed);
    REQUIRE(path.jumps.size() > 5);

    // pre-jump values match the flow restarted at the previous post-jump state
    StatePoint cur = state1d(0.5, 2);
    for (std::size_t n = 0; n < path.jumps.size(); ++n) {
        const JumpEvent& ev = path.jumps[n];
        const Vec expected = evolve(m, cur.regime, cur.y, ev.wait);
        CHECK(std::abs(ev.pre_jump_y[0] - expected[0]) < 1e-9);
        cur = ev.post_jump;
    }

    // identical seeds: embedded jump chain == run_chain
    const ChainPath chain = run_chain(m, state1d(0.5, 2), static_cast<int>(path.jumps.size()), seed);
    for (std::size_t n = 0; n < path.jumps.size(); ++n) {
        CHECK(chain.states[n + 1].y == path.jumps[n].post_jump.y);
        CHECK(chain.states[n + 1].regime == path.jumps[n].post_jump.regime);
        CHECK(chain.times[n + 1] == Catch::Approx(path.jump_times[n]).margin(1e-12));
    }

    // grid samples sit on the right flow segment
    for (const auto& g : path.grid) {
        CHECK(g.x.y[0] >= 0.0);
        CHECK(g.x.y[0] <= 4.0);
    }
}

TEST_CASE("no jump before the horizon leaves a pure flow segment") {
    ModelSpec m = const1d(1.0);
    const SeedSpec seed{4242, 0};
    // find a seed draw whose first wait exceeds the horizon
    Rng probe = seed.at_step(0);
    const double first_wait = sample_wait(m, state1d(2.0, 1), probe);
    const double horizon = 0.9 * first_wait;
    const PdmpPath path = run_pdmp_path(m, state1d(2.0, 1), horizon, horizon / 20.0, seed);
    CHECK(path.jumps.empty());
    for (const auto& g : path.grid) {
        CHECK(g.x.y[0] == Catch::Approx(2.0 * std::exp(-g.t)).margin(1e-12));
        CHECK(g.x.regime == 1);
    }
}

TEST_CASE("jump counts per unit time respect the intensity bounds") {
    const ModelSpec m = lm1d();
    const double horizon = 5.0;
    std::vector<double> counts;
    for (int r = 0; r < 2000; ++r) {
        const PdmpPath p = run_pdmp_path(m, state1d(1.0, 1), horizon, horizon, SeedSpec{1000, static_cast<std::uint64_t>(r)});
        counts.push_back(static_cast<double>(p.jumps.size()));
    }
    const auto ms = stats::mean_se(counts);
    CHECK(ms.mean >= m.intensity_lo * horizon - 3.0 * ms.se);
    CHECK(ms.mean <= m.intensity_hi * horizon + 3.0 * ms.se);
}
