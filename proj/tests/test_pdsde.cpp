#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <vector>

#include "pdmp/pdsde.hpp"
#include "pdmp/stats.hpp"
#include "support/oracles.hpp"

using namespace pdmp;

TEST_CASE("marked process counts are Poisson with unit rate") {
    const MarkDensity h = uniform_marks();
    const double t = 5.0;
    const int n = 10000;
    std::vector<double> counts, low_counts, high_counts;
    std::vector<double> increments;
    for (int r = 0; r < n; ++r) {
        Rng rng(1001, r, 0);
        const MarkedPoissonProcess p = gen_poisson(h, t, rng);
        counts.push_back(static_cast<double>(p.count(t)));
        low_counts.push_back(static_cast<double>(p.count(t, 0.0, 0.5)));
        high_counts.push_back(static_cast<double>(p.count(t, 0.5, 1.0)));
    }
    // inter-event times: the first few increments of long realizations (a
    // fixed-horizon cut would bias the spacing law)
    for (int r = 0; r < 10000; ++r) {
        Rng rng(1013, r, 0);
        const MarkedPoissonProcess p = gen_poisson(h, 30.0, rng);
        double prev = 0.0;
        for (std::size_t k = 0; k < 3 && k < p.times.size(); ++k) {
            increments.push_back(p.times[k] - prev);
            prev = p.times[k];
        }
    }
    const auto ms = stats::mean_se(counts);
    CHECK(std::abs(ms.mean - t) <= 3.0 * ms.se);

    // equidispersion: sample variance within 3 SE of t
    double var = 0.0, m4 = 0.0;
    for (double c : counts) {
        var += (c - ms.mean) * (c - ms.mean);
        m4 += std::pow(c - ms.mean, 4);
    }
    var /= n - 1;
    m4 /= n;
    const double se_var = std::sqrt(std::max(m4 - var * var, 0.0) / n);
    CHECK(std::abs(var - t) <= 3.0 * se_var);

    // counts over disjoint mark sets are uncorrelated
    const auto ml = stats::mean_se(low_counts);
    const auto mh = stats::mean_se(high_counts);
    double cov = 0.0;
    for (int r = 0; r < n; ++r) cov += (low_counts[r] - ml.mean) * (high_counts[r] - mh.mean);
    cov /= n - 1;
    const double se_cov = std::sqrt(ml.mean * mh.mean / n) + 1e-12;  // Poisson plug-in
    CHECK(std::abs(cov) <= 3.0 * se_cov);

    // increments are unit-rate exponential
    const auto ks = stats::ks_one_sample(increments, [](double x) { return 1.0 - std::exp(-x); });
    CHECK(ks.p_value > 0.01);
}

TEST_CASE("marks follow the driving density, independent of times") {
    MarkDensity tri;
    tri.theta = ThetaInterval{0.0, 1.0};
    tri.pdf = [](double th) { return 2.0 * th; };
    tri.pdf_max = 2.0;
    std::vector<double> marks, times;
    for (int r = 0; r < 4000; ++r) {
        Rng rng(1002, r, 0);
        const MarkedPoissonProcess p = gen_poisson(tri, 3.0, rng);
        for (std::size_t k = 0; k < p.marks.size(); ++k) {
            marks.push_back(p.marks[k]);
            times.push_back(k == 0 ? p.times[0] : p.times[k] - p.times[k - 1]);
        }
    }
    const auto ms = stats::mean_se(marks);
    CHECK(std::abs(ms.mean - 2.0 / 3.0) <= 3.0 * ms.se);
    // sample correlation between increments and marks vanishes
    const auto mt = stats::mean_se(times);
    double cov = 0.0, vm = 0.0, vt = 0.0;
    for (std::size_t k = 0; k < marks.size(); ++k) {
        cov += (marks[k] - ms.mean) * (times[k] - mt.mean);
        vm += std::pow(marks[k] - ms.mean, 2);
        vt += std::pow(times[k] - mt.mean, 2);
    }
    CHECK(std::abs(cov / std::sqrt(vm * vt)) < 3.0 / std::sqrt(static_cast<double>(marks.size())));
}

TEST_CASE("undersized mark envelope is detected") {
    MarkDensity bad;
    bad.theta = ThetaInterval{0.0, 1.0};
    bad.pdf = [](double) { return 1.0; };
    bad.pdf_max = 0.5;
    Rng rng(1, 0, 0);
    CHECK_THROWS_AS(gen_poisson(bad, 10.0, rng), NumericError);
}

TEST_CASE("zero amplitude leaves a continuous switched flow") {
    PdsdeSpec s = lm1d_pdsde();
    s.jump_amplitude = [](const Vec&, double) { return Vec{0.0}; };
    const PdsdeTrajectory traj = solve_pdsde(s, Vec{2.0}, 1, 15.0, 0.1, SeedSpec{1003, 0});
    REQUIRE(traj.jumps.size() > 5);  // perturbation times still arrive
    for (const auto& j : traj.jumps) CHECK(j.post == j.pre);
}

TEST_CASE("the embedded jump chain replays the induced chain exactly") {
    const PdsdeSpec s = lm1d_pdsde();
    const SeedSpec seed{1004, 0};
    const PdsdeTrajectory traj = solve_pdsde(s, Vec{1.0}, 1, 12.0, 0.5, seed);
    REQUIRE(traj.jumps.size() > 3);
    const ChainPath chain =
        run_chain(induced_model(s), state1d(1.0, 1), static_cast<int>(traj.jumps.size()), seed);
    for (std::size_t n = 0; n < traj.jumps.size(); ++n) {
        CHECK(traj.jumps[n].post == chain.states[n + 1].y);
        CHECK(traj.jumps[n].regime_after == chain.states[n + 1].regime);
        CHECK(traj.jumps[n].tau == Catch::Approx(chain.times[n + 1]).margin(1e-12));
    }
}

TEST_CASE("the embedded chain matches the closed-form model in law") {
    const PdsdeSpec s = lm1d_pdsde();
    const ModelSpec analytic = lm1d();
    const int n = 10000;
    std::vector<double> y_sde, y_chain;
    long reg_sde[2] = {0, 0}, reg_chain[2] = {0, 0};
    for (int k = 0; k < n; ++k) {
        const PdsdeTrajectory traj =
            solve_pdsde(s, Vec{1.5}, 2, 40.0, 40.0, SeedSpec{1005, static_cast<std::uint64_t>(k)}, /*max_jumps=*/1);
        REQUIRE_FALSE(traj.jumps.empty());
        y_sde.push_back(traj.jumps.front().post[0]);
        ++reg_sde[traj.jumps.front().regime_after - 1];
        Rng rng = SeedSpec{1006, static_cast<std::uint64_t>(k)}.at_step(0);
        const JumpEvent ev = step(analytic, state1d(1.5, 2), rng);
        y_chain.push_back(ev.post_jump.y[0]);
        ++reg_chain[ev.next_regime - 1];
    }
    CHECK(stats::ks_two_sample(y_sde, y_chain).p_value > 0.01);
    CHECK(stats::chi2_two_sample(std::span<const long>(reg_sde, 2), std::span<const long>(reg_chain, 2)).p_value > 0.01);
}

TEST_CASE("the time change of the solution meets the driving clock at each jump") {
    const PdsdeSpec s = lm1d_pdsde();
    const PdsdeTrajectory traj = solve_pdsde(s, Vec{0.5}, 1, 160.0, 160.0, SeedSpec{1007, 0});
    REQUIRE(traj.jumps.size() > 150);

    // solver's own accumulated integral
    for (const auto& j : traj.jumps) CHECK(std::abs(j.time_change - j.bar_tau) <= 1e-6);

    // independent recomputation: fine Simpson along each flow segment of an
    // exactly integrated trajectory
    double lambda_integral = 0.0;
    Vec y = Vec{0.5};
    int regime = 1;
    double prev_tau = 0.0;
    for (const auto& j : traj.jumps) {
        const double wait = j.tau - prev_tau;
        const int cells = 400;
        const double h = wait / cells;
        double seg = 0.0;
        for (int c = 0; c < cells; ++c) {
            auto lam = [&](double t) { return s.intensity(Vec{oracles::lm1d_flow(t, y[0], regime)}); };
            seg += (h / 6.0) * (lam(c * h) + 4.0 * lam((c + 0.5) * h) + lam((c + 1) * h));
        }
        lambda_integral += seg;
        CHECK(std::abs(lambda_integral - j.bar_tau) <= 2e-5 * std::max(1.0, j.bar_tau));
        y = j.post;
        regime = j.regime_after;
        prev_tau = j.tau;
    }
}

TEST_CASE("the trajectory solves the integral equation on the grid") {
    const PdsdeSpec s = lm1d_pdsde();
    const double horizon = 6.0, dt = 0.002;
    const PdsdeTrajectory traj = solve_pdsde(s, Vec{1.0}, 1, horizon, dt, SeedSpec{1008, 3});
    REQUIRE(traj.grid.size() > 100);

    // post-jump displacement equals the amplitude at the drawn mark
    for (const auto& j : traj.jumps) {
        const Vec amp = s.jump_amplitude(j.pre, j.mark);
        CHECK(j.post[0] == Catch::Approx(j.pre[0] + amp[0]).margin(1e-12));
    }

    // Y(t) = Y(0) + int a(Y, xi) + sum of jump displacements, via trapezoids
    double drift_integral = 0.0;
    std::size_t jump_idx = 0;
    double jump_sum = 0.0;
    for (std::size_t g = 1; g < traj.grid.size(); ++g) {
        const auto& prev = traj.grid[g - 1];
        const auto& curt = traj.grid[g];
        drift_integral += 0.5 * dt *
                          (s.drift(prev.x.y, prev.x.regime)[0] + s.drift(curt.x.y, curt.x.regime)[0]);
        while (jump_idx < traj.jumps.size() && traj.jumps[jump_idx].tau <= curt.t) {
            jump_sum += traj.jumps[jump_idx].post[0] - traj.jumps[jump_idx].pre[0];
            ++jump_idx;
        }
        const double reconstructed = 1.0 + drift_integral + jump_sum;
        CHECK(std::abs(curt.x.y[0] - reconstructed) < 5e-3);
    }
}

TEST_CASE("constant mapping of the jump equation") {
    const PdsdeSpec s = lm1d_pdsde();
    const MappedConstants mapped = map_constants(s);
    CHECK(mapped.declared.L == 1.0);
    CHECK(mapped.declared.alpha == -1.0);
    CHECK(mapped.declared.L_q == 1.5);  // conservative: 1 + L_sigma
    CHECK(mapped.declared.L_p == 0.0);
    CHECK(mapped.declared.delta_p == 1.0);
    // the mapped bound fails here: (1 + 1/2) * 2 - 1 >= 1
    CHECK_FALSE(mapped.main_inequality_ok);
    CHECK(mapped.declared.flow_gap(Vec{0.0}) == Catch::Approx(2.0).margin(1e-12));

    // while the direct route through the induced chain's own constants passes
    const ConstantsLedger direct = build_ledger(induced_model(s), lm1d_declared());
    CHECK(direct.main_inequality_ok);
    CHECK(direct.a == 0.5);

    // amplitude independent of the state: the mapped jump constant is 1
    PdsdeSpec flat = s;
    flat.L_sigma = 0.0;
    CHECK(map_constants(flat).declared.L_q == 1.0);

    // strictness at the boundary alpha = lambda_lo - (1 + L_sigma) lambda_hi
    PdsdeSpec edge = s;
    edge.alpha = edge.intensity_lo - (1.0 + edge.L_sigma) * edge.intensity_hi;
    CHECK_FALSE(map_constants(edge).main_inequality_ok);
    edge.alpha -= 0.01;
    CHECK(map_constants(edge).main_inequality_ok);
}

TEST_CASE("dissipativity checks") {
    PdsdeSpec s = lm1d_pdsde();
    std::vector<std::pair<Vec, Vec>> pairs;
    Rng rng(1009, 0, 0);
    for (int k = 0; k < 200; ++k) pairs.push_back({Vec{4.0 * rng.u01()}, Vec{4.0 * rng.u01()}});

    // both linear fields are tight at alpha = -1
    for (int i : {1, 2}) {
        const DissipativityReport r = check_dissipativity(s, pairs, i);
        CHECK(r.pass);
        CHECK(std::abs(r.worst_slack) <= 1e-12);
    }

    // an expanding field declared dissipative is falsified with a witness
    PdsdeSpec bad = s;
    bad.drift = [](const Vec& y, int) { return Vec{y[0]}; };
    const DissipativityReport r = check_dissipativity(bad, pairs, 1);
    CHECK_FALSE(r.pass);
    CHECK(r.worst_slack > 0.0);
    CHECK_FALSE(r.witness.empty());
}

TEST_CASE("integrated dissipative flows contract at the declared rate") {
    const PdsdeSpec s = lm1d_pdsde();
    const ModelSpec chain = induced_model(s);
    Rng rng(1010, 0, 0);
    for (int k = 0; k < 100; ++k) {
        const double y1 = 4.0 * rng.u01(), y2 = 4.0 * rng.u01(), t = rng.uniform(0.0, 3.0);
        for (int i : {1, 2}) {
            const double lhs = std::abs(evolve(chain, i, Vec{y1}, t)[0] - evolve(chain, i, Vec{y2}, t)[0]);
            CHECK(lhs <= std::exp(s.alpha * t) * std::abs(y1 - y2) + 1e-9);
        }
    }
}
