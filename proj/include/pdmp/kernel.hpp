#pragma once

#include <utility>
#include <vector>

#include "pdmp/flow.hpp"
#include "pdmp/model.hpp"
#include "pdmp/rng.hpp"
#include "pdmp/space.hpp"

namespace pdmp {

inline constexpr long kRejectionCap = 1'000'000;

// One transition of the jump chain: wait along the flow, pre-jump point, mark,
// post-jump point, next regime.
struct JumpEvent {
    double wait = 0.0;
    double theta = 0.0;
    int next_regime = 1;
    Vec pre_jump_y;
    StatePoint post_jump;
};

// Wait until the next jump from x. The integrated hazard maps a unit-rate
// exponential clock onto the state-dependent wait, so the law is exact up to
// the inversion tolerance: Prob(wait <= t) = 1 - exp(-L(t, x)).
inline double sample_wait(const ModelSpec& m, const StatePoint& x, Rng& rng) {
    HazardCurve curve(m, x);
    return curve.invert(rng.exp1());
}

// Mark draw from the place-dependent density at the pre-jump point, by
// rejection against the uniform envelope density_max.
inline double sample_theta(const ModelSpec& m, const Vec& y_pre, Rng& rng) {
    for (long trial = 0; trial < kRejectionCap; ++trial) {
        const double th = rng.uniform(m.theta.lo, m.theta.hi);
        const double p = m.density(th, y_pre);
        if (p > m.density_max * (1.0 + 1e-12))
            throw NumericError(m.name + ": mark density exceeds the declared envelope");
        if (rng.u01() * m.density_max < p) return th;
    }
    throw NumericError(m.name + ": mark rejection cap exceeded; envelope looks wrong");
}

// Next regime from row i of the switching matrix evaluated at the post-jump
// point.
inline int sample_regime(const ModelSpec& m, int i, const Vec& y_post, Rng& rng) {
    const auto row = m.switching(i, y_post);
    if (static_cast<int>(row.size()) != m.regime_count)
        throw ModelError(m.name + ": switching row has wrong length");
    double sum = 0.0;
    for (double p : row) sum += p;
    if (std::abs(sum - 1.0) > 1e-9) throw ModelError(m.name + ": switching row is not stochastic");
    return static_cast<int>(rng.categorical(row)) + 1;
}

// One step of the jump-chain kernel: wait -> flow -> mark -> jump -> switch.
inline JumpEvent step(const ModelSpec& m, const StatePoint& x, Rng& rng) {
    HazardCurve curve(m, x);
    JumpEvent ev;
    ev.wait = curve.invert(rng.exp1());
    ev.pre_jump_y = curve.state(ev.wait);
    ev.theta = sample_theta(m, ev.pre_jump_y, rng);
    ev.post_jump.y = m.snap_to_domain(m.jump(ev.theta, ev.pre_jump_y), "jump map");
    ev.next_regime = sample_regime(m, x.regime, ev.post_jump.y, rng);
    ev.post_jump.regime = ev.next_regime;
    return ev;
}

// Jump-chain trajectory: post-jump states with their cumulative jump times,
// plus the replay coordinates that produced it.
struct ChainPath {
    std::vector<StatePoint> states;  // length n+1, states[0] = x0
    std::vector<double> times;       // cumulative jump times, times[0] = 0
    SeedSpec seed;
};

inline ChainPath run_chain(const ModelSpec& m, const StatePoint& x0, int n, SeedSpec seed) {
    if (n < 0) throw ModelError(m.name + ": chain length must be >= 0");
    ChainPath path;
    path.seed = seed;
    path.states.reserve(n + 1);
    path.times.reserve(n + 1);
    path.states.push_back(x0);
    path.times.push_back(0.0);
    StatePoint cur = x0;
    double t = 0.0;
    for (int k = 0; k < n; ++k) {
        Rng rng = seed.at_step(static_cast<std::uint64_t>(k));
        const JumpEvent ev = step(m, cur, rng);
        t += ev.wait;
        cur = ev.post_jump;
        path.states.push_back(cur);
        path.times.push_back(t);
    }
    return path;
}

// Continuous-time trajectory sampled on a uniform grid, plus the exact jump
// records. Uses the same per-step generators as run_chain, so the embedded
// jump chain coincides with run_chain for equal seeds.
struct PathSample {
    double t = 0.0;
    StatePoint x;
};

struct PdmpPath {
    std::vector<PathSample> grid;
    std::vector<double> jump_times;
    std::vector<JumpEvent> jumps;
    SeedSpec seed;
};

inline PdmpPath run_pdmp_path(const ModelSpec& m, const StatePoint& x0, double horizon, double dt, SeedSpec seed) {
    if (!(horizon > 0.0)) throw ModelError(m.name + ": horizon must be positive");
    if (!(dt > 0.0)) throw ModelError(m.name + ": grid step must be positive");
    PdmpPath path;
    path.seed = seed;
    StatePoint cur = x0;
    double seg_start = 0.0;
    double next_grid = 0.0;
    std::uint64_t n = 0;
    while (true) {
        Rng rng = seed.at_step(n);
        HazardCurve curve(m, cur);
        const double wait = curve.invert(rng.exp1());
        const double seg_end = seg_start + wait;
        while (next_grid <= std::min(seg_end, horizon)) {
            path.grid.push_back({next_grid, StatePoint{curve.state(next_grid - seg_start), cur.regime}});
            next_grid += dt;
        }
        if (seg_end > horizon) break;
        JumpEvent ev;
        ev.wait = wait;
        ev.pre_jump_y = curve.state(wait);
        ev.theta = sample_theta(m, ev.pre_jump_y, rng);
        ev.post_jump.y = m.snap_to_domain(m.jump(ev.theta, ev.pre_jump_y), "jump map");
        ev.next_regime = sample_regime(m, cur.regime, ev.post_jump.y, rng);
        ev.post_jump.regime = ev.next_regime;
        path.jumps.push_back(ev);
        path.jump_times.push_back(seg_end);
        cur = ev.post_jump;
        seg_start = seg_end;
        ++n;
    }
    return path;
}

}  // namespace pdmp
