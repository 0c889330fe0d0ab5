#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "pdmp/constants.hpp"
#include "pdmp/flow.hpp"
#include "pdmp/kernel.hpp"
#include "pdmp/model.hpp"
#include "pdmp/rng.hpp"
#include "pdmp/space.hpp"
#include "pdmp/stats.hpp"

namespace pdmp {

// Pair state along a coupled run. last_coupled marks whether the step that
// produced this pair used the coupled branch.
struct CoupledState {
    StatePoint x1, x2;
    bool last_coupled = false;
    int step_index = 0;
};

struct CoupledStepResult {
    StatePoint x1, x2;
    bool coupled = false;
};

namespace detail {

// Acceptance ratio of the coupled branch against chain A's own kernel draw
// (t, theta, j): the product of min/max factor ratios for the intensity, the
// survival weight, the mark density and the switching probability. Lies in
// [0, 1]; equals 1 for identical states.
inline double coupling_ratio(const ModelSpec& m, HazardCurve& a, HazardCurve& b, double t,
                             double theta, int j) {
    const Vec za = a.state(t);
    const Vec zb = b.state(t);
    const double lam_a = m.intensity(za), lam_b = m.intensity(zb);
    const double surv_a = std::exp(-a.value(t)), surv_b = std::exp(-b.value(t));
    const double p_a = m.density(theta, za), p_b = m.density(theta, zb);
    const Vec ya = m.snap_to_domain(m.jump(theta, za), "jump map");
    const Vec yb = m.snap_to_domain(m.jump(theta, zb), "jump map");
    const double pi_a = m.switching(a.base().regime, ya).at(j - 1);
    const double pi_b = m.switching(b.base().regime, yb).at(j - 1);
    if (!(lam_a > 0.0) || !(surv_a > 0.0) || !(p_a > 0.0) || !(pi_a > 0.0))
        throw NumericError(m.name + ": coupled step hit a zero-density draw of its own kernel");
    return (std::min(lam_a, lam_b) / lam_a) * (std::min(surv_a, surv_b) / surv_a) *
           (std::min(p_a, p_b) / p_a) * (std::min(pi_a, pi_b) / pi_a);
}

}  // namespace detail

// Exact density ratio used by the coupled branch, exposed for diagnostics.
inline double density_ratio(const ModelSpec& m, const StatePoint& x1, const StatePoint& x2,
                            double t, double theta, int j) {
    if (t < 0.0) throw ModelError(m.name + ": density_ratio needs t >= 0");
    HazardCurve c1(m, x1), c2(m, x2);
    return detail::coupling_ratio(m, c1, c2, t, theta, j);
}

// One step of the coupled pair chain. Chain 1 draws from its own kernel; with
// probability equal to the density ratio the draw is shared (both chains jump
// at the same time with the same mark into the same regime), otherwise chain 1
// keeps its draw -- now distributed as its normalized residual -- and chain 2
// rejection-samples its own residual with the roles of the two chains
// swapped. Both marginals are exact one-step kernel laws.
inline CoupledStepResult coupled_step(const ModelSpec& m, const StatePoint& x1,
                                      const StatePoint& x2, Rng& rng) {
    HazardCurve curve1(m, x1), curve2(m, x2);

    const double t = curve1.invert(rng.exp1());
    const Vec z1 = curve1.state(t);
    const double theta = sample_theta(m, z1, rng);
    const Vec y1 = m.snap_to_domain(m.jump(theta, z1), "jump map");
    const int j = sample_regime(m, x1.regime, y1, rng);

    const double accept = detail::coupling_ratio(m, curve1, curve2, t, theta, j);
    if (rng.u01() < accept) {
        const Vec z2 = curve2.state(t);
        const Vec y2 = m.snap_to_domain(m.jump(theta, z2), "jump map");
        return {StatePoint{y1, j}, StatePoint{y2, j}, true};
    }

    for (long trial = 0; trial < kRejectionCap; ++trial) {
        const double t2 = curve2.invert(rng.exp1());
        const Vec z2 = curve2.state(t2);
        const double th2 = sample_theta(m, z2, rng);
        const Vec y2 = m.snap_to_domain(m.jump(th2, z2), "jump map");
        const int j2 = sample_regime(m, x2.regime, y2, rng);
        const double swapped = detail::coupling_ratio(m, curve2, curve1, t2, th2, j2);
        if (rng.u01() >= swapped) return {StatePoint{y1, j}, StatePoint{y2, j2}, false};
    }
    throw NumericError(m.name + ": residual rejection cap exceeded (coupled mass too close to 1?)");
}

inline std::vector<CoupledState> run_coupled_chain(const ModelSpec& m, StatePoint x1, StatePoint x2,
                                                   int n, SeedSpec seed) {
    if (n < 1) throw ModelError(m.name + ": coupled chain needs n >= 1");
    std::vector<CoupledState> out;
    out.reserve(n);
    for (int k = 0; k < n; ++k) {
        Rng rng = seed.at_step(static_cast<std::uint64_t>(k));
        const CoupledStepResult r = coupled_step(m, x1, x2, rng);
        x1 = r.x1;
        x2 = r.x2;
        out.push_back({x1, x2, r.coupled, k + 1});
    }
    return out;
}

// The certified quantities the empirical coupling checks compare against,
// lifted from a constants ledger.
struct CouplingFrame {
    HybridMetric metric;
    Vec y_star;
    double R = 0.0;        // pair set threshold on the Lyapunov sum
    double q = 0.0;        // contraction factor of the coupled move
    double b4_delta = 0.0;
    double b5_l = 0.0;
    double b5_nu = 1.0;

    static CouplingFrame from_ledger(const ConstantsLedger& ledger) {
        if (!ledger.main_inequality_ok)
            throw ModelError("coupling frame: ledger with failed main inequality");
        CouplingFrame f;
        f.metric = HybridMetric{ledger.c_min};
        f.y_star = ledger.declared.y_star;
        f.R = ledger.R;
        f.q = ledger.q;
        f.b4_delta = ledger.b4_delta;
        f.b5_l = ledger.b5_l;
        f.b5_nu = ledger.b5_nu;
        return f;
    }

    double lyapunov(const StatePoint& x) const { return distance(x.y, y_star); }
    // F: equal regimes, or Lyapunov sum below R
    bool in_pair_set(const StatePoint& x1, const StatePoint& x2) const {
        return x1.regime == x2.regime || lyapunov(x1) + lyapunov(x2) < R;
    }
    // K: inside F with Lyapunov sum below R
    bool in_small_set(const StatePoint& x1, const StatePoint& x2) const {
        return in_pair_set(x1, x2) && lyapunov(x1) + lyapunov(x2) < R;
    }
};

struct PairCheck {
    StatePoint x1, x2;
    double estimate = 0.0;
    double se = 0.0;
    double bound = 0.0;
    bool pass = false;
    bool skipped = false;
    std::string note;
};

// Monte-Carlo estimate of the coupled-move contraction ratio
// E[rho_c(next pair) ; coupled] / rho_c(pair) for each pair, against the
// ledger bound q.
inline std::vector<PairCheck> estimate_contraction(const ModelSpec& m, const CouplingFrame& frame,
                                                   const std::vector<std::pair<StatePoint, StatePoint>>& pairs,
                                                   int samples, SeedSpec seed,
                                                   unsigned threads = 1) {
    if (samples < 1) throw ModelError("estimate_contraction: need samples >= 1");
    for (const auto& [x1, x2] : pairs)
        if (!frame.in_pair_set(x1, x2))
            throw ModelError("estimate_contraction: pair outside the coupling pair set");
    std::vector<PairCheck> out(pairs.size());
    parallel_for(pairs.size(), threads, [&](std::size_t pi) {
        PairCheck& check = out[pi];
        check.x1 = pairs[pi].first;
        check.x2 = pairs[pi].second;
        check.bound = frame.q;
        const double rho0 = frame.metric(check.x1, check.x2);
        if (rho0 == 0.0) {
            check.skipped = true;
            check.note = "identical pair: contraction ratio undefined";
            return;
        }
        std::vector<double> z(samples);
        for (int k = 0; k < samples; ++k) {
            Rng rng = seed.with_chain(pi).at_step(static_cast<std::uint64_t>(k));
            const CoupledStepResult r = coupled_step(m, check.x1, check.x2, rng);
            z[k] = r.coupled ? frame.metric(r.x1, r.x2) / rho0 : 0.0;
        }
        const auto ms = stats::mean_se(z);
        check.estimate = ms.mean;
        check.se = ms.se;
        check.pass = check.estimate <= frame.q + 3.0 * check.se;
    });
    return out;
}

struct MassCheck {
    StatePoint x1, x2;
    double coupled_mass = 0.0, coupled_se = 0.0;
    double close_mass = 0.0, close_se = 0.0;
    double b5_bound = 0.0;  // 1 - l rho_c^nu
    double b4_bound = 0.0;  // delta
    bool b5_pass = false, b4_pass = false;
};

// Empirical lower bounds: total coupled mass against 1 - l rho_c^nu, and the
// coupled-and-contracted mass against delta.
inline std::vector<MassCheck> estimate_b4_b5(const ModelSpec& m, const CouplingFrame& frame,
                                             const std::vector<std::pair<StatePoint, StatePoint>>& pairs,
                                             int samples, SeedSpec seed, unsigned threads = 1) {
    if (samples < 1) throw ModelError("estimate_b4_b5: need samples >= 1");
    for (const auto& [x1, x2] : pairs)
        if (!frame.in_pair_set(x1, x2))
            throw ModelError("estimate_b4_b5: pair outside the coupling pair set");
    std::vector<MassCheck> out(pairs.size());
    parallel_for(pairs.size(), threads, [&](std::size_t pi) {
        MassCheck& check = out[pi];
        check.x1 = pairs[pi].first;
        check.x2 = pairs[pi].second;
        const double rho0 = frame.metric(check.x1, check.x2);
        check.b5_bound = std::max(0.0, 1.0 - frame.b5_l * std::pow(rho0, frame.b5_nu));
        check.b4_bound = frame.b4_delta;
        std::vector<double> coupled(samples), close(samples);
        for (int k = 0; k < samples; ++k) {
            Rng rng = seed.with_chain(pi).at_step(static_cast<std::uint64_t>(k));
            const CoupledStepResult r = coupled_step(m, check.x1, check.x2, rng);
            coupled[k] = r.coupled ? 1.0 : 0.0;
            close[k] = (r.coupled && frame.metric(r.x1, r.x2) <= frame.q * rho0) ? 1.0 : 0.0;
        }
        const auto cm = stats::mean_se(coupled);
        const auto cl = stats::mean_se(close);
        check.coupled_mass = cm.mean;
        check.coupled_se = cm.se;
        check.close_mass = cl.mean;
        check.close_se = cl.se;
        check.b5_pass = check.coupled_mass >= check.b5_bound - 3.0 * check.coupled_se;
        check.b4_pass = check.close_mass >= check.b4_bound - 3.0 * check.close_se;
    });
    return out;
}

struct SigmaEstimate {
    StatePoint x1, x2;
    double estimate = 0.0;
    double se = 0.0;
    double truncation_mass = 0.0;
    int n_max = 0;
};

// Truncated Monte-Carlo estimate of E[zeta^{-sigma}], where sigma is the
// first step at which the coupled pair re-enters the small set K. Runs whose
// hitting time exceeds n_max contribute the truncated value and are counted
// in truncation_mass.
inline std::vector<SigmaEstimate> estimate_sigma_moment(const ModelSpec& m, const CouplingFrame& frame,
                                                        const std::vector<std::pair<StatePoint, StatePoint>>& pairs,
                                                        double zeta, int samples, SeedSpec seed,
                                                        int n_max = 10000, unsigned threads = 1) {
    if (!(zeta > 0.0 && zeta < 1.0)) throw ModelError("estimate_sigma_moment: zeta must be in (0,1)");
    for (const auto& [x1, x2] : pairs)
        if (!(frame.lyapunov(x1) + frame.lyapunov(x2) < frame.R))
            throw ModelError("estimate_sigma_moment: start pair outside the Lyapunov ball");
    std::vector<SigmaEstimate> out(pairs.size());
    parallel_for(pairs.size(), threads, [&](std::size_t pi) {
        SigmaEstimate& est = out[pi];
        est.x1 = pairs[pi].first;
        est.x2 = pairs[pi].second;
        est.n_max = n_max;
        std::vector<double> vals(samples);
        long truncated = 0;
        for (int k = 0; k < samples; ++k) {
            StatePoint a = est.x1, b = est.x2;
            int sigma = -1;
            for (int n = 1; n <= n_max; ++n) {
                const std::uint64_t sub =
                    detail::mix64(seed.chain ^ (pi * 0x9E3779B97F4A7C15ull + k * 0xD1B54A32D192ED03ull + 1));
                Rng rng(seed.seed, sub, static_cast<std::uint64_t>(n));
                const CoupledStepResult r = coupled_step(m, a, b, rng);
                a = r.x1;
                b = r.x2;
                if (frame.in_small_set(a, b)) {
                    sigma = n;
                    break;
                }
            }
            if (sigma < 0) {
                ++truncated;
                sigma = n_max;
            }
            vals[k] = std::pow(zeta, -sigma);
        }
        const auto ms = stats::mean_se(vals);
        est.estimate = ms.mean;
        est.se = ms.se;
        est.truncation_mass = static_cast<double>(truncated) / static_cast<double>(samples);
        if (est.truncation_mass > 1e-3 * est.estimate)
            throw NumericError("estimate_sigma_moment: truncation cap too small for this pair");
    });
    return out;
}

// Per-pair diagnostics bundle consumed by the CLI report.
struct CouplingDiagnostics {
    std::vector<PairCheck> contraction;
    std::vector<MassCheck> masses;
    std::vector<SigmaEstimate> sigma;
};

}  // namespace pdmp
