#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pdmp/constants.hpp"
#include "pdmp/flow.hpp"
#include "pdmp/kernel.hpp"
#include "pdmp/model.hpp"
#include "pdmp/rng.hpp"

namespace pdmp {

// Probability density of the driving marks on a compact interval. The
// characteristic measure is normalized to total mass one, so the driving
// clock ticks at unit rate.
struct MarkDensity {
    ThetaInterval theta;
    std::function<double(double)> pdf;
    double pdf_max = 1.0;
};

inline MarkDensity uniform_marks(double lo = 0.0, double hi = 1.0) {
    return MarkDensity{ThetaInterval{lo, hi}, [](double) { return 1.0; }, 1.0};
}

// Realization of a marked point process on [0, horizon]: strictly increasing
// event times with i.i.d. marks.
struct MarkedPoissonProcess {
    std::vector<double> times;
    std::vector<double> marks;
    double horizon = 0.0;

    // N(t, A) for an interval A of mark values
    long count(double t, double mark_lo, double mark_hi) const {
        long n = 0;
        for (std::size_t k = 0; k < times.size() && times[k] <= t; ++k)
            if (marks[k] >= mark_lo && marks[k] <= mark_hi) ++n;
        return n;
    }
    long count(double t) const {
        long n = 0;
        for (std::size_t k = 0; k < times.size() && times[k] <= t; ++k) ++n;
        return n;
    }
};

// Stationary marked process: unit-rate exponential inter-event times and
// marks drawn from the given density by rejection, independent of the times.
inline MarkedPoissonProcess gen_poisson(const MarkDensity& h, double horizon, Rng& rng) {
    if (!(horizon > 0.0)) throw ModelError("gen_poisson: horizon must be positive");
    if (!(h.theta.lo < h.theta.hi) || !(h.pdf_max > 0.0)) throw ModelError("gen_poisson: bad mark density");
    MarkedPoissonProcess p;
    p.horizon = horizon;
    double t = 0.0;
    for (;;) {
        t += rng.exp1();
        if (t > horizon) break;
        double mark = 0.0;
        long trial = 0;
        for (;; ++trial) {
            if (trial >= kRejectionCap)
                throw NumericError("gen_poisson: mark rejection cap exceeded; envelope looks wrong");
            const double th = rng.uniform(h.theta.lo, h.theta.hi);
            const double v = h.pdf(th);
            if (v > h.pdf_max * (1.0 + 1e-12))
                throw NumericError("gen_poisson: mark density exceeds the declared envelope");
            if (rng.u01() * h.pdf_max < v) {
                mark = th;
                break;
            }
        }
        p.times.push_back(t);
        p.marks.push_back(mark);
    }
    return p;
}

// Datum of the jump equation: switched drift between perturbations, additive
// state-dependent jump amplitude at the perturbation times, solution-dependent
// perturbation intensity through a time change of the driving clock.
struct PdsdeSpec {
    std::string name;
    int regime_count = 1;
    int dim = 1;

    std::function<Vec(const Vec&, int)> drift;             // a(y, i)
    std::function<Vec(const Vec&, double)> jump_amplitude; // sigma(y, theta)
    std::function<double(const Vec&)> intensity;
    double intensity_lo = 0.0, intensity_hi = 0.0;
    std::function<std::vector<double>(int, const Vec&)> switching;
    MarkDensity mark;

    // declared regularity, consumed by the constants mapping
    double alpha = 0.0;     // dissipativity exponent of every drift field
    double L_sigma = 0.0;   // mean Lipschitz constant of the jump amplitude
    double L_lambda = 0.0;
    double L_pi = 0.0;
    double delta_pi = 0.0;
    double delta_h = 0.0;   // overlap bound of the mark density
    Vec y_star;

    std::function<bool(const Vec&)> domain;
    std::function<Vec(const Vec&)> project;
    std::function<Vec(Rng&)> domain_sampler;
    NumericOptions numerics;
};

// The jump chain of the equation is the chain of a hybrid model whose jump
// family is the shift by the amplitude and whose mark density is the (place
// independent) driving density.
inline ModelSpec induced_model(const PdsdeSpec& s) {
    ModelSpec m;
    m.name = s.name + "_chain";
    m.regime_count = s.regime_count;
    m.dim = s.dim;
    m.theta = s.mark.theta;
    m.field = s.drift;
    m.jump = [amp = s.jump_amplitude](double th, const Vec& y) {
        Vec out = amp(y, th);
        for (std::size_t k = 0; k < y.size(); ++k) out[k] += y[k];
        return out;
    };
    m.density = [pdf = s.mark.pdf](double th, const Vec&) { return pdf(th); };
    m.density_max = s.mark.pdf_max;
    m.intensity = s.intensity;
    m.intensity_lo = s.intensity_lo;
    m.intensity_hi = s.intensity_hi;
    m.switching = s.switching;
    m.domain = s.domain;
    m.project = s.project;
    m.domain_sampler = s.domain_sampler;
    m.numerics = s.numerics;
    return m;
}

struct PdsdeJump {
    double tau = 0.0;              // solution jump time
    double bar_tau = 0.0;          // driving clock time
    double time_change = 0.0;      // the solver's accumulated intensity integral at tau
    Vec pre, post;
    double mark = 0.0;
    int regime_after = 1;
};

struct PdsdeTrajectory {
    std::vector<PdsdeJump> jumps;
    std::vector<PathSample> grid;  // cadlag samples of (Y(t), regime)
    double horizon = 0.0;
    SeedSpec seed;
};

// Solves the equation pathwise: between perturbations the state follows the
// drift of the active regime; at each driving-clock event bar_tau the solution
// time is found by inverting the accumulated intensity integral, the state
// jumps by the amplitude at the drawn mark, and the regime switches. Uses the
// same per-event generator layout as run_chain on the induced model, so the
// embedded jump chain of a trajectory replays exactly.
inline PdsdeTrajectory solve_pdsde(const PdsdeSpec& s, const Vec& y0, int i0, double horizon,
                                   double grid_dt, SeedSpec seed, long max_jumps = 0) {
    if (!(horizon > 0.0)) throw ModelError(s.name + ": horizon must be positive");
    if (!(grid_dt > 0.0)) throw ModelError(s.name + ": grid step must be positive");
    const ModelSpec chain = induced_model(s);
    chain.require_valid();

    PdsdeTrajectory traj;
    traj.horizon = horizon;
    traj.seed = seed;

    StatePoint cur{y0, i0};
    double seg_start = 0.0;
    double next_grid = 0.0;
    double clock = 0.0;        // driving time bar_tau
    double time_change = 0.0;  // accumulated intensity integral Lambda
    std::uint64_t n = 0;
    for (;;) {
        Rng rng = seed.at_step(n);
        HazardCurve curve(chain, cur);
        const double increment = rng.exp1();  // unit-rate driving increment
        const double wait = curve.invert(increment);
        const double seg_end = seg_start + wait;
        while (next_grid <= std::min(seg_end, horizon)) {
            traj.grid.push_back({next_grid, StatePoint{curve.state(next_grid - seg_start), cur.regime}});
            next_grid += grid_dt;
        }
        if (seg_end > horizon) break;
        clock += increment;
        time_change += curve.value(wait);

        PdsdeJump jump;
        jump.tau = seg_end;
        jump.bar_tau = clock;
        jump.time_change = time_change;
        jump.pre = curve.state(wait);
        jump.mark = sample_theta(chain, jump.pre, rng);
        jump.post = chain.snap_to_domain(chain.jump(jump.mark, jump.pre), "jump amplitude");
        jump.regime_after = sample_regime(chain, cur.regime, jump.post, rng);
        traj.jumps.push_back(jump);

        cur = StatePoint{jump.post, jump.regime_after};
        seg_start = seg_end;
        ++n;
        if (max_jumps > 0 && static_cast<long>(traj.jumps.size()) >= max_jumps) break;
    }
    return traj;
}

// Constants of the induced chain implied by the equation's declared
// regularity: unit flow factor, jump constant 1 + L_sigma, place-independent
// marks, and the flow gap rate 2 max_i |a(y, i)|.
struct MappedConstants {
    DeclaredConstants declared;
    bool main_inequality_ok = false;
};

inline MappedConstants map_constants(const PdsdeSpec& s) {
    MappedConstants out;
    out.declared.L = 1.0;
    out.declared.alpha = s.alpha;
    out.declared.L_q = 1.0 + s.L_sigma;
    out.declared.L_lambda = s.L_lambda;
    out.declared.L_pi = s.L_pi;
    out.declared.L_p = 0.0;
    out.declared.delta_pi = s.delta_pi;
    out.declared.delta_p = s.delta_h;
    out.declared.y_star = s.y_star;
    out.declared.flow_gap = [drift = s.drift, n = s.regime_count](const Vec& y) {
        double worst = 0.0;
        for (int i = 1; i <= n; ++i) worst = std::max(worst, norm(drift(y, i)));
        return 2.0 * worst;
    };
    out.main_inequality_ok =
        (1.0 + s.L_sigma) * s.intensity_hi + s.alpha < s.intensity_lo;
    return out;
}

struct DissipativityReport {
    double worst_slack = -1e300;  // max of <a(y1)-a(y2), y1-y2> - alpha |y1-y2|^2
    std::string witness;
    bool pass = true;
};

// Verifies the declared dissipativity exponent on sampled pairs.
inline DissipativityReport check_dissipativity(const PdsdeSpec& s,
                                               const std::vector<std::pair<Vec, Vec>>& pairs, int i) {
    DissipativityReport report;
    for (const auto& [y1, y2] : pairs) {
        const Vec a1 = s.drift(y1, i);
        const Vec a2 = s.drift(y2, i);
        const Vec dy = sub(y1, y2);
        const double slack = dot(sub(a1, a2), dy) - s.alpha * dot(dy, dy);
        if (slack > report.worst_slack) {
            report.worst_slack = slack;
            report.witness = detail::describe_point(y1) + " vs " + detail::describe_point(y2);
        }
    }
    report.pass = report.worst_slack <= 1e-9;
    return report;
}

// Jump-equation twin of the built-in 1-D model: decaying switched drifts with
// amplitude sigma(y, theta) = (theta - 1) y, so post-jump states are theta y.
inline PdsdeSpec lm1d_pdsde() {
    PdsdeSpec s;
    s.name = "lm1d_pdsde";
    s.regime_count = 2;
    s.dim = 1;
    s.drift = [](const Vec& y, int i) { return Vec{i == 1 ? -y[0] : 1.0 - y[0]}; };
    s.jump_amplitude = [](const Vec& y, double th) { return Vec{(th - 1.0) * y[0]}; };
    s.intensity = [](const Vec& y) { return 1.0 + 1.0 / (1.0 + y[0]); };
    s.intensity_lo = 1.0;
    s.intensity_hi = 2.0;
    s.switching = [](int, const Vec&) { return std::vector<double>{0.5, 0.5}; };
    s.mark = uniform_marks();
    s.alpha = -1.0;
    s.L_sigma = 0.5;  // int |sigma(y1,.) - sigma(y2,.)| dtheta = |y1 - y2| / 2
    s.L_lambda = 1.0;
    s.L_pi = 0.0;
    s.delta_pi = 1.0;
    s.delta_h = 1.0;
    s.y_star = Vec{0.0};
    s.domain = [](const Vec& y) { return y[0] >= 0.0; };
    s.project = [](const Vec& y) { return Vec{std::max(y[0], 0.0)}; };
    s.domain_sampler = [](Rng& rng) { return Vec{2.0 * rng.exp1()}; };
    return s;
}

inline std::optional<PdsdeSpec> make_builtin_pdsde(const std::string& name,
                                                   const std::map<std::string, double>& params = {}) {
    auto apply_overrides = [&](PdsdeSpec s) {
        if (auto it = params.find("alpha"); it != params.end()) s.alpha = it->second;
        if (auto it = params.find("L_sigma"); it != params.end()) s.L_sigma = it->second;
        return s;
    };
    if (name == "lm1d_pdsde") return apply_overrides(lm1d_pdsde());
    return std::nullopt;
}

}  // namespace pdmp
