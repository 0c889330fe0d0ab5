#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pdmp/common.hpp"
#include "pdmp/rng.hpp"
#include "pdmp/space.hpp"

namespace pdmp {

struct ThetaInterval {
    double lo = 0.0;
    double hi = 1.0;
    double length() const { return hi - lo; }
};

// Complete datum of a jump-diffusion-free hybrid system: per-regime
// deterministic motion, a mark-indexed jump family with place-dependent mark
// densities, a state-dependent jump intensity with declared bounds, and a
// row-stochastic regime-switching matrix.
//
// Specs are immutable after construction and all callbacks must be pure; this
// is what makes chains replayable and workers shareable.
struct ModelSpec {
    std::string name;
    int regime_count = 1;  // N
    int dim = 1;           // d
    ThetaInterval theta;

    // Deterministic motion between jumps. Exactly one of the two must be set:
    // a closed-form semiflow (t, y, i) -> y, or a vector field (y, i) -> dy/dt
    // integrated with fixed-step RK4.
    std::function<Vec(double, const Vec&, int)> semiflow;
    std::function<Vec(const Vec&, int)> field;

    std::function<Vec(double, const Vec&)> jump;        // (theta, y) -> post-jump point
    std::function<double(double, const Vec&)> density;  // (theta, y) -> mark density
    double density_max = 1.0;                           // user-supplied sup of the density

    std::function<double(const Vec&)> intensity;  // jump rate along the motion
    double intensity_lo = 0.0;                    // declared inf > 0
    double intensity_hi = 0.0;                    // declared sup < inf only if degenerate

    std::function<std::vector<double>(int, const Vec&)> switching;  // row i of the switch matrix at y

    std::function<bool(const Vec&)> domain;        // membership in the closed state set
    std::function<Vec(const Vec&)> project;        // optional round-off repair onto the set
    std::function<Vec(Rng&)> domain_sampler;       // used by spot checks only

    NumericOptions numerics;

    bool has_semiflow() const { return static_cast<bool>(semiflow); }

    // Time beyond which the survival factor exp(-intensity_lo * t) drops below
    // tail_eps; used to truncate improper time integrals.
    double horizon_cap() const { return -std::log(numerics.tail_eps) / intensity_lo; }

    void require_valid() const {
        if (regime_count < 1) throw ModelError(name + ": regime count must be >= 1");
        if (dim < 1) throw ModelError(name + ": dimension must be >= 1");
        if (!(intensity_lo > 0.0)) throw ModelError(name + ": intensity lower bound must be positive");
        if (!(intensity_hi >= intensity_lo)) throw ModelError(name + ": intensity bounds out of order");
        if (!(theta.lo < theta.hi)) throw ModelError(name + ": mark interval is empty");
        if (!(density_max > 0.0)) throw ModelError(name + ": density envelope must be positive");
        if (!semiflow && !field) throw ModelError(name + ": no flow given");
        if (!jump || !density || !intensity || !switching || !domain)
            throw ModelError(name + ": incomplete model callbacks");
    }

    bool in_domain(const Vec& y) const { return domain(y); }

    // Repairs round-off drift after a flow or jump step. Fails loudly if the
    // point is genuinely outside the state set.
    Vec snap_to_domain(Vec y, const char* where) const {
        if (domain(y)) return y;
        if (!project)
            throw NumericError(std::string(name) + ": " + where + " left the state set and no projection is available");
        Vec repaired = project(y);
        const double moved = distance(repaired, y);
        if (moved > numerics.proj_tol || !domain(repaired)) {
            std::ostringstream msg;
            msg << name << ": " << where << " left the state set (projection distance " << moved << ")";
            throw NumericError(msg.str());
        }
        return repaired;
    }
};

// --- validation ------------------------------------------------------------

struct ValidationEntry {
    std::string check;
    double worst = 0.0;   // max observed violation
    double tol = 0.0;
    bool pass = true;
    std::string witness;  // where the worst violation was seen
};

struct ValidationReport {
    std::vector<ValidationEntry> entries;
    bool passed = true;

    const ValidationEntry* find(const std::string& check) const {
        for (const auto& e : entries)
            if (e.check == check) return &e;
        return nullptr;
    }
};

namespace detail {

// Composite Simpson over [lo, hi] with 2*halves panels.
inline double simpson(const std::function<double(double)>& f, double lo, double hi, int halves) {
    const int n = 2 * halves;
    const double h = (hi - lo) / n;
    double odd = 0.0, even = 0.0;
    for (int k = 1; k < n; k += 2) odd += f(lo + k * h);
    for (int k = 2; k < n; k += 2) even += f(lo + k * h);
    return (h / 3.0) * (f(lo) + 4.0 * odd + 2.0 * even + f(hi));
}

inline std::string describe_point(const Vec& y) {
    std::ostringstream os;
    os << "y=(";
    for (std::size_t k = 0; k < y.size(); ++k) os << (k ? "," : "") << y[k];
    os << ")";
    return os.str();
}

}  // namespace detail

// Spot-checks the standing model invariants on random draws: intensity inside
// its declared bounds, switch rows stochastic, mark densities normalized and
// dominated by the declared envelope. A falsification pass, not a proof.
inline ValidationReport validate_model(const ModelSpec& spec, int samples, std::uint64_t seed) {
    spec.require_valid();
    if (samples < 1) throw ModelError("validate_model: need at least one sample");
    if (!spec.domain_sampler) throw ModelError(spec.name + ": validation needs a domain sampler");

    Rng rng(seed, /*stream=*/0x76616C69ull, 0);
    ValidationReport report;

    ValidationEntry lam{"intensity_bounds", 0.0, 0.0, true, ""};
    ValidationEntry row{"switch_row_stochastic", 0.0, 1e-12, true, ""};
    ValidationEntry pin{"density_normalized", 0.0, 1e-8, true, ""};
    ValidationEntry pmx{"density_envelope", 0.0, 1e-12, true, ""};

    for (int s = 0; s < samples; ++s) {
        const Vec y = spec.domain_sampler(rng);
        const double lv = spec.intensity(y);
        const double lviol = std::max(spec.intensity_lo - lv, lv - spec.intensity_hi);
        if (lviol > lam.worst) {
            lam.worst = lviol;
            lam.witness = detail::describe_point(y) + " lambda=" + std::to_string(lv);
        }
        for (int i = 1; i <= spec.regime_count; ++i) {
            const auto r = spec.switching(i, y);
            double sum = 0.0;
            for (double p : r) sum += p;
            const double rviol = std::abs(sum - 1.0);
            if (rviol > row.worst) {
                row.worst = rviol;
                row.witness = "i=" + std::to_string(i) + " " + detail::describe_point(y);
            }
        }
        const double mass = detail::simpson([&](double th) { return spec.density(th, y); },
                                            spec.theta.lo, spec.theta.hi, 128);
        const double mviol = std::abs(mass - 1.0);
        if (mviol > pin.worst) {
            pin.worst = mviol;
            pin.witness = detail::describe_point(y);
        }
        const double th = rng.uniform(spec.theta.lo, spec.theta.hi);
        const double pviol = spec.density(th, y) - spec.density_max;
        if (pviol > pmx.worst) {
            pmx.worst = pviol;
            pmx.witness = "theta=" + std::to_string(th) + " " + detail::describe_point(y);
        }
    }

    lam.worst = std::max(lam.worst, 0.0);
    pmx.worst = std::max(pmx.worst, 0.0);
    for (auto* e : {&lam, &row, &pin, &pmx}) {
        e->pass = e->worst <= e->tol;
        report.passed = report.passed && e->pass;
        report.entries.push_back(*e);
    }
    return report;
}

// --- built-in models ---------------------------------------------------------

// One-dimensional two-regime system on [0, inf): regime 1 decays toward 0,
// regime 2 decays toward 1, jumps rescale the state by a uniform mark, and the
// jump rate is 1 + 1/(1+y). Closed forms throughout, which makes it the
// canonical cross-check model of the test suite.
inline ModelSpec lm1d() {
    ModelSpec m;
    m.name = "lm1d";
    m.regime_count = 2;
    m.dim = 1;
    m.theta = ThetaInterval{0.0, 1.0};
    m.semiflow = [](double t, const Vec& y, int i) {
        const double e = std::exp(-t);
        return Vec{i == 1 ? y[0] * e : y[0] * e + 1.0 - e};
    };
    m.jump = [](double th, const Vec& y) { return Vec{th * y[0]}; };
    m.density = [](double, const Vec&) { return 1.0; };
    m.density_max = 1.0;
    m.intensity = [](const Vec& y) { return 1.0 + 1.0 / (1.0 + y[0]); };
    m.intensity_lo = 1.0;
    m.intensity_hi = 2.0;
    m.switching = [](int, const Vec&) { return std::vector<double>{0.5, 0.5}; };
    m.domain = [](const Vec& y) { return y[0] >= 0.0; };
    m.project = [](const Vec& y) { return Vec{std::max(y[0], 0.0)}; };
    m.domain_sampler = [](Rng& rng) { return Vec{2.0 * rng.exp1()}; };
    return m;
}

// Same model with the motion given as a vector field, exercising the RK4 and
// quadrature paths against lm1d's closed forms.
inline ModelSpec lm1d_field() {
    ModelSpec m = lm1d();
    m.name = "lm1d_field";
    m.semiflow = nullptr;
    m.field = [](const Vec& y, int i) { return Vec{i == 1 ? -y[0] : 1.0 - y[0]}; };
    return m;
}

// Constant-intensity variant: waits are Exp(rate) regardless of the state,
// giving an analytic oracle for the wait-time sampler.
inline ModelSpec const1d(double rate = 1.0) {
    ModelSpec m = lm1d();
    m.name = "const1d";
    m.intensity = [rate](const Vec&) { return rate; };
    m.intensity_lo = rate;
    m.intensity_hi = rate;
    return m;
}

inline std::optional<ModelSpec> make_builtin(const std::string& name,
                                             const std::map<std::string, double>& params = {}) {
    auto param = [&](const char* key, double fallback) {
        auto it = params.find(key);
        return it == params.end() ? fallback : it->second;
    };
    if (name == "lm1d") return lm1d();
    if (name == "lm1d_field") return lm1d_field();
    if (name == "const1d") return const1d(param("rate", 1.0));
    return std::nullopt;
}

}  // namespace pdmp
