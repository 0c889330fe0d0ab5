#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <vector>

#include "pdmp/common.hpp"
#include "pdmp/kernel.hpp"
#include "pdmp/rng.hpp"
#include "pdmp/space.hpp"

namespace pdmp {

// Finitely supported probability measure on the hybrid space. Duplicate
// support points are merged; weights must sum to one.
struct EmpiricalMeasure {
    std::vector<StatePoint> support;
    std::vector<double> weights;

    static EmpiricalMeasure from_points(std::vector<StatePoint> pts, std::vector<double> w) {
        if (pts.size() != w.size()) throw ModelError("empirical measure: size mismatch");
        std::vector<std::size_t> order(pts.size());
        std::iota(order.begin(), order.end(), 0);
        auto less = [&](std::size_t a, std::size_t b) {
            if (pts[a].regime != pts[b].regime) return pts[a].regime < pts[b].regime;
            return pts[a].y < pts[b].y;
        };
        std::sort(order.begin(), order.end(), less);
        EmpiricalMeasure m;
        for (std::size_t idx : order) {
            if (!m.support.empty() && m.support.back() == pts[idx]) {
                m.weights.back() += w[idx];
            } else {
                m.support.push_back(pts[idx]);
                m.weights.push_back(w[idx]);
            }
        }
        return m;
    }

    static EmpiricalMeasure dirac(StatePoint x) { return from_points({std::move(x)}, {1.0}); }

    bool normalized(double tol = 1e-12) const {
        double s = 0.0;
        for (double w : weights) {
            if (w < 0.0) return false;
            s += w;
        }
        return std::abs(s - 1.0) <= tol;
    }
};

// Uniform empirical law of the n-th chain states across an ensemble.
inline EmpiricalMeasure empirical_from_chains(const std::vector<ChainPath>& paths, std::size_t n) {
    if (paths.empty()) throw ModelError("empirical_from_chains: no paths");
    std::vector<StatePoint> pts;
    pts.reserve(paths.size());
    for (const auto& p : paths) {
        if (p.states.size() <= n) throw ModelError("empirical_from_chains: path shorter than requested step");
        pts.push_back(p.states[n]);
    }
    return EmpiricalMeasure::from_points(std::move(pts),
                                         std::vector<double>(paths.size(), 1.0 / static_cast<double>(paths.size())));
}

struct FmOptions {
    // Pooled-support cap; larger inputs are independently resampled down to
    // cap/2 atoms per measure with a seed derived from the input contents.
    std::size_t support_cap = 600;
};

struct FmResult {
    double value = 0.0;
    double gap = 0.0;           // |transport optimum - test-function value| certificate
    double lipschitz_slack = 0.0;
    long iterations = 0;
    bool subsampled = false;
    std::uint64_t subsample_seed = 0;
};

namespace detail {

inline std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t k = 0; k < bytes; ++k) {
        h ^= p[k];
        h *= 0x100000001B3ull;
    }
    return h;
}

inline std::uint64_t measure_hash(std::uint64_t h, const EmpiricalMeasure& m) {
    for (std::size_t k = 0; k < m.support.size(); ++k) {
        h = fnv1a(h, m.support[k].y.data(), m.support[k].y.size() * sizeof(double));
        h = fnv1a(h, &m.support[k].regime, sizeof(int));
        h = fnv1a(h, &m.weights[k], sizeof(double));
    }
    return h;
}

inline EmpiricalMeasure resample(const EmpiricalMeasure& m, std::size_t atoms, Rng& rng) {
    std::vector<double> cum(m.weights.size());
    std::partial_sum(m.weights.begin(), m.weights.end(), cum.begin());
    std::vector<StatePoint> pts;
    pts.reserve(atoms);
    for (std::size_t k = 0; k < atoms; ++k) {
        const double u = rng.u01() * cum.back();
        const auto it = std::lower_bound(cum.begin(), cum.end(), u);
        pts.push_back(m.support[std::min<std::size_t>(it - cum.begin(), m.support.size() - 1)]);
    }
    return EmpiricalMeasure::from_points(std::move(pts),
                                         std::vector<double>(atoms, 1.0 / static_cast<double>(atoms)));
}

// Minimum-cost transport reformulation of the flat-metric program
//
//   maximize sum_k c_k f_k   over  |f_k| <= 1,  |f_a - f_b| <= dist(a,b),
//
// solved as its equal-value flow problem: route the signed weights c_k
// through pairwise arcs at cost dist(a,b), with unit-cost creation/absorption
// columns enforcing the sup bound. Revised primal simplex with an explicit
// basis inverse; bases here are totally unimodular, so the inverse and the
// pivot directions stay exactly in {-1, 0, 1} and the arithmetic is exact.
// Entering variable: most negative reduced cost, ties by lowest index; after
// a stall budget the rule degrades to Bland's (lowest index, guaranteed
// finite). The optimal simplex multipliers are the test function f, whose
// objective value certifies the optimum (duality gap).
class FlatMetricSimplex {
  public:
    FlatMetricSimplex(std::vector<double> dist, std::vector<double> supply)
        : m_(supply.size()), dist_(std::move(dist)), b_(std::move(supply)) {}

    void solve() {
        const std::size_t n_vars = 2 * m_ + m_ * (m_ - 1);
        basic_.assign(m_, 0);
        cb_.assign(m_, 1.0);
        xb_.assign(m_, 0.0);
        in_basis_.assign(n_vars, 0);
        binv_.assign(m_ * m_, 0.0);
        y_.assign(m_, 0.0);
        for (std::size_t r = 0; r < m_; ++r) {
            const bool up = b_[r] >= 0.0;
            basic_[r] = up ? r : m_ + r;
            in_basis_[basic_[r]] = 1;
            xb_[r] = std::abs(b_[r]);
            binv_[r * m_ + r] = up ? 1.0 : -1.0;  // column-major; diagonal either way
        }

        const long soft_cap = 500 + 6 * static_cast<long>(m_);
        const long hard_cap = 20000 + 80 * static_cast<long>(m_);
        bool bland = false;
        for (iterations_ = 0;; ++iterations_) {
            if (iterations_ > hard_cap)
                throw NumericError("flat-metric LP exceeded its pivot budget (cycling guard)");
            if (iterations_ == soft_cap) bland = true;
            compute_duals();
            const auto [enter, rc] = price(bland);
            if (enter == kNone || rc >= -1e-11) break;
            pivot(enter);
        }
        compute_duals();
    }

    double objective() const {
        double v = 0.0;
        for (std::size_t r = 0; r < m_; ++r) v += cb_[r] * xb_[r];
        return v;
    }

    const std::vector<double>& test_function() const { return y_; }
    long iterations() const { return iterations_; }

  private:
    static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

    double dist_at(std::size_t a, std::size_t b) const { return dist_[a * m_ + b]; }

    // var ids: [0, m) absorb-up, [m, 2m) absorb-down, then pair arcs in
    // lexicographic (a < b) order, two directions each.
    std::pair<std::size_t, std::size_t> arc_rows(std::size_t var, bool& forward) const {
        const std::size_t p = (var - 2 * m_) / 2;
        forward = ((var - 2 * m_) % 2) == 0;
        // invert the pair index p -> (a, b)
        std::size_t a = 0, acc = 0;
        while (acc + (m_ - 1 - a) <= p) {
            acc += m_ - 1 - a;
            ++a;
        }
        const std::size_t b = a + 1 + (p - acc);
        return {a, b};
    }

    void compute_duals() {
        for (std::size_t j = 0; j < m_; ++j) {
            const double* col = &binv_[j * m_];
            double s = 0.0;
            for (std::size_t i = 0; i < m_; ++i) s += cb_[i] * col[i];
            y_[j] = s;
        }
    }

    std::pair<std::size_t, double> price(bool bland) const {
        std::size_t best = kNone;
        double best_rc = 0.0;
        auto consider = [&](std::size_t var, double rc) {
            if (in_basis_[var] || rc >= -1e-11) return false;
            if (bland) {
                if (best == kNone || var < best) {
                    best = var;
                    best_rc = rc;
                }
                return true;
            }
            if (rc < best_rc - 1e-15 || (rc < best_rc + 1e-15 && (best == kNone || var < best))) {
                best = var;
                best_rc = rc;
            }
            return false;
        };
        for (std::size_t k = 0; k < m_; ++k) consider(k, 1.0 - y_[k]);
        for (std::size_t k = 0; k < m_; ++k) consider(m_ + k, 1.0 + y_[k]);
        std::size_t var = 2 * m_;
        for (std::size_t a = 0; a < m_; ++a) {
            for (std::size_t b = a + 1; b < m_; ++b, var += 2) {
                const double rho = dist_at(a, b);
                const double diff = y_[a] - y_[b];
                consider(var, rho - diff);
                consider(var + 1, rho + diff);
            }
        }
        return {best, best_rc};
    }

    void pivot(std::size_t enter) {
        // direction d = Binv * entering column (at most two +-1 entries)
        std::vector<double> d(m_, 0.0);
        double cost = 1.0;
        if (enter < m_) {
            axpy_col(d, enter, +1.0);
        } else if (enter < 2 * m_) {
            axpy_col(d, enter - m_, -1.0);
        } else {
            bool forward = true;
            const auto [a, b] = arc_rows(enter, forward);
            cost = dist_at(a, b);
            axpy_col(d, forward ? a : b, +1.0);
            axpy_col(d, forward ? b : a, -1.0);
        }

        std::size_t leave = kNone;
        double theta = 0.0;
        for (std::size_t r = 0; r < m_; ++r) {
            if (d[r] <= 1e-11) continue;
            const double ratio = xb_[r] / d[r];
            if (leave == kNone || ratio < theta - 1e-15 ||
                (ratio < theta + 1e-15 && basic_[r] < basic_[leave])) {
                leave = r;
                theta = ratio;
            }
        }
        if (leave == kNone) throw NumericError("flat-metric LP claims an unbounded ray");

        for (std::size_t r = 0; r < m_; ++r) xb_[r] -= theta * d[r];
        xb_[leave] = theta;
        for (std::size_t r = 0; r < m_; ++r)
            if (xb_[r] < 0.0) xb_[r] = 0.0;

        const double dr = d[leave];
        for (std::size_t j = 0; j < m_; ++j) {
            double* col = &binv_[j * m_];
            const double t = col[leave] / dr;
            if (t == 0.0) continue;
            for (std::size_t i = 0; i < m_; ++i) col[i] -= t * d[i];
            col[leave] = t;
        }

        in_basis_[basic_[leave]] = 0;
        in_basis_[enter] = 1;
        basic_[leave] = enter;
        cb_[leave] = cost;
    }

    void axpy_col(std::vector<double>& d, std::size_t row, double w) const {
        const double* col = &binv_[row * m_];
        for (std::size_t i = 0; i < m_; ++i) d[i] += w * col[i];
    }

    std::size_t m_;
    std::vector<double> dist_;  // m x m
    std::vector<double> b_;
    std::vector<std::size_t> basic_;
    std::vector<double> cb_, xb_, binv_, y_;
    std::vector<char> in_basis_;
    long iterations_ = 0;
};

struct PooledInstance {
    std::vector<StatePoint> support;
    std::vector<double> cdiff;      // mu - nu on the pooled support
    std::vector<double> dist;       // m x m pairwise distances
};

inline PooledInstance pool_measures(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                                    const HybridMetric& metric) {
    std::vector<StatePoint> pts;
    std::vector<double> w;
    for (std::size_t k = 0; k < mu.support.size(); ++k) {
        pts.push_back(mu.support[k]);
        w.push_back(mu.weights[k]);
    }
    for (std::size_t k = 0; k < nu.support.size(); ++k) {
        pts.push_back(nu.support[k]);
        w.push_back(-nu.weights[k]);
    }
    // merge coincident points of the two supports
    std::vector<std::size_t> order(pts.size());
    std::iota(order.begin(), order.end(), 0);
    auto less = [&](std::size_t a, std::size_t b) {
        if (pts[a].regime != pts[b].regime) return pts[a].regime < pts[b].regime;
        return pts[a].y < pts[b].y;
    };
    std::sort(order.begin(), order.end(), less);
    PooledInstance inst;
    for (std::size_t idx : order) {
        if (!inst.support.empty() && inst.support.back() == pts[idx]) {
            inst.cdiff.back() += w[idx];
        } else {
            inst.support.push_back(pts[idx]);
            inst.cdiff.push_back(w[idx]);
        }
    }
    const std::size_t m = inst.support.size();
    inst.dist.assign(m * m, 0.0);
    for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = a + 1; b < m; ++b)
            inst.dist[a * m + b] = inst.dist[b * m + a] = metric(inst.support[a], inst.support[b]);
    return inst;
}

}  // namespace detail

// Flat (dual bounded-Lipschitz) distance between two finitely supported
// probability measures under the hybrid metric. Exact LP optimum with a
// duality-gap certificate; values lie in [0, 2].
inline FmResult fm_distance(const EmpiricalMeasure& mu_in, const EmpiricalMeasure& nu_in,
                            const HybridMetric& metric, const FmOptions& options = {}) {
    if (!mu_in.normalized() || !nu_in.normalized())
        throw ModelError("fm_distance: measures must be normalized probability measures");

    FmResult result;
    const EmpiricalMeasure* mu = &mu_in;
    const EmpiricalMeasure* nu = &nu_in;
    EmpiricalMeasure mu_sub, nu_sub;
    if (mu_in.support.size() + nu_in.support.size() > options.support_cap) {
        const std::size_t atoms = std::max<std::size_t>(options.support_cap / 2, 1);
        std::uint64_t h = 0xCBF29CE484222325ull;
        h = detail::measure_hash(h, mu_in);
        h = detail::measure_hash(h, nu_in);
        result.subsampled = true;
        result.subsample_seed = h;
        Rng rng_mu(h, 0, 0), rng_nu(h, 1, 0);
        mu_sub = detail::resample(mu_in, atoms, rng_mu);
        nu_sub = detail::resample(nu_in, atoms, rng_nu);
        mu = &mu_sub;
        nu = &nu_sub;
    }

    detail::PooledInstance inst = detail::pool_measures(*mu, *nu, metric);
    const std::vector<double> dist = inst.dist;  // kept for the certificate
    detail::FlatMetricSimplex lp(std::move(inst.dist), inst.cdiff);
    lp.solve();
    result.iterations = lp.iterations();

    const auto& f = lp.test_function();
    double primal = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k) {
        if (std::abs(f[k]) > 1.0 + 1e-9)
            throw NumericError("fm_distance: optimal test function violates the sup bound");
        primal += inst.cdiff[k] * std::clamp(f[k], -1.0, 1.0);
    }
    const std::size_t m = f.size();
    for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = a + 1; b < m; ++b)
            result.lipschitz_slack =
                std::max(result.lipschitz_slack, std::abs(f[a] - f[b]) - dist[a * m + b]);

    result.value = lp.objective();
    result.gap = std::abs(result.value - primal);
    if (result.gap > 1e-9 || result.lipschitz_slack > 1e-9)
        throw NumericError("fm_distance: duality certificate failed");
    result.value = std::clamp(result.value, 0.0, 2.0);
    return result;
}

// Independent grid-search oracle for small supports. Every grid point is
// turned into an admissible test function via the inf-convolution
// f_k = min_a (g_a + dist(a,k)) clamped to [-1,1], which is 1-Lipschitz by
// construction and within half a grid step of any admissible optimum; two
// refinement passes around the incumbent tighten the resolution.
inline double fm_bruteforce(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                            const HybridMetric& metric, int grid_levels) {
    if (grid_levels < 3) throw ModelError("fm_bruteforce: need at least 3 grid levels");
    detail::PooledInstance inst = detail::pool_measures(mu, nu, metric);
    const std::size_t m = inst.support.size();
    if (m > 6) throw ModelError("fm_bruteforce: pooled support larger than 6 points");
    if (m == 0) return 0.0;
    if (std::pow(static_cast<double>(grid_levels), static_cast<double>(m)) > 2e7)
        throw ModelError("fm_bruteforce: grid too large for this support size");

    std::vector<double> center(m, 0.0), g(m), f(m), best_f(m, 0.0);
    double half = 1.0;
    double best = -1e300;
    for (int pass = 0; pass < 3; ++pass) {
        const double step = 2.0 * half / (grid_levels - 1);
        std::vector<int> idx(m, 0);
        for (;;) {
            for (std::size_t k = 0; k < m; ++k)
                g[k] = std::clamp(center[k] - half + idx[k] * step, -1.0, 1.0);
            // inf-convolution repair, then evaluate
            for (std::size_t k = 0; k < m; ++k) {
                double v = g[k];
                for (std::size_t a = 0; a < m; ++a) v = std::min(v, g[a] + inst.dist[a * m + k]);
                f[k] = std::clamp(v, -1.0, 1.0);
            }
            double obj = 0.0;
            for (std::size_t k = 0; k < m; ++k) obj += inst.cdiff[k] * f[k];
            if (obj > best) {
                best = obj;
                best_f = f;
            }
            std::size_t carry = 0;
            while (carry < m && ++idx[carry] == grid_levels) idx[carry++] = 0;
            if (carry == m) break;
        }
        center = best_f;
        half = step;
    }
    return std::max(best, 0.0);
}

}  // namespace pdmp
