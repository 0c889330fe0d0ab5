#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "pdmp/common.hpp"
#include "pdmp/model.hpp"
#include "pdmp/space.hpp"

namespace pdmp {

namespace detail {

inline Vec rk4_step(const ModelSpec& m, int i, const Vec& y, double h) {
    const std::size_t d = y.size();
    const Vec k1 = m.field(y, i);
    Vec tmp(d);
    for (std::size_t k = 0; k < d; ++k) tmp[k] = y[k] + 0.5 * h * k1[k];
    const Vec k2 = m.field(tmp, i);
    for (std::size_t k = 0; k < d; ++k) tmp[k] = y[k] + 0.5 * h * k2[k];
    const Vec k3 = m.field(tmp, i);
    for (std::size_t k = 0; k < d; ++k) tmp[k] = y[k] + h * k3[k];
    const Vec k4 = m.field(tmp, i);
    Vec out(d);
    for (std::size_t k = 0; k < d; ++k)
        out[k] = y[k] + (h / 6.0) * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
    return out;
}

}  // namespace detail

// Deterministic motion: S_i(t, y). Closed-form models evaluate directly;
// vector-field models integrate with fixed-step RK4 and repair round-off
// drift back onto the state set after each step.
inline Vec evolve(const ModelSpec& m, int i, const Vec& y, double t) {
    if (t < 0.0) throw ModelError(m.name + ": evolve needs t >= 0");
    if (t == 0.0) return y;
    if (m.has_semiflow()) return m.snap_to_domain(m.semiflow(t, y, i), "semiflow");
    const int steps = std::max(1, static_cast<int>(std::ceil(t / m.numerics.ode_step)));
    const double h = t / steps;
    Vec cur = y;
    for (int s = 0; s < steps; ++s) cur = m.snap_to_domain(detail::rk4_step(m, i, cur, h), "flow step");
    return cur;
}

// Integrated jump rate along the motion from a base state, built lazily on a
// uniform grid. Each cell stores the rate at its endpoints and midpoint; the
// cell cumulative is the integral of the interpolating parabola, so cell sums
// reproduce composite Simpson and inversion can solve the same cubic that the
// forward evaluation uses.
//
// For vector-field models the grid doubles as the RK4 trajectory (nodes at the
// quadrature points, midpoints via half steps), keeping the motion used for
// jump placement and the hazard in lockstep.
class HazardCurve {
  public:
    HazardCurve(const ModelSpec& m, StatePoint x) : model_(&m), base_(std::move(x)) {
        analytic_ = m.has_semiflow();
        h_ = analytic_ ? m.numerics.quad_step : m.numerics.ode_step;
        node_t_ = {0.0};
        node_ell_ = {0.0};
        if (!analytic_) node_y_ = {base_.y};
        node_lam_ = {m.intensity(base_.y)};
    }

    const StatePoint& base() const { return base_; }

    // L(t, x); extends the grid on demand.
    double value(double t) {
        if (t < 0.0) throw ModelError(model_->name + ": hazard needs t >= 0");
        if (t == 0.0) return 0.0;
        const std::size_t cell = ensure_time(t);
        return cell_cumulative(cell, t - node_t_[cell]);
    }

    // Smallest t with L(t, x) = s, up to the inversion tolerance.
    double invert(double s) {
        if (s < 0.0) throw ModelError(model_->name + ": inverse hazard needs s >= 0");
        if (s == 0.0) return 0.0;
        while (node_ell_.back() < s) append_cell();
        // locate the cell whose cumulative straddles s
        const auto it = std::lower_bound(node_ell_.begin(), node_ell_.end(), s);
        std::size_t cell = static_cast<std::size_t>(it - node_ell_.begin());
        if (cell > 0) --cell;
        const double t = node_t_[cell] + solve_cell(cell, s - node_ell_[cell]);
        check_bracket(t, s);
        return t;
    }

    // S_i(t, y) along the cached trajectory.
    Vec state(double t) {
        if (t <= 0.0) return base_.y;
        if (analytic_) return model_->snap_to_domain(model_->semiflow(t, base_.y, base_.regime), "semiflow");
        const std::size_t cell = ensure_time(t);
        const double rest = t - node_t_[cell];
        Vec y = node_y_[cell];
        if (rest > 0.0) y = model_->snap_to_domain(detail::rk4_step(*model_, base_.regime, y, rest), "flow step");
        return y;
    }

    double intensity_at(double t) { return model_->intensity(state(t)); }

  private:
    // Parabola through (0, l0), (h/2, lm), (h, l1); integral from 0 to tau.
    static double parabola_integral(double l0, double lm, double l1, double h, double tau) {
        const double u = tau / h;
        const double c1 = -3.0 * l0 + 4.0 * lm - l1;
        const double c2 = 2.0 * l0 - 4.0 * lm + 2.0 * l1;
        return tau * (l0 + u * (c1 / 2.0 + u * (c2 / 3.0)));
    }

    static double parabola_value(double l0, double lm, double l1, double h, double tau) {
        const double u = tau / h;
        const double c1 = -3.0 * l0 + 4.0 * lm - l1;
        const double c2 = 2.0 * l0 - 4.0 * lm + 2.0 * l1;
        return l0 + u * (c1 + u * c2);
    }

    void append_cell() {
        const std::size_t k = node_t_.size() - 1;
        const double t0 = node_t_[k];
        double lam_mid, lam_end;
        if (analytic_) {
            lam_mid = model_->intensity(model_->semiflow(t0 + 0.5 * h_, base_.y, base_.regime));
            lam_end = model_->intensity(model_->semiflow(t0 + h_, base_.y, base_.regime));
        } else {
            Vec y_mid = model_->snap_to_domain(detail::rk4_step(*model_, base_.regime, node_y_[k], 0.5 * h_), "flow step");
            Vec y_end = model_->snap_to_domain(detail::rk4_step(*model_, base_.regime, y_mid, 0.5 * h_), "flow step");
            lam_mid = model_->intensity(y_mid);
            lam_end = model_->intensity(y_end);
            node_y_.push_back(std::move(y_end));
        }
        mid_lam_.push_back(lam_mid);
        node_lam_.push_back(lam_end);
        node_t_.push_back(h_ * static_cast<double>(node_t_.size()));
        node_ell_.push_back(node_ell_[k] + parabola_integral(node_lam_[k], lam_mid, lam_end, h_, h_));
    }

    std::size_t ensure_time(double t) {
        while (node_t_.back() < t) append_cell();
        if (mid_lam_.empty()) append_cell();
        std::size_t cell = std::min(static_cast<std::size_t>(std::max(t, 0.0) / h_), mid_lam_.size() - 1);
        while (cell > 0 && node_t_[cell] > t) --cell;
        while (cell + 1 < mid_lam_.size() && node_t_[cell + 1] < t) ++cell;
        return cell;
    }

    double cell_cumulative(std::size_t cell, double tau) const {
        return node_ell_[cell] + parabola_integral(node_lam_[cell], mid_lam_[cell], node_lam_[cell + 1], h_, tau);
    }

    // Newton with bisection safeguard on the cell cubic.
    double solve_cell(std::size_t cell, double target) const {
        const double l0 = node_lam_[cell], lm = mid_lam_[cell], l1 = node_lam_[cell + 1];
        double lo = 0.0, hi = h_;
        double tau = h_ * target / std::max(node_ell_[cell + 1] - node_ell_[cell], 1e-300);
        tau = std::clamp(tau, lo, hi);
        for (int it = 0; it < 60; ++it) {
            const double g = parabola_integral(l0, lm, l1, h_, tau) - target;
            if (std::abs(g) <= 0.25 * model_->numerics.invert_tol * std::max(1.0, std::abs(target))) break;
            if (g > 0.0)
                hi = tau;
            else
                lo = tau;
            const double slope = parabola_value(l0, lm, l1, h_, tau);
            double next = slope > 0.0 ? tau - g / slope : -1.0;
            if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
            tau = next;
        }
        return tau;
    }

    // L(t) = s forces t between s/sup(lambda) and s/inf(lambda); a material
    // violation means the declared intensity bounds do not hold.
    void check_bracket(double t, double s) const {
        const double slack = 2.0 * model_->numerics.invert_tol + 1e-9 * std::max(1.0, t);
        if (t < s / model_->intensity_hi - slack || t > s / model_->intensity_lo + slack)
            throw NumericError(model_->name + ": hazard inverse left the [s/sup, s/inf] bracket; intensity bounds look wrong");
    }

    const ModelSpec* model_;
    StatePoint base_;
    bool analytic_ = true;
    double h_ = 0.0;
    std::vector<double> node_t_, node_ell_, node_lam_, mid_lam_;
    std::vector<Vec> node_y_;  // vector-field models only
};

inline double hazard(const ModelSpec& m, const StatePoint& x, double t) {
    HazardCurve curve(m, x);
    return curve.value(t);
}

inline double inverse_hazard(const ModelSpec& m, const StatePoint& x, double s) {
    HazardCurve curve(m, x);
    return curve.invert(s);
}

}  // namespace pdmp
