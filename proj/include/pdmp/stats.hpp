#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "pdmp/common.hpp"

namespace pdmp::stats {

struct MeanSE {
    double mean = 0.0;
    double se = 0.0;
    std::size_t n = 0;
};

inline MeanSE mean_se(std::span<const double> xs) {
    MeanSE r;
    r.n = xs.size();
    if (r.n == 0) return r;
    double m = 0.0;
    for (double x : xs) m += x;
    m /= static_cast<double>(r.n);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    r.mean = m;
    r.se = r.n > 1 ? std::sqrt(ss / (static_cast<double>(r.n) * (static_cast<double>(r.n) - 1.0))) : 0.0;
    return r;
}

// Survival function of the Kolmogorov distribution, with Stephens' finite-n
// correction folded into the argument by the callers.
inline double kolmogorov_sf(double lambda) {
    if (lambda < 1e-8) return 1.0;
    double sum = 0.0;
    double sign = 1.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += sign * term;
        sign = -sign;
        if (term < 1e-16) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

// One-sample KS against a given CDF.
inline KsResult ks_one_sample(std::vector<double> xs, const std::function<double(double)>& cdf) {
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        const double f = cdf(xs[k]);
        d = std::max(d, std::abs(f - static_cast<double>(k) / n));
        d = std::max(d, std::abs(static_cast<double>(k + 1) / n - f));
    }
    const double sn = std::sqrt(n);
    return {d, kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d)};
}

// Two-sample KS.
inline KsResult ks_two_sample(std::vector<double> xs, std::vector<double> ys) {
    std::sort(xs.begin(), xs.end());
    std::sort(ys.begin(), ys.end());
    const double nx = static_cast<double>(xs.size());
    const double ny = static_cast<double>(ys.size());
    double d = 0.0;
    std::size_t i = 0, j = 0;
    while (i < xs.size() && j < ys.size()) {
        const double v = std::min(xs[i], ys[j]);
        while (i < xs.size() && xs[i] <= v) ++i;
        while (j < ys.size() && ys[j] <= v) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / nx - static_cast<double>(j) / ny));
    }
    const double ne = std::sqrt(nx * ny / (nx + ny));
    return {d, kolmogorov_sf((ne + 0.12 + 0.11 / ne) * d)};
}

// Regularized upper incomplete gamma Q(s, x) (series + continued fraction).
inline double gamma_q(double s, double x) {
    if (x < 0.0 || s <= 0.0) return 1.0;
    if (x == 0.0) return 1.0;
    if (x < s + 1.0) {
        // P(s,x) by series, return 1 - P
        double ap = s;
        double sum = 1.0 / s;
        double del = sum;
        for (int n = 0; n < 500; ++n) {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if (std::abs(del) < std::abs(sum) * 1e-15) break;
        }
        return 1.0 - sum * std::exp(-x + s * std::log(x) - std::lgamma(s));
    }
    // Q(s,x) by Lentz continued fraction
    const double tiny = 1e-300;
    double b = x + 1.0 - s;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int n = 1; n < 500; ++n) {
        const double an = -n * (n - s);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-15) break;
    }
    return std::exp(-x + s * std::log(x) - std::lgamma(s)) * h;
}

struct Chi2Result {
    double statistic = 0.0;
    double p_value = 1.0;
    int dof = 0;
};

// Goodness of fit of category counts against given probabilities.
inline Chi2Result chi2_goodness(std::span<const long> counts, std::span<const double> probs) {
    double n = 0.0;
    for (long c : counts) n += static_cast<double>(c);
    Chi2Result r;
    for (std::size_t k = 0; k < counts.size(); ++k) {
        const double e = n * probs[k];
        if (e <= 0.0) continue;
        const double d = static_cast<double>(counts[k]) - e;
        r.statistic += d * d / e;
        ++r.dof;
    }
    r.dof = std::max(r.dof - 1, 1);
    r.p_value = gamma_q(0.5 * r.dof, 0.5 * r.statistic);
    return r;
}

// Homogeneity of two category-count rows (2 x k contingency table).
inline Chi2Result chi2_two_sample(std::span<const long> a, std::span<const long> b) {
    double na = 0.0, nb = 0.0;
    for (long c : a) na += static_cast<double>(c);
    for (long c : b) nb += static_cast<double>(c);
    const double n = na + nb;
    Chi2Result r;
    int cells = 0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double col = static_cast<double>(a[k] + b[k]);
        if (col <= 0.0) continue;
        const double ea = na * col / n;
        const double eb = nb * col / n;
        const double da = static_cast<double>(a[k]) - ea;
        const double db = static_cast<double>(b[k]) - eb;
        r.statistic += da * da / ea + db * db / eb;
        ++cells;
    }
    r.dof = std::max(cells - 1, 1);
    r.p_value = gamma_q(0.5 * r.dof, 0.5 * r.statistic);
    return r;
}

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    std::size_t n = 0;
};

inline LineFit fit_line(std::span<const double> xs, std::span<const double> ys) {
    LineFit f;
    f.n = xs.size();
    if (f.n < 2) return f;
    double mx = 0.0, my = 0.0;
    for (std::size_t k = 0; k < f.n; ++k) {
        mx += xs[k];
        my += ys[k];
    }
    mx /= static_cast<double>(f.n);
    my /= static_cast<double>(f.n);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t k = 0; k < f.n; ++k) {
        const double dx = xs[k] - mx;
        const double dy = ys[k] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (sxx <= 0.0) return f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    return f;
}

}  // namespace pdmp::stats
