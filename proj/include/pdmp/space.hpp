#pragma once

#include "pdmp/common.hpp"

namespace pdmp {

// Hybrid state: continuous coordinate in a closed subset of R^d plus a regime
// index in {1, ..., N}.
struct StatePoint {
    Vec y;
    int regime = 1;

    bool operator==(const StatePoint& o) const { return regime == o.regime && y == o.y; }
};

inline StatePoint state1d(double y, int regime) { return StatePoint{Vec{y}, regime}; }

// Metric on the hybrid space: Euclidean part plus a fixed penalty c > 0 for a
// regime mismatch.
struct HybridMetric {
    double c = 1.0;

    double operator()(const StatePoint& a, const StatePoint& b) const {
        return distance(a.y, b.y) + (a.regime == b.regime ? 0.0 : c);
    }
};

inline double rho_c(const HybridMetric& m, const StatePoint& a, const StatePoint& b) { return m(a, b); }

}  // namespace pdmp
