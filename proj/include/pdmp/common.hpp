#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace pdmp {

// Continuous coordinate of a hybrid state. The state space lives in R^d for a
// model-fixed d, so a plain vector of doubles is enough.
using Vec = std::vector<double>;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A model datum is inconsistent (bad bounds, non-stochastic rows, ...).
struct ModelError : Error {
    using Error::Error;
};

// A numeric routine failed to meet its contract (bracket lost, rejection cap
// exceeded, LP cycling guard, ...).
struct NumericError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

inline double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

inline double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

inline double distance(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = a[k] - b[k];
        s += d * d;
    }
    return std::sqrt(s);
}

inline Vec sub(const Vec& a, const Vec& b) {
    Vec r(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) r[k] = a[k] - b[k];
    return r;
}

// Numeric knobs shared by the flow/hazard machinery. Wait-time errors bias the
// jump-time laws, so the defaults sit well below the statistical resolution of
// any of the distributional checks.
struct NumericOptions {
    double ode_step = 1e-3;    // RK4 step for vector-field models
    double quad_step = 1e-2;   // hazard quadrature step for closed-form flows
    double hazard_tol = 1e-8;  // target accuracy of the integrated hazard
    double invert_tol = 1e-8;  // target accuracy of hazard inversion
    double proj_tol = 1e-6;    // max admissible projection repair after a step
    double tail_eps = 1e-12;   // truncation level for improper time integrals
};

// Runs fn(k) for k in [0, tasks). Results must be written to per-task slots so
// the outcome does not depend on the thread count.
inline void parallel_for(std::size_t tasks, unsigned threads, const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || tasks <= 1) {
        for (std::size_t k = 0; k < tasks; ++k) fn(k);
        return;
    }
    std::vector<std::thread> pool;
    const unsigned used = std::min<unsigned>(threads, static_cast<unsigned>(tasks));
    std::vector<std::exception_ptr> errors(used);
    for (unsigned w = 0; w < used; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t k = w; k < tasks; k += used) fn(k);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

inline unsigned default_thread_count() {
    if (const char* env = std::getenv("PDMP_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<unsigned>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

}  // namespace pdmp
