#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "pdmp/model.hpp"
#include "pdmp/rng.hpp"
#include "support/oracles.hpp"

using namespace pdmp;

TEST_CASE("lm1d passes validation with zero row-sum deviation") {
    const ModelSpec m = lm1d();
    const ValidationReport r = validate_model(m, 1000, 2024);
    CHECK(r.passed);
    const auto* row = r.find("switch_row_stochastic");
    REQUIRE(row != nullptr);
    CHECK(row->worst == 0.0);
}

TEST_CASE("non-stochastic switching row is reported") {
    ModelSpec m = lm1d();
    m.switching = [](int, const Vec&) { return std::vector<double>{0.6, 0.6}; };
    const ValidationReport r = validate_model(m, 50, 1);
    CHECK_FALSE(r.passed);
    const auto* row = r.find("switch_row_stochastic");
    REQUIRE(row != nullptr);
    CHECK_FALSE(row->pass);
    CHECK(row->worst == Catch::Approx(0.2).margin(1e-12));
    CHECK_FALSE(row->witness.empty());
}

TEST_CASE("zero intensity bound is rejected outright") {
    ModelSpec m = lm1d();
    m.intensity = [](const Vec&) { return 0.0; };
    m.intensity_lo = 0.0;
    m.intensity_hi = 0.0;
    CHECK_THROWS_AS(validate_model(m, 10, 1), ModelError);
}

TEST_CASE("empty mark interval is rejected") {
    ModelSpec m = lm1d();
    m.theta = ThetaInterval{1.0, 1.0};
    CHECK_THROWS_AS(validate_model(m, 10, 1), ModelError);
}

TEST_CASE("undersized density envelope is reported") {
    ModelSpec m = lm1d();
    m.density_max = 0.5;
    const ValidationReport r = validate_model(m, 50, 3);
    CHECK_FALSE(r.passed);
    const auto* env = r.find("density_envelope");
    REQUIRE(env != nullptr);
    CHECK(env->worst == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("lm1d semiflows satisfy the composition identity exactly") {
    const ModelSpec m = lm1d();
    Rng rng(5, 0, 0);
    for (int k = 0; k < 500; ++k) {
        const double s = rng.uniform(0, 3), t = rng.uniform(0, 3), y = 5.0 * rng.exp1();
        for (int i = 1; i <= 2; ++i) {
            const Vec once = m.semiflow(s + t, Vec{y}, i);
            const Vec twice = m.semiflow(s, m.semiflow(t, Vec{y}, i), i);
            CHECK(std::abs(once[0] - twice[0]) <= 1e-12 * std::max(1.0, std::abs(once[0])));
        }
    }
}

TEST_CASE("lm1d flows contract distances at rate e^{-t}") {
    const ModelSpec m = lm1d();
    Rng rng(6, 0, 0);
    for (int k = 0; k < 500; ++k) {
        const double t = rng.uniform(0, 4);
        const double y1 = 4.0 * rng.u01(), y2 = 4.0 * rng.u01();
        for (int i = 1; i <= 2; ++i) {
            const double lhs = std::abs(m.semiflow(t, Vec{y1}, i)[0] - m.semiflow(t, Vec{y2}, i)[0]);
            CHECK(lhs == Catch::Approx(std::exp(-t) * std::abs(y1 - y2)).margin(1e-12));
        }
    }
}

TEST_CASE("builtin registry resolves names and parameters") {
    CHECK(make_builtin("lm1d").has_value());
    CHECK(make_builtin("lm1d_field").has_value());
    CHECK_FALSE(make_builtin("no_such_model").has_value());
    const auto c = make_builtin("const1d", {{"rate", 2.5}});
    REQUIRE(c.has_value());
    CHECK(c->intensity_lo == 2.5);
    CHECK(c->intensity(Vec{3.0}) == 2.5);
}
