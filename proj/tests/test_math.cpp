#include <doctest.h>

#include <cmath>

#include "cpi/math.hpp"
#include "cpi/rng.hpp"

using namespace cpi;

TEST_CASE("normal quantile inverts the cdf") {
    for (double p : {1e-12, 1e-6, 0.01, 0.3, 0.5, 0.7, 0.975, 0.996875, 1.0 - 1e-9}) {
        const double x = normal_quantile(p);
        CHECK(normal_cdf(x) == doctest::Approx(p).epsilon(1e-10));
    }
    CHECK(normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(std::isinf(normal_quantile(1.0)));
    CHECK(normal_quantile(0.0) == -kInf);
}

TEST_CASE("reference values") {
    // sqrt(log 4000) for the default kappa
    CHECK(std::sqrt(std::log(4000.0)) == doctest::Approx(2.8799391729864760).epsilon(1e-12));
    // Phi^{-1}(1 - 0.05/16), the Bonferroni bracket at alpha 0.05, 16 moments
    CHECK(normal_quantile(1.0 - 0.05 / 16) == doctest::Approx(2.7343687865331760).epsilon(1e-9));
    CHECK(normal_quantile(1.0 - 0.05 / 16) == doctest::Approx(2.7344).epsilon(2e-4));
    CHECK(normal_pdf(0.0) == doctest::Approx(0.3989422804014327).epsilon(1e-12));
}

TEST_CASE("rng streams are deterministic and independent of construction order") {
    RngStream a(7, RngDomain::test, 3);
    RngStream b(7, RngDomain::test, 3);
    for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());

    RngStream c(7, RngDomain::test, 4);
    bool any_diff = false;
    RngStream a2(7, RngDomain::test, 3);
    for (int i = 0; i < 16; ++i) any_diff |= a2.next() != c.next();
    CHECK(any_diff);
}

TEST_CASE("rng uniform01 lands in [0,1) with a sane mean") {
    RngStream rng(11, RngDomain::test, 0);
    double sum = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform01();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
    }
    CHECK(sum / n == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("rng normal moments") {
    RngStream rng(13, RngDomain::test, 0);
    double s1 = 0.0, s2 = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        s1 += z;
        s2 += z * z;
    }
    CHECK(s1 / n == doctest::Approx(0.0).epsilon(0.05));
    CHECK(s2 / n == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("uniform_index covers the range uniformly") {
    RngStream rng(17, RngDomain::test, 0);
    int counts[7] = {0};
    for (int i = 0; i < 70000; ++i) ++counts[rng.uniform_index(7)];
    for (int c : counts) CHECK(c == doctest::Approx(10000).epsilon(0.06));
}
