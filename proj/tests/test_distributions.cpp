#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mlvb/distributions.hpp"
#include "support.hpp"

using namespace mlvb;
using namespace mlvb::testing;

TEST_CASE("MVN natural and common parameters round trip") {
    Rng rng(20);
    for (Index d = 1; d <= 4; ++d) {
        const Vec mu = gaussian_vec(rng, d);
        const Mat S = random_spd(rng, d);
        const auto n = mvn_common_to_natural(mu, S);
        CHECK(max_rel(n.eta1, S.inverse() * mu) < 1e-12);
        const auto c = mvn_natural_to_common(n);
        CHECK(max_rel(c.mu, mu) < 1e-12);
        CHECK(max_rel(c.Sigma, S) < 1e-12);
    }
}

TEST_CASE("Inverse-chi-squared messages") {
    const InvChiSq d{5.0, 2.5};
    const Vec eta = invchisq_params_to_msg(d);
    CHECK(eta(0) == doctest::Approx(-3.5));
    CHECK(eta(1) == doctest::Approx(-1.25));
    const auto back = invchisq_msg_to_params(eta);
    CHECK(back.xi == doctest::Approx(5.0));
    CHECK(back.lambda == doctest::Approx(2.5));
    CHECK(invchisq_recip_mean(d) == doctest::Approx(2.0));
}

TEST_CASE("Inverse-G-Wishart messages and moments") {
    Rng rng(21);
    const Mat L = random_spd(rng, 3);
    const InvGWishart w{Graph::full, 7.0, L};
    const auto back = invgwishart_msg_to_params(invgwishart_params_to_msg(w), 3);
    CHECK(back.xi == doctest::Approx(7.0));
    CHECK(max_rel(back.Lambda, L) < 1e-12);
    // Full graph: E(X^{-1}) = (xi - d + 1) Lambda^{-1}.
    CHECK(max_rel(invgwishart_inverse_mean(w), 5.0 * L.inverse()) < 1e-12);
    // Diagonal graph: each 1 / X_kk is Gamma(xi / 2, Lambda_kk / 2); the off-diagonal part is dropped.
    const auto dg = invgwishart_msg_to_params(invgwishart_params_to_msg({Graph::full, 4.0, L}), 3, Graph::diag);
    CHECK(dg.Lambda(0, 1) == 0.0);
    const Mat expect = 4.0 * Mat(L.diagonal().cwiseInverse().asDiagonal());
    CHECK(max_rel(invgwishart_inverse_mean(dg), expect) < 1e-12);
}

TEST_CASE("samplers are reproducible and positive") {
    std::mt19937_64 a(5), b(5);
    const InvChiSq d{4.0, 1.0};
    for (int k = 0; k < 10; ++k) {
        const double x = sample_invchisq(d, a);
        CHECK(x > 0.0);
        CHECK(x == sample_invchisq(d, b));
    }
    const InvGWishart w{Graph::full, 6.0, Mat::Identity(2, 2)};
    CHECK(is_spd(sample_invgwishart(w, a)));
}
