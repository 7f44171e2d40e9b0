#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mlvb/mfvb.hpp"
#include "mlvb/naive.hpp"
#include "support.hpp"

using namespace mlvb;
using namespace mlvb::testing;

namespace {

double state_gap(const QState2& a, const QState2& b) {
    double g = std::max(max_rel(a.mu_beta, b.mu_beta), max_rel(a.Sigma_beta, b.Sigma_beta));
    for (std::size_t i = 0; i < a.groups.size(); ++i) {
        g = std::max(g, max_rel(a.groups[i].mu_u, b.groups[i].mu_u));
        g = std::max(g, max_rel(a.groups[i].Sigma_u, b.groups[i].Sigma_u));
        g = std::max(g, max_rel(a.groups[i].Cross_beta_u, b.groups[i].Cross_beta_u));
    }
    g = std::max({g, rel(a.sigma2.lambda, b.sigma2.lambda), rel(a.sigma2.lambda_a, b.sigma2.lambda_a),
                  max_rel(a.Sigma.Lambda, b.Sigma.Lambda), max_rel(a.Sigma.Lambda_A, b.Sigma.Lambda_A)});
    return g;
}

double state_gap(const QState3& a, const QState3& b) {
    double g = std::max(max_rel(a.mu_beta, b.mu_beta), max_rel(a.Sigma_beta, b.Sigma_beta));
    for (std::size_t i = 0; i < a.groups.size(); ++i) {
        const auto &x = a.groups[i], &y = b.groups[i];
        g = std::max({g, max_rel(x.mu_u, y.mu_u), max_rel(x.Sigma_u, y.Sigma_u), max_rel(x.Cross_beta_u, y.Cross_beta_u)});
        for (std::size_t j = 0; j < x.subgroups.size(); ++j) {
            const auto &u = x.subgroups[j], &v = y.subgroups[j];
            g = std::max({g, max_rel(u.mu_u, v.mu_u), max_rel(u.Sigma_u, v.Sigma_u),
                          max_rel(u.Cross_beta_u, v.Cross_beta_u), max_rel(u.Cross_u1_u, v.Cross_u1_u)});
        }
    }
    g = std::max({g, rel(a.sigma2.lambda, b.sigma2.lambda), rel(a.sigma2.lambda_a, b.sigma2.lambda_a),
                  max_rel(a.SigmaL1.Lambda, b.SigmaL1.Lambda), max_rel(a.SigmaL2.Lambda, b.SigmaL2.Lambda),
                  max_rel(a.SigmaL1.Lambda_A, b.SigmaL1.Lambda_A), max_rel(a.SigmaL2.Lambda_A, b.SigmaL2.Lambda_A)});
    return g;
}

}  // namespace

TEST_CASE("two-level step matches the dense step and the literal bound") {
    Rng rng(11);
    for (int rep = 0; rep < 5; ++rep) {
        const Index p = uniform_int(rng, 1, 3), q = uniform_int(rng, 1, 3), m = uniform_int(rng, 2, 6);
        const auto data = random_dataset2(rng, p, q, m, 1, 6);
        const auto pr = test_priors2(p, q);
        QState2 fast = mfvb_init_two_level(data, pr), slow = fast;
        for (int it = 0; it < 20; ++it) {
            mfvb_step_two_level(data, pr, fast);
            naive_mfvb_step(data, pr, slow);
            CHECK(state_gap(fast, slow) < 1e-8);
            CHECK(rel(fast.logdet_coef, slow.logdet_coef) < 1e-8);
            CHECK(rel(fast.elbo, slow.elbo) < 1e-8);
        }
    }
}

TEST_CASE("three-level step matches the dense step and the literal bound") {
    Rng rng(12);
    for (int rep = 0; rep < 5; ++rep) {
        const Index p = uniform_int(rng, 1, 3), q1 = uniform_int(rng, 1, 2), q2 = uniform_int(rng, 1, 2);
        const auto data = random_dataset3(rng, p, q1, q2, uniform_int(rng, 2, 4), 3, 1, 5);
        const auto pr = test_priors3(p, q1, q2);
        QState3 fast = mfvb_init_three_level(data, pr), slow = fast;
        for (int it = 0; it < 20; ++it) {
            mfvb_step_three_level(data, pr, fast);
            naive_mfvb_step(data, pr, slow);
            CHECK(state_gap(fast, slow) < 1e-8);
            CHECK(rel(fast.logdet_coef, slow.logdet_coef) < 1e-8);
            CHECK(rel(fast.elbo, slow.elbo) < 1e-8);
        }
    }
}

TEST_CASE("shape parameters have closed forms and moments are consistent") {
    Rng rng(13);
    const Index p = 2, q = 2;
    const auto data = random_dataset2(rng, p, q, 7, 3, 9);
    const auto pr = default_priors2(p, q);
    const auto fit = mfvb_fit_two_level(data, pr);
    const auto& s = fit.state;
    CHECK(s.sigma2.xi == doctest::Approx(pr.nu_sigma2 + static_cast<double>(data.n_total())));
    CHECK(s.sigma2.xi_a == doctest::Approx(pr.nu_sigma2 + 1.0));
    CHECK(s.Sigma.xi == doctest::Approx(pr.nu_Sigma + 2.0 * q - 2.0 + 7.0));
    CHECK(s.Sigma.xi_A == doctest::Approx(pr.nu_Sigma + q));
    CHECK(s.sigma2.mu_recip * s.sigma2.lambda == doctest::Approx(s.sigma2.xi));
    CHECK(s.sigma2.mu_recip_a * s.sigma2.lambda_a == doctest::Approx(s.sigma2.xi_a));
    CHECK(max_rel(s.Sigma.M_inv, (s.Sigma.xi - q + 1.0) * s.Sigma.Lambda.inverse()) < 1e-12);
}

TEST_CASE("a zero response gives zero posterior means") {
    Rng rng(14);
    auto data = random_dataset2(rng, 2, 2, 5, 3, 6);
    for (auto& g : data.groups) g.y.setZero();
    const auto fit = mfvb_fit_two_level(data, default_priors2(2, 2), {20, 1e-8, true, true});
    CHECK(fit.state.mu_beta.norm() < 1e-12);
    for (const auto& g : fit.state.groups) CHECK(g.mu_u.norm() < 1e-12);
}

TEST_CASE("reordering groups permutes the group blocks only") {
    Rng rng(15);
    const auto data = random_dataset2(rng, 2, 2, 6, 3, 6);
    auto rev = data;
    std::reverse(rev.groups.begin(), rev.groups.end());
    const auto pr = default_priors2(2, 2);
    const auto a = mfvb_fit_two_level(data, pr), b = mfvb_fit_two_level(rev, pr);
    CHECK(a.iterations == b.iterations);
    CHECK(max_rel(a.state.mu_beta, b.state.mu_beta) < 1e-10);
    CHECK(rel(a.state.elbo, b.state.elbo) < 1e-10);
    for (std::size_t i = 0; i < a.state.groups.size(); ++i)
        CHECK(max_rel(a.state.groups[i].mu_u, b.state.groups[a.state.groups.size() - 1 - i].mu_u) < 1e-10);
}

TEST_CASE("fit options are validated and traces recorded") {
    Rng rng(16);
    const auto data = random_dataset2(rng, 2, 2, 4, 3, 6);
    const auto pr = default_priors2(2, 2);
    CHECK_THROWS_AS(mfvb_fit_two_level(data, pr, {0, 1e-8, false, true}), ShapeError);
    CHECK_THROWS_AS(mfvb_fit_two_level(data, pr, {10, 0.0, false, true}), ShapeError);
    const auto f = mfvb_fit_two_level(data, pr, {7, 1e-8, true, true});
    CHECK(f.iterations == 7);
    CHECK(f.trace.size() == 7);
    for (std::size_t t = 1; t < f.trace.size(); ++t) CHECK(f.trace[t].elbo >= f.trace[t - 1].elbo - 1e-10);
}
