#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mlvb/mfvb.hpp"
#include "mlvb/naive.hpp"
#include "mlvb/vmp.hpp"
#include "support.hpp"

using namespace mlvb;
using namespace mlvb::testing;

TEST_CASE("vmp converges to the coordinate ascent fixed point") {
    Rng rng(5);
    FitOptions opts;
    opts.tol = 1e-15;
    opts.max_iter = 3000;
    for (int rep = 0; rep < 3; ++rep) {
        const Index p = 2, q = 2, m = uniform_int(rng, 3, 8);
        const auto data = random_dataset2(rng, p, q, m, 3, 8);
        const auto pr = test_priors2(p, q);
        const auto a = mfvb_fit_two_level(data, pr, opts);
        const auto b = vmp_fit_two_level(data, pr, opts);
        CHECK(max_rel(a.state.mu_beta, b.state.mu_beta) < 1e-6);
        CHECK(max_rel(a.state.Sigma_beta, b.state.Sigma_beta) < 1e-6);
        CHECK(rel(a.state.sigma2.lambda, b.state.sigma2.lambda) < 1e-6);
        CHECK(max_rel(a.state.Sigma.Lambda, b.state.Sigma.Lambda) < 1e-6);
    }
}

TEST_CASE("vmp three-level") {
    Rng rng(6);
    FitOptions opts;
    opts.tol = 1e-15;
    opts.max_iter = 3000;
    for (int rep = 0; rep < 3; ++rep) {
        const auto data = random_dataset3(rng, 2, 2, 1, uniform_int(rng, 2, 5), 4, 3, 8);
        const auto pr = test_priors3(2, 2, 1);
        const auto a = mfvb_fit_three_level(data, pr, opts);
        const auto b = vmp_fit_three_level(data, pr, opts);
        CHECK(max_rel(a.state.mu_beta, b.state.mu_beta) < 1e-6);
        CHECK(max_rel(a.state.SigmaL2.Lambda, b.state.SigmaL2.Lambda) < 1e-6);
    }
}

TEST_CASE("natural parameter vectors have the block layout sizes") {
    Rng rng(7);
    const auto d2 = random_dataset2(rng, 3, 2, 5, 2, 4);
    const auto p2 = partition_of(d2);
    CHECK(p2.size() == 3 + 6 + 5 * (2 + 3 + 6));
    const auto d3 = random_dataset3(rng, 2, 2, 1, 3, 4, 2, 4);
    const auto p3 = partition_of(d3);
    CHECK(p3.size() == 2 + 3 + 3 * (2 + 3 + 4) + d3.n_subgroups() * (1 + 1 + 2 + 2));
    CHECK(p3.inner(0, 0) == p3.outer(3));
}

TEST_CASE("natural and common parameters round trip through the streamlined solver") {
    Rng rng(8);
    const auto data = random_dataset2(rng, 2, 2, 4, 3, 6);
    const auto part = partition_of(data);
    const auto sys = random_two_level_system(rng, 2, 2, 4);
    const auto dense = dense_assemble(sys);
    const Vec mu = dense.A.ldlt().solve(dense.a);
    const auto eta = two_level_common_to_natural(part, mu, dense.A);
    const auto back = two_level_natural_to_common(eta);
    const Mat Sigma = dense.A.inverse();
    CHECK(max_rel(back.blocks.x1, mu.head(2)) < 1e-10);
    CHECK(max_rel(back.blocks.A11inv, Sigma.topLeftCorner(2, 2)) < 1e-10);
    CHECK(max_rel(back.blocks.groups[3].A12inv, Sigma.block(0, 8, 2, 2)) < 1e-10);
    CHECK(rel(back.logdet, std::log(Sigma.determinant())) < 1e-10);
}

TEST_CASE("fragments leave converged messages unchanged") {
    Rng rng(9);
    const auto data = random_dataset2(rng, 2, 2, 5, 3, 7);
    const auto pr = test_priors2(2, 2);
    auto edges = vmp_init_edges(data, pr);
    for (int it = 0; it < 2000; ++it) {
        fragment_gauss_lik_2(data, edges);
        fragment_gauss_pen_2(pr, edges);
        fragment_noise_chain(pr.nu_sigma2, pr.s_sigma2, edges.noise);
        fragment_covariance_chain(pr.nu_Sigma, pr.s_Sigma, edges.Sigma);
    }
    const auto before = edges;
    fragment_gauss_lik_2(data, edges);
    fragment_gauss_pen_2(pr, edges);
    fragment_noise_chain(pr.nu_sigma2, pr.s_sigma2, edges.noise);
    fragment_covariance_chain(pr.nu_Sigma, pr.s_Sigma, edges.Sigma);
    CHECK(max_rel(edges.coef().values, before.coef().values) < 1e-10);
    CHECK(max_rel(edges.noise.sigma2(), before.noise.sigma2()) < 1e-10);
    CHECK(max_rel(edges.Sigma.Sigma(), before.Sigma.Sigma()) < 1e-10);
    CHECK(max_rel(edges.Sigma.A(), before.Sigma.A()) < 1e-10);
}
