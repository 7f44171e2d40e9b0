#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mlvb/blup.hpp"
#include "mlvb/naive.hpp"
#include "support.hpp"

using namespace mlvb;
using namespace mlvb::testing;

TEST_CASE("two-level BLUP equals generalized least squares and the mixed model equations") {
    Rng rng(30);
    for (int k = 0; k < 10; ++k) {
        const Index p = 2, q = 2;
        const auto data = random_dataset2(rng, p, q, uniform_int(rng, 2, 6), 3, 7);
        const VarianceComponents2 vc{1.3, random_spd(rng, q, 0.5)};
        const auto r = blup_two_level(data, vc);
        // beta_hat = (X^T V^{-1} X)^{-1} X^T V^{-1} y with V block diagonal.
        Mat XtVX = Mat::Zero(p, p);
        Vec XtVy = Vec::Zero(p);
        for (const auto& g : data.groups) {
            const Mat V = g.Z * vc.Sigma * g.Z.transpose() + vc.sigma2 * Mat::Identity(g.y.size(), g.y.size());
            const Mat Vi = V.inverse();
            XtVX += g.X.transpose() * Vi * g.X;
            XtVy += g.X.transpose() * Vi * g.y;
        }
        const Vec beta = XtVX.ldlt().solve(XtVy);
        CHECK(max_rel(r.beta, beta) < 1e-10);
        CHECK(max_rel(r.cov_beta, XtVX.inverse()) < 1e-10);
        for (std::size_t i = 0; i < data.groups.size(); ++i) {
            const auto& g = data.groups[i];
            const Mat V = g.Z * vc.Sigma * g.Z.transpose() + vc.sigma2 * Mat::Identity(g.y.size(), g.y.size());
            const Vec u = vc.Sigma * g.Z.transpose() * V.ldlt().solve(g.y - g.X * beta);
            CHECK(max_rel(r.groups[i].u, u) < 1e-10);
        }
    }
}

TEST_CASE("three-level BLUP matches the dense oracle") {
    Rng rng(31);
    for (int k = 0; k < 10; ++k) {
        const auto data = random_dataset3(rng, 2, 2, 1, uniform_int(rng, 2, 5), 3, 3, 6);
        const VarianceComponents3 vc{0.8, random_spd(rng, 2, 0.5), random_spd(rng, 1, 0.5)};
        const auto r = blup_three_level(data, vc);
        const auto d = dense_blup(data, vc);
        CHECK(max_rel(r.beta, d.mu.head(2)) < 1e-10);
        CHECK(max_rel(r.cov_beta, d.Sigma.topLeftCorner(2, 2)) < 1e-10);
    }
}

TEST_CASE("invalid variance components are rejected") {
    Rng rng(32);
    const auto data = random_dataset2(rng, 2, 2, 3, 3, 5);
    CHECK_THROWS(blup_two_level(data, {-1.0, Mat::Identity(2, 2)}));
    CHECK_THROWS(blup_two_level(data, {1.0, Mat::Identity(3, 3)}));
}
