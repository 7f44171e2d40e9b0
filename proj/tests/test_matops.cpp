#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mlvb/errors.hpp"
#include "mlvb/matops.hpp"
#include "support.hpp"

using namespace mlvb;
using namespace mlvb::testing;

TEST_CASE("vec and vech stack column by column") {
    const Mat M{{1, 2}, {3, 4}};
    CHECK(vec(M) == Vec{{1, 3, 2, 4}});
    CHECK(vech(M) == Vec{{1, 3, 4}});
    CHECK(vec_inverse(vec(M)) == M);
    const Mat R{{1, 2, 3}, {4, 5, 6}};
    CHECK(vec_inverse(vec(R), 2, 3) == R);
    const Mat S{{1, 3}, {3, 4}};
    CHECK(vech_inverse(vech(S)) == S);
    CHECK(vech_dim(6) == 3);
    CHECK_THROWS_AS(vech_dim(5), ShapeError);
    CHECK_THROWS_AS(vec_inverse(Vec::Zero(5)), ShapeError);
}

TEST_CASE("duplication matrix identities") {
    Rng rng(1);
    for (Index d = 1; d <= 5; ++d) {
        const auto dp = duplication_pair(d);
        CHECK(dp.D.rows() == d * d);
        CHECK(dp.D.cols() == vech_size(d));
        const Mat S = random_spd(rng, d);
        CHECK(max_rel(dp.D * vech(S), vec(S)) < 1e-14);
        CHECK(max_rel(dp.Dplus * vec(S), vech(S)) < 1e-14);
        CHECK(max_rel(dp.Dplus * dp.D, Mat::Identity(vech_size(d), vech_size(d))) < 1e-14);
        const Mat A = gaussian(rng, d, d);
        CHECK(max_rel(dup_t_vec(A), dp.D.transpose() * vec(A)) < 1e-13);
        const Vec eta = gaussian_vec(rng, vech_size(d));
        CHECK(max_rel(dplus_t_unvec(eta), vec_inverse(Vec(dp.Dplus.transpose() * eta), d, d)) < 1e-13);
    }
}

TEST_CASE("symmetric positive definite helpers") {
    Rng rng(2);
    const Mat S = random_spd(rng, 4);
    CHECK(is_spd(S));
    CHECK(max_rel(spd_inverse(S) * S, Mat::Identity(4, 4)) < 1e-12);
    CHECK(std::abs(spd_logdet(S) - std::log(S.determinant())) < 1e-10);
    const Mat R = sym_sqrt(S);
    CHECK(max_rel(R * R, S) < 1e-12);
    CHECK(max_rel(inv_sym_sqrt(S) * R, Mat::Identity(4, 4)) < 1e-12);
    const Mat bad{{1, 2}, {2, 1}};
    CHECK_FALSE(is_spd(bad));
    try {
        spd_inverse(bad, Site::group(3));
        FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
        CHECK(e.kind() == Failure::not_spd);
        CHECK(e.site().i == 3);
    }
}

TEST_CASE("QR solves a least squares problem") {
    Rng rng(3);
    const Mat B = gaussian(rng, 9, 3);
    const Vec b = gaussian_vec(rng, 9);
    const QR qr(B);
    const Vec x = qr.solve_r(Vec(qr.apply_qt(b).head(3)));
    const Vec ref = (B.transpose() * B).ldlt().solve(B.transpose() * b);
    CHECK(max_rel(x, ref) < 1e-12);
    CHECK(max_rel(qr.apply_q(qr.apply_qt(B)), B) < 1e-12);
    const Mat Ri = qr.solve_r(Mat(Mat::Identity(3, 3)));
    CHECK(max_rel(Ri * Ri.transpose(), (B.transpose() * B).inverse()) < 1e-12);
    CHECK(max_rel(qr.solve_rt(Mat(qr.R().transpose())), Mat::Identity(3, 3)) < 1e-12);
}

TEST_CASE("stacking and block diagonal") {
    const Mat a = Mat::Ones(1, 2), b = 2 * Mat::Ones(2, 2);
    CHECK(stack(std::vector<Mat>{a, b}).rows() == 3);
    const Mat D = blockdiag({a, b});
    CHECK(D.rows() == 3);
    CHECK(D.cols() == 4);
    CHECK(D(0, 2) == 0.0);
    CHECK(D(2, 3) == 2.0);
}
