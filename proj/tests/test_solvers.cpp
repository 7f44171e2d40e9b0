#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mlvb/naive.hpp"
#include "mlvb/solvers.hpp"
#include "support.hpp"

using namespace mlvb;
using namespace mlvb::testing;

TEST_CASE("two-level solve reproduces the dense inverse") {
    Rng rng(10);
    for (int k = 0; k < 30; ++k) {
        const auto sys = random_two_level_system(rng, uniform_int(rng, 1, 4), uniform_int(rng, 1, 4),
                                                 uniform_int(rng, 1, 8));
        const auto d = dense_assemble(sys);
        const auto s = solve_two_level_sparse(sys);
        const Mat Ainv = d.A.inverse();
        const Vec x = d.A.ldlt().solve(d.a);
        const Index p = sys.p(), q = sys.q();
        CHECK(max_rel(s.x1, x.head(p)) < 1e-10);
        CHECK(max_rel(s.A11inv, Ainv.topLeftCorner(p, p)) < 1e-10);
        for (std::size_t i = 0; i < s.groups.size(); ++i) {
            const Index o = p + static_cast<Index>(i) * q;
            CHECK(max_rel(s.groups[i].x2, x.segment(o, q)) < 1e-10);
            CHECK(max_rel(s.groups[i].A22inv, Ainv.block(o, o, q, q)) < 1e-10);
            CHECK(max_rel(s.groups[i].A12inv, Ainv.block(0, o, p, q)) < 1e-10);
        }
    }
}

TEST_CASE("three-level solve agrees with the dense sub-blocks") {
    Rng rng(11);
    for (int k = 0; k < 30; ++k) {
        const auto sys = random_three_level_system(rng, uniform_int(rng, 1, 3), uniform_int(rng, 1, 3),
                                                   uniform_int(rng, 1, 3), uniform_int(rng, 1, 6), 4);
        const auto s = solve_three_level_sparse(sys);
        const auto r = dense_inverse_subblocks(sys);
        CHECK(max_rel(s.x1, r.x1) < 1e-10);
        CHECK(max_rel(s.A11inv, r.A11inv) < 1e-10);
        for (std::size_t i = 0; i < r.groups.size(); ++i)
            for (std::size_t j = 0; j < r.groups[i].inner.size(); ++j) {
                CHECK(max_rel(s.groups[i].inner[j].A12inv_i, r.groups[i].inner[j].A12inv_i) < 1e-10);
                CHECK(max_rel(s.groups[i].inner[j].x2, r.groups[i].inner[j].x2) < 1e-10);
            }
    }
}

TEST_CASE("least squares solvers match the normal equations") {
    Rng rng(12);
    for (int k = 0; k < 20; ++k) {
        const auto sys = random_two_level_ls(rng, 2, 2, uniform_int(rng, 1, 6), 4);
        const auto s = solve_two_level_sparse_ls(sys);
        const auto r = dense_solve_ls(sys);
        CHECK(max_rel(s.x1, r.x1) < 1e-9);
        CHECK(max_rel(s.A11inv, r.A11inv) < 1e-9);
        const auto sys3 = random_three_level_ls(rng, 2, 2, 1, uniform_int(rng, 1, 5), 3, 4);
        const auto s3 = solve_three_level_sparse_ls(sys3);
        const auto r3 = dense_solve_ls(sys3);
        CHECK(max_rel(s3.x1, r3.x1) < 1e-9);
        CHECK(max_rel(s3.groups[0].A22inv, r3.groups[0].A22inv) < 1e-9);
    }
}

TEST_CASE("failures are reported with their location") {
    Rng rng(13);
    auto sys = random_two_level_system(rng, 2, 2, 4);
    sys.groups[2].A22 = Mat::Zero(2, 2);
    try {
        solve_two_level_sparse(sys);
        FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
        CHECK(e.site().level == 1);
        CHECK(e.site().i == 2);
    }
    auto ls = random_two_level_ls(rng, 2, 2, 3, 3);
    ls.groups[1].Bdot.col(1) = ls.groups[1].Bdot.col(0);
    CHECK_THROWS_AS(solve_two_level_sparse_ls(ls), NumericalError);
    ls = random_two_level_ls(rng, 2, 2, 3, 3);
    ls.groups[1].Bdot = Mat::Zero(ls.groups[1].Bdot.rows(), 3);
    CHECK_THROWS_AS(solve_two_level_sparse_ls(ls), ShapeError);
}
