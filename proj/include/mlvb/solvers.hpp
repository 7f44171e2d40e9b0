#pragma once

#include <vector>

#include "mlvb/matops.hpp"

namespace mlvb {

// A = [A11 A12; A12^T blockdiag(A22_i)] with A12 = [A12_1 ... A12_m].
struct TwoLevelSparseSystem {
    struct Group {
        Vec a2;   // q
        Mat A22;  // q x q
        Mat A12;  // p x q
    };
    Vec a1;   // p
    Mat A11;  // p x p
    std::vector<Group> groups;

    Index p() const { return a1.size(); }
    Index q() const { return groups.empty() ? 0 : groups.front().a2.size(); }
};

// Least squares system b = [b_1; ...; b_m], B = [B_i | blockdiag(Bdot_i)].
struct TwoLevelLSSystem {
    struct Group {
        Vec b;     // n_i
        Mat B;     // n_i x p
        Mat Bdot;  // n_i x q
    };
    std::vector<Group> groups;

    Index p() const { return groups.empty() ? 0 : groups.front().B.cols(); }
    Index q() const { return groups.empty() ? 0 : groups.front().Bdot.cols(); }
};

// x = A^{-1} a and the sub-blocks of A^{-1} at the non-zero positions of A.
struct TwoLevelSolution {
    struct Group {
        Vec x2;
        Mat A22inv;  // q x q
        Mat A12inv;  // p x q
    };
    Vec x1;
    Mat A11inv;
    std::vector<Group> groups;
};

struct ThreeLevelSparseSystem {
    struct Inner {
        Vec a2;     // q2
        Mat A22;    // q2 x q2
        Mat A12;    // p x q2   (beta with level-2 effect)
        Mat A12_i;  // q1 x q2  (level-1 effect with level-2 effect)
    };
    struct Outer {
        Vec a2;    // q1
        Mat A22;   // q1 x q1
        Mat A12;   // p x q1
        std::vector<Inner> inner;
    };
    Vec a1;
    Mat A11;
    std::vector<Outer> groups;

    Index p() const { return a1.size(); }
    Index q1() const { return groups.empty() ? 0 : groups.front().a2.size(); }
    Index q2() const;
};

struct ThreeLevelLSSystem {
    struct Inner {
        Vec b;      // o_ij
        Mat B;      // o_ij x p
        Mat Bdot;   // o_ij x q1
        Mat Bddot;  // o_ij x q2
    };
    struct Outer {
        std::vector<Inner> inner;
    };
    std::vector<Outer> groups;

    Index p() const;
    Index q1() const;
    Index q2() const;
};

struct ThreeLevelSolution {
    struct Inner {
        Vec x2;
        Mat A22inv;    // q2 x q2
        Mat A12inv;    // p x q2
        Mat A12inv_i;  // q1 x q2
    };
    struct Outer {
        Vec x2;
        Mat A22inv;  // q1 x q1
        Mat A12inv;  // p x q1
        std::vector<Inner> inner;
    };
    Vec x1;
    Mat A11inv;
    std::vector<Outer> groups;
};

TwoLevelSolution solve_two_level_sparse(const TwoLevelSparseSystem& sys);
TwoLevelSolution solve_two_level_sparse_ls(const TwoLevelLSSystem& sys);
ThreeLevelSolution solve_three_level_sparse(const ThreeLevelSparseSystem& sys);
ThreeLevelSolution solve_three_level_sparse_ls(const ThreeLevelLSSystem& sys);

}  // namespace mlvb
