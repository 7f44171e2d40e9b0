#pragma once

#include <random>

#include "mlvb/data.hpp"
#include "mlvb/mfvb.hpp"
#include "mlvb/naive.hpp"
#include "mlvb/solvers.hpp"

namespace mlvb::testing {

using Rng = std::mt19937_64;

inline int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

inline Mat gaussian(Rng& rng, Index r, Index c) {
    std::normal_distribution<double> z;
    Mat M(r, c);
    for (Index j = 0; j < c; ++j)
        for (Index i = 0; i < r; ++i) M(i, j) = z(rng);
    return M;
}

inline Vec gaussian_vec(Rng& rng, Index n) { return gaussian(rng, n, 1).col(0); }

inline Mat random_spd(Rng& rng, Index d, double ridge = 1.0) {
    const Mat G = gaussian(rng, d, d);
    return G * G.transpose() + ridge * Mat::Identity(d, d);
}

inline double max_rel(const Mat& a, const Mat& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return 1e300;
    const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
    return (a - b).cwiseAbs().maxCoeff() / scale;
}

inline double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

// Random SPD two-level sparse system. The dense matrix is made diagonally
// dominant block by block so it stays well conditioned.
inline TwoLevelSparseSystem random_two_level_system(Rng& rng, Index p, Index q, Index m) {
    TwoLevelSparseSystem s;
    s.a1 = gaussian_vec(rng, p);
    s.A11 = random_spd(rng, p, 1.0);
    for (Index i = 0; i < m; ++i) {
        TwoLevelSparseSystem::Group g;
        g.a2 = gaussian_vec(rng, q);
        g.A12 = 0.3 * gaussian(rng, p, q);
        g.A22 = random_spd(rng, q, 1.0) + g.A12.transpose() * g.A12 * static_cast<double>(m);
        s.A11 += g.A12 * g.A12.transpose();
        s.groups.push_back(g);
    }
    s.A11 += static_cast<double>(m) * Mat::Identity(p, p);
    return s;
}

inline ThreeLevelSparseSystem random_three_level_system(Rng& rng, Index p, Index q1, Index q2, Index m, int max_n) {
    ThreeLevelSparseSystem s;
    s.a1 = gaussian_vec(rng, p);
    s.A11 = random_spd(rng, p, 1.0);
    for (Index i = 0; i < m; ++i) {
        ThreeLevelSparseSystem::Outer g;
        g.a2 = gaussian_vec(rng, q1);
        g.A12 = 0.3 * gaussian(rng, p, q1);
        g.A22 = random_spd(rng, q1, 1.0);
        const int n = uniform_int(rng, 1, max_n);
        for (int j = 0; j < n; ++j) {
            ThreeLevelSparseSystem::Inner h;
            h.a2 = gaussian_vec(rng, q2);
            h.A12 = 0.3 * gaussian(rng, p, q2);
            h.A12_i = 0.3 * gaussian(rng, q1, q2);
            h.A22 = random_spd(rng, q2, 1.0);
            g.inner.push_back(h);
        }
        s.groups.push_back(g);
    }
    // Shift every diagonal block by the largest off-diagonal row sum so the
    // dense matrix is diagonally dominant.
    const Mat A = dense_assemble(s).A;
    const double shift = 1.0 + (A - Mat(A.diagonal().asDiagonal())).cwiseAbs().rowwise().sum().maxCoeff();
    s.A11 += shift * Mat::Identity(p, p);
    for (auto& g : s.groups) {
        g.A22 += shift * Mat::Identity(q1, q1);
        for (auto& h : g.inner) h.A22 += shift * Mat::Identity(q2, q2);
    }
    return s;
}

inline TwoLevelLSSystem random_two_level_ls(Rng& rng, Index p, Index q, Index m, int max_n) {
    TwoLevelLSSystem s;
    for (Index i = 0; i < m; ++i) {
        const Index n = uniform_int(rng, 1, max_n) + q;
        s.groups.push_back({gaussian_vec(rng, n), gaussian(rng, n, p), gaussian(rng, n, q)});
    }
    // Make sure the fixed-effect columns are estimable overall.
    if (s.groups.front().B.rows() < p + q) {
        auto& g = s.groups.front();
        const Index extra = p + q;
        g.b.conservativeResize(g.b.size() + extra);
        g.b.tail(extra) = gaussian_vec(rng, extra);
        Mat B = gaussian(rng, g.B.rows() + extra, p);
        B.topRows(g.B.rows()) = g.B;
        Mat Bd = gaussian(rng, g.Bdot.rows() + extra, q);
        Bd.topRows(g.Bdot.rows()) = g.Bdot;
        g.B = B;
        g.Bdot = Bd;
    }
    return s;
}

inline ThreeLevelLSSystem random_three_level_ls(Rng& rng, Index p, Index q1, Index q2, Index m, int max_n,
                                                int max_o) {
    ThreeLevelLSSystem s;
    for (Index i = 0; i < m; ++i) {
        ThreeLevelLSSystem::Outer g;
        const int n = uniform_int(rng, 1, max_n);
        for (int j = 0; j < n; ++j) {
            const Index o = uniform_int(rng, 1, max_o) + q2 + (j == 0 ? q1 : 0) + (i == 0 && j == 0 ? p : 0);
            g.inner.push_back({gaussian_vec(rng, o), gaussian(rng, o, p), gaussian(rng, o, q1), gaussian(rng, o, q2)});
        }
        s.groups.push_back(g);
    }
    return s;
}

inline GroupedDataset2 random_dataset2(Rng& rng, Index p, Index q, Index m, int lo, int hi) {
    GroupedDataset2 d;
    for (Index i = 0; i < m; ++i) {
        const int n = uniform_int(rng, lo, hi);
        Mat X = gaussian(rng, n, p);
        X.col(0).setOnes();
        Mat Z = X.leftCols(std::min(p, q));
        if (q > p) {
            Z.conservativeResize(n, q);
            Z.rightCols(q - p) = gaussian(rng, n, q - p);
        }
        const Vec u = gaussian_vec(rng, q);
        const Vec y = X * Vec::LinSpaced(p, 0.5, 1.5) + Z * u + gaussian_vec(rng, n);
        d.groups.push_back({y, X, Z});
    }
    return d;
}

inline GroupedDataset3 random_dataset3(Rng& rng, Index p, Index q1, Index q2, Index m, int max_n, int lo, int hi) {
    GroupedDataset3 d;
    for (Index i = 0; i < m; ++i) {
        GroupedDataset3::Group g;
        const Vec u1 = gaussian_vec(rng, q1);
        const int n = uniform_int(rng, 1, max_n);
        for (int j = 0; j < n; ++j) {
            const int o = uniform_int(rng, lo, hi);
            Mat X = gaussian(rng, o, p);
            X.col(0).setOnes();
            const Mat Z1 = gaussian(rng, o, q1);
            const Mat Z2 = gaussian(rng, o, q2);
            const Vec y = X * Vec::LinSpaced(p, 0.5, 1.5) + Z1 * u1 + Z2 * (0.7 * gaussian_vec(rng, q2)) +
                          gaussian_vec(rng, o);
            g.subgroups.push_back({y, X, Z1, Z2});
        }
        d.groups.push_back(g);
    }
    return d;
}

// Moderate priors so that tiny random datasets give well-conditioned fits.
inline Priors2 test_priors2(Index p, Index q) {
    Priors2 pr = default_priors2(p, q);
    pr.Sigma_beta = 100.0 * Mat::Identity(p, p);
    pr.s_sigma2 = 10.0;
    pr.s_Sigma = Vec::Constant(q, 10.0);
    return pr;
}

inline Priors3 test_priors3(Index p, Index q1, Index q2) {
    Priors3 pr = default_priors3(p, q1, q2);
    pr.Sigma_beta = 100.0 * Mat::Identity(p, p);
    pr.s_sigma2 = 10.0;
    pr.s_SigmaL1 = Vec::Constant(q1, 10.0);
    pr.s_SigmaL2 = Vec::Constant(q2, 10.0);
    return pr;
}

}  // namespace mlvb::testing
