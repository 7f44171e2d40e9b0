#include "mlvb/solvers.hpp"

#include <cmath>
#include <string>

namespace mlvb {

Index ThreeLevelSparseSystem::q2() const {
    for (const auto& g : groups)
        if (!g.inner.empty()) return g.inner.front().a2.size();
    return 0;
}

Index ThreeLevelLSSystem::p() const {
    for (const auto& g : groups)
        if (!g.inner.empty()) return g.inner.front().B.cols();
    return 0;
}

Index ThreeLevelLSSystem::q1() const {
    for (const auto& g : groups)
        if (!g.inner.empty()) return g.inner.front().Bdot.cols();
    return 0;
}

Index ThreeLevelLSSystem::q2() const {
    for (const auto& g : groups)
        if (!g.inner.empty()) return g.inner.front().Bddot.cols();
    return 0;
}

namespace {

// Inverse of a symmetric invertible block. Indefinite blocks are allowed, only
// numerically singular ones are rejected.
Mat sym_inverse(const Mat& M, Site site) {
    if (!M.allFinite()) throw NumericalError(Failure::non_finite, "block has non-finite entries", site);
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(M));
    if (es.info() != Eigen::Success) throw NumericalError(Failure::singular, "eigendecomposition failed", site);
    const Vec& ev = es.eigenvalues();
    const double big = ev.cwiseAbs().maxCoeff();
    if (!(big > 0.0) || !(ev.cwiseAbs().minCoeff() > kSpdTol * big))
        throw NumericalError(Failure::singular, "block is singular", site);
    const Mat& U = es.eigenvectors();
    return symmetrize(U * ev.cwiseInverse().asDiagonal() * U.transpose());
}

void require(bool ok, const std::string& msg) {
    if (!ok) throw ShapeError(msg);
}

void check_shapes(const TwoLevelSparseSystem& s) {
    const Index p = s.p(), q = s.q();
    require(!s.groups.empty(), "two-level system has no groups");
    require(p >= 1 && q >= 1, "two-level system needs p >= 1 and q >= 1");
    require(s.A11.rows() == p && s.A11.cols() == p, "A11 must be p x p");
    for (std::size_t i = 0; i < s.groups.size(); ++i) {
        const auto& g = s.groups[i];
        const std::string at = " in group " + std::to_string(i + 1);
        require(g.a2.size() == q, "a2 length differs" + at);
        require(g.A22.rows() == q && g.A22.cols() == q, "A22 must be q x q" + at);
        require(g.A12.rows() == p && g.A12.cols() == q, "A12 must be p x q" + at);
    }
}

void check_shapes(const TwoLevelLSSystem& s) {
    const Index p = s.p(), q = s.q();
    require(!s.groups.empty(), "two-level least squares system has no groups");
    require(p >= 1 && q >= 1, "two-level least squares system needs p >= 1 and q >= 1");
    for (std::size_t i = 0; i < s.groups.size(); ++i) {
        const auto& g = s.groups[i];
        const std::string at = " in group " + std::to_string(i + 1);
        const Index n = g.b.size();
        require(g.B.rows() == n && g.B.cols() == p, "B has wrong shape" + at);
        require(g.Bdot.rows() == n && g.Bdot.cols() == q, "Bdot has wrong shape" + at);
    }
}

void check_shapes(const ThreeLevelSparseSystem& s) {
    const Index p = s.p(), q1 = s.q1(), q2 = s.q2();
    require(!s.groups.empty(), "three-level system has no groups");
    require(p >= 1 && q1 >= 1 && q2 >= 1, "three-level system needs p, q1, q2 >= 1");
    require(s.A11.rows() == p && s.A11.cols() == p, "A11 must be p x p");
    for (std::size_t i = 0; i < s.groups.size(); ++i) {
        const auto& g = s.groups[i];
        const std::string at = " in group " + std::to_string(i + 1);
        require(!g.inner.empty(), "no subgroups" + at);
        require(g.a2.size() == q1, "a2 length differs" + at);
        require(g.A22.rows() == q1 && g.A22.cols() == q1, "A22 must be q1 x q1" + at);
        require(g.A12.rows() == p && g.A12.cols() == q1, "A12 must be p x q1" + at);
        for (std::size_t j = 0; j < g.inner.size(); ++j) {
            const auto& h = g.inner[j];
            const std::string at2 = at + ", subgroup " + std::to_string(j + 1);
            require(h.a2.size() == q2, "a2 length differs" + at2);
            require(h.A22.rows() == q2 && h.A22.cols() == q2, "A22 must be q2 x q2" + at2);
            require(h.A12.rows() == p && h.A12.cols() == q2, "A12 must be p x q2" + at2);
            require(h.A12_i.rows() == q1 && h.A12_i.cols() == q2, "A12_i must be q1 x q2" + at2);
        }
    }
}

void check_shapes(const ThreeLevelLSSystem& s) {
    const Index p = s.p(), q1 = s.q1(), q2 = s.q2();
    require(!s.groups.empty(), "three-level least squares system has no groups");
    require(p >= 1 && q1 >= 1 && q2 >= 1, "three-level least squares system needs p, q1, q2 >= 1");
    for (std::size_t i = 0; i < s.groups.size(); ++i) {
        const auto& g = s.groups[i];
        require(!g.inner.empty(), "no subgroups in group " + std::to_string(i + 1));
        for (std::size_t j = 0; j < g.inner.size(); ++j) {
            const auto& h = g.inner[j];
            const std::string at = " in group " + std::to_string(i + 1) + ", subgroup " + std::to_string(j + 1);
            const Index n = h.b.size();
            require(h.B.rows() == n && h.B.cols() == p, "B has wrong shape" + at);
            require(h.Bdot.rows() == n && h.Bdot.cols() == q1, "Bdot has wrong shape" + at);
            require(h.Bddot.rows() == n && h.Bddot.cols() == q2, "Bddot has wrong shape" + at);
        }
    }
}

}  // namespace

TwoLevelSolution solve_two_level_sparse(const TwoLevelSparseSystem& sys) {
    check_shapes(sys);
    const auto m = static_cast<int>(sys.groups.size());
    const Index q = sys.q();

    std::vector<Mat> inv(m);
    Vec omega1 = sys.a1;
    Mat Omega2 = sys.A11;
    for (int i = 0; i < m; ++i) {
        const auto& g = sys.groups[i];
        inv[i] = sym_inverse(g.A22, Site::group(i));
        const Mat W = g.A12 * inv[i];
        omega1 -= W * g.a2;
        Omega2 -= W * g.A12.transpose();
    }

    TwoLevelSolution out;
    out.A11inv = sym_inverse(Omega2, Site::global());
    out.x1 = out.A11inv * omega1;
    out.groups.resize(m);
    const Mat I = Mat::Identity(q, q);
    for (int i = 0; i < m; ++i) {
        const auto& g = sys.groups[i];
        auto& s = out.groups[i];
        s.x2 = inv[i] * (g.a2 - g.A12.transpose() * out.x1);
        s.A12inv = -(inv[i] * g.A12.transpose() * out.A11inv).transpose();
        s.A22inv = symmetrize(inv[i] * (I - g.A12.transpose() * s.A12inv));
    }
    return out;
}

TwoLevelSolution solve_two_level_sparse_ls(const TwoLevelLSSystem& sys) {
    check_shapes(sys);
    const auto m = static_cast<int>(sys.groups.size());
    const Index p = sys.p(), q = sys.q();

    std::vector<QR> qrs;
    qrs.reserve(m);
    std::vector<Vec> c1(m);
    std::vector<Mat> C1(m);

    Index rest_rows = 0;
    for (const auto& g : sys.groups) rest_rows += g.b.size() - q;
    if (rest_rows < p)
        throw NumericalError(Failure::rank_deficient, "too few rows left for the fixed-effect block",
                             Site::global());
    Vec omega3(rest_rows);
    Mat Omega4(rest_rows, p);

    Index at = 0;
    for (int i = 0; i < m; ++i) {
        const auto& g = sys.groups[i];
        qrs.emplace_back(g.Bdot, Site::group(i));
        const Vec c0 = qrs.back().apply_qt(g.b);
        const Mat C0 = qrs.back().apply_qt(g.B);
        const Index r = g.b.size() - q;
        c1[i] = c0.head(q);
        C1[i] = C0.topRows(q);
        omega3.segment(at, r) = c0.tail(r);
        Omega4.middleRows(at, r) = C0.bottomRows(r);
        at += r;
    }

    const QR top(Omega4, Site::global());
    const Vec c = top.apply_qt(omega3).head(p);

    TwoLevelSolution out;
    out.x1 = top.solve_r(c);
    const Mat Rinv = top.solve_r(Mat(Mat::Identity(p, p)));
    out.A11inv = symmetrize(Rinv * Rinv.transpose());
    out.groups.resize(m);
    for (int i = 0; i < m; ++i) {
        const QR& Qi = qrs[i];
        auto& s = out.groups[i];
        s.x2 = Qi.solve_r(Vec(c1[i] - C1[i] * out.x1));
        s.A12inv = -out.A11inv * Qi.solve_r(C1[i]).transpose();
        s.A22inv = symmetrize(Qi.solve_r(Mat(Qi.solve_rt(Mat::Identity(q, q)) - C1[i] * s.A12inv)));
    }
    return out;
}

ThreeLevelSolution solve_three_level_sparse(const ThreeLevelSparseSystem& sys) {
    check_shapes(sys);
    const auto m = static_cast<int>(sys.groups.size());
    const Index q1 = sys.q1(), q2 = sys.q2();

    std::vector<std::vector<Mat>> inv(m);
    std::vector<Vec> h2(m);
    std::vector<Mat> H12(m), Hinv(m);

    Vec omega5 = sys.a1;
    Mat Omega6 = sys.A11;
    for (int i = 0; i < m; ++i) {
        const auto& g = sys.groups[i];
        h2[i] = g.a2;
        H12[i] = g.A12;
        Mat H22 = g.A22;
        inv[i].resize(g.inner.size());
        for (std::size_t j = 0; j < g.inner.size(); ++j) {
            const auto& h = g.inner[j];
            inv[i][j] = sym_inverse(h.A22, Site::subgroup(i, static_cast<int>(j)));
            const Mat Wi = h.A12_i * inv[i][j];
            const Mat W = h.A12 * inv[i][j];
            h2[i] -= Wi * h.a2;
            H12[i] -= W * h.A12_i.transpose();
            H22 -= Wi * h.A12_i.transpose();
            omega5 -= W * h.a2;
            Omega6 -= W * h.A12.transpose();
        }
        Hinv[i] = sym_inverse(H22, Site::group(i));
        omega5 -= H12[i] * Hinv[i] * h2[i];
        Omega6 -= H12[i] * Hinv[i] * H12[i].transpose();
    }

    ThreeLevelSolution out;
    out.A11inv = sym_inverse(Omega6, Site::global());
    out.x1 = out.A11inv * omega5;
    out.groups.resize(m);
    const Mat I1 = Mat::Identity(q1, q1);
    const Mat I2 = Mat::Identity(q2, q2);
    for (int i = 0; i < m; ++i) {
        const auto& g = sys.groups[i];
        auto& s = out.groups[i];
        s.x2 = Hinv[i] * (h2[i] - H12[i].transpose() * out.x1);
        s.A12inv = -(Hinv[i] * H12[i].transpose() * out.A11inv).transpose();
        s.A22inv = symmetrize(Hinv[i] * (I1 - H12[i].transpose() * s.A12inv));
        s.inner.resize(g.inner.size());
        for (std::size_t j = 0; j < g.inner.size(); ++j) {
            const auto& h = g.inner[j];
            const Mat& Ainv = inv[i][j];
            auto& t = s.inner[j];
            t.x2 = Ainv * (h.a2 - h.A12.transpose() * out.x1 - h.A12_i.transpose() * s.x2);
            t.A12inv = -(Ainv * (h.A12.transpose() * out.A11inv + h.A12_i.transpose() * s.A12inv.transpose()))
                            .transpose();
            t.A12inv_i = -(Ainv * (h.A12.transpose() * s.A12inv + h.A12_i.transpose() * s.A22inv)).transpose();
            t.A22inv = symmetrize(Ainv * (I2 - h.A12.transpose() * t.A12inv - h.A12_i.transpose() * t.A12inv_i));
        }
    }
    return out;
}

ThreeLevelSolution solve_three_level_sparse_ls(const ThreeLevelLSSystem& sys) {
    check_shapes(sys);
    const auto m = static_cast<int>(sys.groups.size());
    const Index p = sys.p(), q1 = sys.q1(), q2 = sys.q2();

    struct InnerKeep {
        QR qr;
        Vec d1;
        Mat D1, Ddot1;
    };
    struct OuterKeep {
        QR qr;
        Vec c1;
        Mat C1;
        std::vector<InnerKeep> inner;
    };
    std::vector<OuterKeep> keep;
    keep.reserve(m);

    Index top_rows = 0;
    for (int i = 0; i < m; ++i) {
        Index rows_i = 0;
        for (const auto& h : sys.groups[i].inner) rows_i += h.b.size() - q2;
        if (rows_i < q1)
            throw NumericalError(Failure::rank_deficient, "too few rows left for the level-1 block",
                                 Site::group(i));
        top_rows += rows_i - q1;
    }
    if (top_rows < p)
        throw NumericalError(Failure::rank_deficient, "too few rows left for the fixed-effect block",
                             Site::global());
    Vec omega7(top_rows);
    Mat Omega8(top_rows, p);

    Index at7 = 0;
    for (int i = 0; i < m; ++i) {
        const auto& g = sys.groups[i];
        Index rows_i = 0;
        for (const auto& h : g.inner) rows_i += h.b.size() - q2;
        Vec omega9(rows_i);
        Mat Omega10(rows_i, p), Omega11(rows_i, q1);

        std::vector<InnerKeep> inner;
        inner.reserve(g.inner.size());
        Index at9 = 0;
        for (std::size_t j = 0; j < g.inner.size(); ++j) {
            const auto& h = g.inner[j];
            QR qr(h.Bddot, Site::subgroup(i, static_cast<int>(j)));
            const Vec d0 = qr.apply_qt(h.b);
            const Mat D0 = qr.apply_qt(h.B);
            const Mat Ddot0 = qr.apply_qt(h.Bdot);
            const Index r = h.b.size() - q2;
            omega9.segment(at9, r) = d0.tail(r);
            Omega10.middleRows(at9, r) = D0.bottomRows(r);
            Omega11.middleRows(at9, r) = Ddot0.bottomRows(r);
            at9 += r;
            inner.push_back({std::move(qr), d0.head(q2), D0.topRows(q2), Ddot0.topRows(q2)});
        }

        QR qr_i(Omega11, Site::group(i));
        const Vec c0 = qr_i.apply_qt(omega9);
        const Mat C0 = qr_i.apply_qt(Omega10);
        const Index r = rows_i - q1;
        omega7.segment(at7, r) = c0.tail(r);
        Omega8.middleRows(at7, r) = C0.bottomRows(r);
        at7 += r;
        keep.push_back({std::move(qr_i), c0.head(q1), C0.topRows(q1), std::move(inner)});
    }

    const QR top(Omega8, Site::global());
    const Vec c = top.apply_qt(omega7).head(p);

    ThreeLevelSolution out;
    out.x1 = top.solve_r(c);
    const Mat Rinv = top.solve_r(Mat(Mat::Identity(p, p)));
    out.A11inv = symmetrize(Rinv * Rinv.transpose());
    out.groups.resize(m);
    for (int i = 0; i < m; ++i) {
        const auto& k = keep[i];
        auto& s = out.groups[i];
        s.x2 = k.qr.solve_r(Vec(k.c1 - k.C1 * out.x1));
        s.A12inv = -out.A11inv * k.qr.solve_r(k.C1).transpose();
        s.A22inv = symmetrize(k.qr.solve_r(Mat(k.qr.solve_rt(Mat::Identity(q1, q1)) - k.C1 * s.A12inv)));
        s.inner.resize(k.inner.size());
        for (std::size_t j = 0; j < k.inner.size(); ++j) {
            const auto& h = k.inner[j];
            auto& t = s.inner[j];
            t.x2 = h.qr.solve_r(Vec(h.d1 - h.D1 * out.x1 - h.Ddot1 * s.x2));
            t.A12inv = -h.qr.solve_r(Mat(h.D1 * out.A11inv + h.Ddot1 * s.A12inv.transpose())).transpose();
            t.A12inv_i = -h.qr.solve_r(Mat(h.D1 * s.A12inv + h.Ddot1 * s.A22inv)).transpose();
            t.A22inv = symmetrize(
                h.qr.solve_r(Mat(h.qr.solve_rt(Mat::Identity(q2, q2)) - h.D1 * t.A12inv - h.Ddot1 * t.A12inv_i)));
        }
    }
    return out;
}

}  // namespace mlvb
