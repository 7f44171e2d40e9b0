#include "mlvb/matops.hpp"

#include <cmath>

namespace mlvb {

Vec vec(const Mat& M) {
    return Eigen::Map<const Vec>(M.data(), M.size());
}

Vec vech(const Mat& M) {
    if (M.rows() != M.cols()) throw ShapeError("vech: matrix is not square");
    const Index d = M.rows();
    Vec v(vech_size(d));
    Index k = 0;
    for (Index c = 0; c < d; ++c)
        for (Index r = c; r < d; ++r) v(k++) = M(r, c);
    return v;
}

Mat vec_inverse(const Vec& v, Index rows, Index cols) {
    if (rows < 0 || cols < 0 || v.size() != rows * cols)
        throw ShapeError("vec_inverse: length " + std::to_string(v.size()) + " is not " +
                         std::to_string(rows) + "x" + std::to_string(cols));
    return Eigen::Map<const Mat>(v.data(), rows, cols);
}

Mat vec_inverse(const Vec& v) {
    const auto d = static_cast<Index>(std::llround(std::sqrt(static_cast<double>(v.size()))));
    if (d * d != v.size()) throw ShapeError("vec_inverse: length is not a perfect square");
    return vec_inverse(v, d, d);
}

Index vech_dim(Index len) {
    const auto d = static_cast<Index>(
        std::llround((std::sqrt(8.0 * static_cast<double>(len) + 1.0) - 1.0) / 2.0));
    if (vech_size(d) != len)
        throw ShapeError("length " + std::to_string(len) + " is not a half-vectorization size");
    return d;
}

Mat vech_inverse(const Vec& v) {
    const Index d = vech_dim(v.size());
    Mat M(d, d);
    Index k = 0;
    for (Index c = 0; c < d; ++c)
        for (Index r = c; r < d; ++r) {
            M(r, c) = v(k);
            M(c, r) = v(k);
            ++k;
        }
    return M;
}

DuplicationPair duplication_pair(Index d) {
    if (d < 1) throw ShapeError("duplication_pair: order must be at least 1");
    DuplicationPair out;
    out.d = d;
    out.D = Mat::Zero(d * d, vech_size(d));
    Index k = 0;
    for (Index c = 0; c < d; ++c)
        for (Index r = c; r < d; ++r) {
            out.D(r + c * d, k) = 1.0;
            out.D(c + r * d, k) = 1.0;
            ++k;
        }
    const Mat DtD = out.D.transpose() * out.D;
    out.Dplus = DtD.ldlt().solve(out.D.transpose());
    return out;
}

Vec dup_t_vec(const Mat& M) {
    if (M.rows() != M.cols()) throw ShapeError("dup_t_vec: matrix is not square");
    const Index d = M.rows();
    Vec v(vech_size(d));
    Index k = 0;
    for (Index c = 0; c < d; ++c)
        for (Index r = c; r < d; ++r) v(k++) = (r == c) ? M(r, c) : M(r, c) + M(c, r);
    return v;
}

Mat dplus_t_unvec(const Vec& eta) {
    const Index d = vech_dim(eta.size());
    Mat M(d, d);
    Index k = 0;
    for (Index c = 0; c < d; ++c)
        for (Index r = c; r < d; ++r) {
            const double x = (r == c) ? eta(k) : 0.5 * eta(k);
            M(r, c) = x;
            M(c, r) = x;
            ++k;
        }
    return M;
}

Mat symmetrize(const Mat& M) {
    return 0.5 * (M + M.transpose());
}

namespace {

Eigen::SelfAdjointEigenSolver<Mat> checked_eigen(const Mat& M, Site site, double tol) {
    if (M.rows() != M.cols()) throw ShapeError("expected a square matrix");
    if (!M.allFinite()) throw NumericalError(Failure::non_finite, "matrix has non-finite entries", site);
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(M));
    if (es.info() != Eigen::Success)
        throw NumericalError(Failure::not_spd, "eigendecomposition failed", site);
    const Vec& ev = es.eigenvalues();
    if (ev.size() > 0 && !(ev(0) > tol * ev(ev.size() - 1) && ev(ev.size() - 1) > 0.0))
        throw NumericalError(Failure::not_spd, "matrix is not positive definite", site);
    return es;
}

}  // namespace

bool is_spd(const Mat& M, double tol) {
    try {
        checked_eigen(M, {}, tol);
        return true;
    } catch (const NumericalError&) {
        return false;
    }
}

Mat spd_inverse(const Mat& M, Site site) {
    const auto es = checked_eigen(M, site, kSpdTol);
    const Mat& U = es.eigenvectors();
    return symmetrize(U * es.eigenvalues().cwiseInverse().asDiagonal() * U.transpose());
}

double spd_logdet(const Mat& M, Site site) {
    const auto es = checked_eigen(M, site, kSpdTol);
    return es.eigenvalues().array().log().sum();
}

Mat sym_sqrt(const Mat& M, Site site) {
    const auto es = checked_eigen(M, site, kSpdTol);
    const Mat& U = es.eigenvectors();
    return symmetrize(U * es.eigenvalues().cwiseSqrt().asDiagonal() * U.transpose());
}

Mat inv_sym_sqrt(const Mat& M, Site site) {
    return spd_inverse(sym_sqrt(M, site), site);
}

QR::QR(const Mat& M, Site site) {
    if (M.rows() < M.cols())
        throw NumericalError(Failure::rank_deficient,
                             "QR needs at least as many rows as columns (" +
                                 std::to_string(M.rows()) + " < " + std::to_string(M.cols()) + ")",
                             site);
    if (!M.allFinite()) throw NumericalError(Failure::non_finite, "QR input has non-finite entries", site);
    qr_.compute(M);
    const auto& packed = qr_.matrixQR();
    for (Index k = 0; k < M.cols(); ++k) {
        const double colnorm = M.col(k).norm();
        if (!(std::abs(packed(k, k)) > kRankTol * colnorm) || colnorm == 0.0)
            throw NumericalError(Failure::rank_deficient,
                                 "QR pivot " + std::to_string(k + 1) + " below tolerance", site);
    }
}

Mat QR::apply_qt(const Mat& M) const {
    if (M.rows() != rows()) throw ShapeError("QR::apply_qt: row mismatch");
    return qr_.householderQ().adjoint() * M;
}

Vec QR::apply_qt(const Vec& v) const {
    if (v.size() != rows()) throw ShapeError("QR::apply_qt: length mismatch");
    Vec out = v;
    out.applyOnTheLeft(qr_.householderQ().adjoint());
    return out;
}

Mat QR::apply_q(const Mat& M) const {
    if (M.rows() != rows()) throw ShapeError("QR::apply_q: row mismatch");
    return qr_.householderQ() * M;
}

Mat QR::R() const {
    const Index p = cols();
    return qr_.matrixQR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
}

Mat QR::solve_r(const Mat& B) const {
    const Index p = cols();
    return qr_.matrixQR().topLeftCorner(p, p).triangularView<Eigen::Upper>().solve(B);
}

Vec QR::solve_r(const Vec& b) const {
    const Index p = cols();
    return qr_.matrixQR().topLeftCorner(p, p).triangularView<Eigen::Upper>().solve(b);
}

Mat QR::solve_rt(const Mat& B) const {
    const Index p = cols();
    return qr_.matrixQR().topLeftCorner(p, p).triangularView<Eigen::Upper>().transpose().solve(B);
}

Mat stack(const std::vector<Mat>& blocks) {
    if (blocks.empty()) return Mat(0, 0);
    const Index c = blocks.front().cols();
    Index r = 0;
    for (const auto& b : blocks) {
        if (b.cols() != c) throw ShapeError("stack: column counts differ");
        r += b.rows();
    }
    Mat out(r, c);
    Index at = 0;
    for (const auto& b : blocks) {
        out.middleRows(at, b.rows()) = b;
        at += b.rows();
    }
    return out;
}

Vec stack(const std::vector<Vec>& blocks) {
    Index r = 0;
    for (const auto& b : blocks) r += b.size();
    Vec out(r);
    Index at = 0;
    for (const auto& b : blocks) {
        out.segment(at, b.size()) = b;
        at += b.size();
    }
    return out;
}

Mat blockdiag(const std::vector<Mat>& blocks) {
    Index r = 0, c = 0;
    for (const auto& b : blocks) {
        r += b.rows();
        c += b.cols();
    }
    Mat out = Mat::Zero(r, c);
    Index ar = 0, ac = 0;
    for (const auto& b : blocks) {
        out.block(ar, ac, b.rows(), b.cols()) = b;
        ar += b.rows();
        ac += b.cols();
    }
    return out;
}

}  // namespace mlvb
