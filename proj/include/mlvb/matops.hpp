#pragma once

#include <Eigen/Dense>
#include <vector>

#include "mlvb/errors.hpp"

namespace mlvb {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Index = Eigen::Index;

constexpr double kSpdTol = 1e-12;
constexpr double kRankTol = 1e-12;

// Column-major stacking.
Vec vec(const Mat& M);
// Lower triangle (diagonal included), stacked column by column.
Vec vech(const Mat& M);
Mat vec_inverse(const Vec& v, Index rows, Index cols);
Mat vec_inverse(const Vec& v);
Mat vech_inverse(const Vec& v);

inline Index vech_size(Index d) { return d * (d + 1) / 2; }
// d such that vech_size(d) == len; throws ShapeError otherwise.
Index vech_dim(Index len);

struct DuplicationPair {
    Index d = 0;
    Mat D;      // d^2 x d(d+1)/2
    Mat Dplus;  // (D^T D)^{-1} D^T
};

DuplicationPair duplication_pair(Index d);

// D^T vec(M) without forming D. M must be square.
Vec dup_t_vec(const Mat& M);
// vec^{-1}(Dplus^T eta) without forming Dplus.
Mat dplus_t_unvec(const Vec& eta);

Mat symmetrize(const Mat& M);
bool is_spd(const Mat& M, double tol = kSpdTol);

// Inverse, log-determinant and square roots of a symmetric positive definite
// matrix through its eigendecomposition. Throws NumericalError(not_spd) when the
// smallest eigenvalue is not above tol times the largest.
Mat spd_inverse(const Mat& M, Site site = {});
double spd_logdet(const Mat& M, Site site = {});
Mat sym_sqrt(const Mat& M, Site site = {});
Mat inv_sym_sqrt(const Mat& M, Site site = {});

// Householder QR of a tall matrix. Q is kept in factored form.
class QR {
public:
    explicit QR(const Mat& M, Site site = {});

    Index rows() const { return qr_.rows(); }
    Index cols() const { return qr_.cols(); }

    // Q^T M for any M with rows() rows.
    Mat apply_qt(const Mat& M) const;
    Vec apply_qt(const Vec& v) const;
    Mat apply_q(const Mat& M) const;

    // Square upper-triangular factor (cols x cols).
    Mat R() const;
    // R^{-1} B and R^{-T} B.
    Mat solve_r(const Mat& B) const;
    Mat solve_rt(const Mat& B) const;
    Vec solve_r(const Vec& b) const;

private:
    Eigen::HouseholderQR<Mat> qr_;
};

Mat stack(const std::vector<Mat>& blocks);
Vec stack(const std::vector<Vec>& blocks);
Mat blockdiag(const std::vector<Mat>& blocks);

}  // namespace mlvb
