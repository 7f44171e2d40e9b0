#include "mlvb/naive.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <cmath>
#include <numbers>

#include "mlvb/detail/fit_loop.hpp"

namespace mlvb {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

using boost::math::digamma;

Mat full_inverse(const Mat& A) {
    Eigen::FullPivLU<Mat> lu(A);
    if (!lu.isInvertible()) throw NumericalError(Failure::singular, "dense matrix is singular");
    return lu.inverse();
}

template <class System>
JointLayout3 layout_of(const System& sys, Index p, Index q1, Index q2) {
    JointLayout3 L;
    Index off = p;
    for (const auto& g : sys.groups) {
        L.outer.push_back(off);
        off += q1;
        std::vector<Index> inner;
        for (std::size_t j = 0; j < g.inner.size(); ++j) {
            inner.push_back(off);
            off += q2;
        }
        L.inner.push_back(std::move(inner));
    }
    L.size = off;
    return L;
}

// C^T C, C^T y and y^T y without forming C.
DenseAssembly cross_products(const GroupedDataset2& data) {
    const Index p = data.p(), q = data.q(), K = p + data.m() * q;
    DenseAssembly a;
    a.CtC = Mat::Zero(K, K);
    a.Cty = Vec::Zero(K);
    for (Index i = 0; i < data.m(); ++i) {
        const auto& g = data.groups[i];
        const Index o = p + i * q;
        a.CtC.topLeftCorner(p, p) += g.X.transpose() * g.X;
        a.CtC.block(0, o, p, q) = g.X.transpose() * g.Z;
        a.CtC.block(o, 0, q, p) = g.Z.transpose() * g.X;
        a.CtC.block(o, o, q, q) = g.Z.transpose() * g.Z;
        a.Cty.head(p) += g.X.transpose() * g.y;
        a.Cty.segment(o, q) = g.Z.transpose() * g.y;
        a.yty += g.y.squaredNorm();
    }
    return a;
}

DenseAssembly cross_products(const GroupedDataset3& data) {
    const Index p = data.p(), q1 = data.q1(), q2 = data.q2();
    const JointLayout3 L = joint_layout(data);
    DenseAssembly a;
    a.CtC = Mat::Zero(L.size, L.size);
    a.Cty = Vec::Zero(L.size);
    for (std::size_t i = 0; i < data.groups.size(); ++i) {
        const Index o1 = L.outer[i];
        for (std::size_t j = 0; j < data.groups[i].subgroups.size(); ++j) {
            const auto& d = data.groups[i].subgroups[j];
            const Index o2 = L.inner[i][j];
            a.CtC.topLeftCorner(p, p) += d.X.transpose() * d.X;
            a.CtC.block(0, o1, p, q1) += d.X.transpose() * d.ZL1;
            a.CtC.block(0, o2, p, q2) = d.X.transpose() * d.ZL2;
            a.CtC.block(o1, o1, q1, q1) += d.ZL1.transpose() * d.ZL1;
            a.CtC.block(o1, o2, q1, q2) = d.ZL1.transpose() * d.ZL2;
            a.CtC.block(o2, o2, q2, q2) = d.ZL2.transpose() * d.ZL2;
            a.Cty.head(p) += d.X.transpose() * d.y;
            a.Cty.segment(o1, q1) += d.ZL1.transpose() * d.y;
            a.Cty.segment(o2, q2) = d.ZL2.transpose() * d.y;
            a.yty += d.y.squaredNorm();
        }
    }
    a.CtC = a.CtC.selfadjointView<Eigen::Upper>();
    return a;
}

double lmvgamma(double a, Index q) {
    double out = 0.25 * static_cast<double>(q * (q - 1)) * std::log(std::numbers::pi);
    for (Index j = 1; j <= q; ++j) out += std::lgamma(a + 0.5 * static_cast<double>(1 - j));
    return out;
}

// log density of Inverse-chi-squared(xi, lambda) in expectation, given E log x and E 1/x.
double e_log_invchisq(double xi, double e_log_lambda_half, double e_log_x, double lambda_e_recip) {
    return 0.5 * xi * e_log_lambda_half - std::lgamma(0.5 * xi) - (0.5 * xi + 1.0) * e_log_x - 0.5 * lambda_e_recip;
}

double e_log_x_invchisq(double xi, double lambda) { return std::log(0.5 * lambda) - digamma(0.5 * xi); }

double e_log_det_invwishart(double df, const Mat& Lambda) {
    const Index q = Lambda.rows();
    double out = dense_logdet(Lambda) - static_cast<double>(q) * std::log(2.0);
    for (Index j = 1; j <= q; ++j) out -= digamma(0.5 * (df - static_cast<double>(j) + 1.0));
    return out;
}

// E log p(y | beta, u, sigma^2) + E log p(sigma^2 | a) + E log p(a) - E log q(sigma^2) - E log q(a).
double noise_part(double n_obs, double resid, const NoiseQ& s, double nu, double scale) {
    const double el_s = e_log_x_invchisq(s.xi, s.lambda);
    const double el_a = e_log_x_invchisq(s.xi_a, s.lambda_a);
    const double rate = 1.0 / (nu * scale * scale);
    double e = -0.5 * n_obs * kLog2Pi - 0.5 * n_obs * el_s - 0.5 * s.mu_recip * resid;
    // sigma^2 | a ~ Inverse-chi-squared(nu, 1/a)
    e += e_log_invchisq(nu, -el_a - std::log(2.0), el_s, s.mu_recip_a * s.mu_recip);
    // a ~ Inverse-chi-squared(1, rate)
    e += e_log_invchisq(1.0, std::log(0.5 * rate), el_a, rate * s.mu_recip_a);
    e -= e_log_invchisq(s.xi, std::log(0.5 * s.lambda), el_s, s.lambda * s.mu_recip);
    e -= e_log_invchisq(s.xi_a, std::log(0.5 * s.lambda_a), el_a, s.lambda_a * s.mu_recip_a);
    return e;
}

// E log p(Sigma | A) + E log p(A) - E log q(Sigma) - E log q(A), together with
// the -(n_effects/2) E log|Sigma| piece of the Gaussian prior on the effects.
double covariance_part(double n_effects, const CovarianceQ& c, double nu, const Vec& s) {
    const Index q = c.Lambda.rows();
    const double dq = static_cast<double>(q);
    const double df_q = c.xi - dq + 1.0;
    const double el_Sigma = e_log_det_invwishart(df_q, c.Lambda);
    Vec el_A(q);
    for (Index j = 0; j < q; ++j) el_A(j) = e_log_x_invchisq(c.xi_A, c.Lambda_A(j, j));

    double e = -0.5 * n_effects * el_Sigma;
    // Sigma | A ~ Inverse-G-Wishart(full, nu + 2q - 2, A^{-1})
    const double df_p = nu + dq - 1.0;
    e += -0.5 * df_p * el_A.sum() - 0.5 * df_p * dq * std::log(2.0) - lmvgamma(0.5 * df_p, q) -
         0.5 * (nu + 2.0 * dq) * el_Sigma - 0.5 * (c.M_A_inv * c.M_inv).trace();
    e -= 0.5 * df_q * dense_logdet(c.Lambda) - 0.5 * df_q * dq * std::log(2.0) - lmvgamma(0.5 * df_q, q) -
         0.5 * (c.xi + 2.0) * el_Sigma - 0.5 * (c.Lambda * c.M_inv).trace();
    for (Index j = 0; j < q; ++j) {
        const double rate = 1.0 / (nu * s(j) * s(j));
        e += e_log_invchisq(1.0, std::log(0.5 * rate), el_A(j), rate * c.M_A_inv(j, j));
        e -= e_log_invchisq(c.xi_A, std::log(0.5 * c.Lambda_A(j, j)), el_A(j), c.Lambda_A(j, j) * c.M_A_inv(j, j));
    }
    return e;
}

double gaussian_part(const DenseGaussian& coef, const Vec& mu_beta, const Mat& Sigma_beta, const Mat& D_random) {
    const Index p = mu_beta.size();
    const Index K = coef.mu.size();
    const Mat P = full_inverse(Sigma_beta);
    const Vec d = coef.mu.head(p) - mu_beta;
    const Vec u = coef.mu.tail(K - p);
    const Mat Su = coef.Sigma.bottomRightCorner(K - p, K - p);
    double e = -0.5 * static_cast<double>(K) * kLog2Pi - 0.5 * dense_logdet(Sigma_beta);
    e += -0.5 * (d.dot(P * d) + (P * coef.Sigma.topLeftCorner(p, p)).trace());
    e += -0.5 * (u.dot(D_random * u) + D_random.cwiseProduct(Su).sum());
    e += 0.5 * static_cast<double>(K) * (1.0 + kLog2Pi) + 0.5 * dense_logdet(coef.Sigma);
    return e;
}

Mat kron_identity(Index copies, const Mat& B) {
    const Index q = B.rows();
    Mat out = Mat::Zero(copies * q, copies * q);
    for (Index i = 0; i < copies; ++i) out.block(i * q, i * q, q, q) = B;
    return out;
}

Mat random_precision(const JointLayout3& L, Index p, const Mat& M1, const Mat& M2) {
    const Index q1 = M1.rows(), q2 = M2.rows();
    Mat D = Mat::Zero(L.size - p, L.size - p);
    for (std::size_t i = 0; i < L.outer.size(); ++i) {
        D.block(L.outer[i] - p, L.outer[i] - p, q1, q1) = M1;
        for (Index o : L.inner[i]) D.block(o - p, o - p, q2, q2) = M2;
    }
    return D;
}

DenseAssembly with_priors(DenseAssembly a, Index p, const Vec& mu_beta, const Mat& Sigma_beta, const Mat& D_random,
                          double r_inv) {
    const Index K = a.CtC.rows();
    a.D = Mat::Zero(K, K);
    a.o = Vec::Zero(K);
    if (Sigma_beta.size() > 0) {
        const Mat P = full_inverse(Sigma_beta);
        a.D.topLeftCorner(p, p) = P;
        a.o.head(p) = P * mu_beta;
    }
    a.D.bottomRightCorner(K - p, K - p) = D_random;
    a.r_inv = r_inv;
    return a;
}

void noise_update(NoiseQ& n, double resid, double nu, double s) {
    n.lambda = n.mu_recip_a + resid;
    n.mu_recip = n.xi / n.lambda;
    n.lambda_a = n.mu_recip + 1.0 / (nu * s * s);
    n.mu_recip_a = n.xi_a / n.lambda_a;
}

void covariance_update(CovarianceQ& c, const Mat& second, double nu, const Vec& s) {
    const Index q = second.rows();
    c.Lambda = c.M_A_inv + second;
    c.Lambda = 0.5 * (c.Lambda + c.Lambda.transpose()).eval();
    c.M_inv = (c.xi - static_cast<double>(q) + 1.0) * full_inverse(c.Lambda);
    c.Lambda_A = Mat::Zero(q, q);
    c.M_A_inv = Mat::Zero(q, q);
    for (Index j = 0; j < q; ++j) {
        c.Lambda_A(j, j) = c.M_inv(j, j) + 1.0 / (nu * s(j) * s(j));
        c.M_A_inv(j, j) = c.xi_A / c.Lambda_A(j, j);
    }
}

}  // namespace

DenseSystem dense_assemble(const TwoLevelSparseSystem& sys) {
    const Index p = sys.p(), q = sys.q(), m = static_cast<Index>(sys.groups.size());
    const Index K = p + m * q;
    DenseSystem out{Mat::Zero(K, K), Vec::Zero(K)};
    out.A.topLeftCorner(p, p) = sys.A11;
    out.a.head(p) = sys.a1;
    for (Index i = 0; i < m; ++i) {
        const auto& g = sys.groups[i];
        const Index o = p + i * q;
        out.A.block(0, o, p, q) = g.A12;
        out.A.block(o, 0, q, p) = g.A12.transpose();
        out.A.block(o, o, q, q) = g.A22;
        out.a.segment(o, q) = g.a2;
    }
    return out;
}

DenseSystem dense_assemble(const ThreeLevelSparseSystem& sys) {
    const Index p = sys.p(), q1 = sys.q1(), q2 = sys.q2();
    const JointLayout3 L = joint_layout(sys);
    DenseSystem out{Mat::Zero(L.size, L.size), Vec::Zero(L.size)};
    out.A.topLeftCorner(p, p) = sys.A11;
    out.a.head(p) = sys.a1;
    for (std::size_t i = 0; i < sys.groups.size(); ++i) {
        const auto& g = sys.groups[i];
        const Index o1 = L.outer[i];
        out.A.block(0, o1, p, q1) = g.A12;
        out.A.block(o1, o1, q1, q1) = g.A22;
        out.a.segment(o1, q1) = g.a2;
        for (std::size_t j = 0; j < g.inner.size(); ++j) {
            const auto& h = g.inner[j];
            const Index o2 = L.inner[i][j];
            out.A.block(0, o2, p, q2) = h.A12;
            out.A.block(o1, o2, q1, q2) = h.A12_i;
            out.A.block(o2, o2, q2, q2) = h.A22;
            out.a.segment(o2, q2) = h.a2;
        }
    }
    out.A = out.A.selfadjointView<Eigen::Upper>();
    return out;
}

JointLayout3 joint_layout(const ThreeLevelSparseSystem& sys) { return layout_of(sys, sys.p(), sys.q1(), sys.q2()); }

JointLayout3 joint_layout(const GroupedDataset3& data) {
    JointLayout3 L;
    Index off = data.p();
    for (const auto& g : data.groups) {
        L.outer.push_back(off);
        off += data.q1();
        std::vector<Index> inner;
        for (std::size_t j = 0; j < g.subgroups.size(); ++j) {
            inner.push_back(off);
            off += data.q2();
        }
        L.inner.push_back(std::move(inner));
    }
    L.size = off;
    return L;
}

DenseSystem dense_normal_equations(const TwoLevelLSSystem& sys) {
    const Index p = sys.p(), q = sys.q(), m = static_cast<Index>(sys.groups.size());
    Index rows = 0;
    for (const auto& g : sys.groups) rows += g.b.size();
    Mat B = Mat::Zero(rows, p + m * q);
    Vec b(rows);
    Index r = 0;
    for (Index i = 0; i < m; ++i) {
        const auto& g = sys.groups[i];
        const Index n = g.b.size();
        B.block(r, 0, n, p) = g.B;
        B.block(r, p + i * q, n, q) = g.Bdot;
        b.segment(r, n) = g.b;
        r += n;
    }
    return {B.transpose() * B, B.transpose() * b};
}

DenseSystem dense_normal_equations(const ThreeLevelLSSystem& sys) {
    const Index p = sys.p(), q1 = sys.q1(), q2 = sys.q2();
    const JointLayout3 L = layout_of(sys, p, q1, q2);
    Index rows = 0;
    for (const auto& g : sys.groups)
        for (const auto& h : g.inner) rows += h.b.size();
    Mat B = Mat::Zero(rows, L.size);
    Vec b(rows);
    Index r = 0;
    for (std::size_t i = 0; i < sys.groups.size(); ++i) {
        for (std::size_t j = 0; j < sys.groups[i].inner.size(); ++j) {
            const auto& h = sys.groups[i].inner[j];
            const Index n = h.b.size();
            B.block(r, 0, n, p) = h.B;
            B.block(r, L.outer[i], n, q1) = h.Bdot;
            B.block(r, L.inner[i][j], n, q2) = h.Bddot;
            b.segment(r, n) = h.b;
            r += n;
        }
    }
    return {B.transpose() * B, B.transpose() * b};
}

TwoLevelSolution extract_blocks(const Vec& x, const Mat& Ainv, Index p, Index q, Index m) {
    TwoLevelSolution out;
    out.x1 = x.head(p);
    out.A11inv = Ainv.topLeftCorner(p, p);
    out.groups.resize(m);
    for (Index i = 0; i < m; ++i) {
        const Index o = p + i * q;
        out.groups[i] = {x.segment(o, q), Ainv.block(o, o, q, q), Ainv.block(0, o, p, q)};
    }
    return out;
}

ThreeLevelSolution extract_blocks(const Vec& x, const Mat& Ainv, Index p, Index q1, Index q2,
                                  const JointLayout3& L) {
    ThreeLevelSolution out;
    out.x1 = x.head(p);
    out.A11inv = Ainv.topLeftCorner(p, p);
    out.groups.resize(L.outer.size());
    for (std::size_t i = 0; i < L.outer.size(); ++i) {
        const Index o1 = L.outer[i];
        auto& g = out.groups[i];
        g.x2 = x.segment(o1, q1);
        g.A22inv = Ainv.block(o1, o1, q1, q1);
        g.A12inv = Ainv.block(0, o1, p, q1);
        for (Index o2 : L.inner[i])
            g.inner.push_back({x.segment(o2, q2), Ainv.block(o2, o2, q2, q2), Ainv.block(0, o2, p, q2),
                               Ainv.block(o1, o2, q1, q2)});
    }
    return out;
}

TwoLevelSolution dense_inverse_subblocks(const TwoLevelSparseSystem& sys) {
    const DenseSystem d = dense_assemble(sys);
    const Mat Ainv = full_inverse(d.A);
    return extract_blocks(Ainv * d.a, Ainv, sys.p(), sys.q(), static_cast<Index>(sys.groups.size()));
}

ThreeLevelSolution dense_inverse_subblocks(const ThreeLevelSparseSystem& sys) {
    const DenseSystem d = dense_assemble(sys);
    const Mat Ainv = full_inverse(d.A);
    return extract_blocks(Ainv * d.a, Ainv, sys.p(), sys.q1(), sys.q2(), joint_layout(sys));
}

TwoLevelSolution dense_solve_ls(const TwoLevelLSSystem& sys) {
    const DenseSystem d = dense_normal_equations(sys);
    const Mat Ainv = full_inverse(d.A);
    return extract_blocks(Ainv * d.a, Ainv, sys.p(), sys.q(), static_cast<Index>(sys.groups.size()));
}

ThreeLevelSolution dense_solve_ls(const ThreeLevelLSSystem& sys) {
    const DenseSystem d = dense_normal_equations(sys);
    const Mat Ainv = full_inverse(d.A);
    return extract_blocks(Ainv * d.a, Ainv, sys.p(), sys.q1(), sys.q2(), layout_of(sys, sys.p(), sys.q1(), sys.q2()));
}

Mat design_matrix(const GroupedDataset2& data) {
    const Index p = data.p(), q = data.q();
    Mat C = Mat::Zero(data.n_total(), p + data.m() * q);
    Index r = 0;
    for (Index i = 0; i < data.m(); ++i) {
        const auto& g = data.groups[i];
        C.block(r, 0, g.y.size(), p) = g.X;
        C.block(r, p + i * q, g.y.size(), q) = g.Z;
        r += g.y.size();
    }
    return C;
}

Mat design_matrix(const GroupedDataset3& data) {
    const JointLayout3 L = joint_layout(data);
    Mat C = Mat::Zero(data.n_total(), L.size);
    Index r = 0;
    for (std::size_t i = 0; i < data.groups.size(); ++i) {
        for (std::size_t j = 0; j < data.groups[i].subgroups.size(); ++j) {
            const auto& d = data.groups[i].subgroups[j];
            const Index o = d.y.size();
            C.block(r, 0, o, data.p()) = d.X;
            C.block(r, L.outer[i], o, data.q1()) = d.ZL1;
            C.block(r, L.inner[i][j], o, data.q2()) = d.ZL2;
            r += o;
        }
    }
    return C;
}

DenseAssembly dense_assembly_blup(const GroupedDataset2& data, const VarianceComponents2& vc) {
    data.validate();
    if (!(vc.sigma2 > 0.0)) throw ShapeError("sigma2 must be positive");
    return with_priors(cross_products(data), data.p(), Vec(), Mat(), kron_identity(data.m(), full_inverse(vc.Sigma)),
                       1.0 / vc.sigma2);
}

DenseAssembly dense_assembly_blup(const GroupedDataset3& data, const VarianceComponents3& vc) {
    data.validate();
    if (!(vc.sigma2 > 0.0)) throw ShapeError("sigma2 must be positive");
    const Mat D = random_precision(joint_layout(data), data.p(), full_inverse(vc.SigmaL1), full_inverse(vc.SigmaL2));
    return with_priors(cross_products(data), data.p(), Vec(), Mat(), D, 1.0 / vc.sigma2);
}

DenseAssembly dense_assembly_mfvb(const GroupedDataset2& data, const Priors2& priors, double mu_recip_sigma2,
                                  const Mat& M_Sigma_inv) {
    data.validate();
    return with_priors(cross_products(data), data.p(), priors.mu_beta, priors.Sigma_beta,
                       kron_identity(data.m(), M_Sigma_inv), mu_recip_sigma2);
}

DenseAssembly dense_assembly_mfvb(const GroupedDataset3& data, const Priors3& priors, double mu_recip_sigma2,
                                  const Mat& M_SigmaL1_inv, const Mat& M_SigmaL2_inv) {
    data.validate();
    const Mat D = random_precision(joint_layout(data), data.p(), M_SigmaL1_inv, M_SigmaL2_inv);
    return with_priors(cross_products(data), data.p(), priors.mu_beta, priors.Sigma_beta, D, mu_recip_sigma2);
}

DenseGaussian dense_gaussian(const DenseAssembly& a) {
    const Mat P = a.r_inv * a.CtC + a.D;
    Eigen::LLT<Mat> llt(P);
    if (llt.info() != Eigen::Success) throw NumericalError(Failure::not_spd, "dense precision is not positive definite");
    DenseGaussian g;
    g.Sigma = llt.solve(Mat::Identity(P.rows(), P.cols()));
    g.mu = g.Sigma * (a.r_inv * a.Cty + a.o);
    g.logdet = -2.0 * llt.matrixLLT().diagonal().array().log().sum();
    return g;
}

DenseGaussian dense_blup(const GroupedDataset2& data, const VarianceComponents2& vc) {
    return dense_gaussian(dense_assembly_blup(data, vc));
}

DenseGaussian dense_blup(const GroupedDataset3& data, const VarianceComponents3& vc) {
    return dense_gaussian(dense_assembly_blup(data, vc));
}

DenseGaussian dense_mfvb_step(const GroupedDataset2& data, const Priors2& priors, double mu_recip_sigma2,
                              const Mat& M_Sigma_inv) {
    return dense_gaussian(dense_assembly_mfvb(data, priors, mu_recip_sigma2, M_Sigma_inv));
}

DenseGaussian dense_mfvb_step(const GroupedDataset3& data, const Priors3& priors, double mu_recip_sigma2,
                              const Mat& M_SigmaL1_inv, const Mat& M_SigmaL2_inv) {
    return dense_gaussian(dense_assembly_mfvb(data, priors, mu_recip_sigma2, M_SigmaL1_inv, M_SigmaL2_inv));
}

double dense_logdet(const Mat& Sigma) {
    Eigen::PartialPivLU<Mat> lu(Sigma);
    const Vec d = lu.matrixLU().diagonal();
    double out = 0.0;
    for (Index k = 0; k < d.size(); ++k) {
        if (d(k) == 0.0) throw NumericalError(Failure::singular, "matrix is singular");
        out += std::log(std::abs(d(k)));
    }
    return out;
}

double dense_expected_sq_residual(const DenseAssembly& a, const DenseGaussian& g) {
    return a.yty - 2.0 * g.mu.dot(a.Cty) + g.mu.dot(a.CtC * g.mu) + a.CtC.cwiseProduct(g.Sigma).sum();
}

namespace {

double literal_elbo_impl(const GroupedDataset2& data, const Priors2& priors, const DenseAssembly& cp,
                         const DenseGaussian& coef, const NoiseQ& sigma2, const CovarianceQ& Sigma) {
    double e = noise_part(static_cast<double>(data.n_total()), dense_expected_sq_residual(cp, coef), sigma2,
                          priors.nu_sigma2, priors.s_sigma2);
    e += gaussian_part(coef, priors.mu_beta, priors.Sigma_beta, kron_identity(data.m(), Sigma.M_inv));
    e += covariance_part(static_cast<double>(data.m()), Sigma, priors.nu_Sigma, priors.s_Sigma);
    return e;
}

double literal_elbo_impl(const GroupedDataset3& data, const Priors3& priors, const DenseAssembly& cp,
                         const DenseGaussian& coef, const NoiseQ& sigma2, const CovarianceQ& SigmaL1,
                         const CovarianceQ& SigmaL2) {
    double e = noise_part(static_cast<double>(data.n_total()), dense_expected_sq_residual(cp, coef), sigma2,
                          priors.nu_sigma2, priors.s_sigma2);
    e += gaussian_part(coef, priors.mu_beta, priors.Sigma_beta,
                       random_precision(joint_layout(data), data.p(), SigmaL1.M_inv, SigmaL2.M_inv));
    e += covariance_part(static_cast<double>(data.m()), SigmaL1, priors.nu_SigmaL1, priors.s_SigmaL1);
    e += covariance_part(static_cast<double>(data.n_subgroups()), SigmaL2, priors.nu_SigmaL2, priors.s_SigmaL2);
    return e;
}

}  // namespace

double literal_elbo(const GroupedDataset2& data, const Priors2& priors, const DenseGaussian& coef,
                    const NoiseQ& sigma2, const CovarianceQ& Sigma) {
    return literal_elbo_impl(data, priors, cross_products(data), coef, sigma2, Sigma);
}

double literal_elbo(const GroupedDataset3& data, const Priors3& priors, const DenseGaussian& coef,
                    const NoiseQ& sigma2, const CovarianceQ& SigmaL1, const CovarianceQ& SigmaL2) {
    return literal_elbo_impl(data, priors, cross_products(data), coef, sigma2, SigmaL1, SigmaL2);
}

void naive_mfvb_step(const GroupedDataset2& data, const Priors2& priors, QState2& s) {
    const Index p = data.p(), q = data.q(), m = data.m();
    const DenseAssembly a = dense_assembly_mfvb(data, priors, s.sigma2.mu_recip, s.Sigma.M_inv);
    const DenseGaussian g = dense_gaussian(a);
    const auto blocks = extract_blocks(g.mu, g.Sigma, p, q, m);
    s.mu_beta = blocks.x1;
    s.Sigma_beta = blocks.A11inv;
    Mat second = Mat::Zero(q, q);
    for (Index i = 0; i < m; ++i) {
        s.groups[i] = {blocks.groups[i].x2, blocks.groups[i].A22inv, blocks.groups[i].A12inv};
        second += g.mu.segment(p + i * q, q) * g.mu.segment(p + i * q, q).transpose() +
                  g.Sigma.block(p + i * q, p + i * q, q, q);
    }
    s.logdet_coef = g.logdet;
    noise_update(s.sigma2, dense_expected_sq_residual(a, g), priors.nu_sigma2, priors.s_sigma2);
    covariance_update(s.Sigma, second, priors.nu_Sigma, priors.s_Sigma);
    s.elbo = literal_elbo_impl(data, priors, a, g, s.sigma2, s.Sigma);
}

void naive_mfvb_step(const GroupedDataset3& data, const Priors3& priors, QState3& s) {
    const Index p = data.p(), q1 = data.q1(), q2 = data.q2();
    const JointLayout3 L = joint_layout(data);
    const DenseAssembly a = dense_assembly_mfvb(data, priors, s.sigma2.mu_recip, s.SigmaL1.M_inv, s.SigmaL2.M_inv);
    const DenseGaussian g = dense_gaussian(a);
    const auto blocks = extract_blocks(g.mu, g.Sigma, p, q1, q2, L);
    s.mu_beta = blocks.x1;
    s.Sigma_beta = blocks.A11inv;
    Mat second1 = Mat::Zero(q1, q1), second2 = Mat::Zero(q2, q2);
    for (std::size_t i = 0; i < L.outer.size(); ++i) {
        const auto& b = blocks.groups[i];
        auto& qi = s.groups[i];
        qi.mu_u = b.x2;
        qi.Sigma_u = b.A22inv;
        qi.Cross_beta_u = b.A12inv;
        second1 += b.x2 * b.x2.transpose() + b.A22inv;
        for (std::size_t j = 0; j < b.inner.size(); ++j) {
            const auto& h = b.inner[j];
            qi.subgroups[j] = {h.x2, h.A22inv, h.A12inv, h.A12inv_i};
            second2 += h.x2 * h.x2.transpose() + h.A22inv;
        }
    }
    s.logdet_coef = g.logdet;
    noise_update(s.sigma2, dense_expected_sq_residual(a, g), priors.nu_sigma2, priors.s_sigma2);
    covariance_update(s.SigmaL1, second1, priors.nu_SigmaL1, priors.s_SigmaL1);
    covariance_update(s.SigmaL2, second2, priors.nu_SigmaL2, priors.s_SigmaL2);
    s.elbo = literal_elbo_impl(data, priors, a, g, s.sigma2, s.SigmaL1, s.SigmaL2);
}

FitResult2 naive_mfvb_fit(const GroupedDataset2& data, const Priors2& priors, const FitOptions& opts) {
    auto step = [](const GroupedDataset2& d, const Priors2& p, QState2& s) { naive_mfvb_step(d, p, s); };
    return detail::run_fit<FitResult2>(data, priors, opts, mfvb_init_two_level, step);
}

FitResult3 naive_mfvb_fit(const GroupedDataset3& data, const Priors3& priors, const FitOptions& opts) {
    auto step = [](const GroupedDataset3& d, const Priors3& p, QState3& s) { naive_mfvb_step(d, p, s); };
    return detail::run_fit<FitResult3>(data, priors, opts, mfvb_init_three_level, step);
}

}  // namespace mlvb
