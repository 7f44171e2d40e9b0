#include "mlvb/mfvb.hpp"

#include <cmath>
#include <numbers>

#include "mlvb/detail/fit_loop.hpp"

namespace mlvb {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;  // log(2 pi)

double lmvgamma(double a, Index q) {
    double out = 0.25 * static_cast<double>(q * (q - 1)) * std::log(std::numbers::pi);
    for (Index j = 1; j <= q; ++j) out += std::lgamma(a + 0.5 * static_cast<double>(1 - j));
    return out;
}

double trace_prod(const Mat& A, const Mat& B) {
    return A.cwiseProduct(B.transpose()).sum();
}

// Terms of the bound that involve sigma^2 and its auxiliary a, with the
// E log(sigma^2) and E log(a) contributions already cancelled.
double noise_terms(const NoiseQ& n, double nu, double s) {
    const double prior_rate = 1.0 / (nu * s * s);
    double e = 0.0;
    e += -0.5 * nu * std::log(2.0) - std::lgamma(0.5 * nu) - 0.5 * n.mu_recip_a * n.mu_recip;
    e += -0.5 * n.xi * std::log(0.5 * n.lambda) + std::lgamma(0.5 * n.xi) + 0.5 * n.lambda * n.mu_recip;
    e += 0.5 * std::log(0.5 * prior_rate) - std::lgamma(0.5) - 0.5 * prior_rate * n.mu_recip_a;
    e += -0.5 * n.xi_a * std::log(0.5 * n.lambda_a) + std::lgamma(0.5 * n.xi_a) + 0.5 * n.lambda_a * n.mu_recip_a;
    return e;
}

// Same for a covariance matrix and its diagonal auxiliary matrix.
double covariance_terms(const CovarianceQ& c, double nu, const Vec& s) {
    const Index q = c.Lambda.rows();
    const double dq = static_cast<double>(q);
    const double nu_prior = nu + dq - 1.0;
    const double nu_q = c.xi - dq + 1.0;
    double e = 0.0;
    e += -0.5 * nu_prior * dq * std::log(2.0) - lmvgamma(0.5 * nu_prior, q) - 0.5 * trace_prod(c.M_A_inv, c.M_inv);
    e += -0.5 * nu_q * spd_logdet(c.Lambda) + 0.5 * nu_q * dq * std::log(2.0) + lmvgamma(0.5 * nu_q, q) +
         0.5 * trace_prod(c.Lambda, c.M_inv);
    for (Index j = 0; j < q; ++j) {
        const double rate = 1.0 / (nu * s(j) * s(j));
        const double lam = c.Lambda_A(j, j);
        e += 0.5 * std::log(0.5 * rate) - std::lgamma(0.5) - 0.5 * rate * c.M_A_inv(j, j);
        e += -0.5 * c.xi_A * std::log(0.5 * lam) + std::lgamma(0.5 * c.xi_A) + 0.5 * lam * c.M_A_inv(j, j);
    }
    return e;
}

double beta_prior_terms(const Vec& mu_q, const Mat& Sigma_q, const Priors2& pr) {
    const Mat P = spd_inverse(pr.Sigma_beta);
    const Vec d = mu_q - pr.mu_beta;
    return -0.5 * spd_logdet(pr.Sigma_beta) - 0.5 * (d.dot(P * d) + trace_prod(P, Sigma_q));
}

Priors2 as_priors2(const Priors3& pr) {
    Priors2 out;
    out.mu_beta = pr.mu_beta;
    out.Sigma_beta = pr.Sigma_beta;
    return out;
}

CovarianceQ init_covariance(double nu, Index q, double n_effects) {
    CovarianceQ c;
    const double dq = static_cast<double>(q);
    c.xi = nu + 2.0 * dq - 2.0 + n_effects;
    c.xi_A = nu + dq;
    c.Lambda = Mat::Identity(q, q);
    c.Lambda_A = Mat::Identity(q, q);
    c.M_inv = Mat::Identity(q, q);
    c.M_A_inv = Mat::Identity(q, q);
    return c;
}

NoiseQ init_noise(double nu, double n_obs) {
    NoiseQ n;
    n.xi = nu + n_obs;
    n.xi_a = nu + 1.0;
    n.lambda = n.xi;
    n.lambda_a = n.xi_a;
    n.mu_recip = 1.0;
    n.mu_recip_a = 1.0;
    return n;
}

// The auxiliary updates that follow the Gaussian block.
void update_noise(NoiseQ& n, double resid, double nu, double s) {
    n.lambda = n.mu_recip_a + resid;
    n.mu_recip = n.xi / n.lambda;
    n.lambda_a = n.mu_recip + 1.0 / (nu * s * s);
    n.mu_recip_a = n.xi_a / n.lambda_a;
}

void update_covariance(CovarianceQ& c, const Mat& second_moment_sum, double nu, const Vec& s) {
    c.Lambda = symmetrize(c.M_A_inv + second_moment_sum);
    refresh_moments(c);
    c.Lambda_A = Mat(c.M_inv.diagonal().asDiagonal());
    for (Index j = 0; j < s.size(); ++j) c.Lambda_A(j, j) += 1.0 / (nu * s(j) * s(j));
    c.M_A_inv = Mat(c.xi_A * c.Lambda_A.diagonal().cwiseInverse().asDiagonal());
}

}  // namespace

void refresh_moments(NoiseQ& n) {
    n.mu_recip = n.xi / n.lambda;
    n.mu_recip_a = n.xi_a / n.lambda_a;
}

void refresh_moments(CovarianceQ& c) {
    const double q = static_cast<double>(c.Lambda.rows());
    c.M_inv = (c.xi - q + 1.0) * spd_inverse(c.Lambda);
    c.M_A_inv = Mat(c.xi_A * c.Lambda_A.diagonal().cwiseInverse().asDiagonal());
}

Priors2 default_priors2(Index p, Index q) {
    Priors2 pr;
    pr.mu_beta = Vec::Zero(p);
    pr.Sigma_beta = 1e10 * Mat::Identity(p, p);
    pr.s_Sigma = Vec::Constant(q, 1e5);
    return pr;
}

Priors3 default_priors3(Index p, Index q1, Index q2) {
    Priors3 pr;
    pr.mu_beta = Vec::Zero(p);
    pr.Sigma_beta = 1e10 * Mat::Identity(p, p);
    pr.s_SigmaL1 = Vec::Constant(q1, 1e5);
    pr.s_SigmaL2 = Vec::Constant(q2, 1e5);
    return pr;
}

void validate(const Priors2& pr, Index p, Index q) {
    if (pr.mu_beta.size() != p) throw ShapeError("prior mean of beta must have length p");
    if (pr.Sigma_beta.rows() != p || pr.Sigma_beta.cols() != p) throw ShapeError("prior covariance of beta must be p x p");
    if (!is_spd(pr.Sigma_beta)) throw ShapeError("prior covariance of beta must be positive definite");
    if (!(pr.nu_sigma2 > 0.0 && pr.s_sigma2 > 0.0 && pr.nu_Sigma > 0.0))
        throw ShapeError("prior shape and scale values must be positive");
    if (pr.s_Sigma.size() != q || !(pr.s_Sigma.array() > 0.0).all())
        throw ShapeError("random-effect prior scales must be q positive values");
}

void validate(const Priors3& pr, Index p, Index q1, Index q2) {
    if (pr.mu_beta.size() != p) throw ShapeError("prior mean of beta must have length p");
    if (pr.Sigma_beta.rows() != p || pr.Sigma_beta.cols() != p) throw ShapeError("prior covariance of beta must be p x p");
    if (!is_spd(pr.Sigma_beta)) throw ShapeError("prior covariance of beta must be positive definite");
    if (!(pr.nu_sigma2 > 0.0 && pr.s_sigma2 > 0.0 && pr.nu_SigmaL1 > 0.0 && pr.nu_SigmaL2 > 0.0))
        throw ShapeError("prior shape and scale values must be positive");
    if (pr.s_SigmaL1.size() != q1 || !(pr.s_SigmaL1.array() > 0.0).all())
        throw ShapeError("level-1 prior scales must be q1 positive values");
    if (pr.s_SigmaL2.size() != q2 || !(pr.s_SigmaL2.array() > 0.0).all())
        throw ShapeError("level-2 prior scales must be q2 positive values");
}

double two_level_logdet(const Mat& Sigma_beta, const std::vector<Mat>& P22) {
    double out = spd_logdet(Sigma_beta);
    for (std::size_t i = 0; i < P22.size(); ++i) out -= spd_logdet(P22[i], Site::group(static_cast<int>(i)));
    return out;
}

double three_level_logdet(const Mat& Sigma_beta, const std::vector<Mat>& P22_outer,
                          const std::vector<std::vector<Mat>>& P22_inner,
                          const std::vector<std::vector<Mat>>& P12_inner) {
    double out = spd_logdet(Sigma_beta);
    for (std::size_t i = 0; i < P22_outer.size(); ++i) {
        Mat H = P22_outer[i];
        for (std::size_t j = 0; j < P22_inner[i].size(); ++j) {
            const Site site = Site::subgroup(static_cast<int>(i), static_cast<int>(j));
            const Mat Pinv = spd_inverse(P22_inner[i][j], site);
            H -= P12_inner[i][j] * Pinv * P12_inner[i][j].transpose();
            out -= spd_logdet(P22_inner[i][j], site);
        }
        out -= spd_logdet(H, Site::group(static_cast<int>(i)));
    }
    return out;
}

double expected_sq_residual(const QState2& s, const GroupedDataset2& data) {
    double total = 0.0;
    for (std::size_t i = 0; i < data.groups.size(); ++i) {
        const auto& g = data.groups[i];
        const auto& u = s.groups[i];
        const Vec r = g.y - g.X * s.mu_beta - g.Z * u.mu_u;
        total += r.squaredNorm();
        total += trace_prod(g.X.transpose() * g.X, s.Sigma_beta);
        total += trace_prod(g.Z.transpose() * g.Z, u.Sigma_u);
        total += 2.0 * trace_prod(g.Z.transpose() * g.X, u.Cross_beta_u);
    }
    return total;
}

double expected_sq_residual(const QState3& s, const GroupedDataset3& data) {
    double total = 0.0;
    for (std::size_t i = 0; i < data.groups.size(); ++i) {
        const auto& qi = s.groups[i];
        for (std::size_t j = 0; j < data.groups[i].subgroups.size(); ++j) {
            const auto& d = data.groups[i].subgroups[j];
            const auto& qj = qi.subgroups[j];
            const Vec r = d.y - d.X * s.mu_beta - d.ZL1 * qi.mu_u - d.ZL2 * qj.mu_u;
            total += r.squaredNorm();
            total += trace_prod(d.X.transpose() * d.X, s.Sigma_beta);
            total += trace_prod(d.ZL1.transpose() * d.ZL1, qi.Sigma_u);
            total += trace_prod(d.ZL2.transpose() * d.ZL2, qj.Sigma_u);
            total += 2.0 * trace_prod(d.ZL1.transpose() * d.X, qi.Cross_beta_u);
            total += 2.0 * trace_prod(d.ZL2.transpose() * d.X, qj.Cross_beta_u);
            total += 2.0 * trace_prod(d.ZL2.transpose() * d.ZL1, qj.Cross_u1_u);
        }
    }
    return total;
}

double elbo_two_level(const QState2& s, const GroupedDataset2& data, const Priors2& pr) {
    const double n = static_cast<double>(data.n_total());
    const double K = static_cast<double>(data.p() + data.m() * data.q());
    Mat second = Mat::Zero(data.q(), data.q());
    for (const auto& g : s.groups) second += g.mu_u * g.mu_u.transpose() + g.Sigma_u;

    double e = -0.5 * n * kLog2Pi - 0.5 * s.sigma2.mu_recip * expected_sq_residual(s, data);
    e += -0.5 * K * kLog2Pi + beta_prior_terms(s.mu_beta, s.Sigma_beta, pr) - 0.5 * trace_prod(s.Sigma.M_inv, second);
    e += 0.5 * K * (1.0 + kLog2Pi) + 0.5 * s.logdet_coef;
    e += noise_terms(s.sigma2, pr.nu_sigma2, pr.s_sigma2);
    e += covariance_terms(s.Sigma, pr.nu_Sigma, pr.s_Sigma);
    return e;
}

double elbo_three_level(const QState3& s, const GroupedDataset3& data, const Priors3& pr) {
    const double n = static_cast<double>(data.n_total());
    const double K = static_cast<double>(data.p() + data.m() * data.q1() + data.n_subgroups() * data.q2());
    Mat second1 = Mat::Zero(data.q1(), data.q1());
    Mat second2 = Mat::Zero(data.q2(), data.q2());
    for (const auto& g : s.groups) {
        second1 += g.mu_u * g.mu_u.transpose() + g.Sigma_u;
        for (const auto& h : g.subgroups) second2 += h.mu_u * h.mu_u.transpose() + h.Sigma_u;
    }

    double e = -0.5 * n * kLog2Pi - 0.5 * s.sigma2.mu_recip * expected_sq_residual(s, data);
    e += -0.5 * K * kLog2Pi + beta_prior_terms(s.mu_beta, s.Sigma_beta, as_priors2(pr));
    e += -0.5 * trace_prod(s.SigmaL1.M_inv, second1) - 0.5 * trace_prod(s.SigmaL2.M_inv, second2);
    e += 0.5 * K * (1.0 + kLog2Pi) + 0.5 * s.logdet_coef;
    e += noise_terms(s.sigma2, pr.nu_sigma2, pr.s_sigma2);
    e += covariance_terms(s.SigmaL1, pr.nu_SigmaL1, pr.s_SigmaL1);
    e += covariance_terms(s.SigmaL2, pr.nu_SigmaL2, pr.s_SigmaL2);
    return e;
}

QState2 mfvb_init_two_level(const GroupedDataset2& data, const Priors2& priors) {
    data.validate();
    validate(priors, data.p(), data.q());
    QState2 s;
    const Index p = data.p(), q = data.q();
    s.mu_beta = Vec::Zero(p);
    s.Sigma_beta = Mat::Identity(p, p);
    s.groups.assign(data.groups.size(), {Vec::Zero(q), Mat::Identity(q, q), Mat::Zero(p, q)});
    s.sigma2 = init_noise(priors.nu_sigma2, static_cast<double>(data.n_total()));
    s.Sigma = init_covariance(priors.nu_Sigma, q, static_cast<double>(data.m()));
    return s;
}

QState3 mfvb_init_three_level(const GroupedDataset3& data, const Priors3& priors) {
    data.validate();
    validate(priors, data.p(), data.q1(), data.q2());
    QState3 s;
    const Index p = data.p(), q1 = data.q1(), q2 = data.q2();
    s.mu_beta = Vec::Zero(p);
    s.Sigma_beta = Mat::Identity(p, p);
    s.groups.resize(data.groups.size());
    for (std::size_t i = 0; i < data.groups.size(); ++i) {
        auto& g = s.groups[i];
        g.mu_u = Vec::Zero(q1);
        g.Sigma_u = Mat::Identity(q1, q1);
        g.Cross_beta_u = Mat::Zero(p, q1);
        g.subgroups.assign(data.groups[i].subgroups.size(),
                           {Vec::Zero(q2), Mat::Identity(q2, q2), Mat::Zero(p, q2), Mat::Zero(q1, q2)});
    }
    s.sigma2 = init_noise(priors.nu_sigma2, static_cast<double>(data.n_total()));
    s.SigmaL1 = init_covariance(priors.nu_SigmaL1, q1, static_cast<double>(data.m()));
    s.SigmaL2 = init_covariance(priors.nu_SigmaL2, q2, static_cast<double>(data.n_subgroups()));
    return s;
}

void mfvb_step_two_level(const GroupedDataset2& data, const Priors2& pr, QState2& s) {
    const Index p = data.p(), q = data.q();
    const auto m = static_cast<int>(data.m());
    const double mu = s.sigma2.mu_recip;
    const double root_mu = std::sqrt(mu);
    const Mat M_root = sym_sqrt(s.Sigma.M_inv);
    const Mat prior_root = inv_sym_sqrt(pr.Sigma_beta) / std::sqrt(static_cast<double>(m));
    const Vec prior_rhs = prior_root * pr.mu_beta;

    TwoLevelLSSystem sys;
    sys.groups.resize(m);
    for (int i = 0; i < m; ++i) {
        const auto& g = data.groups[i];
        const Index n = g.y.size();
        auto& t = sys.groups[i];
        t.b = Vec::Zero(n + p + q);
        t.b.head(n) = root_mu * g.y;
        t.b.segment(n, p) = prior_rhs;
        t.B = Mat::Zero(n + p + q, p);
        t.B.topRows(n) = root_mu * g.X;
        t.B.middleRows(n, p) = prior_root;
        t.Bdot = Mat::Zero(n + p + q, q);
        t.Bdot.topRows(n) = root_mu * g.Z;
        t.Bdot.bottomRows(q) = M_root;
    }
    const auto sol = solve_two_level_sparse_ls(sys);

    s.mu_beta = sol.x1;
    s.Sigma_beta = sol.A11inv;
    std::vector<Mat> P22(m);
    Mat second = Mat::Zero(q, q);
    for (int i = 0; i < m; ++i) {
        auto& u = s.groups[i];
        u.mu_u = sol.groups[i].x2;
        u.Sigma_u = sol.groups[i].A22inv;
        u.Cross_beta_u = sol.groups[i].A12inv;
        const auto& Z = data.groups[i].Z;
        P22[i] = mu * Z.transpose() * Z + s.Sigma.M_inv;
        second += u.mu_u * u.mu_u.transpose() + u.Sigma_u;
    }
    s.logdet_coef = two_level_logdet(s.Sigma_beta, P22);

    update_noise(s.sigma2, expected_sq_residual(s, data), pr.nu_sigma2, pr.s_sigma2);
    update_covariance(s.Sigma, second, pr.nu_Sigma, pr.s_Sigma);
    s.elbo = elbo_two_level(s, data, pr);
}

void mfvb_step_three_level(const GroupedDataset3& data, const Priors3& pr, QState3& s) {
    const Index p = data.p(), q1 = data.q1(), q2 = data.q2();
    const auto m = static_cast<int>(data.m());
    const double mu = s.sigma2.mu_recip;
    const double root_mu = std::sqrt(mu);
    const Mat M1_root = sym_sqrt(s.SigmaL1.M_inv);
    const Mat M2_root = sym_sqrt(s.SigmaL2.M_inv);
    const Mat prior_root = inv_sym_sqrt(pr.Sigma_beta) / std::sqrt(static_cast<double>(data.n_subgroups()));
    const Vec prior_rhs = prior_root * pr.mu_beta;
    const Index extra = p + q1 + q2;

    ThreeLevelLSSystem sys;
    sys.groups.resize(m);
    for (int i = 0; i < m; ++i) {
        const auto& g = data.groups[i];
        const double spread = 1.0 / std::sqrt(static_cast<double>(g.subgroups.size()));
        sys.groups[i].inner.resize(g.subgroups.size());
        for (std::size_t j = 0; j < g.subgroups.size(); ++j) {
            const auto& d = g.subgroups[j];
            const Index o = d.y.size();
            auto& t = sys.groups[i].inner[j];
            t.b = Vec::Zero(o + extra);
            t.b.head(o) = root_mu * d.y;
            t.b.segment(o, p) = prior_rhs;
            t.B = Mat::Zero(o + extra, p);
            t.B.topRows(o) = root_mu * d.X;
            t.B.middleRows(o, p) = prior_root;
            t.Bdot = Mat::Zero(o + extra, q1);
            t.Bdot.topRows(o) = root_mu * d.ZL1;
            t.Bdot.middleRows(o + p, q1) = spread * M1_root;
            t.Bddot = Mat::Zero(o + extra, q2);
            t.Bddot.topRows(o) = root_mu * d.ZL2;
            t.Bddot.bottomRows(q2) = M2_root;
        }
    }
    const auto sol = solve_three_level_sparse_ls(sys);

    s.mu_beta = sol.x1;
    s.Sigma_beta = sol.A11inv;
    std::vector<Mat> P_outer(m);
    std::vector<std::vector<Mat>> P_inner(m), P_cross(m);
    Mat second1 = Mat::Zero(q1, q1);
    Mat second2 = Mat::Zero(q2, q2);
    for (int i = 0; i < m; ++i) {
        const auto& si = sol.groups[i];
        auto& qi = s.groups[i];
        qi.mu_u = si.x2;
        qi.Sigma_u = si.A22inv;
        qi.Cross_beta_u = si.A12inv;
        second1 += qi.mu_u * qi.mu_u.transpose() + qi.Sigma_u;
        P_outer[i] = s.SigmaL1.M_inv;
        const auto& g = data.groups[i];
        for (std::size_t j = 0; j < g.subgroups.size(); ++j) {
            const auto& d = g.subgroups[j];
            const auto& sj = si.inner[j];
            auto& qj = qi.subgroups[j];
            qj.mu_u = sj.x2;
            qj.Sigma_u = sj.A22inv;
            qj.Cross_beta_u = sj.A12inv;
            qj.Cross_u1_u = sj.A12inv_i;
            second2 += qj.mu_u * qj.mu_u.transpose() + qj.Sigma_u;
            P_outer[i] += mu * d.ZL1.transpose() * d.ZL1;
            P_inner[i].push_back(mu * d.ZL2.transpose() * d.ZL2 + s.SigmaL2.M_inv);
            P_cross[i].push_back(mu * d.ZL1.transpose() * d.ZL2);
        }
    }
    s.logdet_coef = three_level_logdet(s.Sigma_beta, P_outer, P_inner, P_cross);

    update_noise(s.sigma2, expected_sq_residual(s, data), pr.nu_sigma2, pr.s_sigma2);
    update_covariance(s.SigmaL1, second1, pr.nu_SigmaL1, pr.s_SigmaL1);
    update_covariance(s.SigmaL2, second2, pr.nu_SigmaL2, pr.s_SigmaL2);
    s.elbo = elbo_three_level(s, data, pr);
}

FitResult2 mfvb_fit_two_level(const GroupedDataset2& data, const Priors2& priors, const FitOptions& opts) {
    return detail::run_fit<FitResult2>(data, priors, opts, mfvb_init_two_level, mfvb_step_two_level);
}

FitResult3 mfvb_fit_three_level(const GroupedDataset3& data, const Priors3& priors, const FitOptions& opts) {
    return detail::run_fit<FitResult3>(data, priors, opts, mfvb_init_three_level, mfvb_step_three_level);
}

}  // namespace mlvb
