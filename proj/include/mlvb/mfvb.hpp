#pragma once

#include <vector>

#include "mlvb/data.hpp"
#include "mlvb/solvers.hpp"

namespace mlvb {

struct Priors2 {
    Vec mu_beta;
    Mat Sigma_beta;
    double nu_sigma2 = 1.0;
    double s_sigma2 = 1e5;
    double nu_Sigma = 2.0;
    Vec s_Sigma;  // q scales
};

struct Priors3 {
    Vec mu_beta;
    Mat Sigma_beta;
    double nu_sigma2 = 1.0;
    double s_sigma2 = 1e5;
    double nu_SigmaL1 = 2.0;
    Vec s_SigmaL1;
    double nu_SigmaL2 = 2.0;
    Vec s_SigmaL2;
};

Priors2 default_priors2(Index p, Index q);
Priors3 default_priors3(Index p, Index q1, Index q2);
void validate(const Priors2& pr, Index p, Index q);
void validate(const Priors3& pr, Index p, Index q1, Index q2);

// q-density parameters of a covariance matrix with a half-t style prior:
// q(Sigma) is Inverse-G-Wishart(full, xi, Lambda), q(A) is
// Inverse-G-Wishart(diag, xi_A, Lambda_A).
struct CovarianceQ {
    double xi = 0.0;
    Mat Lambda;
    double xi_A = 0.0;
    Mat Lambda_A;
    Mat M_inv;    // E_q(Sigma^{-1})
    Mat M_A_inv;  // E_q(A^{-1})
};

struct NoiseQ {
    double xi = 0.0;
    double lambda = 0.0;
    double xi_a = 0.0;
    double lambda_a = 0.0;
    double mu_recip = 1.0;    // E_q(1/sigma^2)
    double mu_recip_a = 1.0;  // E_q(1/a)
};

struct QState2 {
    struct Group {
        Vec mu_u;
        Mat Sigma_u;
        Mat Cross_beta_u;  // p x q
    };
    Vec mu_beta;
    Mat Sigma_beta;
    std::vector<Group> groups;
    NoiseQ sigma2;
    CovarianceQ Sigma;
    // log|Sigma_q(beta,u)| of the current Gaussian block.
    double logdet_coef = 0.0;
    double elbo = 0.0;
};

struct QState3 {
    struct Subgroup {
        Vec mu_u;
        Mat Sigma_u;
        Mat Cross_beta_u;  // p x q2
        Mat Cross_u1_u;    // q1 x q2
    };
    struct Group {
        Vec mu_u;
        Mat Sigma_u;
        Mat Cross_beta_u;  // p x q1
        std::vector<Subgroup> subgroups;
    };
    Vec mu_beta;
    Mat Sigma_beta;
    std::vector<Group> groups;
    NoiseQ sigma2;
    CovarianceQ SigmaL1;
    CovarianceQ SigmaL2;
    double logdet_coef = 0.0;
    double elbo = 0.0;
};

struct FitOptions {
    int max_iter = 500;
    double tol = 1e-8;
    // Run exactly max_iter iterations, ignoring tol.
    bool fixed_iterations = false;
    // Throw when the ELBO decreases by more than 1e-10 * |ELBO|.
    bool check_monotone = true;
};

struct TraceRecord {
    int iter = 0;
    double elbo = 0.0;
    double wall_seconds = 0.0;
};

struct FitResult2 {
    QState2 state;
    std::vector<TraceRecord> trace;
    bool converged = false;
    int iterations = 0;
};

struct FitResult3 {
    QState3 state;
    std::vector<TraceRecord> trace;
    bool converged = false;
    int iterations = 0;
};

// Starting state: E(1/sigma^2) = 1, E(1/a) = 1, E(Sigma^{-1}) = I, E(A^{-1}) = I,
// with every xi at its closed form.
QState2 mfvb_init_two_level(const GroupedDataset2& data, const Priors2& priors);
QState3 mfvb_init_three_level(const GroupedDataset3& data, const Priors3& priors);

// One coordinate ascent cycle; updates every q-density parameter and the ELBO.
void mfvb_step_two_level(const GroupedDataset2& data, const Priors2& priors, QState2& state);
void mfvb_step_three_level(const GroupedDataset3& data, const Priors3& priors, QState3& state);

FitResult2 mfvb_fit_two_level(const GroupedDataset2& data, const Priors2& priors, const FitOptions& opts = {});
FitResult3 mfvb_fit_three_level(const GroupedDataset3& data, const Priors3& priors, const FitOptions& opts = {});

// Evidence lower bound from the q-density parameters in state. Uses
// state.logdet_coef for the Gaussian entropy term.
double elbo_two_level(const QState2& state, const GroupedDataset2& data, const Priors2& priors);
double elbo_three_level(const QState3& state, const GroupedDataset3& data, const Priors3& priors);

// Streamlined log|Sigma_q| of a two-level (three-level) Gaussian block given the
// fixed-effect covariance and the random-effect diagonal precision blocks.
double two_level_logdet(const Mat& Sigma_beta, const std::vector<Mat>& P22);
// P22_outer[i] is the level-1 precision block, P22_inner[i][j] the level-2 blocks
// and P12_inner[i][j] the q1 x q2 precision between them.
double three_level_logdet(const Mat& Sigma_beta, const std::vector<Mat>& P22_outer,
                          const std::vector<std::vector<Mat>>& P22_inner,
                          const std::vector<std::vector<Mat>>& P12_inner);

// Sum over groups of E_q||y - X beta - Z u||^2.
double expected_sq_residual(const QState2& state, const GroupedDataset2& data);
double expected_sq_residual(const QState3& state, const GroupedDataset3& data);

// Moments implied by the Inverse-chi-squared / Inverse-G-Wishart parameters.
void refresh_moments(NoiseQ& n);
void refresh_moments(CovarianceQ& c);

}  // namespace mlvb
