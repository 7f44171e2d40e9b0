#pragma once

#include "mlvb/blup.hpp"
#include "mlvb/data.hpp"
#include "mlvb/mfvb.hpp"
#include "mlvb/solvers.hpp"

namespace mlvb {

// Dense reference implementations. Everything here works on the full joint
// vector [beta; u] and is deliberately slow: full inversions and normal
// equations instead of the blockwise QR route.
//
// Joint ordering: two-level [beta; u_1; ...; u_m]; three-level
// [beta; u_1; u_11; ...; u_1n_1; u_2; u_21; ...].

struct DenseSystem {
    Mat A;
    Vec a;
};

DenseSystem dense_assemble(const TwoLevelSparseSystem& sys);
DenseSystem dense_assemble(const ThreeLevelSparseSystem& sys);
// B^T B and B^T b of the stacked least squares problem.
DenseSystem dense_normal_equations(const TwoLevelLSSystem& sys);
DenseSystem dense_normal_equations(const ThreeLevelLSSystem& sys);

// Full LU inversion, then extraction of the sub-blocks at the positions the
// streamlined solvers report.
TwoLevelSolution dense_inverse_subblocks(const TwoLevelSparseSystem& sys);
ThreeLevelSolution dense_inverse_subblocks(const ThreeLevelSparseSystem& sys);
TwoLevelSolution dense_solve_ls(const TwoLevelLSSystem& sys);
ThreeLevelSolution dense_solve_ls(const ThreeLevelLSSystem& sys);

// Offsets of each random-effect block in the joint ordering.
struct JointLayout3 {
    std::vector<Index> outer;
    std::vector<std::vector<Index>> inner;
    Index size = 0;
};
JointLayout3 joint_layout(const GroupedDataset3& data);
JointLayout3 joint_layout(const ThreeLevelSparseSystem& sys);

// C = [X Z] with the random-effect columns in joint order.
Mat design_matrix(const GroupedDataset2& data);
Mat design_matrix(const GroupedDataset3& data);

// Pieces of the Gaussian update (C^T R^{-1} C + D)^{-1}(C^T R^{-1} y + o) with
// R = I / r_inv. C^T C is accumulated group by group and stored dense.
struct DenseAssembly {
    Mat CtC;
    Vec Cty;
    double yty = 0.0;
    Mat D;
    Vec o;
    double r_inv = 1.0;
};

DenseAssembly dense_assembly_blup(const GroupedDataset2& data, const VarianceComponents2& vc);
DenseAssembly dense_assembly_blup(const GroupedDataset3& data, const VarianceComponents3& vc);
DenseAssembly dense_assembly_mfvb(const GroupedDataset2& data, const Priors2& priors, double mu_recip_sigma2,
                                  const Mat& M_Sigma_inv);
DenseAssembly dense_assembly_mfvb(const GroupedDataset3& data, const Priors3& priors, double mu_recip_sigma2,
                                  const Mat& M_SigmaL1_inv, const Mat& M_SigmaL2_inv);

struct DenseGaussian {
    Vec mu;
    Mat Sigma;
    double logdet = 0.0;  // log|Sigma| from the Cholesky factor of the precision
};

// Cholesky-based full inverse of the assembled precision.
DenseGaussian dense_gaussian(const DenseAssembly& a);

DenseGaussian dense_blup(const GroupedDataset2& data, const VarianceComponents2& vc);
DenseGaussian dense_blup(const GroupedDataset3& data, const VarianceComponents3& vc);
DenseGaussian dense_mfvb_step(const GroupedDataset2& data, const Priors2& priors, double mu_recip_sigma2,
                              const Mat& M_Sigma_inv);
DenseGaussian dense_mfvb_step(const GroupedDataset3& data, const Priors3& priors, double mu_recip_sigma2,
                              const Mat& M_SigmaL1_inv, const Mat& M_SigmaL2_inv);

// LU-based log|det|.
double dense_logdet(const Mat& Sigma);

// Expected squared residual y^T y - 2 mu^T C^T y + mu^T C^T C mu + tr(C^T C Sigma).
double dense_expected_sq_residual(const DenseAssembly& a, const DenseGaussian& g);

// Term-by-term evaluation of the lower bound: every E log p minus E log q,
// with the digamma expectations of log sigma^2, log a, log|Sigma| and log A
// kept rather than cancelled, and log|Sigma_q| taken from the dense matrix.
double literal_elbo(const GroupedDataset2& data, const Priors2& priors, const DenseGaussian& coef,
                    const NoiseQ& sigma2, const CovarianceQ& Sigma);
double literal_elbo(const GroupedDataset3& data, const Priors3& priors, const DenseGaussian& coef,
                    const NoiseQ& sigma2, const CovarianceQ& SigmaL1, const CovarianceQ& SigmaL2);

// Sub-blocks of a dense joint Gaussian in the streamlined layout.
TwoLevelSolution extract_blocks(const Vec& x, const Mat& Ainv, Index p, Index q, Index m);
ThreeLevelSolution extract_blocks(const Vec& x, const Mat& Ainv, Index p, Index q1, Index q2,
                                  const JointLayout3& layout);

// One naive coordinate ascent cycle. Same state layout and update order as
// the streamlined step, but the Gaussian block comes from dense_mfvb_step, the
// residual and covariance accumulations from the dense joint covariance, and
// the ELBO from literal_elbo.
void naive_mfvb_step(const GroupedDataset2& data, const Priors2& priors, QState2& state);
void naive_mfvb_step(const GroupedDataset3& data, const Priors3& priors, QState3& state);

FitResult2 naive_mfvb_fit(const GroupedDataset2& data, const Priors2& priors, const FitOptions& opts = {});
FitResult3 naive_mfvb_fit(const GroupedDataset3& data, const Priors3& priors, const FitOptions& opts = {});

}  // namespace mlvb
