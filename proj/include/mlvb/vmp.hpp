#pragma once

#include <vector>

#include "mlvb/data.hpp"
#include "mlvb/distributions.hpp"
#include "mlvb/mfvb.hpp"
#include "mlvb/solvers.hpp"

namespace mlvb {

// Block layout of the reduced natural parameter vector of (beta, u):
// [eta_beta (p); vech block (p(p+1)/2); then per group i
//  eta_u (q); vech block (q(q+1)/2); beta-u cross block (p q)].
struct Partition2 {
    Index p = 0, q = 0, m = 0;

    Index group_size() const { return q + vech_size(q) + p * q; }
    Index size() const { return p + vech_size(p) + m * group_size(); }
    Index group(Index i) const { return p + vech_size(p) + i * group_size(); }
};

// Three-level layout: the global blocks, then every level-1 group block
// [q1; vech q1; p q1], then every level-2 block in (i, j) order
// [q2; vech q2; p q2; q1 q2].
struct Partition3 {
    Index p = 0, q1 = 0, q2 = 0;
    std::vector<Index> n;  // subgroups per group

    Index outer_size() const { return q1 + vech_size(q1) + p * q1; }
    Index inner_size() const { return q2 + vech_size(q2) + p * q2 + q1 * q2; }
    Index m() const { return static_cast<Index>(n.size()); }
    Index n_subgroups() const;
    Index size() const { return p + vech_size(p) + m() * outer_size() + n_subgroups() * inner_size(); }
    Index outer(Index i) const { return p + vech_size(p) + i * outer_size(); }
    Index inner(Index i, Index j) const;
};

struct NaturalParamVector2 {
    Partition2 part;
    Vec values;
};

struct NaturalParamVector3 {
    Partition3 part;
    Vec values;
};

Partition2 partition_of(const GroupedDataset2& data);
Partition3 partition_of(const GroupedDataset3& data);

// Common parameters implied by a (beta, u) natural parameter vector, plus
// log|Sigma_q(beta,u)| from the same factorization.
struct CommonBlocks2 {
    TwoLevelSolution blocks;
    double logdet = 0.0;
};

struct CommonBlocks3 {
    ThreeLevelSolution blocks;
    double logdet = 0.0;
};

CommonBlocks2 two_level_natural_to_common(const NaturalParamVector2& eta);
CommonBlocks3 three_level_natural_to_common(const NaturalParamVector3& eta);

// Inverse of the above for a mean and a covariance whose inverse has the
// two-level (three-level) sparsity pattern; the precision is given directly.
NaturalParamVector2 two_level_common_to_natural(const Partition2& part, const Vec& mu, const Mat& precision);
NaturalParamVector3 three_level_common_to_natural(const Partition3& part, const Vec& mu, const Mat& precision);

// Factor to node messages around sigma^2 and its auxiliary variable a.
// Every node has exactly two neighbouring factors, so the node to factor
// message on one edge is the factor to node message on the other edge, and
// the combined edge parameter is the q-density natural parameter.
struct NoiseEdges {
    Vec lik_to_sigma2;   // from p(y | beta, u, sigma^2)
    Vec link_to_sigma2;  // from p(sigma^2 | a)
    Vec link_to_a;       // from p(sigma^2 | a)
    Vec prior_to_a;      // from p(a)

    Vec sigma2() const { return lik_to_sigma2 + link_to_sigma2; }
    Vec a() const { return link_to_a + prior_to_a; }
};

// Same around a covariance matrix Sigma and its diagonal auxiliary A.
struct CovarianceEdges {
    Vec pen_to_Sigma;  // from p(beta, u | Sigma)
    Vec link_to_Sigma; // from p(Sigma | A)
    Vec link_to_A;     // from p(Sigma | A)
    Vec prior_to_A;    // from p(A)

    Vec Sigma() const { return pen_to_Sigma + link_to_Sigma; }
    Vec A() const { return link_to_A + prior_to_A; }
};

struct EdgeStore2 {
    NaturalParamVector2 lik_to_coef;
    NaturalParamVector2 pen_to_coef;
    NoiseEdges noise;
    CovarianceEdges Sigma;

    NaturalParamVector2 coef() const { return {lik_to_coef.part, lik_to_coef.values + pen_to_coef.values}; }
};

struct EdgeStore3 {
    NaturalParamVector3 lik_to_coef;
    NaturalParamVector3 pen_to_coef;
    NoiseEdges noise;
    CovarianceEdges SigmaL1;
    CovarianceEdges SigmaL2;

    NaturalParamVector3 coef() const { return {lik_to_coef.part, lik_to_coef.values + pen_to_coef.values}; }
};

// Messages consistent with E(1/sigma^2) = 1, E(1/a) = 1, E(Sigma^{-1}) = I
// and E(A^{-1}) = I, the same starting point as the coordinate ascent fit.
EdgeStore2 vmp_init_edges(const GroupedDataset2& data, const Priors2& priors);
EdgeStore3 vmp_init_edges(const GroupedDataset3& data, const Priors3& priors);

void fragment_gauss_lik_2(const GroupedDataset2& data, EdgeStore2& edges);
void fragment_gauss_pen_2(const Priors2& priors, EdgeStore2& edges);
void fragment_gauss_lik_3(const GroupedDataset3& data, EdgeStore3& edges);
void fragment_gauss_pen_3(const Priors3& priors, EdgeStore3& edges);
// p(sigma^2 | a) and p(a) with sigma^2 | a ~ Inverse-chi-squared(nu, 1/a),
// a ~ Inverse-chi-squared(1, 1/(nu s^2)).
void fragment_noise_chain(double nu, double s, NoiseEdges& edges);
// p(Sigma | A) and p(A) with Sigma | A ~ Inverse-G-Wishart(full, nu + 2q - 2, A^{-1}),
// A ~ Inverse-G-Wishart(diag, 1, diag(1/(nu s_j^2))).
void fragment_covariance_chain(double nu, const Vec& s, CovarianceEdges& edges);

// q-density parameters implied by the current messages, with moments and ELBO.
QState2 vmp_extract(const GroupedDataset2& data, const Priors2& priors, const EdgeStore2& edges);
QState3 vmp_extract(const GroupedDataset3& data, const Priors3& priors, const EdgeStore3& edges);

// Sweeps likelihood, penalization, sigma^2 chain and covariance chains until
// the relative change of the extracted ELBO drops below opts.tol.
FitResult2 vmp_fit_two_level(const GroupedDataset2& data, const Priors2& priors, const FitOptions& opts = {});
FitResult3 vmp_fit_three_level(const GroupedDataset3& data, const Priors3& priors, const FitOptions& opts = {});

}  // namespace mlvb
