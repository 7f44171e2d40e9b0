#pragma once

#include <random>

#include "mlvb/matops.hpp"

namespace mlvb {

// Multivariate normal with sufficient statistic [x; vech(x x^T)].
struct MVNNatural {
    Vec eta1;
    Vec eta2;
};

struct MVNCommon {
    Vec mu;
    Mat Sigma;
};

MVNCommon mvn_natural_to_common(const MVNNatural& n);
MVNNatural mvn_common_to_natural(const Vec& mu, const Mat& Sigma);

// Inverse-chi-squared(xi, lambda): density proportional to
// x^{-xi/2 - 1} exp(-lambda / (2x)). Sufficient statistic [log x, 1/x].
struct InvChiSq {
    double xi = 0.0;
    double lambda = 0.0;
};

enum class Graph { full, diag };

// Inverse-G-Wishart(G, xi, Lambda): density proportional to
// |X|^{-(xi+2)/2} exp(-tr(Lambda X^{-1}) / 2). Sufficient statistic
// [log|X|, vech(X^{-1})].
struct InvGWishart {
    Graph graph = Graph::full;
    double xi = 0.0;
    Mat Lambda;
};

double invchisq_recip_mean(const InvChiSq& d);
Mat invgwishart_inverse_mean(const InvGWishart& d);

// Natural parameter vector (length 1 + d(d+1)/2) to (xi, Lambda). For the
// diagonal graph the off-diagonal part of Lambda is discarded.
InvGWishart invgwishart_msg_to_params(const Vec& eta, Index d, Graph graph = Graph::full);
Vec invgwishart_params_to_msg(const InvGWishart& d);
InvChiSq invchisq_msg_to_params(const Vec& eta);
Vec invchisq_params_to_msg(const InvChiSq& d);

double sample_invchisq(const InvChiSq& d, std::mt19937_64& rng);
// Draw from a full-graph Inverse-G-Wishart, which is an inverse Wishart with
// xi - d + 1 degrees of freedom and scale Lambda.
Mat sample_invgwishart(const InvGWishart& d, std::mt19937_64& rng);

}  // namespace mlvb
