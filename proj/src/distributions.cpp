#include "mlvb/distributions.hpp"

#include <cmath>

namespace mlvb {

MVNCommon mvn_natural_to_common(const MVNNatural& n) {
    if (vech_size(n.eta1.size()) != n.eta2.size())
        throw ShapeError("mvn_natural_to_common: eta2 length does not match eta1");
    const Mat precision = -2.0 * dplus_t_unvec(n.eta2);
    MVNCommon out;
    out.Sigma = spd_inverse(precision);
    out.mu = out.Sigma * n.eta1;
    return out;
}

MVNNatural mvn_common_to_natural(const Vec& mu, const Mat& Sigma) {
    if (Sigma.rows() != mu.size() || Sigma.cols() != mu.size())
        throw ShapeError("mvn_common_to_natural: Sigma does not match mu");
    const Mat P = spd_inverse(Sigma);
    return {P * mu, -0.5 * dup_t_vec(P)};
}

double invchisq_recip_mean(const InvChiSq& d) {
    return d.xi / d.lambda;
}

Mat invgwishart_inverse_mean(const InvGWishart& d) {
    const Index q = d.Lambda.rows();
    if (d.graph == Graph::diag) {
        if (!(d.Lambda.diagonal().array() > 0.0).all())
            throw NumericalError(Failure::not_spd, "diagonal Inverse-G-Wishart scale must be positive");
        return Mat(d.xi * d.Lambda.diagonal().cwiseInverse().asDiagonal());
    }
    return (d.xi - static_cast<double>(q) + 1.0) * spd_inverse(d.Lambda);
}

InvGWishart invgwishart_msg_to_params(const Vec& eta, Index d, Graph graph) {
    if (eta.size() != 1 + vech_size(d)) throw ShapeError("Inverse-G-Wishart message has wrong length");
    InvGWishart out;
    out.graph = graph;
    out.xi = -2.0 * eta(0) - 2.0;
    out.Lambda = -2.0 * dplus_t_unvec(eta.tail(eta.size() - 1));
    if (graph == Graph::diag) out.Lambda = Mat(out.Lambda.diagonal().asDiagonal());
    if (!is_spd(out.Lambda))
        throw NumericalError(Failure::not_spd, "Inverse-G-Wishart scale from message is not positive definite");
    return out;
}

Vec invgwishart_params_to_msg(const InvGWishart& d) {
    Vec eta(1 + vech_size(d.Lambda.rows()));
    eta(0) = -0.5 * (d.xi + 2.0);
    eta.tail(eta.size() - 1) = -0.5 * dup_t_vec(d.Lambda);
    return eta;
}

InvChiSq invchisq_msg_to_params(const Vec& eta) {
    if (eta.size() != 2) throw ShapeError("Inverse-chi-squared message must have length 2");
    InvChiSq out{-2.0 * eta(0) - 2.0, -2.0 * eta(1)};
    if (!(out.lambda > 0.0) || !std::isfinite(out.xi))
        throw NumericalError(Failure::not_spd, "Inverse-chi-squared scale from message is not positive");
    return out;
}

Vec invchisq_params_to_msg(const InvChiSq& d) {
    Vec eta(2);
    eta << -0.5 * (d.xi + 2.0), -0.5 * d.lambda;
    return eta;
}

double sample_invchisq(const InvChiSq& d, std::mt19937_64& rng) {
    std::chi_squared_distribution<double> chi(d.xi);
    return d.lambda / chi(rng);
}

Mat sample_invgwishart(const InvGWishart& d, std::mt19937_64& rng) {
    const Index q = d.Lambda.rows();
    if (d.graph == Graph::diag) {
        Mat X = Mat::Zero(q, q);
        for (Index k = 0; k < q; ++k) X(k, k) = sample_invchisq({d.xi, d.Lambda(k, k)}, rng);
        return X;
    }
    // Bartlett decomposition of W ~ Wishart(nu, Lambda^{-1}); X = W^{-1}.
    const double nu = d.xi - static_cast<double>(q) + 1.0;
    const Mat scale = spd_inverse(d.Lambda);
    const Eigen::LLT<Mat> llt(scale);
    const Mat L = llt.matrixL();
    std::normal_distribution<double> z;
    Mat Bt = Mat::Zero(q, q);
    for (Index k = 0; k < q; ++k) {
        std::chi_squared_distribution<double> chi(nu - static_cast<double>(k));
        Bt(k, k) = std::sqrt(chi(rng));
        for (Index l = 0; l < k; ++l) Bt(k, l) = z(rng);
    }
    const Mat LA = L * Bt;
    return spd_inverse(LA * LA.transpose());
}

}  // namespace mlvb
