#include "mlvb/vmp.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

namespace mlvb {

namespace {

void check_length(Index got, Index want) {
    if (got != want)
        throw ShapeError("natural parameter vector has length " + std::to_string(got) + ", expected " +
                         std::to_string(want));
}

Vec msg(double first, const Vec& rest) {
    Vec out(1 + rest.size());
    out(0) = first;
    out.tail(rest.size()) = rest;
    return out;
}

Vec pair(double a, double b) { return Vec{{a, b}}; }

double recip_mean(const Vec& eta) { return invchisq_recip_mean(invchisq_msg_to_params(eta)); }

Mat inverse_mean(const Vec& eta, Index d, Graph g) {
    return invgwishart_inverse_mean(invgwishart_msg_to_params(eta, d, g));
}

void fill(QState2& s, const TwoLevelSolution& sol) {
    s.mu_beta = sol.x1;
    s.Sigma_beta = sol.A11inv;
    s.groups.resize(sol.groups.size());
    for (std::size_t i = 0; i < sol.groups.size(); ++i)
        s.groups[i] = {sol.groups[i].x2, sol.groups[i].A22inv, sol.groups[i].A12inv};
}

void fill(QState3& s, const ThreeLevelSolution& sol) {
    s.mu_beta = sol.x1;
    s.Sigma_beta = sol.A11inv;
    s.groups.resize(sol.groups.size());
    for (std::size_t i = 0; i < sol.groups.size(); ++i) {
        const auto& g = sol.groups[i];
        auto& t = s.groups[i];
        t.mu_u = g.x2;
        t.Sigma_u = g.A22inv;
        t.Cross_beta_u = g.A12inv;
        t.subgroups.clear();
        for (const auto& h : g.inner) t.subgroups.push_back({h.x2, h.A22inv, h.A12inv, h.A12inv_i});
    }
}

// The likelihood message to (beta, u) divided by E(1/sigma^2).
Vec lik_base(const GroupedDataset2& data, const Partition2& P) {
    const Index p = P.p, q = P.q;
    Vec v = Vec::Zero(P.size());
    Mat XtX = Mat::Zero(p, p);
    for (Index i = 0; i < P.m; ++i) {
        const auto& g = data.groups[i];
        const Index o = P.group(i);
        v.head(p) += g.X.transpose() * g.y;
        XtX += g.X.transpose() * g.X;
        v.segment(o, q) = g.Z.transpose() * g.y;
        v.segment(o + q, vech_size(q)) = -0.5 * dup_t_vec(g.Z.transpose() * g.Z);
        v.segment(o + q + vech_size(q), p * q) = -vec(g.X.transpose() * g.Z);
    }
    v.segment(p, vech_size(p)) = -0.5 * dup_t_vec(XtX);
    return v;
}

Vec lik_base(const GroupedDataset3& data, const Partition3& P) {
    const Index p = P.p, q1 = P.q1, q2 = P.q2;
    Vec v = Vec::Zero(P.size());
    Mat XtX = Mat::Zero(p, p);
    for (Index i = 0; i < P.m(); ++i) {
        const auto& g = data.groups[i];
        Vec l1y = Vec::Zero(q1);
        Mat l1l1 = Mat::Zero(q1, q1), xl1 = Mat::Zero(p, q1);
        for (Index j = 0; j < P.n[i]; ++j) {
            const auto& d = g.subgroups[j];
            const Index o = P.inner(i, j);
            v.head(p) += d.X.transpose() * d.y;
            XtX += d.X.transpose() * d.X;
            l1y += d.ZL1.transpose() * d.y;
            l1l1 += d.ZL1.transpose() * d.ZL1;
            xl1 += d.X.transpose() * d.ZL1;
            v.segment(o, q2) = d.ZL2.transpose() * d.y;
            v.segment(o + q2, vech_size(q2)) = -0.5 * dup_t_vec(d.ZL2.transpose() * d.ZL2);
            v.segment(o + q2 + vech_size(q2), p * q2) = -vec(d.X.transpose() * d.ZL2);
            v.segment(o + q2 + vech_size(q2) + p * q2, q1 * q2) = -vec(d.ZL1.transpose() * d.ZL2);
        }
        const Index o = P.outer(i);
        v.segment(o, q1) = l1y;
        v.segment(o + q1, vech_size(q1)) = -0.5 * dup_t_vec(l1l1);
        v.segment(o + q1 + vech_size(q1), p * q1) = -vec(xl1);
    }
    v.segment(p, vech_size(p)) = -0.5 * dup_t_vec(XtX);
    return v;
}

Vec pen_message(const Partition2& P, const Vec& mu_beta, const Mat& Sigma_beta, const Mat& M) {
    const Mat Pb = spd_inverse(Sigma_beta);
    Vec v = Vec::Zero(P.size());
    v.head(P.p) = Pb * mu_beta;
    v.segment(P.p, vech_size(P.p)) = -0.5 * dup_t_vec(Pb);
    const Vec block = -0.5 * dup_t_vec(M);
    for (Index i = 0; i < P.m; ++i) v.segment(P.group(i) + P.q, vech_size(P.q)) = block;
    return v;
}

Vec pen_message(const Partition3& P, const Vec& mu_beta, const Mat& Sigma_beta, const Mat& M1, const Mat& M2) {
    const Mat Pb = spd_inverse(Sigma_beta);
    Vec v = Vec::Zero(P.size());
    v.head(P.p) = Pb * mu_beta;
    v.segment(P.p, vech_size(P.p)) = -0.5 * dup_t_vec(Pb);
    const Vec b1 = -0.5 * dup_t_vec(M1), b2 = -0.5 * dup_t_vec(M2);
    for (Index i = 0; i < P.m(); ++i) {
        v.segment(P.outer(i) + P.q1, vech_size(P.q1)) = b1;
        for (Index j = 0; j < P.n[i]; ++j) v.segment(P.inner(i, j) + P.q2, vech_size(P.q2)) = b2;
    }
    return v;
}

NoiseEdges init_noise(double nu, double s, double n_obs) {
    NoiseEdges e;
    const double xi = nu + n_obs;
    // Chosen so that q(sigma^2) has E(1/sigma^2) = 1 once combined with the
    // link message built from E(1/a) = 1.
    e.lik_to_sigma2 = pair(-0.5 * n_obs, -0.5 * (xi - 1.0));
    e.link_to_sigma2 = pair(-(0.5 * nu + 1.0), -0.5);
    e.link_to_a = pair(-0.5 * nu, -0.5);
    e.prior_to_a = pair(-1.5, -0.5 / (nu * s * s));
    return e;
}

CovarianceEdges init_covariance(double nu, const Vec& s, double n_effects) {
    const Index q = s.size();
    const double dq = static_cast<double>(q);
    const double xi = nu + 2.0 * dq - 2.0 + n_effects;
    const Mat I = Mat::Identity(q, q);
    CovarianceEdges e;
    e.pen_to_Sigma = msg(-0.5 * n_effects, -0.5 * dup_t_vec((xi - dq) * I));
    e.link_to_Sigma = msg(-0.5 * (nu + 2.0 * dq), -0.5 * dup_t_vec(I));
    e.link_to_A = msg(-0.5 * (nu + dq - 1.0), -0.5 * dup_t_vec(I));
    e.prior_to_A = msg(-1.5, -0.5 * dup_t_vec(Mat((nu * s.array().square()).inverse().matrix().asDiagonal())));
    return e;
}

Mat second_moment(const std::vector<Vec>& mu, const std::vector<Mat>& Sigma) {
    Mat out = Mat::Zero(Sigma.front().rows(), Sigma.front().cols());
    for (std::size_t i = 0; i < mu.size(); ++i) out += mu[i] * mu[i].transpose() + Sigma[i];
    return out;
}

void extract_noise(NoiseQ& n, const NoiseEdges& e) {
    const InvChiSq s = invchisq_msg_to_params(e.sigma2());
    const InvChiSq a = invchisq_msg_to_params(e.a());
    n.xi = s.xi;
    n.lambda = s.lambda;
    n.xi_a = a.xi;
    n.lambda_a = a.lambda;
    refresh_moments(n);
}

void extract_covariance(CovarianceQ& c, const CovarianceEdges& e, Index q) {
    const InvGWishart S = invgwishart_msg_to_params(e.Sigma(), q, Graph::full);
    const InvGWishart A = invgwishart_msg_to_params(e.A(), q, Graph::diag);
    c.xi = S.xi;
    c.Lambda = S.Lambda;
    c.xi_A = A.xi;
    c.Lambda_A = A.Lambda;
    refresh_moments(c);
}

bool all_finite(const Vec& v) { return v.allFinite(); }

bool edges_finite(const NoiseEdges& e) {
    return all_finite(e.lik_to_sigma2) && all_finite(e.link_to_sigma2) && all_finite(e.link_to_a);
}

bool edges_finite(const CovarianceEdges& e) {
    return all_finite(e.pen_to_Sigma) && all_finite(e.link_to_Sigma) && all_finite(e.link_to_A);
}

// Joint offsets [beta; u_1; u_11; ...] of a three-level partition.
void joint_offsets(const Partition3& P, std::vector<Index>& outer, std::vector<std::vector<Index>>& inner,
                   Index& size) {
    Index off = P.p;
    outer.clear();
    inner.clear();
    for (Index i = 0; i < P.m(); ++i) {
        outer.push_back(off);
        off += P.q1;
        inner.emplace_back();
        for (Index j = 0; j < P.n[i]; ++j) {
            inner.back().push_back(off);
            off += P.q2;
        }
    }
    size = off;
}

template <class Result, class Data, class Priors, class Edges>
Result run_vmp(const Data& data, const Priors& priors, const FitOptions& opts, Edges edges,
               void (*sweep)(const Data&, const Priors&, Edges&), bool (*finite)(const Edges&)) {
    if (opts.max_iter < 1 || !(opts.tol > 0.0)) throw ShapeError("max_iter must be >= 1 and tol > 0");
    Result out;
    const auto start = std::chrono::steady_clock::now();
    double previous = 0.0;
    for (int iter = 1; iter <= opts.max_iter; ++iter) {
        sweep(data, priors, edges);
        if (!finite(edges))
            throw NumericalError(Failure::diverged, "non-finite message entries at sweep " + std::to_string(iter));
        out.state = vmp_extract(data, priors, edges);
        if (!std::isfinite(out.state.elbo))
            throw NumericalError(Failure::diverged, "non-finite lower bound at sweep " + std::to_string(iter));
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        out.trace.push_back({iter, out.state.elbo, secs});
        out.iterations = iter;
        if (!opts.fixed_iterations && iter > 1 && std::abs(out.state.elbo - previous) < opts.tol * std::abs(previous)) {
            out.converged = true;
            break;
        }
        previous = out.state.elbo;
    }
    if (opts.fixed_iterations) out.converged = true;
    return out;
}

void sweep2(const GroupedDataset2& data, const Priors2& pr, EdgeStore2& e) {
    fragment_gauss_lik_2(data, e);
    fragment_gauss_pen_2(pr, e);
    fragment_noise_chain(pr.nu_sigma2, pr.s_sigma2, e.noise);
    fragment_covariance_chain(pr.nu_Sigma, pr.s_Sigma, e.Sigma);
}

void sweep3(const GroupedDataset3& data, const Priors3& pr, EdgeStore3& e) {
    fragment_gauss_lik_3(data, e);
    fragment_gauss_pen_3(pr, e);
    fragment_noise_chain(pr.nu_sigma2, pr.s_sigma2, e.noise);
    fragment_covariance_chain(pr.nu_SigmaL1, pr.s_SigmaL1, e.SigmaL1);
    fragment_covariance_chain(pr.nu_SigmaL2, pr.s_SigmaL2, e.SigmaL2);
}

bool finite2(const EdgeStore2& e) {
    return all_finite(e.lik_to_coef.values) && all_finite(e.pen_to_coef.values) && edges_finite(e.noise) &&
           edges_finite(e.Sigma);
}

bool finite3(const EdgeStore3& e) {
    return all_finite(e.lik_to_coef.values) && all_finite(e.pen_to_coef.values) && edges_finite(e.noise) &&
           edges_finite(e.SigmaL1) && edges_finite(e.SigmaL2);
}

}  // namespace

Index Partition3::n_subgroups() const { return std::accumulate(n.begin(), n.end(), Index{0}); }

Index Partition3::inner(Index i, Index j) const {
    Index before = 0;
    for (Index k = 0; k < i; ++k) before += n[k];
    return p + vech_size(p) + m() * outer_size() + (before + j) * inner_size();
}

Partition2 partition_of(const GroupedDataset2& data) { return {data.p(), data.q(), data.m()}; }

Partition3 partition_of(const GroupedDataset3& data) {
    Partition3 P{data.p(), data.q1(), data.q2(), {}};
    for (const auto& g : data.groups) P.n.push_back(static_cast<Index>(g.subgroups.size()));
    return P;
}

CommonBlocks2 two_level_natural_to_common(const NaturalParamVector2& eta) {
    const auto& P = eta.part;
    const Vec& v = eta.values;
    check_length(v.size(), P.size());
    const Index p = P.p, q = P.q;
    TwoLevelSparseSystem sys;
    sys.a1 = v.head(p);
    sys.A11 = -2.0 * dplus_t_unvec(v.segment(p, vech_size(p)));
    std::vector<Mat> P22;
    for (Index i = 0; i < P.m; ++i) {
        const Index o = P.group(i);
        TwoLevelSparseSystem::Group g;
        g.a2 = v.segment(o, q);
        g.A22 = -2.0 * dplus_t_unvec(v.segment(o + q, vech_size(q)));
        g.A12 = -vec_inverse(v.segment(o + q + vech_size(q), p * q), p, q);
        P22.push_back(g.A22);
        sys.groups.push_back(std::move(g));
    }
    CommonBlocks2 out;
    out.blocks = solve_two_level_sparse(sys);
    out.logdet = two_level_logdet(out.blocks.A11inv, P22);
    return out;
}

CommonBlocks3 three_level_natural_to_common(const NaturalParamVector3& eta) {
    const auto& P = eta.part;
    const Vec& v = eta.values;
    check_length(v.size(), P.size());
    const Index p = P.p, q1 = P.q1, q2 = P.q2;
    ThreeLevelSparseSystem sys;
    sys.a1 = v.head(p);
    sys.A11 = -2.0 * dplus_t_unvec(v.segment(p, vech_size(p)));
    std::vector<Mat> outer(P.m());
    std::vector<std::vector<Mat>> inner(P.m()), cross(P.m());
    for (Index i = 0; i < P.m(); ++i) {
        const Index o = P.outer(i);
        ThreeLevelSparseSystem::Outer g;
        g.a2 = v.segment(o, q1);
        g.A22 = -2.0 * dplus_t_unvec(v.segment(o + q1, vech_size(q1)));
        g.A12 = -vec_inverse(v.segment(o + q1 + vech_size(q1), p * q1), p, q1);
        outer[i] = g.A22;
        for (Index j = 0; j < P.n[i]; ++j) {
            const Index r = P.inner(i, j);
            ThreeLevelSparseSystem::Inner h;
            h.a2 = v.segment(r, q2);
            h.A22 = -2.0 * dplus_t_unvec(v.segment(r + q2, vech_size(q2)));
            h.A12 = -vec_inverse(v.segment(r + q2 + vech_size(q2), p * q2), p, q2);
            h.A12_i = -vec_inverse(v.segment(r + q2 + vech_size(q2) + p * q2, q1 * q2), q1, q2);
            inner[i].push_back(h.A22);
            cross[i].push_back(h.A12_i);
            g.inner.push_back(std::move(h));
        }
        sys.groups.push_back(std::move(g));
    }
    CommonBlocks3 out;
    out.blocks = solve_three_level_sparse(sys);
    out.logdet = three_level_logdet(out.blocks.A11inv, outer, inner, cross);
    return out;
}

NaturalParamVector2 two_level_common_to_natural(const Partition2& P, const Vec& mu, const Mat& precision) {
    const Index p = P.p, q = P.q, K = p + P.m * q;
    if (mu.size() != K || precision.rows() != K || precision.cols() != K)
        throw ShapeError("mean and precision do not match the partition");
    const Vec a = precision * mu;
    NaturalParamVector2 out{P, Vec::Zero(P.size())};
    Vec& v = out.values;
    v.head(p) = a.head(p);
    v.segment(p, vech_size(p)) = -0.5 * dup_t_vec(precision.topLeftCorner(p, p));
    for (Index i = 0; i < P.m; ++i) {
        const Index o = P.group(i), j = p + i * q;
        v.segment(o, q) = a.segment(j, q);
        v.segment(o + q, vech_size(q)) = -0.5 * dup_t_vec(precision.block(j, j, q, q));
        v.segment(o + q + vech_size(q), p * q) = -vec(precision.block(0, j, p, q));
    }
    return out;
}

NaturalParamVector3 three_level_common_to_natural(const Partition3& P, const Vec& mu, const Mat& precision) {
    std::vector<Index> outer;
    std::vector<std::vector<Index>> inner;
    Index K = 0;
    joint_offsets(P, outer, inner, K);
    if (mu.size() != K || precision.rows() != K || precision.cols() != K)
        throw ShapeError("mean and precision do not match the partition");
    const Index p = P.p, q1 = P.q1, q2 = P.q2;
    const Vec a = precision * mu;
    NaturalParamVector3 out{P, Vec::Zero(P.size())};
    Vec& v = out.values;
    v.head(p) = a.head(p);
    v.segment(p, vech_size(p)) = -0.5 * dup_t_vec(precision.topLeftCorner(p, p));
    for (Index i = 0; i < P.m(); ++i) {
        const Index o = P.outer(i), k = outer[i];
        v.segment(o, q1) = a.segment(k, q1);
        v.segment(o + q1, vech_size(q1)) = -0.5 * dup_t_vec(precision.block(k, k, q1, q1));
        v.segment(o + q1 + vech_size(q1), p * q1) = -vec(precision.block(0, k, p, q1));
        for (Index j = 0; j < P.n[i]; ++j) {
            const Index r = P.inner(i, j), l = inner[i][j];
            v.segment(r, q2) = a.segment(l, q2);
            v.segment(r + q2, vech_size(q2)) = -0.5 * dup_t_vec(precision.block(l, l, q2, q2));
            v.segment(r + q2 + vech_size(q2), p * q2) = -vec(precision.block(0, l, p, q2));
            v.segment(r + q2 + vech_size(q2) + p * q2, q1 * q2) = -vec(precision.block(k, l, q1, q2));
        }
    }
    return out;
}

EdgeStore2 vmp_init_edges(const GroupedDataset2& data, const Priors2& priors) {
    data.validate();
    validate(priors, data.p(), data.q());
    const Partition2 P = partition_of(data);
    EdgeStore2 e;
    e.lik_to_coef = {P, lik_base(data, P)};
    e.pen_to_coef = {P, pen_message(P, priors.mu_beta, priors.Sigma_beta, Mat::Identity(P.q, P.q))};
    e.noise = init_noise(priors.nu_sigma2, priors.s_sigma2, static_cast<double>(data.n_total()));
    e.Sigma = init_covariance(priors.nu_Sigma, priors.s_Sigma, static_cast<double>(P.m));
    return e;
}

EdgeStore3 vmp_init_edges(const GroupedDataset3& data, const Priors3& priors) {
    data.validate();
    validate(priors, data.p(), data.q1(), data.q2());
    const Partition3 P = partition_of(data);
    EdgeStore3 e;
    e.lik_to_coef = {P, lik_base(data, P)};
    e.pen_to_coef = {P, pen_message(P, priors.mu_beta, priors.Sigma_beta, Mat::Identity(P.q1, P.q1),
                                    Mat::Identity(P.q2, P.q2))};
    e.noise = init_noise(priors.nu_sigma2, priors.s_sigma2, static_cast<double>(data.n_total()));
    e.SigmaL1 = init_covariance(priors.nu_SigmaL1, priors.s_SigmaL1, static_cast<double>(P.m()));
    e.SigmaL2 = init_covariance(priors.nu_SigmaL2, priors.s_SigmaL2, static_cast<double>(P.n_subgroups()));
    return e;
}

void fragment_gauss_lik_2(const GroupedDataset2& data, EdgeStore2& e) {
    const Partition2& P = e.lik_to_coef.part;
    const double mu = recip_mean(e.noise.sigma2());
    QState2 s;
    fill(s, two_level_natural_to_common(e.coef()).blocks);
    const double resid = expected_sq_residual(s, data);
    e.lik_to_coef.values = mu * lik_base(data, P);
    e.noise.lik_to_sigma2 = pair(-0.5 * static_cast<double>(data.n_total()), -0.5 * resid);
}

void fragment_gauss_lik_3(const GroupedDataset3& data, EdgeStore3& e) {
    const Partition3& P = e.lik_to_coef.part;
    const double mu = recip_mean(e.noise.sigma2());
    QState3 s;
    fill(s, three_level_natural_to_common(e.coef()).blocks);
    const double resid = expected_sq_residual(s, data);
    e.lik_to_coef.values = mu * lik_base(data, P);
    e.noise.lik_to_sigma2 = pair(-0.5 * static_cast<double>(data.n_total()), -0.5 * resid);
}

void fragment_gauss_pen_2(const Priors2& pr, EdgeStore2& e) {
    const Partition2& P = e.pen_to_coef.part;
    const Mat M = inverse_mean(e.Sigma.Sigma(), P.q, Graph::full);
    const auto c = two_level_natural_to_common(e.coef()).blocks;
    std::vector<Vec> mu;
    std::vector<Mat> S;
    for (const auto& g : c.groups) {
        mu.push_back(g.x2);
        S.push_back(g.A22inv);
    }
    e.pen_to_coef.values = pen_message(P, pr.mu_beta, pr.Sigma_beta, M);
    e.Sigma.pen_to_Sigma = msg(-0.5 * static_cast<double>(P.m), -0.5 * dup_t_vec(second_moment(mu, S)));
}

void fragment_gauss_pen_3(const Priors3& pr, EdgeStore3& e) {
    const Partition3& P = e.pen_to_coef.part;
    const Mat M1 = inverse_mean(e.SigmaL1.Sigma(), P.q1, Graph::full);
    const Mat M2 = inverse_mean(e.SigmaL2.Sigma(), P.q2, Graph::full);
    const auto c = three_level_natural_to_common(e.coef()).blocks;
    std::vector<Vec> mu1, mu2;
    std::vector<Mat> S1, S2;
    for (const auto& g : c.groups) {
        mu1.push_back(g.x2);
        S1.push_back(g.A22inv);
        for (const auto& h : g.inner) {
            mu2.push_back(h.x2);
            S2.push_back(h.A22inv);
        }
    }
    e.pen_to_coef.values = pen_message(P, pr.mu_beta, pr.Sigma_beta, M1, M2);
    e.SigmaL1.pen_to_Sigma = msg(-0.5 * static_cast<double>(P.m()), -0.5 * dup_t_vec(second_moment(mu1, S1)));
    e.SigmaL2.pen_to_Sigma =
        msg(-0.5 * static_cast<double>(P.n_subgroups()), -0.5 * dup_t_vec(second_moment(mu2, S2)));
}

void fragment_noise_chain(double nu, double s, NoiseEdges& e) {
    if (!(nu > 0.0 && s > 0.0)) throw ShapeError("noise prior parameters must be positive");
    e.link_to_a = pair(-0.5 * nu, -0.5 * recip_mean(e.sigma2()));
    e.prior_to_a = pair(-1.5, -0.5 / (nu * s * s));
    e.link_to_sigma2 = pair(-(0.5 * nu + 1.0), -0.5 * recip_mean(e.a()));
}

void fragment_covariance_chain(double nu, const Vec& s, CovarianceEdges& e) {
    if (!(nu > 0.0) || !(s.array() > 0.0).all()) throw ShapeError("covariance prior parameters must be positive");
    const Index q = s.size();
    const double dq = static_cast<double>(q);
    e.link_to_A = msg(-0.5 * (nu + dq - 1.0), -0.5 * dup_t_vec(inverse_mean(e.Sigma(), q, Graph::full)));
    e.prior_to_A = msg(-1.5, -0.5 * dup_t_vec(Mat((nu * s.array().square()).inverse().matrix().asDiagonal())));
    e.link_to_Sigma = msg(-0.5 * (nu + 2.0 * dq), -0.5 * dup_t_vec(inverse_mean(e.A(), q, Graph::diag)));
}

QState2 vmp_extract(const GroupedDataset2& data, const Priors2& priors, const EdgeStore2& e) {
    QState2 s;
    const auto c = two_level_natural_to_common(e.coef());
    fill(s, c.blocks);
    s.logdet_coef = c.logdet;
    extract_noise(s.sigma2, e.noise);
    extract_covariance(s.Sigma, e.Sigma, data.q());
    s.elbo = elbo_two_level(s, data, priors);
    return s;
}

QState3 vmp_extract(const GroupedDataset3& data, const Priors3& priors, const EdgeStore3& e) {
    QState3 s;
    const auto c = three_level_natural_to_common(e.coef());
    fill(s, c.blocks);
    s.logdet_coef = c.logdet;
    extract_noise(s.sigma2, e.noise);
    extract_covariance(s.SigmaL1, e.SigmaL1, data.q1());
    extract_covariance(s.SigmaL2, e.SigmaL2, data.q2());
    s.elbo = elbo_three_level(s, data, priors);
    return s;
}

FitResult2 vmp_fit_two_level(const GroupedDataset2& data, const Priors2& priors, const FitOptions& opts) {
    return run_vmp<FitResult2>(data, priors, opts, vmp_init_edges(data, priors), sweep2, finite2);
}

FitResult3 vmp_fit_three_level(const GroupedDataset3& data, const Priors3& priors, const FitOptions& opts) {
    return run_vmp<FitResult3>(data, priors, opts, vmp_init_edges(data, priors), sweep3, finite3);
}

}  // namespace mlvb
