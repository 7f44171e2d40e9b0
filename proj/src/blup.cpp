#include "mlvb/blup.hpp"

#include <cmath>

namespace mlvb {

TwoLevelLSSystem blup_system_two_level(const GroupedDataset2& data, const VarianceComponents2& vc) {
    data.validate();
    const Index p = data.p(), q = data.q();
    if (!(vc.sigma2 > 0.0)) throw ShapeError("sigma2 must be positive");
    if (vc.Sigma.rows() != q || vc.Sigma.cols() != q) throw ShapeError("Sigma must be q x q");
    const double s = 1.0 / std::sqrt(vc.sigma2);
    const Mat root = inv_sym_sqrt(vc.Sigma);

    TwoLevelLSSystem sys;
    sys.groups.resize(data.groups.size());
    for (std::size_t i = 0; i < data.groups.size(); ++i) {
        const auto& g = data.groups[i];
        const Index n = g.y.size();
        auto& out = sys.groups[i];
        out.b = Vec::Zero(n + q);
        out.b.head(n) = s * g.y;
        out.B = Mat::Zero(n + q, p);
        out.B.topRows(n) = s * g.X;
        out.Bdot.resize(n + q, q);
        out.Bdot.topRows(n) = s * g.Z;
        out.Bdot.bottomRows(q) = root;
    }
    return sys;
}

ThreeLevelLSSystem blup_system_three_level(const GroupedDataset3& data, const VarianceComponents3& vc) {
    data.validate();
    const Index p = data.p(), q1 = data.q1(), q2 = data.q2();
    if (!(vc.sigma2 > 0.0)) throw ShapeError("sigma2 must be positive");
    if (vc.SigmaL1.rows() != q1 || vc.SigmaL1.cols() != q1) throw ShapeError("SigmaL1 must be q1 x q1");
    if (vc.SigmaL2.rows() != q2 || vc.SigmaL2.cols() != q2) throw ShapeError("SigmaL2 must be q2 x q2");
    const double s = 1.0 / std::sqrt(vc.sigma2);
    const Mat root1 = inv_sym_sqrt(vc.SigmaL1);
    const Mat root2 = inv_sym_sqrt(vc.SigmaL2);

    ThreeLevelLSSystem sys;
    sys.groups.resize(data.groups.size());
    for (std::size_t i = 0; i < data.groups.size(); ++i) {
        const auto& g = data.groups[i];
        const double spread = 1.0 / std::sqrt(static_cast<double>(g.subgroups.size()));
        sys.groups[i].inner.resize(g.subgroups.size());
        for (std::size_t j = 0; j < g.subgroups.size(); ++j) {
            const auto& d = g.subgroups[j];
            const Index o = d.y.size();
            auto& out = sys.groups[i].inner[j];
            out.b = Vec::Zero(o + q1 + q2);
            out.b.head(o) = s * d.y;
            out.B = Mat::Zero(o + q1 + q2, p);
            out.B.topRows(o) = s * d.X;
            out.Bdot = Mat::Zero(o + q1 + q2, q1);
            out.Bdot.topRows(o) = s * d.ZL1;
            out.Bdot.middleRows(o, q1) = spread * root1;
            out.Bddot = Mat::Zero(o + q1 + q2, q2);
            out.Bddot.topRows(o) = s * d.ZL2;
            out.Bddot.bottomRows(q2) = root2;
        }
    }
    return sys;
}

BlupResult2 blup_two_level(const GroupedDataset2& data, const VarianceComponents2& vc) {
    const auto sol = solve_two_level_sparse_ls(blup_system_two_level(data, vc));
    BlupResult2 out;
    out.beta = sol.x1;
    out.cov_beta = sol.A11inv;
    out.groups.reserve(sol.groups.size());
    for (const auto& g : sol.groups) out.groups.push_back({g.x2, g.A22inv, g.A12inv});
    return out;
}

BlupResult3 blup_three_level(const GroupedDataset3& data, const VarianceComponents3& vc) {
    const auto sol = solve_three_level_sparse_ls(blup_system_three_level(data, vc));
    BlupResult3 out;
    out.beta = sol.x1;
    out.cov_beta = sol.A11inv;
    out.groups.resize(sol.groups.size());
    for (std::size_t i = 0; i < sol.groups.size(); ++i) {
        const auto& g = sol.groups[i];
        auto& r = out.groups[i];
        r.u = g.x2;
        r.cov_u = g.A22inv;
        r.cov_beta_u = g.A12inv;
        for (const auto& h : g.inner) r.subgroups.push_back({h.x2, h.A22inv, h.A12inv, h.A12inv_i});
    }
    return out;
}

}  // namespace mlvb
