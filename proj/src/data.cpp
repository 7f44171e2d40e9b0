#include "mlvb/data.hpp"

#include <string>

namespace mlvb {

Index GroupedDataset2::n_total() const {
    Index n = 0;
    for (const auto& g : groups) n += g.y.size();
    return n;
}

void GroupedDataset2::validate() const {
    if (groups.empty()) throw ShapeError("dataset has no groups");
    const Index p_ = p(), q_ = q();
    if (p_ < 1 || q_ < 1) throw ShapeError("dataset needs at least one fixed and one random effect column");
    for (std::size_t i = 0; i < groups.size(); ++i) {
        const auto& g = groups[i];
        const std::string at = " in group " + std::to_string(i + 1);
        if (g.y.size() < 1) throw ShapeError("empty group" + at);
        if (g.X.rows() != g.y.size() || g.X.cols() != p_) throw ShapeError("X has wrong shape" + at);
        if (g.Z.rows() != g.y.size() || g.Z.cols() != q_) throw ShapeError("Z has wrong shape" + at);
    }
}

namespace {

const GroupedDataset3::Subgroup* first_subgroup(const GroupedDataset3& d) {
    for (const auto& g : d.groups)
        if (!g.subgroups.empty()) return &g.subgroups.front();
    return nullptr;
}

}  // namespace

Index GroupedDataset3::p() const {
    const auto* s = first_subgroup(*this);
    return s ? s->X.cols() : 0;
}

Index GroupedDataset3::q1() const {
    const auto* s = first_subgroup(*this);
    return s ? s->ZL1.cols() : 0;
}

Index GroupedDataset3::q2() const {
    const auto* s = first_subgroup(*this);
    return s ? s->ZL2.cols() : 0;
}

Index GroupedDataset3::n_subgroups() const {
    Index n = 0;
    for (const auto& g : groups) n += static_cast<Index>(g.subgroups.size());
    return n;
}

Index GroupedDataset3::n_total() const {
    Index n = 0;
    for (const auto& g : groups)
        for (const auto& s : g.subgroups) n += s.y.size();
    return n;
}

void GroupedDataset3::validate() const {
    if (groups.empty()) throw ShapeError("dataset has no groups");
    const Index p_ = p(), q1_ = q1(), q2_ = q2();
    if (p_ < 1 || q1_ < 1 || q2_ < 1)
        throw ShapeError("dataset needs at least one column for each of X, ZL1 and ZL2");
    for (std::size_t i = 0; i < groups.size(); ++i) {
        if (groups[i].subgroups.empty()) throw ShapeError("group " + std::to_string(i + 1) + " has no subgroups");
        for (std::size_t j = 0; j < groups[i].subgroups.size(); ++j) {
            const auto& s = groups[i].subgroups[j];
            const std::string at = " in group " + std::to_string(i + 1) + ", subgroup " + std::to_string(j + 1);
            const Index o = s.y.size();
            if (o < 1) throw ShapeError("empty subgroup" + at);
            if (s.X.rows() != o || s.X.cols() != p_) throw ShapeError("X has wrong shape" + at);
            if (s.ZL1.rows() != o || s.ZL1.cols() != q1_) throw ShapeError("ZL1 has wrong shape" + at);
            if (s.ZL2.rows() != o || s.ZL2.cols() != q2_) throw ShapeError("ZL2 has wrong shape" + at);
        }
    }
}

}  // namespace mlvb
