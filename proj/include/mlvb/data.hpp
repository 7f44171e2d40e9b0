#pragma once

#include <vector>

#include "mlvb/matops.hpp"

namespace mlvb {

struct GroupedDataset2 {
    struct Group {
        Vec y;  // n_i
        Mat X;  // n_i x p
        Mat Z;  // n_i x q
    };
    std::vector<Group> groups;

    Index p() const { return groups.empty() ? 0 : groups.front().X.cols(); }
    Index q() const { return groups.empty() ? 0 : groups.front().Z.cols(); }
    Index m() const { return static_cast<Index>(groups.size()); }
    Index n_total() const;
    // Throws ShapeError on inconsistent shapes or empty groups.
    void validate() const;
};

struct GroupedDataset3 {
    struct Subgroup {
        Vec y;    // o_ij
        Mat X;    // o_ij x p
        Mat ZL1;  // o_ij x q1
        Mat ZL2;  // o_ij x q2
    };
    struct Group {
        std::vector<Subgroup> subgroups;
    };
    std::vector<Group> groups;

    Index p() const;
    Index q1() const;
    Index q2() const;
    Index m() const { return static_cast<Index>(groups.size()); }
    // Total number of subgroups, the sum of n_i.
    Index n_subgroups() const;
    Index n_total() const;
    void validate() const;
};

}  // namespace mlvb
