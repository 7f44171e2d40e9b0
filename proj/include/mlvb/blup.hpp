#pragma once

#include "mlvb/data.hpp"
#include "mlvb/solvers.hpp"

namespace mlvb {

struct VarianceComponents2 {
    double sigma2 = 1.0;
    Mat Sigma;
};

struct VarianceComponents3 {
    double sigma2 = 1.0;
    Mat SigmaL1;
    Mat SigmaL2;
};

struct BlupResult2 {
    struct Group {
        Vec u;          // predicted random effect
        Mat cov_u;      // Cov(u_hat - u)
        Mat cov_beta_u; // E{(beta_hat - beta)(u_hat - u)^T}
    };
    Vec beta;
    Mat cov_beta;
    std::vector<Group> groups;
};

struct BlupResult3 {
    struct Subgroup {
        Vec u;
        Mat cov_u;
        Mat cov_beta_u;  // p x q2
        Mat cov_u1_u;    // q1 x q2, with the enclosing group's effect
    };
    struct Group {
        Vec u;
        Mat cov_u;
        Mat cov_beta_u;  // p x q1
        std::vector<Subgroup> subgroups;
    };
    Vec beta;
    Mat cov_beta;
    std::vector<Group> groups;
};

TwoLevelLSSystem blup_system_two_level(const GroupedDataset2& data, const VarianceComponents2& vc);
ThreeLevelLSSystem blup_system_three_level(const GroupedDataset3& data, const VarianceComponents3& vc);

BlupResult2 blup_two_level(const GroupedDataset2& data, const VarianceComponents2& vc);
BlupResult3 blup_three_level(const GroupedDataset3& data, const VarianceComponents3& vc);

}  // namespace mlvb
