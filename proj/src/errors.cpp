#include "mlvb/errors.hpp"

namespace mlvb {

std::string Site::str() const {
    switch (level) {
        case 1:
            return "group " + std::to_string(i + 1);
        case 2:
            return "group " + std::to_string(i + 1) + ", subgroup " + std::to_string(j + 1);
        default:
            return "global block";
    }
}

const char* failure_name(Failure f) {
    switch (f) {
        case Failure::singular: return "singular";
        case Failure::not_spd: return "not positive definite";
        case Failure::rank_deficient: return "rank deficient";
        case Failure::non_finite: return "non-finite";
        case Failure::diverged: return "diverged";
        case Failure::inconsistent: return "internally inconsistent";
    }
    return "unknown";
}

NumericalError::NumericalError(Failure kind, const std::string& what, Site site)
    : std::runtime_error(what + " (" + failure_name(kind) + " at " + site.str() + ")"),
      kind_(kind),
      site_(site) {}

}  // namespace mlvb
