#pragma once

#include <stdexcept>
#include <string>

namespace mlvb {

// Where in a multilevel structure a failure happened. level 0 is the
// global block, level 1 an outer group i, level 2 an inner group (i, j).
struct Site {
    int level = 0;
    int i = -1;
    int j = -1;

    static Site global() { return {}; }
    static Site group(int i) { return {1, i, -1}; }
    static Site subgroup(int i, int j) { return {2, i, j}; }

    std::string str() const;
};

enum class Failure { singular, not_spd, rank_deficient, non_finite, diverged, inconsistent };

const char* failure_name(Failure f);

class NumericalError : public std::runtime_error {
public:
    NumericalError(Failure kind, const std::string& what, Site site = {});

    Failure kind() const { return kind_; }
    const Site& site() const { return site_; }

private:
    Failure kind_;
    Site site_;
};

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Malformed user input (CSV cells, missing columns, empty groups).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace mlvb
