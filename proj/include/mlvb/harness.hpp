#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mlvb/blup.hpp"
#include "mlvb/data.hpp"
#include "mlvb/mfvb.hpp"

namespace mlvb {

struct SimSpec2 {
    Index m = 100;
    int n_lo = 30;
    int n_hi = 60;
    Vec beta_true = Vec{{0.58, 1.98}};
    Mat Sigma_true = Mat{{2.58, 0.22}, {0.22, 1.73}};
    double sigma2_true = 1.0;
    std::uint64_t seed = 1;
};

struct SimSpec3 {
    Index m = 6;
    int n_lo = 8, n_hi = 8;    // subgroups per group
    int o_lo = 25, o_hi = 25;  // observations per subgroup
    Vec beta_true = Vec{{0.58, 1.98}};
    Mat SigmaL1_true = Mat{{2.58, 0.22}, {0.22, 1.73}};
    Mat SigmaL2_true = Mat{{1.0, 0.1}, {0.1, 0.5}};
    double sigma2_true = 1.0;
    std::uint64_t seed = 1;
};

// x ~ Uniform(0, 1), design rows (1, x) for X and every Z, u ~ N(0, Sigma_true),
// y = X beta + Z u + N(0, sigma2_true).
GroupedDataset2 simulate_two_level(const SimSpec2& spec);
GroupedDataset3 simulate_three_level(const SimSpec3& spec);

// Column selection for CSV input. Empty predictor lists mean "every column
// that is not an id or the response". An intercept column of ones is
// prepended to X and each Z unless intercept is false.
struct CsvSpec {
    std::string group = "group";
    std::string subgroup = "subgroup";
    std::string response = "y";
    std::vector<std::string> fixed;
    std::vector<std::string> random;   // Z, or Z^L1 for three levels
    std::vector<std::string> random2;  // Z^L2
    bool intercept = true;
};

struct LoadedData2 {
    GroupedDataset2 data;
    std::vector<std::string> fixed_names;
    std::vector<std::string> group_ids;
};

struct LoadedData3 {
    GroupedDataset3 data;
    std::vector<std::string> fixed_names;
    std::vector<std::string> group_ids;
};

// Groups (and subgroups) are kept in order of first appearance. Errors are
// DataError naming the row and column.
LoadedData2 load_csv_two_level(const std::string& path, const CsvSpec& spec = {});
LoadedData3 load_csv_three_level(const std::string& path, const CsvSpec& spec = {});
LoadedData2 read_csv_two_level(std::istream& in, const CsvSpec& spec = {});
LoadedData3 read_csv_three_level(std::istream& in, const CsvSpec& spec = {});

// Columns: group,y,x (two-level) or group,subgroup,y,x, with x the second
// column of X.
void write_csv(std::ostream& out, const GroupedDataset2& data);
void write_csv(std::ostream& out, const GroupedDataset3& data);

// Divide the response and each non-constant predictor by its sample standard
// deviation. Returns the divisors of y and of the X columns.
struct Scaling {
    double y = 1.0;
    Vec x;
};
Scaling standardize(GroupedDataset2& data);
Scaling standardize(GroupedDataset3& data);

Priors2 priors2_from_json(const nlohmann::json& j, Index p, Index q);
Priors3 priors3_from_json(const nlohmann::json& j, Index p, Index q1, Index q2);

struct ReportContext {
    std::string method;
    std::vector<std::string> fixed_names;
    std::optional<Scaling> scaling;
    std::uint64_t seed = 0;
};

// Converged flag, iteration count, final ELBO, q-density parameters and 95%
// credible intervals mu +- 1.96 sd for each fixed effect (back-transformed when
// the data were standardized).
nlohmann::json fit_report(const FitResult2& fit, const ReportContext& ctx);
nlohmann::json fit_report(const FitResult3& fit, const ReportContext& ctx);
nlohmann::json blup_report(const BlupResult2& r);
nlohmann::json blup_report(const BlupResult3& r);
void write_trace_csv(std::ostream& out, const std::vector<TraceRecord>& trace);

struct BenchRecord {
    std::string method;  // mfvb-streamlined, mfvb-naive, vmp or blup
    Index m = 0;
    int replication = 0;
    int iterations = 0;
    double wall_seconds = 0.0;
    std::string peak_note;
};

struct BenchOptions {
    std::vector<std::string> methods{"mfvb-streamlined", "mfvb-naive"};
    std::vector<Index> m_list{100, 200};
    int reps = 3;
    int fixed_iters = 50;
    std::uint64_t seed = 1;
    int jobs = 1;
};

std::vector<std::string> bench_methods();
// Each (method, m, replication) cell gets freshly simulated two-level data
// with the default SimSpec2 design. Throws std::invalid_argument for an
// unknown method.
std::vector<BenchRecord> bench(const BenchOptions& opts);
BenchRecord bench_one(const std::string& method, Index m, int replication, int fixed_iters, std::uint64_t seed);

void write_bench_csv(std::ostream& out, const std::vector<BenchRecord>& records);

struct BenchSummary {
    std::string method;
    Index m = 0;
    int count = 0;
    double median = 0.0;
    double mad = 0.0;
};
std::vector<BenchSummary> summarize(const std::vector<BenchRecord>& records);
// One row per m with median (MAD) per method and the naive/streamlined ratio
// of medians when both arms are present.
void write_summary_csv(std::ostream& out, const std::vector<BenchSummary>& summary);

double median(std::vector<double> v);
double mad(const std::vector<double>& v);
// Least squares slope of log(y) on log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace mlvb
