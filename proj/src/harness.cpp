#include "mlvb/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <thread>

#include "mlvb/naive.hpp"
#include "mlvb/vmp.hpp"

namespace mlvb {

using nlohmann::json;

namespace {

Vec draw_mvn(const Mat& L, std::normal_distribution<double>& z, std::mt19937_64& rng) {
    Vec e(L.rows());
    for (Index k = 0; k < e.size(); ++k) e(k) = z(rng);
    return L * e;
}

Mat chol_lower(const Mat& S, const char* name) {
    Eigen::LLT<Mat> llt(S);
    if (llt.info() != Eigen::Success) throw std::invalid_argument(std::string(name) + " must be positive definite");
    return llt.matrixL();
}

std::string trim(std::string s) {
    const auto notspace = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), notspace));
    s.erase(std::find_if(s.rbegin(), s.rend(), notspace).base(), s.end());
    return s;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t k = 0; k < line.size(); ++k) {
        const char c = line[k];
        if (c == '"') {
            if (quoted && k + 1 < line.size() && line[k + 1] == '"') {
                cur += '"';
                ++k;
            } else {
                quoted = !quoted;
            }
        } else if (c == ',' && !quoted) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(trim(cur));
    return out;
}

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<int> lines;  // file line of each row
};

Table read_table(std::istream& in) {
    Table t;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        auto fields = split_csv(line);
        if (t.header.empty()) {
            t.header = std::move(fields);
            continue;
        }
        if (fields.size() != t.header.size())
            throw DataError("line " + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                            " fields, found " + std::to_string(fields.size()));
        t.rows.push_back(std::move(fields));
        t.lines.push_back(lineno);
    }
    if (t.header.empty()) throw DataError("input has no header line");
    if (t.rows.empty()) throw DataError("input has no data rows");
    return t;
}

std::size_t column(const Table& t, const std::string& name) {
    const auto it = std::find(t.header.begin(), t.header.end(), name);
    if (it == t.header.end()) throw DataError("missing column '" + name + "'");
    return static_cast<std::size_t>(it - t.header.begin());
}

double cell(const Table& t, std::size_t r, std::size_t c) {
    const std::string& s = t.rows[r][c];
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v))
        throw DataError("line " + std::to_string(t.lines[r]) + ", column '" + t.header[c] + "': non-numeric value '" +
                        s + "'");
    return v;
}

const std::string& id_cell(const Table& t, std::size_t r, std::size_t c) {
    const std::string& s = t.rows[r][c];
    if (s.empty()) throw DataError("line " + std::to_string(t.lines[r]) + ", column '" + t.header[c] + "': empty id");
    return s;
}

std::vector<std::string> default_predictors(const Table& t, const std::vector<std::string>& ids) {
    std::vector<std::string> out;
    for (const auto& h : t.header)
        if (std::find(ids.begin(), ids.end(), h) == ids.end()) out.push_back(h);
    return out;
}

std::vector<std::size_t> columns(const Table& t, const std::vector<std::string>& names) {
    std::vector<std::size_t> out;
    for (const auto& n : names) out.push_back(column(t, n));
    return out;
}

Mat design(const Table& t, const std::vector<std::size_t>& rows, const std::vector<std::size_t>& cols, bool intercept) {
    const Index off = intercept ? 1 : 0;
    Mat M(static_cast<Index>(rows.size()), off + static_cast<Index>(cols.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (intercept) M(static_cast<Index>(r), 0) = 1.0;
        for (std::size_t c = 0; c < cols.size(); ++c) M(static_cast<Index>(r), off + static_cast<Index>(c)) = cell(t, rows[r], cols[c]);
    }
    return M;
}

Vec response(const Table& t, const std::vector<std::size_t>& rows, std::size_t col) {
    Vec y(static_cast<Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) y(static_cast<Index>(r)) = cell(t, rows[r], col);
    return y;
}

std::vector<std::string> names_with_intercept(const std::vector<std::string>& names, bool intercept) {
    std::vector<std::string> out;
    if (intercept) out.push_back("(Intercept)");
    out.insert(out.end(), names.begin(), names.end());
    return out;
}

json to_json(const Mat& M) {
    json rows = json::array();
    for (Index i = 0; i < M.rows(); ++i) {
        json r = json::array();
        for (Index j = 0; j < M.cols(); ++j) r.push_back(M(i, j));
        rows.push_back(r);
    }
    return rows;
}

json to_json(const Vec& v) {
    json a = json::array();
    for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

Vec vec_from_json(const json& j, Index n, const char* name) {
    if (!j.is_array() || static_cast<Index>(j.size()) != n)
        throw DataError(std::string("prior field '") + name + "' must be an array of length " + std::to_string(n));
    Vec v(n);
    for (Index i = 0; i < n; ++i) v(i) = j[static_cast<std::size_t>(i)].get<double>();
    return v;
}

Mat mat_from_json(const json& j, Index n, const char* name) {
    if (!j.is_array() || static_cast<Index>(j.size()) != n)
        throw DataError(std::string("prior field '") + name + "' must be a " + std::to_string(n) + " x " +
                        std::to_string(n) + " array");
    Mat M(n, n);
    for (Index i = 0; i < n; ++i) M.row(i) = vec_from_json(j[static_cast<std::size_t>(i)], n, name).transpose();
    return M;
}

double sample_sd(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

template <class Visit>
Vec column_sds(Index cols, Visit visit) {
    std::vector<std::vector<double>> values(static_cast<std::size_t>(cols));
    visit([&](const Mat& M) {
        for (Index c = 0; c < cols; ++c)
            for (Index r = 0; r < M.rows(); ++r) values[static_cast<std::size_t>(c)].push_back(M(r, c));
    });
    Vec sd(cols);
    for (Index c = 0; c < cols; ++c) {
        const double s = sample_sd(values[static_cast<std::size_t>(c)]);
        sd(c) = s > 0.0 ? s : 1.0;
    }
    return sd;
}

json fixed_effects(const Vec& mu, const Mat& Sigma, const ReportContext& ctx) {
    Vec m = mu;
    Mat S = Sigma;
    if (ctx.scaling) {
        const Vec d = ctx.scaling->y * ctx.scaling->x.cwiseInverse();
        m = d.cwiseProduct(mu);
        S = d.asDiagonal() * Sigma * d.asDiagonal();
    }
    json out = json::array();
    for (Index k = 0; k < m.size(); ++k) {
        const double sd = std::sqrt(S(k, k));
        const std::string name =
            static_cast<std::size_t>(k) < ctx.fixed_names.size() ? ctx.fixed_names[k] : "beta" + std::to_string(k);
        out.push_back({{"name", name}, {"mean", m(k)}, {"sd", sd}, {"ci95", {m(k) - 1.96 * sd, m(k) + 1.96 * sd}}});
    }
    return out;
}

json noise_json(const NoiseQ& n) {
    return {{"xi", n.xi}, {"lambda", n.lambda}, {"E_recip", n.mu_recip},
            {"aux", {{"xi", n.xi_a}, {"lambda", n.lambda_a}, {"E_recip", n.mu_recip_a}}}};
}

json cov_json(const CovarianceQ& c) {
    return {{"xi", c.xi}, {"Lambda", to_json(c.Lambda)}, {"E_inverse", to_json(c.M_inv)},
            {"aux", {{"xi", c.xi_A}, {"Lambda", to_json(c.Lambda_A)}}}};
}

template <class Fit>
json report_header(const Fit& fit, const ReportContext& ctx, int levels) {
    return {{"method", ctx.method},
            {"levels", levels},
            {"converged", fit.converged},
            {"iterations", fit.iterations},
            {"elbo", fit.state.elbo},
            {"seed", ctx.seed},
            {"standardized", ctx.scaling.has_value()},
            {"fixed_effects", fixed_effects(fit.state.mu_beta, fit.state.Sigma_beta, ctx)}};
}

}  // namespace

GroupedDataset2 simulate_two_level(const SimSpec2& spec) {
    if (spec.m < 1 || spec.n_lo < 1 || spec.n_lo > spec.n_hi) throw std::invalid_argument("invalid simulation sizes");
    if (!(spec.sigma2_true > 0.0)) throw std::invalid_argument("sigma2_true must be positive");
    if (spec.beta_true.size() != 2 || spec.Sigma_true.rows() != 2)
        throw std::invalid_argument("simulation uses the (1, x) design: beta_true needs 2 entries, Sigma_true 2 x 2");
    std::mt19937_64 rng(spec.seed);
    std::uniform_int_distribution<int> n_dist(spec.n_lo, spec.n_hi);
    std::uniform_real_distribution<double> x_dist(0.0, 1.0);
    std::normal_distribution<double> z;
    const Mat L = chol_lower(spec.Sigma_true, "Sigma_true");
    const double sd = std::sqrt(spec.sigma2_true);
    GroupedDataset2 d;
    for (Index i = 0; i < spec.m; ++i) {
        const int n = n_dist(rng);
        const Vec u = draw_mvn(L, z, rng);
        GroupedDataset2::Group g{Vec(n), Mat(n, 2), Mat(n, 2)};
        for (int k = 0; k < n; ++k) {
            const double x = x_dist(rng);
            g.X.row(k) << 1.0, x;
            g.y(k) = g.X.row(k).dot(spec.beta_true + u) + sd * z(rng);
        }
        g.Z = g.X;
        d.groups.push_back(std::move(g));
    }
    return d;
}

GroupedDataset3 simulate_three_level(const SimSpec3& spec) {
    if (spec.m < 1 || spec.n_lo < 1 || spec.n_lo > spec.n_hi || spec.o_lo < 1 || spec.o_lo > spec.o_hi)
        throw std::invalid_argument("invalid simulation sizes");
    if (!(spec.sigma2_true > 0.0)) throw std::invalid_argument("sigma2_true must be positive");
    if (spec.beta_true.size() != 2 || spec.SigmaL1_true.rows() != 2 || spec.SigmaL2_true.rows() != 2)
        throw std::invalid_argument("simulation uses the (1, x) design: beta_true needs 2 entries, covariances 2 x 2");
    std::mt19937_64 rng(spec.seed);
    std::uniform_int_distribution<int> n_dist(spec.n_lo, spec.n_hi), o_dist(spec.o_lo, spec.o_hi);
    std::uniform_real_distribution<double> x_dist(0.0, 1.0);
    std::normal_distribution<double> z;
    const Mat L1 = chol_lower(spec.SigmaL1_true, "SigmaL1_true");
    const Mat L2 = chol_lower(spec.SigmaL2_true, "SigmaL2_true");
    const double sd = std::sqrt(spec.sigma2_true);
    GroupedDataset3 d;
    for (Index i = 0; i < spec.m; ++i) {
        GroupedDataset3::Group g;
        const int n = n_dist(rng);
        const Vec u1 = draw_mvn(L1, z, rng);
        for (int j = 0; j < n; ++j) {
            const int o = o_dist(rng);
            const Vec u2 = draw_mvn(L2, z, rng);
            GroupedDataset3::Subgroup s{Vec(o), Mat(o, 2), Mat(), Mat()};
            for (int k = 0; k < o; ++k) {
                const double x = x_dist(rng);
                s.X.row(k) << 1.0, x;
                s.y(k) = s.X.row(k).dot(spec.beta_true + u1 + u2) + sd * z(rng);
            }
            s.ZL1 = s.X;
            s.ZL2 = s.X;
            g.subgroups.push_back(std::move(s));
        }
        d.groups.push_back(std::move(g));
    }
    return d;
}

LoadedData2 read_csv_two_level(std::istream& in, const CsvSpec& spec) {
    const Table t = read_table(in);
    const std::size_t gcol = column(t, spec.group), ycol = column(t, spec.response);
    const auto preds = default_predictors(t, {spec.group, spec.subgroup, spec.response});
    const auto fixed = spec.fixed.empty() ? preds : spec.fixed;
    const auto random = spec.random.empty() ? preds : spec.random;
    const auto fcols = columns(t, fixed), rcols = columns(t, random);

    LoadedData2 out;
    std::map<std::string, std::size_t> index;
    std::vector<std::vector<std::size_t>> rows;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const std::string& id = id_cell(t, r, gcol);
        auto [it, inserted] = index.emplace(id, rows.size());
        if (inserted) {
            rows.emplace_back();
            out.group_ids.push_back(id);
        }
        rows[it->second].push_back(r);
    }
    for (const auto& rs : rows)
        out.data.groups.push_back({response(t, rs, ycol), design(t, rs, fcols, spec.intercept),
                                   design(t, rs, rcols, spec.intercept)});
    out.fixed_names = names_with_intercept(fixed, spec.intercept);
    if (out.data.p() < 1 || out.data.q() < 1) throw DataError("no fixed or random effect columns selected");
    return out;
}

LoadedData3 read_csv_three_level(std::istream& in, const CsvSpec& spec) {
    const Table t = read_table(in);
    const std::size_t gcol = column(t, spec.group), scol = column(t, spec.subgroup), ycol = column(t, spec.response);
    const auto preds = default_predictors(t, {spec.group, spec.subgroup, spec.response});
    const auto fixed = spec.fixed.empty() ? preds : spec.fixed;
    const auto random = spec.random.empty() ? preds : spec.random;
    const auto random2 = spec.random2.empty() ? random : spec.random2;
    const auto fcols = columns(t, fixed), r1cols = columns(t, random), r2cols = columns(t, random2);

    LoadedData3 out;
    std::map<std::string, std::size_t> gindex;
    std::vector<std::map<std::string, std::size_t>> sindex;
    std::vector<std::vector<std::vector<std::size_t>>> rows;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const std::string& gid = id_cell(t, r, gcol);
        const std::string& sid = id_cell(t, r, scol);
        auto [git, gnew] = gindex.emplace(gid, rows.size());
        if (gnew) {
            rows.emplace_back();
            sindex.emplace_back();
            out.group_ids.push_back(gid);
        }
        auto& sub = sindex[git->second];
        auto [sit, snew] = sub.emplace(sid, rows[git->second].size());
        if (snew) rows[git->second].emplace_back();
        rows[git->second][sit->second].push_back(r);
    }
    for (const auto& g : rows) {
        GroupedDataset3::Group grp;
        for (const auto& rs : g)
            grp.subgroups.push_back({response(t, rs, ycol), design(t, rs, fcols, spec.intercept),
                                     design(t, rs, r1cols, spec.intercept), design(t, rs, r2cols, spec.intercept)});
        out.data.groups.push_back(std::move(grp));
    }
    out.fixed_names = names_with_intercept(fixed, spec.intercept);
    if (out.data.p() < 1 || out.data.q1() < 1 || out.data.q2() < 1)
        throw DataError("no fixed or random effect columns selected");
    return out;
}

LoadedData2 load_csv_two_level(const std::string& path, const CsvSpec& spec) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    return read_csv_two_level(in, spec);
}

LoadedData3 load_csv_three_level(const std::string& path, const CsvSpec& spec) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    return read_csv_three_level(in, spec);
}

void write_csv(std::ostream& out, const GroupedDataset2& data) {
    out.precision(17);
    out << "group,y,x\n";
    for (Index i = 0; i < data.m(); ++i) {
        const auto& g = data.groups[i];
        for (Index k = 0; k < g.y.size(); ++k) out << i + 1 << ',' << g.y(k) << ',' << g.X(k, 1) << '\n';
    }
}

void write_csv(std::ostream& out, const GroupedDataset3& data) {
    out.precision(17);
    out << "group,subgroup,y,x\n";
    for (std::size_t i = 0; i < data.groups.size(); ++i)
        for (std::size_t j = 0; j < data.groups[i].subgroups.size(); ++j) {
            const auto& s = data.groups[i].subgroups[j];
            for (Index k = 0; k < s.y.size(); ++k)
                out << i + 1 << ',' << j + 1 << ',' << s.y(k) << ',' << s.X(k, 1) << '\n';
        }
}

Scaling standardize(GroupedDataset2& data) {
    data.validate();
    Scaling sc;
    const Vec y_sd = column_sds(1, [&](auto f) {
        for (const auto& g : data.groups) f(Mat(g.y));
    });
    sc.y = y_sd(0);
    sc.x = column_sds(data.p(), [&](auto f) {
        for (const auto& g : data.groups) f(g.X);
    });
    const Vec z_sd = column_sds(data.q(), [&](auto f) {
        for (const auto& g : data.groups) f(g.Z);
    });
    for (auto& g : data.groups) {
        g.y /= sc.y;
        g.X = g.X * sc.x.cwiseInverse().asDiagonal();
        g.Z = g.Z * z_sd.cwiseInverse().asDiagonal();
    }
    return sc;
}

Scaling standardize(GroupedDataset3& data) {
    data.validate();
    auto each = [&](auto get) {
        return [&, get](auto f) {
            for (const auto& g : data.groups)
                for (const auto& s : g.subgroups) f(get(s));
        };
    };
    Scaling sc;
    sc.y = column_sds(1, each([](const auto& s) { return Mat(s.y); }))(0);
    sc.x = column_sds(data.p(), each([](const auto& s) { return s.X; }));
    const Vec z1 = column_sds(data.q1(), each([](const auto& s) { return s.ZL1; }));
    const Vec z2 = column_sds(data.q2(), each([](const auto& s) { return s.ZL2; }));
    for (auto& g : data.groups)
        for (auto& s : g.subgroups) {
            s.y /= sc.y;
            s.X = s.X * sc.x.cwiseInverse().asDiagonal();
            s.ZL1 = s.ZL1 * z1.cwiseInverse().asDiagonal();
            s.ZL2 = s.ZL2 * z2.cwiseInverse().asDiagonal();
        }
    return sc;
}

Priors2 priors2_from_json(const json& j, Index p, Index q) {
    Priors2 pr = default_priors2(p, q);
    if (j.contains("mu_beta")) pr.mu_beta = vec_from_json(j["mu_beta"], p, "mu_beta");
    if (j.contains("Sigma_beta")) pr.Sigma_beta = mat_from_json(j["Sigma_beta"], p, "Sigma_beta");
    if (j.contains("nu_sigma2")) pr.nu_sigma2 = j["nu_sigma2"].get<double>();
    if (j.contains("s_sigma2")) pr.s_sigma2 = j["s_sigma2"].get<double>();
    if (j.contains("nu_Sigma")) pr.nu_Sigma = j["nu_Sigma"].get<double>();
    if (j.contains("s_Sigma")) pr.s_Sigma = vec_from_json(j["s_Sigma"], q, "s_Sigma");
    validate(pr, p, q);
    return pr;
}

Priors3 priors3_from_json(const json& j, Index p, Index q1, Index q2) {
    Priors3 pr = default_priors3(p, q1, q2);
    if (j.contains("mu_beta")) pr.mu_beta = vec_from_json(j["mu_beta"], p, "mu_beta");
    if (j.contains("Sigma_beta")) pr.Sigma_beta = mat_from_json(j["Sigma_beta"], p, "Sigma_beta");
    if (j.contains("nu_sigma2")) pr.nu_sigma2 = j["nu_sigma2"].get<double>();
    if (j.contains("s_sigma2")) pr.s_sigma2 = j["s_sigma2"].get<double>();
    if (j.contains("nu_SigmaL1")) pr.nu_SigmaL1 = j["nu_SigmaL1"].get<double>();
    if (j.contains("s_SigmaL1")) pr.s_SigmaL1 = vec_from_json(j["s_SigmaL1"], q1, "s_SigmaL1");
    if (j.contains("nu_SigmaL2")) pr.nu_SigmaL2 = j["nu_SigmaL2"].get<double>();
    if (j.contains("s_SigmaL2")) pr.s_SigmaL2 = vec_from_json(j["s_SigmaL2"], q2, "s_SigmaL2");
    validate(pr, p, q1, q2);
    return pr;
}

json fit_report(const FitResult2& fit, const ReportContext& ctx) {
    json r = report_header(fit, ctx, 2);
    const auto& s = fit.state;
    json groups = json::array();
    for (const auto& g : s.groups)
        groups.push_back({{"mu_u", to_json(g.mu_u)}, {"Sigma_u", to_json(g.Sigma_u)}, {"Cross_beta_u", to_json(g.Cross_beta_u)}});
    r["q"] = {{"mu_beta", to_json(s.mu_beta)}, {"Sigma_beta", to_json(s.Sigma_beta)},
              {"sigma2", noise_json(s.sigma2)}, {"Sigma", cov_json(s.Sigma)}, {"groups", groups}};
    return r;
}

json fit_report(const FitResult3& fit, const ReportContext& ctx) {
    json r = report_header(fit, ctx, 3);
    const auto& s = fit.state;
    json groups = json::array();
    for (const auto& g : s.groups) {
        json subs = json::array();
        for (const auto& h : g.subgroups)
            subs.push_back({{"mu_u", to_json(h.mu_u)}, {"Sigma_u", to_json(h.Sigma_u)},
                            {"Cross_beta_u", to_json(h.Cross_beta_u)}, {"Cross_u1_u", to_json(h.Cross_u1_u)}});
        groups.push_back({{"mu_u", to_json(g.mu_u)}, {"Sigma_u", to_json(g.Sigma_u)},
                          {"Cross_beta_u", to_json(g.Cross_beta_u)}, {"subgroups", subs}});
    }
    r["q"] = {{"mu_beta", to_json(s.mu_beta)}, {"Sigma_beta", to_json(s.Sigma_beta)},
              {"sigma2", noise_json(s.sigma2)}, {"SigmaL1", cov_json(s.SigmaL1)},
              {"SigmaL2", cov_json(s.SigmaL2)}, {"groups", groups}};
    return r;
}

json blup_report(const BlupResult2& r) {
    json groups = json::array();
    for (const auto& g : r.groups) groups.push_back({{"u", to_json(g.u)}, {"cov_u", to_json(g.cov_u)}});
    return {{"beta", to_json(r.beta)}, {"cov_beta", to_json(r.cov_beta)}, {"groups", groups}};
}

json blup_report(const BlupResult3& r) {
    json groups = json::array();
    for (const auto& g : r.groups) {
        json subs = json::array();
        for (const auto& h : g.subgroups) subs.push_back({{"u", to_json(h.u)}, {"cov_u", to_json(h.cov_u)}});
        groups.push_back({{"u", to_json(g.u)}, {"cov_u", to_json(g.cov_u)}, {"subgroups", subs}});
    }
    return {{"beta", to_json(r.beta)}, {"cov_beta", to_json(r.cov_beta)}, {"groups", groups}};
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRecord>& trace) {
    out.precision(17);
    out << "iter,elbo,wall_seconds\n";
    for (const auto& t : trace) out << t.iter << ',' << t.elbo << ',' << t.wall_seconds << '\n';
}

std::vector<std::string> bench_methods() { return {"mfvb-streamlined", "mfvb-naive", "vmp", "blup"}; }

BenchRecord bench_one(const std::string& method, Index m, int replication, int fixed_iters, std::uint64_t seed) {
    const auto known = bench_methods();
    if (std::find(known.begin(), known.end(), method) == known.end())
        throw std::invalid_argument("unknown bench method '" + method + "'");
    if (m < 1 || fixed_iters < 1) throw std::invalid_argument("bench needs m >= 1 and at least one iteration");
    SimSpec2 spec;
    spec.m = m;
    spec.seed = seed + 1000003ULL * static_cast<std::uint64_t>(replication) + static_cast<std::uint64_t>(m);
    const auto data = simulate_two_level(spec);
    const auto priors = default_priors2(2, 2);
    FitOptions opts;
    opts.max_iter = fixed_iters;
    opts.fixed_iterations = true;

    BenchRecord r{method, m, replication, fixed_iters, 0.0, ""};
    const Index K = 2 + 2 * m;
    if (method == "mfvb-streamlined") {
        r.wall_seconds = mfvb_fit_two_level(data, priors, opts).trace.back().wall_seconds;
        r.peak_note = "blockwise";
    } else if (method == "mfvb-naive") {
        r.wall_seconds = naive_mfvb_fit(data, priors, opts).trace.back().wall_seconds;
        std::ostringstream note;
        note << "dense " << K << "x" << K << " (" << static_cast<double>(K * K * 8) / 1048576.0 << " MiB each)";
        r.peak_note = note.str();
    } else if (method == "vmp") {
        r.wall_seconds = vmp_fit_two_level(data, priors, opts).trace.back().wall_seconds;
        r.peak_note = "blockwise";
    } else {
        const VarianceComponents2 vc{spec.sigma2_true, spec.Sigma_true};
        const auto start = std::chrono::steady_clock::now();
        const auto res = blup_two_level(data, vc);
        r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        r.iterations = 1;
        r.peak_note = res.beta.allFinite() ? "blockwise" : "non-finite";
    }
    r.wall_seconds = std::max(r.wall_seconds, 1e-9);
    return r;
}

std::vector<BenchRecord> bench(const BenchOptions& opts) {
    if (opts.reps < 1 || opts.jobs < 1) throw std::invalid_argument("reps and jobs must be positive");
    for (const auto& m : opts.methods) {
        const auto known = bench_methods();
        if (std::find(known.begin(), known.end(), m) == known.end())
            throw std::invalid_argument("unknown bench method '" + m + "'");
    }
    struct Cell {
        std::string method;
        Index m;
        int rep;
    };
    std::vector<Cell> cells;
    for (Index m : opts.m_list)
        for (int rep = 0; rep < opts.reps; ++rep)
            for (const auto& method : opts.methods) cells.push_back({method, m, rep});

    std::vector<BenchRecord> out(cells.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < cells.size(); k = next++)
            out[k] = bench_one(cells[k].method, cells[k].m, cells[k].rep, opts.fixed_iters, opts.seed);
    };
    if (opts.jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < opts.jobs; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    return out;
}

void write_bench_csv(std::ostream& out, const std::vector<BenchRecord>& records) {
    out.precision(10);
    out << "method,m,replication,iterations,wall_seconds,peak_note\n";
    for (const auto& r : records)
        out << r.method << ',' << r.m << ',' << r.replication << ',' << r.iterations << ',' << r.wall_seconds << ",\""
            << r.peak_note << "\"\n";
}

double median(std::vector<double> v) {
    if (v.empty()) throw std::invalid_argument("median of an empty sample");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mad(const std::vector<double>& v) {
    const double med = median(v);
    std::vector<double> dev;
    for (double x : v) dev.push_back(std::abs(x - med));
    return median(dev);
}

std::vector<BenchSummary> summarize(const std::vector<BenchRecord>& records) {
    std::map<std::pair<Index, std::string>, std::vector<double>> cells;
    for (const auto& r : records) cells[{r.m, r.method}].push_back(r.wall_seconds);
    std::vector<BenchSummary> out;
    for (const auto& [key, v] : cells) out.push_back({key.second, key.first, static_cast<int>(v.size()), median(v), mad(v)});
    return out;
}

void write_summary_csv(std::ostream& out, const std::vector<BenchSummary>& summary) {
    out.precision(6);
    out << "m,method,count,median_seconds,mad_seconds,naive_over_streamlined\n";
    std::map<Index, std::map<std::string, double>> med;
    for (const auto& s : summary) med[s.m][s.method] = s.median;
    for (const auto& s : summary) {
        out << s.m << ',' << s.method << ',' << s.count << ',' << s.median << ',' << s.mad << ',';
        const auto& row = med[s.m];
        if (s.method == "mfvb-naive" && row.count("mfvb-streamlined"))
            out << s.median / row.at("mfvb-streamlined");
        out << '\n';
    }
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("slope needs at least two paired points");
    double mx = 0.0, my = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        mx += std::log(x[k]);
        my += std::log(y[k]);
    }
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(x.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        sxy += (std::log(x[k]) - mx) * (std::log(y[k]) - my);
        sxx += (std::log(x[k]) - mx) * (std::log(x[k]) - mx);
    }
    return sxy / sxx;
}

}  // namespace mlvb
