#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "mlvb/blup.hpp"
#include "mlvb/harness.hpp"
#include "mlvb/mfvb.hpp"
#include "mlvb/vmp.hpp"

using namespace mlvb;
using nlohmann::json;

namespace {

enum Exit { ok = 0, usage = 1, data_error = 2, numerical = 3 };

std::uint64_t default_seed() {
    if (const char* s = std::getenv("MLVB_SEED")) return std::strtoull(s, nullptr, 10);
    return 1;
}

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw DataError("'" + path + "' is not valid JSON: " + e.what());
    }
}

Mat mat_from(const json& j, const char* name) {
    if (!j.is_array() || j.empty()) throw DataError(std::string("'") + name + "' must be a square array");
    const Index d = static_cast<Index>(j.size());
    Mat M(d, d);
    for (Index i = 0; i < d; ++i) {
        const auto& row = j[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Index>(row.size()) != d)
            throw DataError(std::string("'") + name + "' must be a square array");
        for (Index k = 0; k < d; ++k) M(i, k) = row[static_cast<std::size_t>(k)].get<double>();
    }
    return M;
}

void emit(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << text;
}

struct FitArgs {
    std::string data, priors, out = "-", trace, method = "mfvb";
    int levels = 2, max_iter = 500;
    double tol = 1e-8;
    std::uint64_t seed = default_seed();
    CsvSpec csv;
    bool no_intercept = false, standardize = false;
};

void add_csv_options(CLI::App* cmd, FitArgs& a) {
    cmd->add_option("--data", a.data, "input CSV")->required();
    cmd->add_option("--levels", a.levels, "2 or 3")->check(CLI::IsMember({2, 3}));
    cmd->add_option("--group-col", a.csv.group, "group id column");
    cmd->add_option("--subgroup-col", a.csv.subgroup, "subgroup id column (three levels)");
    cmd->add_option("--response", a.csv.response, "response column");
    cmd->add_option("--fixed", a.csv.fixed, "fixed-effect predictor columns")->delimiter(',');
    cmd->add_option("--random", a.csv.random, "random-effect columns (level 1)")->delimiter(',');
    cmd->add_option("--random2", a.csv.random2, "level-2 random-effect columns")->delimiter(',');
    cmd->add_flag("--no-intercept", a.no_intercept, "do not prepend a column of ones");
    cmd->add_option("--out", a.out, "output path, - for stdout");
}

int run_fit(const FitArgs& a) {
    CsvSpec csv = a.csv;
    csv.intercept = !a.no_intercept;
    FitOptions opts;
    opts.max_iter = a.max_iter;
    opts.tol = a.tol;
    ReportContext ctx;
    ctx.method = a.method;
    ctx.seed = a.seed;
    const json pj = a.priors.empty() ? json::object() : read_json(a.priors);
    json report;
    std::vector<TraceRecord> trace;
    if (a.levels == 2) {
        auto loaded = load_csv_two_level(a.data, csv);
        if (a.standardize) ctx.scaling = standardize(loaded.data);
        ctx.fixed_names = loaded.fixed_names;
        const auto pr = priors2_from_json(pj, loaded.data.p(), loaded.data.q());
        const auto fit = a.method == "vmp" ? vmp_fit_two_level(loaded.data, pr, opts)
                                           : mfvb_fit_two_level(loaded.data, pr, opts);
        report = fit_report(fit, ctx);
        trace = fit.trace;
    } else {
        auto loaded = load_csv_three_level(a.data, csv);
        if (a.standardize) ctx.scaling = standardize(loaded.data);
        ctx.fixed_names = loaded.fixed_names;
        const auto pr = priors3_from_json(pj, loaded.data.p(), loaded.data.q1(), loaded.data.q2());
        const auto fit = a.method == "vmp" ? vmp_fit_three_level(loaded.data, pr, opts)
                                           : mfvb_fit_three_level(loaded.data, pr, opts);
        report = fit_report(fit, ctx);
        trace = fit.trace;
    }
    emit(a.out, report.dump(2) + "\n");
    if (!a.trace.empty()) {
        std::ostringstream t;
        write_trace_csv(t, trace);
        emit(a.trace, t.str());
    }
    return ok;
}

int run_blup(const FitArgs& a, const std::string& vc_path) {
    CsvSpec csv = a.csv;
    csv.intercept = !a.no_intercept;
    const json vc = read_json(vc_path);
    const auto need = [&](const char* k) -> const json& {
        if (!vc.contains(k)) throw DataError(std::string("variance component file lacks '") + k + "'");
        return vc[k];
    };
    json report;
    if (a.levels == 2) {
        const auto loaded = load_csv_two_level(a.data, csv);
        report = blup_report(blup_two_level(loaded.data, {need("sigma2").get<double>(), mat_from(need("Sigma"), "Sigma")}));
    } else {
        const auto loaded = load_csv_three_level(a.data, csv);
        report = blup_report(blup_three_level(
            loaded.data, {need("sigma2").get<double>(), mat_from(need("SigmaL1"), "SigmaL1"), mat_from(need("SigmaL2"), "SigmaL2")}));
    }
    emit(a.out, report.dump(2) + "\n");
    return ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fit two- and three-level Gaussian linear mixed models by block-sparse variational Bayes"};
    app.require_subcommand(1);

    // simulate
    auto* sim = app.add_subcommand("simulate", "write a simulated grouped dataset as CSV");
    int sim_levels = 2;
    Index sim_m = 0;
    int n_lo = 0, n_hi = 0, o_lo = 0, o_hi = 0;
    double sigma2_true = 1.0;
    std::uint64_t sim_seed = default_seed();
    std::string sim_out = "-";
    sim->add_option("--levels", sim_levels, "2 or 3")->check(CLI::IsMember({2, 3}));
    sim->add_option("--m", sim_m, "number of groups (default 100, or 6 for three levels)");
    sim->add_option("--n-lo", n_lo, "smallest group size (subgroups per group for three levels)");
    sim->add_option("--n-hi", n_hi, "largest group size (subgroups per group for three levels)");
    sim->add_option("--o-lo", o_lo, "smallest subgroup size (three levels)");
    sim->add_option("--o-hi", o_hi, "largest subgroup size (three levels)");
    sim->add_option("--sigma2", sigma2_true, "true error variance");
    sim->add_option("--seed", sim_seed, "random seed (default from MLVB_SEED or 1)");
    sim->add_option("--out", sim_out, "output path, - for stdout");

    // fit
    FitArgs fit_args;
    auto* fit = app.add_subcommand("fit", "fit a model and write a JSON report");
    add_csv_options(fit, fit_args);
    fit->add_option("--method", fit_args.method, "mfvb or vmp")->check(CLI::IsMember({"mfvb", "vmp"}));
    fit->add_option("--tol", fit_args.tol, "relative ELBO tolerance")->check(CLI::PositiveNumber);
    fit->add_option("--max-iter", fit_args.max_iter, "iteration limit")->check(CLI::PositiveNumber);
    fit->add_option("--priors", fit_args.priors, "JSON file of prior hyperparameters");
    fit->add_option("--seed", fit_args.seed, "seed recorded in the report");
    fit->add_option("--trace", fit_args.trace, "write the ELBO trace CSV here");
    fit->add_flag("--standardize", fit_args.standardize, "divide y and predictors by their sample sd");

    // blup
    FitArgs blup_args;
    std::string vc_path;
    auto* blup = app.add_subcommand("blup", "best linear unbiased prediction with known variance components");
    add_csv_options(blup, blup_args);
    blup->add_option("--vc", vc_path, "JSON with sigma2 and Sigma (or SigmaL1, SigmaL2)")->required();

    // bench
    BenchOptions bopts;
    bopts.seed = default_seed();
    std::string bench_out = "-", summary_out;
    auto* bench_cmd = app.add_subcommand("bench", "time the fitting arms on simulated two-level data");
    bench_cmd->add_option("--methods", bopts.methods, "mfvb-streamlined, mfvb-naive, vmp, blup")->delimiter(',');
    bench_cmd->add_option("--m", bopts.m_list, "group counts")->delimiter(',');
    bench_cmd->add_option("--reps", bopts.reps, "replications per cell")->check(CLI::PositiveNumber);
    bench_cmd->add_option("--iters", bopts.fixed_iters, "fixed iteration count")->check(CLI::PositiveNumber);
    bench_cmd->add_option("--seed", bopts.seed, "base seed");
    bench_cmd->add_option("--jobs", bopts.jobs, "worker threads; timings are contended when > 1")
        ->check(CLI::PositiveNumber);
    bench_cmd->add_option("--out", bench_out, "raw records CSV, - for stdout");
    bench_cmd->add_option("--summary", summary_out, "median/MAD summary CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : usage;
    }

    try {
        if (*sim) {
            std::ostringstream s;
            if (sim_levels == 2) {
                SimSpec2 spec;
                if (sim_m > 0) spec.m = sim_m;
                if (n_lo > 0) spec.n_lo = n_lo;
                if (n_hi > 0) spec.n_hi = n_hi;
                spec.sigma2_true = sigma2_true;
                spec.seed = sim_seed;
                write_csv(s, simulate_two_level(spec));
            } else {
                SimSpec3 spec;
                if (sim_m > 0) spec.m = sim_m;
                if (n_lo > 0) spec.n_lo = n_lo;
                if (n_hi > 0) spec.n_hi = n_hi;
                if (o_lo > 0) spec.o_lo = o_lo;
                if (o_hi > 0) spec.o_hi = o_hi;
                spec.sigma2_true = sigma2_true;
                spec.seed = sim_seed;
                write_csv(s, simulate_three_level(spec));
            }
            emit(sim_out, s.str());
            return ok;
        }
        if (*fit) return run_fit(fit_args);
        if (*blup) return run_blup(blup_args, vc_path);
        if (*bench_cmd) {
            const auto records = bench(bopts);
            std::ostringstream r;
            write_bench_csv(r, records);
            emit(bench_out, r.str());
            if (!summary_out.empty()) {
                std::ostringstream s;
                write_summary_csv(s, summarize(records));
                emit(summary_out, s.str());
            }
            return ok;
        }
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure (" << failure_name(e.kind()) << "): " << e.what() << '\n';
        return numerical;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return data_error;
    } catch (const ShapeError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return data_error;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return usage;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return data_error;
    }
    return usage;
}
