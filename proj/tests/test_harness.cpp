#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "mlvb/harness.hpp"
#include "support.hpp"

using namespace mlvb;
using namespace mlvb::testing;

namespace {

std::string error_of(const std::string& csv, const CsvSpec& spec = {}) {
    std::istringstream in(csv);
    try {
        read_csv_two_level(in, spec);
    } catch (const DataError& e) {
        return e.what();
    }
    return "";
}

int cli(const std::string& args) {
    const std::string cmd = std::string(MLVB_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("simulation is repeatable for a seed") {
    SimSpec2 spec;
    spec.m = 5;
    spec.seed = 42;
    const auto a = simulate_two_level(spec), b = simulate_two_level(spec);
    REQUIRE(a.m() == 5);
    for (Index i = 0; i < a.m(); ++i) {
        CHECK(a.groups[i].y == b.groups[i].y);
        CHECK(a.groups[i].y.size() >= 30);
        CHECK(a.groups[i].y.size() <= 60);
        CHECK(a.groups[i].X == a.groups[i].Z);
    }
    spec.seed = 43;
    CHECK(simulate_two_level(spec).groups[0].y != a.groups[0].y);
    SimSpec3 s3;
    const auto d3 = simulate_three_level(s3);
    CHECK(d3.m() == 6);
    CHECK(d3.n_subgroups() == 48);
    CHECK(d3.n_total() == 48 * 25);
}

TEST_CASE("CSV round trip keeps groups in order of appearance") {
    SimSpec2 spec;
    spec.m = 4;
    const auto data = simulate_two_level(spec);
    std::stringstream ss;
    write_csv(ss, data);
    const auto loaded = read_csv_two_level(ss);
    REQUIRE(loaded.data.m() == 4);
    CHECK(loaded.fixed_names == std::vector<std::string>{"(Intercept)", "x"});
    for (Index i = 0; i < 4; ++i) {
        CHECK(max_rel(loaded.data.groups[i].y, data.groups[i].y) < 1e-15);
        CHECK(max_rel(loaded.data.groups[i].X, data.groups[i].X) < 1e-15);
    }
    std::istringstream in("group,y,x\nb,1,2\na,3,4\nb,5,6\n");
    const auto l2 = read_csv_two_level(in);
    CHECK(l2.group_ids == std::vector<std::string>{"b", "a"});
    CHECK(l2.data.groups[0].y.size() == 2);
}

TEST_CASE("CSV errors name the line and column") {
    CHECK(error_of("group,y,x\n1,2,abc\n").find("line 2") != std::string::npos);
    CHECK(error_of("group,y,x\n1,2,abc\n").find("'x'") != std::string::npos);
    CHECK(error_of("group,y,x\n1,2\n").find("line 2") != std::string::npos);
    CHECK(error_of("group,resp,x\n1,2,3\n").find("'y'") != std::string::npos);
    CHECK(error_of("").find("header") != std::string::npos);
    CHECK(error_of("group,y,x\n").find("no data") != std::string::npos);
    std::istringstream in("group,y,x\n1,2,3\n");
    CHECK_THROWS_AS(read_csv_three_level(in, {}), DataError);
}

TEST_CASE("standardize divides by sample standard deviations") {
    SimSpec2 spec;
    spec.m = 6;
    auto data = simulate_two_level(spec);
    const auto before = data;
    const auto s = standardize(data);
    CHECK(s.x(0) == 1.0);
    CHECK(data.groups[0].y(0) * s.y == doctest::Approx(before.groups[0].y(0)));
    CHECK(data.groups[0].X(0, 1) * s.x(1) == doctest::Approx(before.groups[0].X(0, 1)));
}

TEST_CASE("fit report has credible intervals around the posterior mean") {
    SimSpec2 spec;
    spec.m = 30;
    const auto data = simulate_two_level(spec);
    const auto fit = mfvb_fit_two_level(data, default_priors2(2, 2));
    const auto j = fit_report(fit, {"mfvb", {"(Intercept)", "x"}, std::nullopt, 1});
    CHECK(j.at("converged").get<bool>());
    const double sd = std::sqrt(fit.state.Sigma_beta(1, 1));
    const double lo = fit.state.mu_beta(1) - 1.96 * sd;
    bool found = false;
    for (const auto& b : j.at("fixed_effects")) {
        if (b.at("name") == "x") {
            CHECK(b.at("ci95")[0].get<double>() == doctest::Approx(lo));
            found = true;
        }
    }
    CHECK(found);
}

TEST_CASE("priors from JSON override defaults and are validated") {
    const auto pr = priors2_from_json(nlohmann::json{{"s_sigma2", 3.0}}, 2, 2);
    CHECK(pr.s_sigma2 == 3.0);
    CHECK_THROWS(priors2_from_json(nlohmann::json{{"mu_beta", {1.0}}}, 2, 2));
}

TEST_CASE("bench summaries") {
    CHECK(median({3.0, 1.0, 2.0}) == 2.0);
    CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
    CHECK(mad({1.0, 2.0, 3.0, 4.0, 100.0}) == 1.0);
    CHECK(loglog_slope({1, 10, 100}, {2, 20, 200}) == doctest::Approx(1.0));
    const auto r = bench({{"mfvb-streamlined", "mfvb-naive"}, {5}, 2, 3, 9, 2});
    CHECK(r.size() == 4);
    const auto s = summarize(r);
    CHECK(s.size() == 2);
    std::ostringstream os;
    write_summary_csv(os, s);
    CHECK(os.str().find("naive_over_streamlined") != std::string::npos);
    CHECK_THROWS_AS(bench_one("nope", 5, 0, 1, 1), std::invalid_argument);
}

TEST_CASE("command line exit codes") {
    const auto dir = std::filesystem::temp_directory_path() / "mlvb_cli_test";
    std::filesystem::create_directories(dir);
    const std::string csv = (dir / "d.csv").string(), bad = (dir / "bad.csv").string();
    CHECK(cli("--help") == 0);
    CHECK(cli("") == 1);
    CHECK(cli("fit --method nope --data " + csv) == 1);
    CHECK(cli("simulate --m 10 --seed 3 --out " + csv) == 0);
    CHECK(cli("fit --data " + csv + " --out " + (dir / "fit.json").string()) == 0);
    CHECK(cli("fit --method vmp --data " + csv + " --out -") == 0);
    CHECK(cli("fit --data " + (dir / "missing.csv").string()) == 2);
    std::ofstream(bad) << "group,y,x\n1,2,oops\n";
    CHECK(cli("fit --data " + bad) == 2);
    std::ifstream in(dir / "fit.json");
    const auto j = nlohmann::json::parse(in);
    CHECK(j.at("converged").get<bool>());
    std::filesystem::remove_all(dir);
}
