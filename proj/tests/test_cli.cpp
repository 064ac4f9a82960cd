#include "doctest.h"

#include "cli.hpp"
#include "kbl/report.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using kbl::json;

namespace {

struct Run {
    int code = 0;
    std::string out;
    std::string err;
};

Run kbl_run(std::vector<std::string> args)
{
    args.insert(args.begin(), "kbl");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    Run r;
    r.code = kbl::cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

fs::path scratch(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("kbl_cli_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json load(const fs::path& p) { return json::parse(slurp(p)); }

} // namespace

TEST_CASE("usage errors exit 2, help exits 0")
{
    CHECK(kbl_run({}).code == 2);
    CHECK(kbl_run({"frobnicate"}).code == 2);
    CHECK(kbl_run({"--help"}).code == 0);
    CHECK(kbl_run({"list"}).code == 0);
    CHECK(kbl_run({"case", "no_such_case"}).code == 2);
    CHECK(kbl_run({"case", "shift2_not_ksolvable", "--jobs", "0"}).code == 2);
}

TEST_CASE("case volterra end to end with overrides")
{
    const auto dir = scratch("volterra");
    const Run r = kbl_run({"case", "volterra", "--set", "n=100", "--set", "n_sweep=[50,100]", "--out", dir.string()});
    INFO(r.out, r.err);
    REQUIRE(r.code == 0);
    REQUIRE(fs::exists(dir / "case_volterra.json"));
    CHECK(fs::exists(dir / "case_volterra_distances.csv"));
    const json j = load(dir / "case_volterra.json");
    CHECK(j["schema"] == 1);
    CHECK(j["command"] == "case");
    CHECK(j["config_echo"]["id"] == "volterra");
    CHECK(j["config_echo"]["params"]["n"] == 100);
    CHECK(j["results"]["passed"] == true);
    CHECK(j["timings"].is_null());
}

TEST_CASE("case overrides are type checked")
{
    const auto dir = scratch("case_bad");
    CHECK(kbl_run({"case", "shift2_not_ksolvable", "--set", "bogus=1", "--out", dir.string()}).code == 2);
    CHECK(kbl_run({"case", "shift2_not_ksolvable", "--set", "n=abc", "--out", dir.string()}).code == 2);
    CHECK(kbl_run({"case", "shift_not_solvable", "--set", "beta1=0.0", "--out", dir.string()}).code == 2);
}

TEST_CASE("case reports are byte-identical across reruns and across --jobs")
{
    const auto a = scratch("det_a");
    const auto b = scratch("det_b");
    REQUIRE(kbl_run({"case", "shift2_not_ksolvable", "weighted_lp", "--out", a.string()}).code == 0);
    REQUIRE(kbl_run({"case", "shift2_not_ksolvable", "weighted_lp", "--jobs", "2", "--out", b.string()}).code == 0);
    for (const char* f : {"case_shift2_not_ksolvable.json", "case_weighted_lp.json",
                          "case_shift2_not_ksolvable_distances.csv"})
        CHECK(slurp(a / f) == slurp(b / f));

    // the echo of one run is a valid config for the next
    const auto c = scratch("det_c");
    std::ofstream(c / "cfg.json") << load(a / "case_weighted_lp.json")["config_echo"].dump();
    REQUIRE(kbl_run({"case", "weighted_lp", "--config", (c / "cfg.json").string(), "--out", c.string()}).code == 0);
    CHECK(slurp(a / "case_weighted_lp.json") == slurp(c / "case_weighted_lp.json"));
}

TEST_CASE("timings appear only on request")
{
    const auto dir = scratch("timings");
    REQUIRE(kbl_run({"case", "shift2_not_ksolvable", "--timings", "--out", dir.string()}).code == 0);
    const json j = load(dir / "case_shift2_not_ksolvable.json");
    CHECK(j["timings"]["seconds"].is_number());
}

TEST_CASE("krylov-dist schema and CSV")
{
    const auto dir = scratch("kd");
    const Run r = kbl_run({"krylov-dist", "--set", "operator.n=200", "--set", "m=12", "--set", "f=\"inv_sqrt\"",
                           "--out", dir.string()});
    INFO(r.out, r.err);
    REQUIRE(r.code == 0);
    const json j = load(dir / "krylov_dist.json");
    std::vector<std::string> keys;
    for (const auto& [k, v] : j.items()) keys.push_back(k);
    CHECK(keys == std::vector<std::string>{"schema", "command", "config_echo", "results", "residuals", "timings"});
    CHECK(j["command"] == "krylov-dist");
    CHECK(j["config_echo"]["operator"]["n"] == 200);
    CHECK(j["results"]["distances"].size() == 12);

    const std::string csv = slurp(dir / "krylov_dist_distances.csv");
    CHECK(csv.rfind("m,distance,norm,N\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 13);
    CHECK(csv.find('\r') == std::string::npos);
    // the first row carries d_1 at full precision
    std::istringstream rows(csv);
    std::string header, first;
    std::getline(rows, header);
    std::getline(rows, first);
    CHECK(first == "1," + kbl::format_double(j["results"]["distances"][0].get<double>()) + ",inf,200");
}

TEST_CASE("krylov-dist config round trip")
{
    const auto a = scratch("kd_rt_a");
    const auto b = scratch("kd_rt_b");
    REQUIRE(kbl_run({"krylov-dist", "--set", "space={\"p\":2,\"weight\":\"exp_decay\"}", "--set", "operator.n=40",
                     "--set", "f=\"random\"", "--set", "seed=5", "--out", a.string()})
                .code == 0);
    std::ofstream(b / "cfg.json") << load(a / "krylov_dist.json")["config_echo"].dump(2);
    REQUIRE(kbl_run({"krylov-dist", "--config", (b / "cfg.json").string(), "--out", b.string()}).code == 0);
    CHECK(slurp(a / "krylov_dist.json") == slurp(b / "krylov_dist.json"));
    CHECK(slurp(a / "krylov_dist_distances.csv") == slurp(b / "krylov_dist_distances.csv"));
}

TEST_CASE("krylov-dist schema violations exit 2")
{
    const auto dir = scratch("kd_bad");
    const auto o = dir.string();
    CHECK(kbl_run({"krylov-dist", "--set", "bogus=1", "--out", o}).code == 2);
    CHECK(kbl_run({"krylov-dist", "--set", "operator.bogus=1", "--out", o}).code == 2);
    CHECK(kbl_run({"krylov-dist", "--set", "operator.kind=\"circle\"", "--out", o}).code == 2);
    CHECK(kbl_run({"krylov-dist", "--set", "f=[1,2,3]", "--out", o}).code == 2);
    CHECK(kbl_run({"krylov-dist", "--set", "f=\"e0\"", "--out", o}).code == 2);
    CHECK(kbl_run({"krylov-dist", "--set", "space.p=3", "--out", o}).code == 2);
    CHECK(kbl_run({"krylov-dist", "--set", "space.weight=\"exp_decay\"", "--out", o}).code == 2);
    CHECK(kbl_run({"krylov-dist", "--set", "m=0", "--out", o}).code == 2);
    CHECK(kbl_run({"krylov-dist", "--config", (dir / "missing.json").string(), "--out", o}).code == 2);
    CHECK_FALSE(fs::exists(dir / "krylov_dist.json"));
}

TEST_CASE("resolvent runs and validation failures")
{
    const auto dir = scratch("res");
    const auto o = dir.string();

    const Run ok = kbl_run({"resolvent", "--set", "method=\"continuation\"", "--set", "zeta=1.5", "--set",
                            "waypoints=[[5,3],[1.5,2]]", "--set", "g=\"ones\"", "--out", o});
    INFO(ok.out, ok.err);
    REQUIRE(ok.code == 0);
    const json j = load(dir / "resolvent.json");
    CHECK(j["results"]["passed"] == true);
    CHECK(j["residuals"]["direct_difference"].get<double>() <= j["results"]["error_bound"].get<double>());
    CHECK(j["results"]["provenance"][0]["kind"] == "laurent");
    CHECK(fs::exists(dir / "resolvent_vector.csv"));

    CHECK(kbl_run({"resolvent", "--out", o}).code == 0);  // kclass inverse of diag(2, 3, 4)

    // straight path from 2 spr to 1.5 crosses the spectrum
    const Run cross = kbl_run({"resolvent", "--set", "method=\"continuation\"", "--set", "zeta=1.5", "--out", o});
    CHECK(cross.code == 1);
    CHECK(cross.err.find("spectrum") != std::string::npos);
    // direct solve at an eigenvalue
    CHECK(kbl_run({"resolvent", "--set", "method=\"direct\"", "--set", "zeta=3", "--out", o}).code == 1);
    // Laurent series inside the spectral radius
    CHECK(kbl_run({"resolvent", "--set", "method=\"laurent\"", "--set", "zeta=1", "--out", o}).code == 1);
    // kclass with a nonzero target and an unknown method are config errors
    CHECK(kbl_run({"resolvent", "--set", "zeta=1", "--out", o}).code == 2);
    CHECK(kbl_run({"resolvent", "--set", "method=\"magic\"", "--out", o}).code == 2);
}

TEST_CASE("projection runs and validation failures")
{
    const auto dir = scratch("proj");
    const auto o = dir.string();
    const Run ok = kbl_run({"projection", "--set", "expect_rank=2", "--out", o});
    INFO(ok.out, ok.err);
    REQUIRE(ok.code == 0);
    const json j = load(dir / "projection.json");
    CHECK(j["results"]["rank"] == 2);
    CHECK(j["results"]["enclosed"] == 2);
    CHECK(j["residuals"]["idempotency"].get<double>() <= 1e-8);

    // node on an eigenvalue
    const Run hit = kbl_run({"projection", "--set", "contour.radius=2", "--out", o});
    CHECK(hit.code == 1);
    CHECK(hit.err.find("spectrum") != std::string::npos);
    // an assertion that does not hold
    CHECK(kbl_run({"projection", "--set", "expect_rank=3", "--out", o}).code == 1);
    // malformed contours
    CHECK(kbl_run({"projection", "--set", "contour={\"kind\":\"polygon\",\"vertices\":[0,1]}", "--out", o}).code == 2);
    CHECK(kbl_run({"projection", "--set", "contour.radius=-1", "--out", o}).code == 2);

    // midpoint rule on the edges: second order only, hence the fine split
    const Run poly = kbl_run({"projection", "--set",
                              "contour={\"kind\":\"polygon\",\"vertices\":[[1.2,-2],[4,-2],[4,2],[1.2,2]]}",
                              "--set", "contour.per_edge=1024", "--set", "tol=1e-6", "--set", "expect_rank=1",
                              "--out", o});
    CHECK(poly.code == 0);
}
