#include "cli.hpp"

#include "config.hpp"

#include "kbl/cases.hpp"
#include "kbl/error.hpp"
#include "kbl/krylov.hpp"
#include "kbl/resolvent.hpp"
#include "kbl/spectral.hpp"

#include "CLI11.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <mutex>
#include <optional>
#include <thread>

namespace kbl::cli {

namespace {

struct Common {
    std::vector<std::string> sets;
    std::string config;
    std::string out = "out";
    std::size_t jobs = 1;
    bool timings = false;
};

std::shared_ptr<spdlog::logger> logger()
{
    static std::once_flag once;
    std::call_once(once, [] {
        auto lg = spdlog::get("kbl");
        if (!lg) lg = spdlog::stderr_color_mt("kbl");
        auto level = spdlog::level::warn;
        if (const char* env = std::getenv("KBL_LOG")) {
            const std::string name = env;
            const auto parsed = spdlog::level::from_str(name);
            if (parsed != spdlog::level::off || name == "off") level = parsed;
        }
        lg->set_level(level);
        lg->set_pattern("[%l] %v");
    });
    return spdlog::get("kbl");
}

json complex_json(Complex z) { return json::array({z.real(), z.imag()}); }

json build_config(const json& defaults, const Common& c, const std::string& command)
{
    json cfg = defaults;
    if (!c.config.empty()) cfg = merge_top_level(defaults, load_config_file(c.config), command);
    for (const auto& s : c.sets) apply_override(cfg, s);
    return merge_top_level(defaults, cfg, command);
}

std::uint64_t seed_of(const json& cfg)
{
    const json& s = cfg.at("seed");
    if (!s.is_number_integer() || s.get<long long>() < 0) throw ConfigError("seed must be a nonnegative integer");
    return s.get<std::uint64_t>();
}

struct Checks {
    json list = json::array();
    bool ok = true;

    void add(const std::string& name, bool passed, json value, json threshold)
    {
        list.push_back({{"name", name}, {"passed", passed}, {"value", value}, {"threshold", threshold}});
        ok = ok && passed;
    }
};

json make_report(const std::string& command, const json& echo, json results, const Checks& checks,
                 const json& residuals, const Common& c, double seconds)
{
    results["passed"] = checks.ok;
    results["checks"] = checks.list;
    json j;
    j["schema"] = report_schema;
    j["command"] = command;
    j["config_echo"] = echo;
    j["results"] = std::move(results);
    j["residuals"] = residuals;
    j["timings"] = c.timings ? json{{"seconds", seconds}} : json(nullptr);
    return j;
}

std::filesystem::path out_dir(const Common& c)
{
    std::filesystem::path dir(c.out);
    std::filesystem::create_directories(dir);
    return dir;
}

void emit_json(const std::filesystem::path& path, const json& j, std::ostream& out)
{
    write_json(path, j);
    logger()->info("wrote {}", path.string());
    out << "wrote " << path.string() << '\n';
}

void emit_csv(const std::filesystem::path& dir, const Table& t, std::ostream& out)
{
    write_csv(dir, t);
    const auto path = dir / (t.name + ".csv");
    logger()->info("wrote {}", path.string());
    out << "wrote " << path.string() << '\n';
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double norm_inf(const Mat& m) { return m.rows() ? m.cwiseAbs().rowwise().sum().maxCoeff() : 0.0; }

// --- list ----------------------------------------------------------------

int cmd_list(std::ostream& out)
{
    for (const auto& info : case_catalog())
        out << info.id << "  [expected: " << info.expected_verdict << "]  " << info.summary << '\n';
    return 0;
}

// --- case ----------------------------------------------------------------

struct CaseOutcome {
    std::optional<CaseResult> result;
    std::string error;
    int code = 0;
};

int cmd_case(std::vector<std::string> ids, const Common& c, std::ostream& out, std::ostream& err)
{
    const auto& catalog = case_catalog();
    if (std::find(ids.begin(), ids.end(), "all") != ids.end()) {
        ids.clear();
        for (const auto& info : catalog) ids.push_back(info.id);
    }
    for (const auto& id : ids) {
        const bool known = std::any_of(catalog.begin(), catalog.end(), [&](const CaseInfo& i) { return i.id == id; });
        if (!known) throw ConfigError("unknown case '" + id + "' (see 'kbl list')");
    }

    // a config file holds the parameter object, or a report's config_echo
    json overrides = json::object();
    if (!c.config.empty()) {
        overrides = load_config_file(c.config);
        if (overrides.contains("params") && overrides.size() <= 2 && (overrides.size() == 1 || overrides.contains("id")))
            overrides = json(overrides["params"]);
    }
    for (const auto& s : c.sets) apply_override(overrides, s);

    std::vector<CaseOutcome> outcomes(ids.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next++) < ids.size();) {
            auto& o = outcomes[i];
            logger()->info("running case {}", ids[i]);
            try {
                o.result = run_case(ids[i], overrides);
            } catch (const ConfigError& e) {
                o.error = e.what();
                o.code = 2;
            } catch (const DimensionError& e) {
                o.error = e.what();
                o.code = 2;
            } catch (const std::exception& e) {
                o.error = e.what();
                o.code = 1;
            }
        }
    };
    const std::size_t threads = std::min(std::max<std::size_t>(c.jobs, 1), ids.size());
    std::vector<std::thread> pool;
    for (std::size_t k = 1; k < threads; ++k) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    int code = 0;
    std::filesystem::path dir;
    if (std::any_of(outcomes.begin(), outcomes.end(), [](const CaseOutcome& o) { return o.result.has_value(); }))
        dir = out_dir(c);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const auto& o = outcomes[i];
        if (!o.result) {
            err << "case " << ids[i] << ": error: " << o.error << '\n';
            code = std::max(code, o.code);
            continue;
        }
        const CaseResult& r = *o.result;
        emit_json(dir / ("case_" + r.id + ".json"), r.report(c.timings), out);
        for (const auto& t : r.tables) emit_csv(dir, t, out);
        const bool ok = r.passed();
        out << "case " << r.id << ": " << (ok ? "PASS" : "FAIL") << " (verdict " << r.verdict << ", expected "
            << r.expected_verdict << ")\n";
        for (const auto& ch : r.checks)
            if (!ch.passed)
                out << "  failed check " << ch.name << ": value " << ch.value.dump() << ", threshold "
                    << ch.threshold.dump() << '\n';
        if (!ok) code = std::max(code, 1);
    }
    return code;
}

// --- krylov-dist ---------------------------------------------------------

const json& krylov_defaults()
{
    static const json d = {
        {"operator", {{"kind", "diagonal"}, {"n", 100}, {"sigma", "inv_sqrt"}}},
        {"f", "ones"},
        {"space", {{"p", "inf"}, {"weight", "unit"}}},
        {"m", 20},
        {"seed", 1},
        {"eps_solve", nullptr},
        {"delta_floor", nullptr},
        {"stagnation", 0.01},
    };
    return d;
}

int cmd_krylov_dist(const Common& c, std::ostream& out)
{
    const auto t0 = std::chrono::steady_clock::now();
    json cfg = build_config(krylov_defaults(), c, "krylov-dist");
    const std::uint64_t seed = seed_of(cfg);
    auto op = make_operator(cfg["operator"], seed);
    cfg["operator"] = op.spec;
    const std::size_t n = op.value.dim();
    const Vec f = make_vector(cfg["f"], n, seed, "f");
    auto space = make_space(cfg["space"], n);
    cfg["space"] = space.spec;
    const std::size_t m = positive_size(cfg["m"], "m");

    SweepThresholds th;
    if (!cfg["eps_solve"].is_null()) th.eps_solve = number_value(cfg["eps_solve"], "eps_solve");
    if (!cfg["delta_floor"].is_null()) th.delta_floor = number_value(cfg["delta_floor"], "delta_floor");
    th.stagnation = number_value(cfg["stagnation"], "stagnation");

    const SolvabilityReport rep = solvability_sweep(op.value, f, space.value, m, th);

    json res;
    res["n"] = rep.n;
    res["m"] = rep.big_m;
    json d = json::array(), lb = json::array();
    double gap = 0.0;
    for (std::size_t k = 0; k < rep.distances.size(); ++k) {
        d.push_back(finite_or_null(rep.distances[k]));
        lb.push_back(finite_or_null(rep.lower_bounds[k]));
        gap = std::max(gap, rep.distances[k] - rep.lower_bounds[k]);
    }
    res["distances"] = d;
    res["lower_bounds"] = lb;
    res["ranks"] = rep.ranks;
    res["verdict"] = to_string(rep.verdict);
    res["eps_solve"] = rep.eps_solve;
    res["delta_floor"] = rep.delta_floor;
    res["tail_spread"] = finite_or_null(rep.tail_spread);
    res["f_norm"] = rep.f_norm;
    res["grade"] = rep.grade ? json(*rep.grade) : json(nullptr);

    Checks checks;
    bool lb_ok = true;
    for (std::size_t k = 0; k < rep.distances.size(); ++k)
        lb_ok = lb_ok && rep.lower_bounds[k] <= rep.distances[k] * (1.0 + 1e-9) + 1e-12;
    checks.add("lower_bound_below_distance", lb_ok, gap, 0.0);

    json residuals = {{"candidate_residual", rep.candidate_residual}, {"distance_minus_lower_bound", gap}};

    Table t{"krylov_dist_distances", {"m", "distance", "norm", "N"}, {}};
    for (std::size_t k = 0; k < rep.distances.size(); ++k)
        t.add({static_cast<long long>(k + 1), rep.distances[k], to_string(space.value.p()),
               static_cast<long long>(rep.n)});

    const auto dir = out_dir(c);
    emit_json(dir / "krylov_dist.json", make_report("krylov-dist", cfg, res, checks, residuals, c, seconds_since(t0)),
              out);
    emit_csv(dir, t, out);
    out << "krylov-dist: d_" << rep.big_m << " = " << format_double(rep.distances.back()) << ", verdict "
        << to_string(rep.verdict) << '\n';
    return checks.ok ? 0 : 1;
}

// --- resolvent -----------------------------------------------------------

const json& resolvent_defaults()
{
    static const json d = {
        {"operator", {{"kind", "diagonal"}, {"sigma", {2.0, 3.0, 4.0}}}},
        {"method", "kclass"},
        {"zeta", 0.0},
        {"zeta0", nullptr},
        {"waypoints", nullptr},
        {"order", 64},
        {"eps", 1e-8},
        {"g", nullptr},
        {"seed", 1},
        {"direct_check_max_n", 2000},
    };
    return d;
}

json provenance_json(const ApproxOperator& ap)
{
    json steps = json::array();
    for (const auto& s : ap.provenance) {
        json j = {{"kind", to_string(s.kind)}};
        switch (s.kind) {
        case StepKind::laurent: j["zeta"] = complex_json(s.zeta); break;
        case StepKind::neumann:
            j["from"] = complex_json(s.from);
            j["zeta"] = complex_json(s.zeta);
            break;
        case StepKind::shift_multiply: j["lambda"] = complex_json(s.lambda); break;
        }
        j["order"] = s.order;
        j["step_bound"] = finite_or_null(s.step_bound);
        j["bound_after"] = finite_or_null(s.bound_after);
        steps.push_back(j);
    }
    return steps;
}

int cmd_resolvent(const Common& c, std::ostream& out)
{
    const auto t0 = std::chrono::steady_clock::now();
    json cfg = build_config(resolvent_defaults(), c, "resolvent");
    const std::uint64_t seed = seed_of(cfg);
    auto op = make_operator(cfg["operator"], seed);
    cfg["operator"] = op.spec;
    const Operator& a = op.value;
    const std::string method = cfg["method"].is_string() ? cfg["method"].get<std::string>() : "";
    const Complex zeta = complex_value(cfg["zeta"], "zeta");
    cfg["zeta"] = complex_json(zeta);
    const double eps = number_value(cfg["eps"], "eps");
    if (eps <= 0.0) throw ConfigError("eps must be positive");
    std::optional<std::vector<Complex>> waypoints;
    if (!cfg["waypoints"].is_null()) waypoints = complex_list(cfg["waypoints"], "waypoints");
    const std::size_t check_max = positive_size(cfg["direct_check_max_n"], "direct_check_max_n");

    json res;
    res["method"] = method;
    res["zeta"] = cfg["zeta"];
    Mat value;
    std::optional<double> bound;
    if (method == "direct") {
        const ResolventPoint rp = resolvent_direct(a, zeta);
        value = rp.value;
        bound = rp.error_bound;
        res["direct_residual"] = rp.residual;
    } else if (method == "laurent") {
        const std::size_t order = positive_size(cfg["order"], "order");
        const ResolventPoint rp = resolvent_laurent(a, zeta, order);
        value = rp.value;
        bound = rp.error_bound;
        res["order"] = rp.order;
    } else if (method == "continuation" || method == "kclass") {
        ApproxOperator ap;
        if (method == "continuation") {
            Complex zeta0;
            if (cfg["zeta0"].is_null()) {
                const double spr = spectral_radius(a, 12).upper;
                zeta0 = spr > 0.0 ? 2.0 * spr : 1.0;
            } else {
                zeta0 = complex_value(cfg["zeta0"], "zeta0");
            }
            cfg["zeta0"] = complex_json(zeta0);
            const PathPlan plan = plan_path(a, zeta0, zeta, waypoints.value_or(std::vector<Complex>{}), eps);
            json vs = json::array(), cs = json::array();
            for (Complex v : plan.vertices) vs.push_back(complex_json(v));
            for (Complex v : plan.centers) cs.push_back(complex_json(v));
            res["plan"] = {{"vertices", vs}, {"eta", plan.eta},        {"radius", plan.radius},
                           {"centers", cs},  {"orders", plan.orders}, {"eps_total", plan.eps_total}};
            ap = continue_resolvent(a, plan);
        } else {
            if (zeta != Complex(0.0)) throw ConfigError("method kclass approximates R(0, A) = A^-1; set zeta to 0");
            ap = kclass_inverse(a, eps, waypoints);
            const Mat ad = a.to_dense();
            res["inverse_residual"] = finite_or_null(norm_inf(Mat(ap.value * ad - Mat::Identity(ad.rows(), ad.cols()))));
        }
        value = ap.value;
        bound = ap.error_bound;
        res["replans"] = ap.replans;
        res["degree_bound"] = ap.degree_bound ? json(*ap.degree_bound) : json(nullptr);
        res["provenance"] = provenance_json(ap);
    } else {
        throw ConfigError("method must be one of direct, laurent, continuation, kclass");
    }
    res["error_bound"] = bound ? finite_or_null(*bound) : json(nullptr);

    Checks checks;
    json residuals = json::object();
    if (method != "direct" && a.dim() <= check_max) {
        const ResolventPoint ref = resolvent_direct(a, zeta);
        const double diff = norm_inf(Mat(value - ref.value));
        const double slack = ref.error_bound.value_or(0.0);
        residuals["direct_difference"] = diff;
        residuals["direct_error_bound"] = slack;
        if (bound) checks.add("error_bound_holds", diff <= *bound + slack, diff, *bound + slack);
    }
    if (method == "kclass" && bound) checks.add("certificate_within_eps", *bound <= eps, *bound, eps);

    std::optional<Table> vector_table;
    if (!cfg["g"].is_null()) {
        const Vec g = make_vector(cfg["g"], a.dim(), seed, "g");
        const Vec x = value * g;
        res["vector_error_bound"] = bound ? finite_or_null(*bound * g.cwiseAbs().maxCoeff()) : json(nullptr);
        Table t{"resolvent_vector", {"index", "re", "im"}, {}};
        for (Eigen::Index i = 0; i < x.size(); ++i) t.add({static_cast<long long>(i + 1), x(i).real(), x(i).imag()});
        vector_table = std::move(t);
    }

    const auto dir = out_dir(c);
    emit_json(dir / "resolvent.json", make_report("resolvent", cfg, res, checks, residuals, c, seconds_since(t0)), out);
    if (vector_table) emit_csv(dir, *vector_table, out);
    out << "resolvent: " << method << " at " << format_double(zeta.real()) << (zeta.imag() < 0 ? "" : "+")
        << format_double(zeta.imag()) << "i, error bound " << (bound ? format_double(*bound) : "n/a") << '\n';
    return checks.ok ? 0 : 1;
}

// --- projection ----------------------------------------------------------

const json& projection_defaults()
{
    static const json d = {
        {"operator", {{"kind", "diagonal"}, {"sigma", {2.0, 0.5, 0.4}}}},
        {"contour", {{"kind", "circle"}, {"center", 0.0}, {"radius", 1.0}, {"nodes", 128}}},
        {"tol", 1e-8},
        {"expect_rank", nullptr},
        {"seed", 1},
    };
    return d;
}

int cmd_projection(const Common& c, std::ostream& out)
{
    const auto t0 = std::chrono::steady_clock::now();
    json cfg = build_config(projection_defaults(), c, "projection");
    auto op = make_operator(cfg["operator"], seed_of(cfg));
    cfg["operator"] = op.spec;
    auto gamma = make_contour(cfg["contour"]);
    cfg["contour"] = gamma.spec;
    const double tol = number_value(cfg["tol"], "tol");
    std::optional<std::size_t> expect;
    if (!cfg["expect_rank"].is_null()) {
        if (!cfg["expect_rank"].is_number_integer() || cfg["expect_rank"].get<long long>() < 0)
            throw ConfigError("expect_rank must be a nonnegative integer");
        expect = cfg["expect_rank"].get<std::size_t>();
    }

    SpectralOptions opt;
    opt.jobs = std::max<std::size_t>(c.jobs, 1);
    const ProjectionResult pr = projection(op.value, gamma.value, opt);

    json res;
    res["rank"] = pr.rank;
    res["rank_tol"] = pr.rank_tol;
    res["enclosed"] = pr.enclosed ? json(*pr.enclosed) : json(nullptr);
    res["quadrature_count"] = pr.quadrature_count;
    res["trace"] = complex_json(pr.p.trace());
    json residuals = {{"idempotency", pr.idempotency_residual},
                      {"commutator", pr.commutator_residual},
                      {"max_node_residual", pr.max_node_residual}};

    Checks checks;
    checks.add("idempotent", pr.idempotency_residual <= tol, pr.idempotency_residual, tol);
    checks.add("commutes", pr.commutator_residual <= tol, pr.commutator_residual, tol);
    if (pr.enclosed) checks.add("rank_matches_enclosed", pr.rank == *pr.enclosed, pr.rank, *pr.enclosed);
    if (expect) checks.add("rank_matches_expected", pr.rank == *expect, pr.rank, *expect);

    const auto dir = out_dir(c);
    emit_json(dir / "projection.json", make_report("projection", cfg, res, checks, residuals, c, seconds_since(t0)),
              out);
    out << "projection: rank " << pr.rank << ", |P^2 - P| = " << format_double(pr.idempotency_residual)
        << ", |PA - AP| = " << format_double(pr.commutator_residual) << '\n';
    return checks.ok ? 0 : 1;
}

void add_common(CLI::App* sub, Common& c)
{
    sub->add_option("--set", c.sets, "Override a config value, key=value (dotted keys reach nested fields)")
        ->take_all();
    sub->add_option("--config", c.config, "JSON config file");
    sub->add_option("--out", c.out, "Output directory")->capture_default_str();
    sub->add_option("--jobs", c.jobs, "Concurrent cases, or concurrent contour nodes for projection")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sub->add_flag("--timings", c.timings, "Record wall-clock time in reports");
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Krylov solvability, resolvent continuation and spectral projection experiments", "kbl"};
    app.require_subcommand(1);
    Common common;
    std::vector<std::string> ids;

    auto* list = app.add_subcommand("list", "List the case catalog");
    auto* cas = app.add_subcommand("case", "Run catalog cases (ids or 'all')");
    cas->add_option("ids", ids, "Case ids")->required();
    add_common(cas, common);
    auto* kd = app.add_subcommand("krylov-dist", "Distance sweep d_m = dist(f, K_m(A, Af))");
    add_common(kd, common);
    auto* rs = app.add_subcommand("resolvent", "Resolvent by direct solve, series or continuation");
    add_common(rs, common);
    auto* pj = app.add_subcommand("projection", "Contour-integral spectral projection");
    add_common(pj, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (list->parsed()) return cmd_list(out);
        if (cas->parsed()) return cmd_case(ids, common, out, err);
        if (kd->parsed()) return cmd_krylov_dist(common, out);
        if (rs->parsed()) return cmd_resolvent(common, out);
        if (pj->parsed()) return cmd_projection(common, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return 2;
    } catch (const DimensionError& e) {
        err << "config error: " << e.what() << '\n';
        return 2;
    } catch (const json::exception& e) {
        err << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}

} // namespace kbl::cli
