#include "config.hpp"

#include "kbl/error.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace kbl::cli {

namespace {

void allow_only(const json& obj, const std::set<std::string>& keys, const std::string& where)
{
    if (!obj.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [k, v] : obj.items())
        if (!keys.count(k)) throw ConfigError(where + ": unknown field '" + k + "'");
}

std::string kind_of(const json& obj, const std::string& where)
{
    if (!obj.is_object() || !obj.contains("kind") || !obj["kind"].is_string())
        throw ConfigError(where + " needs a string field 'kind'");
    return obj["kind"].get<std::string>();
}

json complex_json(Complex z) { return json::array({z.real(), z.imag()}); }

double signed_unit(std::mt19937_64& rng)
{
    return static_cast<double>(rng() >> 11) * 0x1.0p-52 - 1.0;
}

} // namespace

void apply_override(json& cfg, const std::string& assignment)
{
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + assignment + "'");
    const std::string path = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;

    json* node = &cfg;
    std::stringstream ss(path);
    std::string key;
    std::vector<std::string> parts;
    while (std::getline(ss, key, '.')) {
        if (key.empty()) throw ConfigError("--set: empty component in '" + path + "'");
        parts.push_back(key);
    }
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        if (!node->is_object()) throw ConfigError("--set: '" + parts[i] + "' is not an object in '" + path + "'");
        node = &(*node)[parts[i]];
        if (node->is_null()) *node = json::object();
    }
    if (!node->is_object()) throw ConfigError("--set: cannot descend into '" + path + "'");
    (*node)[parts.back()] = std::move(value);
}

json load_config_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config file " + path.string() + " is not valid JSON");
    if (!j.is_object()) throw ConfigError("config file " + path.string() + " must hold an object");
    return j;
}

json merge_top_level(const json& defaults, const json& user, const std::string& where)
{
    if (!user.is_object()) throw ConfigError(where + " config must be an object");
    json out = defaults;
    for (const auto& [k, v] : user.items()) {
        if (!defaults.contains(k)) throw ConfigError(where + ": unknown field '" + k + "'");
        out[k] = v;
    }
    return out;
}

Complex complex_value(const json& j, const std::string& what)
{
    if (j.is_number()) return j.get<double>();
    if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
        return {j[0].get<double>(), j[1].get<double>()};
    throw ConfigError(what + " must be a number or [re, im]");
}

std::vector<Complex> complex_list(const json& j, const std::string& what)
{
    if (!j.is_array()) throw ConfigError(what + " must be an array");
    std::vector<Complex> out;
    for (const auto& z : j) out.push_back(complex_value(z, what));
    return out;
}

double number_value(const json& j, const std::string& what)
{
    if (!j.is_number()) throw ConfigError(what + " must be a number");
    const double x = j.get<double>();
    if (!std::isfinite(x)) throw ConfigError(what + " must be finite");
    return x;
}

std::size_t positive_size(const json& j, const std::string& what)
{
    if (!j.is_number_integer() || j.get<long long>() < 1) throw ConfigError(what + " must be a positive integer");
    return static_cast<std::size_t>(j.get<long long>());
}

Vec make_vector(const json& spec, std::size_t n, std::uint64_t seed, const std::string& what)
{
    const auto len = static_cast<Eigen::Index>(n);
    Vec v = Vec::Zero(len);
    if (spec.is_array()) {
        if (spec.size() != n)
            throw ConfigError(what + " has " + std::to_string(spec.size()) + " entries, expected " + std::to_string(n));
        for (Eigen::Index i = 0; i < len; ++i) v(i) = complex_value(spec[static_cast<std::size_t>(i)], what);
        return v;
    }
    if (!spec.is_string()) throw ConfigError(what + " must be a generator name or an array");
    const std::string name = spec.get<std::string>();
    auto fill = [&](auto fn) {
        for (Eigen::Index i = 0; i < len; ++i) v(i) = fn(static_cast<double>(i + 1));
    };
    if (name == "ones") {
        fill([](double) { return 1.0; });
    } else if (name == "inv") {
        fill([](double k) { return 1.0 / k; });
    } else if (name == "inv_sqrt") {
        fill([](double k) { return 1.0 / std::sqrt(k); });
    } else if (name == "evens") {
        fill([](double k) { return std::fmod(k, 2.0) == 0.0 ? 1.0 : 0.0; });
    } else if (name == "odds") {
        fill([](double k) { return std::fmod(k, 2.0) == 1.0 ? 1.0 : 0.0; });
    } else if (name == "x") {
        fill([&](double k) { return k / static_cast<double>(n); });
    } else if (name == "random") {
        std::mt19937_64 rng(seed);
        for (Eigen::Index i = 0; i < len; ++i) v(i) = signed_unit(rng);
    } else if (name.rfind("pow:", 0) == 0) {
        double a = 0.0;
        try {
            std::size_t used = 0;
            a = std::stod(name.substr(4), &used);
            if (used != name.size() - 4) throw std::invalid_argument(name);
        } catch (const std::exception&) {
            throw ConfigError(what + ": bad exponent in '" + name + "'");
        }
        fill([a](double k) { return std::pow(k, -a); });
    } else if (name.size() > 1 && name[0] == 'e' && name.find_first_not_of("0123456789", 1) == std::string::npos) {
        const auto k = std::stoull(name.substr(1));
        if (k < 1 || k > n) throw ConfigError(what + ": '" + name + "' is outside 1.." + std::to_string(n));
        v(static_cast<Eigen::Index>(k - 1)) = 1.0;
    } else {
        throw ConfigError(what + ": unknown generator '" + name + "'");
    }
    return v;
}

Built<Operator> make_operator(const json& spec, std::uint64_t seed)
{
    const std::string kind = kind_of(spec, "operator");
    if (kind == "diagonal") {
        allow_only(spec, {"kind", "n", "sigma"}, "operator");
        json s = {{"kind", kind}, {"n", spec.value("n", json(100))}, {"sigma", spec.value("sigma", json("inv_sqrt"))}};
        std::size_t n = 0;
        if (s["sigma"].is_array() && !spec.contains("n")) s["n"] = s["sigma"].size();
        n = positive_size(s["n"], "operator.n");
        return {Operator::diagonal(make_vector(s["sigma"], n, seed, "operator.sigma")), s};
    }
    if (kind == "shift") {
        allow_only(spec, {"kind", "n", "offset"}, "operator");
        json s = {{"kind", kind}, {"n", spec.value("n", json(100))}, {"offset", spec.value("offset", json(1))}};
        const std::size_t n = positive_size(s["n"], "operator.n");
        const std::size_t k = positive_size(s["offset"], "operator.offset");
        return {Operator::shift(n, k), s};
    }
    if (kind == "volterra") {
        allow_only(spec, {"kind", "n", "rule"}, "operator");
        json s = {{"kind", kind}, {"n", spec.value("n", json(1000))}, {"rule", spec.value("rule", json("rectangle"))}};
        const std::size_t n = positive_size(s["n"], "operator.n");
        const json& rule = s["rule"];
        if (rule != "rectangle" && rule != "trapezoid")
            throw ConfigError("operator.rule must be \"rectangle\" or \"trapezoid\"");
        return {Operator::volterra(n, rule == "rectangle" ? QuadratureRule::rectangle : QuadratureRule::trapezoid), s};
    }
    if (kind == "dense") {
        allow_only(spec, {"kind", "matrix", "spectrum"}, "operator");
        if (!spec.contains("matrix") || !spec["matrix"].is_array() || spec["matrix"].empty())
            throw ConfigError("operator.matrix must be a nonempty array of rows");
        const json& rows = spec["matrix"];
        const auto n = static_cast<Eigen::Index>(rows.size());
        Mat a(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const json& row = rows[static_cast<std::size_t>(i)];
            if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n)
                throw ConfigError("operator.matrix must be square");
            for (Eigen::Index j = 0; j < n; ++j)
                a(i, j) = complex_value(row[static_cast<std::size_t>(j)], "operator.matrix entry");
        }
        json s = {{"kind", kind}, {"matrix", rows}, {"spectrum", spec.value("spectrum", json(nullptr))}};
        std::optional<std::vector<Complex>> spectrum;
        if (!s["spectrum"].is_null()) {
            spectrum = complex_list(s["spectrum"], "operator.spectrum");
            if (static_cast<Eigen::Index>(spectrum->size()) != n)
                throw ConfigError("operator.spectrum must list " + std::to_string(n) + " eigenvalues");
        }
        return {Operator::dense(std::move(a), std::move(spectrum)), s};
    }
    throw ConfigError("operator.kind '" + kind + "' is not one of diagonal, shift, volterra, dense");
}

Built<SpaceSpec> make_space(const json& spec, std::size_t n)
{
    allow_only(spec, {"p", "weight"}, "space");
    json s = {{"p", spec.value("p", json("inf"))}, {"weight", spec.value("weight", json("unit"))}};
    Exponent p{};
    const json& pj = s["p"];
    if (pj == 1 || pj == "1") {
        p = Exponent::one;
    } else if (pj == 2 || pj == "2") {
        p = Exponent::two;
    } else if (pj == "inf") {
        p = Exponent::inf;
    } else {
        throw ConfigError("space.p must be 1, 2 or \"inf\"");
    }
    const json& w = s["weight"];
    if (w == "unit") return {SpaceSpec::unweighted(p, n), s};
    if (p == Exponent::inf) throw ConfigError("space: the sup norm takes no weight");
    if (w == "exp_decay") return {SpaceSpec::exp_decay(p, n), s};
    if (w.is_array()) {
        if (w.size() != n) throw ConfigError("space.weight must have " + std::to_string(n) + " entries");
        std::vector<double> phi;
        for (const auto& x : w) phi.push_back(number_value(x, "space.weight entry"));
        return {SpaceSpec::weighted(p, std::move(phi)), s};
    }
    throw ConfigError("space.weight must be \"unit\", \"exp_decay\" or an array");
}

Built<Contour> make_contour(const json& spec)
{
    const std::string kind = kind_of(spec, "contour");
    if (kind == "circle") {
        allow_only(spec, {"kind", "center", "radius", "nodes"}, "contour");
        json s = {{"kind", kind},
                  {"center", spec.value("center", json(0.0))},
                  {"radius", spec.value("radius", json(1.0))},
                  {"nodes", spec.value("nodes", json(128))}};
        const Complex c = complex_value(s["center"], "contour.center");
        s["center"] = complex_json(c);
        const double r = number_value(s["radius"], "contour.radius");
        if (r <= 0.0) throw ConfigError("contour.radius must be positive");
        return {Contour::circle(c, r, positive_size(s["nodes"], "contour.nodes")), s};
    }
    if (kind == "polygon") {
        allow_only(spec, {"kind", "vertices", "per_edge"}, "contour");
        json s = {{"kind", kind},
                  {"vertices", spec.value("vertices", json::array())},
                  {"per_edge", spec.value("per_edge", json(32))}};
        const auto v = complex_list(s["vertices"], "contour.vertices");
        if (v.size() < 3) throw ConfigError("contour.vertices needs at least three points");
        json vs = json::array();
        for (Complex z : v) vs.push_back(complex_json(z));
        s["vertices"] = vs;
        return {Contour::polygon(v, positive_size(s["per_edge"], "contour.per_edge")), s};
    }
    throw ConfigError("contour.kind '" + kind + "' is not one of circle, polygon");
}

} // namespace kbl::cli
