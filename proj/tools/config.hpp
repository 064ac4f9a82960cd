#pragma once

// Run configuration for the command-line front end.  A config is a JSON
// object; every command starts from its own defaults, takes whole top-level
// values from --config, then applies --set overrides along dotted paths.
// Builders reject unknown fields and return the normalised spec they used so
// the report can echo a config that reproduces the run.

#include "kbl/operators.hpp"
#include "kbl/report.hpp"
#include "kbl/spaces.hpp"
#include "kbl/spectral.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace kbl::cli {

/// "a.b=value"; value is parsed as JSON and kept as a string when that fails.
void apply_override(json& cfg, const std::string& assignment);

json load_config_file(const std::filesystem::path& path);

/// Top-level merge of `user` over `defaults`; keys absent from the defaults
/// are rejected.
json merge_top_level(const json& defaults, const json& user, const std::string& where);

Complex complex_value(const json& j, const std::string& what);
std::vector<Complex> complex_list(const json& j, const std::string& what);
double number_value(const json& j, const std::string& what);
std::size_t positive_size(const json& j, const std::string& what);

template <class T>
struct Built {
    T value;
    json spec;  ///< normalised, defaults filled in
};

/// Kinds: diagonal {n, sigma}, shift {n, offset}, volterra {n, rule},
/// dense {matrix, spectrum}.
Built<Operator> make_operator(const json& spec, std::uint64_t seed);

/// Names: ones, inv, inv_sqrt, evens, odds, x, e<k>, random, pow:<a>; or an
/// explicit array of numbers / [re, im] pairs of length n.
Vec make_vector(const json& spec, std::size_t n, std::uint64_t seed, const std::string& what);

/// {p: 1 | 2 | "inf", weight: "unit" | "exp_decay" | [phi_1, ...]}.
Built<SpaceSpec> make_space(const json& spec, std::size_t n);

/// circle {center, radius, nodes} or polygon {vertices, per_edge}.
Built<Contour> make_contour(const json& spec);

} // namespace kbl::cli
