#pragma once

// Norm contexts for truncated sequence spaces and coordinate masks.
//
// A SpaceSpec describes l^1, l^2 or l^inf on the first N coordinates, with
// an optional strictly positive weight phi(n) for p in {1, 2}:
//
//   |x| = (sum_n phi(n) |x_n|^p)^(1/p)   (p = 1, 2)
//   |x| = max_n |x_n|                    (p = inf, never weighted)
//
// Coordinates are stored 0-based; everything user-facing (masks, reports)
// is 1-based.

#include "kbl/types.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace kbl {

enum class Exponent { one, two, inf };

std::string to_string(Exponent p);
Exponent exponent_from_string(const std::string& s);

enum class WeightKind { unit, exp_decay, explicit_values };

class SpaceSpec {
public:
    static SpaceSpec unweighted(Exponent p, std::size_t dim);
    /// phi(n) = exp(-n), n = 1..dim.
    static SpaceSpec exp_decay(Exponent p, std::size_t dim);
    static SpaceSpec weighted(Exponent p, std::vector<double> weight);

    Exponent p() const noexcept { return p_; }
    std::size_t dim() const noexcept { return dim_; }
    bool is_weighted() const noexcept { return weight_.has_value(); }
    WeightKind weight_kind() const noexcept { return kind_; }
    /// phi at 0-based index i (1 when unweighted).
    double weight(std::size_t i) const { return weight_ ? (*weight_)[i] : 1.0; }
    const std::optional<std::vector<double>>& weights() const noexcept { return weight_; }

    void check_dim(const Vec& v) const;

private:
    SpaceSpec(Exponent p, std::size_t dim, std::optional<std::vector<double>> w, WeightKind kind);

    Exponent p_;
    std::size_t dim_;
    std::optional<std::vector<double>> weight_;
    WeightKind kind_;
};

double norm(const SpaceSpec& space, const Vec& v);

/// Subset S of {1, ..., N}.
class Mask {
public:
    /// `indices` are 1-based; duplicates are ignored.
    static Mask from_indices(std::size_t dim, const std::vector<std::size_t>& indices);
    static Mask all(std::size_t dim);
    static Mask none(std::size_t dim);
    /// n even (1-based).
    static Mask evens(std::size_t dim);

    Mask complement() const;

    std::size_t dim() const noexcept { return member_.size(); }
    std::size_t count() const;
    /// 0-based membership test.
    bool contains(std::size_t i) const { return member_.at(i); }
    /// Sorted 1-based indices.
    std::vector<std::size_t> indices() const;
    /// Columns e_n for n in S.
    Mat basis() const;

    bool operator==(const Mask&) const = default;

private:
    explicit Mask(std::vector<bool> member) : member_(std::move(member)) {}
    std::vector<bool> member_;
};

/// chi_S v: coordinates in S kept, all others zeroed.
Vec mask_project(const Vec& v, const Mask& s);

/// (chi_S v, chi_S' v).  The parts have disjoint supports and sum to v exactly.
std::pair<Vec, Vec> decompose(const Vec& v, const Mask& s);

} // namespace kbl
