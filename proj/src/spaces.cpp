#include "kbl/spaces.hpp"

#include "kbl/error.hpp"

#include <algorithm>
#include <cmath>

namespace kbl {

std::string to_string(Exponent p)
{
    switch (p) {
    case Exponent::one: return "1";
    case Exponent::two: return "2";
    case Exponent::inf: return "inf";
    }
    return "?";
}

Exponent exponent_from_string(const std::string& s)
{
    if (s == "1") return Exponent::one;
    if (s == "2") return Exponent::two;
    if (s == "inf") return Exponent::inf;
    throw ConfigError("unknown exponent '" + s + "' (expected 1, 2 or inf)");
}

SpaceSpec::SpaceSpec(Exponent p, std::size_t dim, std::optional<std::vector<double>> w, WeightKind kind)
    : p_(p), dim_(dim), weight_(std::move(w)), kind_(kind)
{
    if (dim_ == 0) throw DomainError("SpaceSpec: dimension must be positive");
    if (weight_) {
        if (p_ == Exponent::inf) throw DomainError("SpaceSpec: weights are only defined for p in {1, 2}");
        if (weight_->size() != dim_) throw DimensionError("SpaceSpec: weight length differs from dimension");
        for (double w : *weight_)
            if (!(w > 0.0) || !std::isfinite(w))
                throw DomainError("SpaceSpec: weights must be strictly positive and finite");
    }
}

SpaceSpec SpaceSpec::unweighted(Exponent p, std::size_t dim)
{
    return SpaceSpec(p, dim, std::nullopt, WeightKind::unit);
}

SpaceSpec SpaceSpec::exp_decay(Exponent p, std::size_t dim)
{
    std::vector<double> w(dim);
    for (std::size_t i = 0; i < dim; ++i) w[i] = std::exp(-static_cast<double>(i + 1));
    return SpaceSpec(p, dim, std::move(w), WeightKind::exp_decay);
}

SpaceSpec SpaceSpec::weighted(Exponent p, std::vector<double> weight)
{
    const auto n = weight.size();
    return SpaceSpec(p, n, std::move(weight), WeightKind::explicit_values);
}

void SpaceSpec::check_dim(const Vec& v) const
{
    if (static_cast<std::size_t>(v.size()) != dim_)
        throw DimensionError("vector length " + std::to_string(v.size()) + " differs from space dimension " +
                             std::to_string(dim_));
}

double norm(const SpaceSpec& space, const Vec& v)
{
    space.check_dim(v);
    double acc = 0.0;
    switch (space.p()) {
    case Exponent::inf:
        for (Eigen::Index i = 0; i < v.size(); ++i) acc = std::max(acc, std::abs(v(i)));
        return acc;
    case Exponent::one:
        for (Eigen::Index i = 0; i < v.size(); ++i) acc += space.weight(i) * std::abs(v(i));
        return acc;
    case Exponent::two: {
        // scaled accumulation so that tiny weights do not underflow the squares
        double scale = 0.0;
        for (Eigen::Index i = 0; i < v.size(); ++i)
            scale = std::max(scale, std::sqrt(space.weight(i)) * std::abs(v(i)));
        if (scale == 0.0) return 0.0;
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            const double t = std::sqrt(space.weight(i)) * std::abs(v(i)) / scale;
            acc += t * t;
        }
        return scale * std::sqrt(acc);
    }
    }
    return acc;
}

Mask Mask::from_indices(std::size_t dim, const std::vector<std::size_t>& indices)
{
    std::vector<bool> m(dim, false);
    for (auto i : indices) {
        if (i < 1 || i > dim)
            throw DomainError("Mask: index " + std::to_string(i) + " outside {1, ..., " + std::to_string(dim) + "}");
        m[i - 1] = true;
    }
    return Mask(std::move(m));
}

Mask Mask::all(std::size_t dim) { return Mask(std::vector<bool>(dim, true)); }

Mask Mask::none(std::size_t dim) { return Mask(std::vector<bool>(dim, false)); }

Mask Mask::evens(std::size_t dim)
{
    std::vector<bool> m(dim);
    for (std::size_t i = 0; i < dim; ++i) m[i] = (i + 1) % 2 == 0;
    return Mask(std::move(m));
}

Mask Mask::complement() const
{
    std::vector<bool> m(member_.size());
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = !member_[i];
    return Mask(std::move(m));
}

std::size_t Mask::count() const
{
    return static_cast<std::size_t>(std::count(member_.begin(), member_.end(), true));
}

std::vector<std::size_t> Mask::indices() const
{
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < member_.size(); ++i)
        if (member_[i]) out.push_back(i + 1);
    return out;
}

Mat Mask::basis() const
{
    const auto idx = indices();
    Mat b = Mat::Zero(static_cast<Eigen::Index>(dim()), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t c = 0; c < idx.size(); ++c) b(static_cast<Eigen::Index>(idx[c] - 1), static_cast<Eigen::Index>(c)) = 1.0;
    return b;
}

Vec mask_project(const Vec& v, const Mask& s)
{
    if (static_cast<std::size_t>(v.size()) != s.dim()) throw DimensionError("mask_project: mask dimension mismatch");
    Vec out = Vec::Zero(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (s.contains(static_cast<std::size_t>(i))) out(i) = v(i);
    return out;
}

std::pair<Vec, Vec> decompose(const Vec& v, const Mask& s)
{
    return {mask_project(v, s), mask_project(v, s.complement())};
}

} // namespace kbl
