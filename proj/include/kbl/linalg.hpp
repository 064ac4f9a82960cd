#pragma once

// Small dense helpers shared by the krylov, resolvent and spectral modules.

#include "kbl/types.hpp"

#include <string_view>
#include <vector>

namespace kbl {

/// Max absolute row sum.
double inf_norm(const Mat& m);

/// Max absolute entry of a vector.
double inf_norm(const Vec& v);

/// Number of singular values above rel_tol * sigma_max.
std::size_t numerical_rank(const Mat& m, double rel_tol = rank_tolerance);

/// Orthonormal basis (columns) of the column space of m, via SVD.
Mat column_space(const Mat& m, double rel_tol = rank_tolerance);

/// Orthonormal basis of the Euclidean orthogonal complement of span(q).
/// q need not be orthonormal; its numerical rank decides the split.
Mat orthogonal_complement(const Mat& q, std::size_t dim, double rel_tol = rank_tolerance);

/// Horizontal concatenation [a b]; either side may have zero columns.
Mat hstack(const Mat& a, const Mat& b);

/// Throws DomainError naming `what` if any imaginary part exceeds
/// rel_tol * max(1, |v|_inf); otherwise returns the real part.
RealVec require_real(const Vec& v, std::string_view what, double rel_tol = 1e-12);
RealMat require_real(const Mat& m, std::string_view what, double rel_tol = 1e-12);

/// Smallest distance from z to a list of points (infinity when empty).
double distance_to_points(Complex z, const std::vector<Complex>& points);

/// Distance from z to the closed segment [a, b].
double distance_to_segment(Complex z, Complex a, Complex b);

} // namespace kbl
