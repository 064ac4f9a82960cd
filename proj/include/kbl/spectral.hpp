#pragma once

// Contour-integral spectral projections P = -(1/2 pi i) oint R(zeta, A) dzeta,
// reduced resolvents R''(zeta) = R(zeta)(I - P), the solver at an isolated
// eigenvalue and the nilpotent part (A - lambda) P.  The integrals are Riemann
// sums sum_i R(zeta_i) dzeta_i with R from resolvent_direct.

#include "kbl/krylov.hpp"
#include "kbl/operators.hpp"

#include <optional>
#include <string>
#include <vector>

namespace kbl {

enum class ContourKind { circle, polygon };

std::string to_string(ContourKind k);

class Contour {
public:
    /// Uniform nodes c + r e^(2 pi i j / k); trapezoid weights.
    static Contour circle(Complex center, double radius, std::size_t nodes);
    /// Closed polygon through the vertices (counter-clockwise for positive
    /// orientation); each edge split into per_edge pieces, midpoint rule.
    static Contour polygon(std::vector<Complex> vertices, std::size_t per_edge);

    ContourKind kind() const noexcept { return kind_; }
    const std::vector<Complex>& nodes() const noexcept { return nodes_; }
    const std::vector<Complex>& increments() const noexcept { return increments_; }
    std::size_t size() const noexcept { return nodes_.size(); }
    Complex center() const noexcept { return center_; }
    double radius() const noexcept { return radius_; }
    const std::vector<Complex>& vertices() const noexcept { return vertices_; }

    /// Winding number of the node polygon (vertex polygon for polygons) about z.
    int winding_number(Complex z) const;
    /// Smallest distance from z to the nodes.
    double node_distance(Complex z) const;

private:
    ContourKind kind_ = ContourKind::circle;
    Complex center_;
    double radius_ = 0.0;
    std::vector<Complex> vertices_;
    std::vector<Complex> nodes_;
    std::vector<Complex> increments_;
};

struct SpectralOptions {
    /// Node resolvents computed concurrently; the sum is always taken in node order.
    std::size_t jobs = 1;
    /// Skip the O(N^3) checks (P^2, PA, singular values).
    bool diagnostics = true;
};

struct ProjectionResult {
    Mat p;
    double idempotency_residual = 0.0;  ///< |P^2 - P|_inf
    double commutator_residual = 0.0;   ///< |PA - AP|_inf
    std::size_t rank = 0;
    double rank_tol = 0.0;  ///< singular values above this count
    /// Oracle eigenvalues (with multiplicity) inside the contour.
    std::optional<std::size_t> enclosed;
    Contour contour;
    std::size_t quadrature_count = 0;
    double max_node_residual = 0.0;  ///< worst direct-solve residual over the nodes
};

ProjectionResult projection(const Operator& a, const Contour& gamma, const SpectralOptions& opt = {});

struct ReducedResolvent {
    Mat value;  ///< contour form, also valid at an enclosed eigenvalue
    /// R(zeta)(I - P) and its distance to the contour form, when zeta is a
    /// regular point.
    std::optional<Mat> product_form;
    std::optional<double> cross_residual;
    ProjectionResult proj;
};

/// zeta must have winding number 1 with respect to gamma.
ReducedResolvent reduced_resolvent(const Operator& a, const Contour& gamma, Complex zeta, const SpectralOptions& opt = {});

struct IsolatedSolveOptions {
    double eps_proj = 1e-8;  ///< |Pg|_inf <= eps_proj |g|_inf
    bool krylov_check = true;
    double krylov_tol = 1e-6;
    std::size_t krylov_max = 64;
    SpectralOptions spectral;
};

struct IsolatedSolve {
    Vec f;
    double residual = 0.0;  ///< |(A - lambda) f - g|_inf
    double pg_ratio = 0.0;  ///< |Pg|_inf / |g|_inf
    std::optional<double> krylov_distance;  ///< l2 distance of f to the Krylov space of (A, g)
    std::size_t krylov_dim = 0;
    bool krylov_member = false;
};

/// f = R''(lambda) g for g with Pg = 0 solves (A - lambda) f = g.
IsolatedSolve isolated_point_solve(const Operator& a, Complex lambda, const Contour& gamma, const Vec& g,
                                   const IsolatedSolveOptions& opt = {});

struct NilpotentPart {
    Mat d;                     ///< (A - lambda) P
    std::vector<double> power_norms;  ///< |D^k|_inf, k = 1..k_max
    ProjectionResult proj;
};

NilpotentPart nilpotent_part(const Operator& a, Complex lambda, const Contour& gamma, std::size_t k_max = 4,
                             const SpectralOptions& opt = {});

} // namespace kbl
