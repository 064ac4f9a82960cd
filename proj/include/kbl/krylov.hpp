#pragma once

// Krylov spaces K_m(A, g) = span{g, Ag, ..., A^(m-1) g}, distances to them in
// the space's own norm, and the finite-dimensional forms of the
// intersection, density and reducibility criteria.

#include "kbl/operators.hpp"
#include "kbl/optim.hpp"
#include "kbl/spaces.hpp"

#include <optional>
#include <string>
#include <vector>

namespace kbl {

struct KrylovBasis {
    /// Column k is A^k g / exp(log_scale[k]).  With rescaling every column has
    /// unit 2-norm; without it log_scale is 0 throughout.
    Mat raw;
    /// raw[k] = A raw[k-1] / step_scale[k]; step_scale[0] is the scale of g.
    std::vector<double> step_scale;
    std::vector<double> log_scale;
    bool rescaled = true;
    /// Euclidean-orthonormal companion from modified Gram-Schmidt.
    Mat ortho;
    /// rank_after[k] = rank of raw columns 0..k (number of ortho columns in use).
    std::vector<std::size_t> rank_after;
    /// Number of vectors before the first rank stagnation, when observed.
    std::optional<std::size_t> grade;
    double rank_tol = rank_tolerance;

    std::size_t size() const { return static_cast<std::size_t>(raw.cols()); }
    /// Orthonormal basis of K_m.
    Mat ortho_prefix(std::size_t m) const;
};

KrylovBasis build_krylov(const Operator& a, const Vec& g, std::size_t m, bool rescale = true,
                         double rank_tol = rank_tolerance);

struct KrylovDistance {
    double distance = 0.0;
    /// Dual (LP) value for p in {1, inf}; equals distance for p = 2.
    double lower_bound = 0.0;
    std::size_t m = 0;
    std::size_t rank = 0;
    /// Best approximant f_hat = ortho_prefix(m) * ortho_coefficients.
    Vec ortho_coefficients;
    /// Same approximant as sum_k c_k A^k g (minimum-norm choice when the
    /// raw vectors are dependent).
    Vec raw_coefficients;
    Vec approximant;
    int lp_iterations = 0;
};

/// Distance from f to K_m in `space` (m = kb.size() when omitted).
/// p = 2 is weighted least squares; p in {1, inf} needs real data.
KrylovDistance distance_to_krylov(const Vec& f, const KrylovBasis& kb, const SpaceSpec& space,
                                  std::optional<std::size_t> m = std::nullopt, const LpOptions& lp = {});

enum class Verdict { solvable, not_in_krylov, inconclusive };

std::string to_string(Verdict v);

struct SweepThresholds {
    /// Default 1e-6 * |f|.
    std::optional<double> eps_solve;
    /// Default 0.5 * d_1.
    std::optional<double> delta_floor;
    /// Relative spread allowed over d_(M/2) .. d_M for stagnation.
    double stagnation = 0.01;
};

struct SolvabilityReport {
    std::vector<double> distances;  ///< d_m for m = 1..M
    std::vector<double> lower_bounds;
    std::vector<std::size_t> ranks;
    Verdict verdict = Verdict::inconclusive;
    double eps_solve = 0.0;
    double delta_floor = 0.0;
    double tail_spread = 0.0;
    /// |A f_hat - g| for the best approximant in K_M.
    double candidate_residual = 0.0;
    double f_norm = 0.0;
    std::size_t n = 0;
    std::size_t big_m = 0;
    std::optional<std::size_t> grade;
    /// Coefficients of the best approximant in K_M against A^k g, and against
    /// the orthonormal companion (the distance is evaluated from the latter).
    Vec final_coefficients;
    Vec final_ortho_coefficients;
};

/// g := A f, then d_m = dist(f, K_m(A, g)) for m = 1..M.
SolvabilityReport solvability_sweep(const Operator& a, const Vec& f, const SpaceSpec& space, std::size_t big_m,
                                    const SweepThresholds& th = {}, const LpOptions& lp = {});

enum class ComplementKind { euclidean, user };

struct IntersectionReport {
    std::size_t dim_k = 0;
    std::size_t dim_g = 0;
    std::size_t dim_ag = 0;
    std::size_t dim_intersection = 0;
    bool trivial = true;
    ComplementKind complement_kind = ComplementKind::euclidean;
    std::size_t grade = 0;
    /// Orthonormal bases used.
    Mat k_basis;
    Mat g_basis;
};

/// K is span of the grade-Krylov vectors; G is the Euclidean complement of K
/// or the user's basis, which must satisfy K + G = X with K and G independent.
IntersectionReport krylov_intersection(const Operator& a, const Vec& g,
                                       const std::optional<Mat>& complement = std::nullopt);

/// For invertible A: A K is dense in K, rendered as A K subset K with
/// rank(A K) = rank(K).  Throws DomainError when A is numerically singular.
bool check_density_criterion(const Operator& a, const Vec& g);

/// max over columns v of G of dist_2(A v, span G) / |A v|_2; 0 for empty G.
double check_reduced(const Operator& a, const Mat& k_basis, const Mat& g_basis);

/// max over ortho columns q of K_grade of dist_2(A q, K_grade); the A-invariance defect.
double invariance_residual(const Operator& a, const KrylovBasis& kb);

/// Euclidean distance of f to span(K_grade) relative to |f|_2.
double krylov_membership_residual(const Vec& f, const KrylovBasis& kb);

} // namespace kbl
