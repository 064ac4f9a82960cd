#pragma once

// Resolvents R(zeta, A) = (A - zeta I)^-1.  This sign convention is used
// everywhere in the library; with it
//
//   R(zeta)  = -sum_n zeta^(-n-1) A^n                 (|zeta| > spr A)
//   R(zeta)  = sum_n (zeta - zeta0)^n R(zeta0)^(n+1)   (first resolvent series)
//   A^-1     = R(0)
//
// Continuation walks a chain of balls B(zeta_i, eta/4), centres at most
// eta/2 apart, from a Laurent seed outside the spectral radius to the
// target point.  Every value carries an error bound in the inf-induced norm
// which includes a floating-point allowance; every value built from series
// is a polynomial in A, and the coefficients can be recovered exactly.

#include "kbl/operators.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace kbl {

enum class ResolventMethod { direct, series, continuation };

std::string to_string(ResolventMethod m);

struct ResolventPoint {
    Complex zeta;
    Mat value;
    ResolventMethod method = ResolventMethod::direct;
    /// Bound on |value - R(zeta, A)|_inf.
    std::optional<double> error_bound;
    /// |(A - zeta I) value - I|_inf for direct solves.
    double residual = 0.0;
    /// Highest power kept by a series (0 for direct).
    std::size_t order = 0;
};

/// Closed form for diagonal operators, O(N^2) triangular Toeplitz inversion
/// for shift and rectangle-rule Volterra, LU with partial pivoting otherwise.
/// Fails with DomainError (naming dist(zeta, spectrum) when known) if
/// A - zeta I is singular or the residual is unacceptable.
ResolventPoint resolvent_direct(const Operator& a, Complex zeta);

/// Laurent series up to A^order.  Requires |zeta| > spr A.
ResolventPoint resolvent_laurent(const Operator& a, Complex zeta, std::size_t order);

/// One first-resolvent-series hop from r0.zeta to zeta, up to R0^(order+1).
/// With a spectrum oracle, |zeta - zeta0| <= 3/4 dist(zeta0, spectrum) is
/// required; in every case the certified ratio |zeta - zeta0| (|R0| + eps0)
/// must stay below 1.  r0 must carry an error bound.
ResolventPoint resolvent_neumann_step(const Operator& a, const ResolventPoint& r0, Complex zeta, std::size_t order);

struct PathPlan {
    std::vector<Complex> vertices;  ///< polyline zeta0, waypoints..., zeta1
    double eta = 0.0;               ///< min distance of the polyline to the spectrum
    std::vector<Complex> centers;   ///< ball centres, consecutive ones <= eta/2 apart
    double radius = 0.0;            ///< eta / 4
    /// orders[0] is the Laurent order at centers[0]; orders[i] the series order
    /// of the hop into centers[i].
    std::vector<std::size_t> orders;
    /// Planned truncation bound of each step (same indexing as orders).
    std::vector<double> step_bounds;
    double eps_total = 0.0;
    double eps_step = 0.0;

    Complex start() const { return vertices.front(); }
    Complex target() const { return vertices.back(); }
    std::size_t hops() const { return centers.size() - 1; }
};

/// Requires a spectrum oracle and |zeta0| > spr A.  The polyline's homotopy
/// class is the caller's choice; only a positive margin (> 1e-8) is checked.
PathPlan plan_path(const Operator& a, Complex zeta0, Complex zeta1, const std::vector<Complex>& waypoints = {},
                   double eps_total = 1e-8);

enum class StepKind { laurent, neumann, shift_multiply };

std::string to_string(StepKind k);

struct ProvenanceStep {
    StepKind kind = StepKind::laurent;
    Complex zeta;     ///< Laurent point, or the hop target
    Complex from;     ///< hop origin (Neumann)
    Complex lambda;   ///< shift (ShiftMultiply)
    std::size_t order = 0;  ///< series order, or the power k of (A - lambda)^k
    double step_bound = 0.0;   ///< truncation plus roundoff added by this step
    double bound_after = 0.0;  ///< accumulated bound after this step
};

struct ApproxOperator {
    Mat value;
    Complex zeta;
    std::vector<ProvenanceStep> provenance;
    /// Formal degree of the polynomial in A; empty once it overflows 64 bits.
    std::optional<std::uint64_t> degree_bound;
    double error_bound = 0.0;
    /// Number of times the plan's orders had to be raised.
    int replans = 0;
};

/// Operator form: approximant of R(plan.target(), A), a polynomial in A.
ApproxOperator continue_resolvent(const Operator& a, const PathPlan& plan);

struct VectorContinuation {
    Vec value;
    double error_bound = 0.0;  ///< operator bound times |g|_inf
    ApproxOperator op;
};

/// Vector form: R(plan.target(), A) g.  The result lies in the Krylov space
/// of (A, g) because the operator is a polynomial in A.
VectorContinuation continue_resolvent(const Operator& a, const PathPlan& plan, const Vec& g);

/// Polynomial approximant of A^-1 = R(0, A) with certificate <= eps.
/// Without waypoints the straight segment from zeta0 = 2 spr A to 0 is tried,
/// then the two-segment paths through +-i zeta0; the valid one with the
/// largest margin is used.
ApproxOperator kclass_inverse(const Operator& a, double eps = 1e-8,
                              const std::optional<std::vector<Complex>>& waypoints = std::nullopt);

/// Coefficients c_0..c_d with value = sum_k c_k A^k (exact expansion of the
/// provenance).  Throws DegreeCapExceeded when the formal degree exceeds cap.
std::vector<Complex> extract_polynomial(const ApproxOperator& ap, std::uint64_t degree_cap = 64);

/// sum_k c_k A^k by Horner's rule.
Mat evaluate_polynomial(const Operator& a, const std::vector<Complex>& coeffs);

/// (A - lambda I)^k times the approximant; still a polynomial in A.
ApproxOperator shift_multiply(const ApproxOperator& ap, const Operator& a, Complex lambda, std::size_t k);

} // namespace kbl
