#pragma once

// Dense two-phase simplex (Bland's rule) and the l^inf / weighted l^1
// distance-to-subspace problems built on it.  Real data only.

#include "kbl/types.hpp"

#include <string>
#include <vector>

namespace kbl {

enum class VarBound { free, nonnegative };

/// minimize objective^T x
///   s.t. ineq x <= ineq_rhs,  eq x = eq_rhs,  x_j >= 0 where bounds[j] says so.
/// An empty `bounds` means every variable is nonnegative.
struct LinearProgram {
    RealVec objective;
    RealMat ineq;
    RealVec ineq_rhs;
    RealMat eq;
    RealVec eq_rhs;
    std::vector<VarBound> bounds;

    std::size_t num_vars() const { return static_cast<std::size_t>(objective.size()); }
    std::size_t num_constraints() const { return static_cast<std::size_t>(ineq.rows() + eq.rows()); }
    void validate() const;
};

enum class LpStatus { optimal, unbounded, infeasible };

std::string to_string(LpStatus s);

struct LpSolution {
    LpStatus status = LpStatus::infeasible;
    double value = 0.0;
    RealVec x;
    int iterations = 0;
    /// Multipliers y with objective - ineq^T y_ineq - eq^T y_eq >= 0 on
    /// nonnegative variables (= 0 on free ones); y_ineq <= 0.
    RealVec ineq_duals;
    RealVec eq_duals;
    double dual_value = 0.0;
    double duality_gap = 0.0;
    double primal_residual = 0.0;
    /// The right-hand side had to be perturbed once to escape a singular basis.
    bool perturbed = false;
};

struct LpOptions {
    std::size_t max_constraints = 5000;
    int max_iterations = 200000;
    double feasibility_tol = 1e-9;
    double gap_tol = 1e-8;
};

LpSolution solve_lp(const LinearProgram& lp, const LpOptions& opt = {});

/// Human-readable dump for debugging.
std::string to_text(const LinearProgram& lp);

struct DistanceResult {
    /// Norm of f - basis * coefficients, re-evaluated from the coefficients.
    double distance = 0.0;
    RealVec coefficients;
    /// Optimal value of the dual LP; a lower bound on the true distance.
    double lower_bound = 0.0;
    int iterations = 0;
};

/// min_c max_n |f_n - (B c)_n| over real c.  Columns of `basis` span the subspace.
DistanceResult chebyshev_distance(const Vec& f, const Mat& basis, const LpOptions& opt = {});

/// min_c sum_n phi_n |f_n - (B c)_n|.  Empty `weight` means phi = 1.
DistanceResult l1_distance(const Vec& f, const Mat& basis, const std::vector<double>& weight = {},
                           const LpOptions& opt = {});

} // namespace kbl
