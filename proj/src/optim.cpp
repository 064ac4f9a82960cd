#include "kbl/optim.hpp"

#include "kbl/error.hpp"
#include "kbl/linalg.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace kbl {

namespace {

using Tableau = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr double pivot_tol = 1e-11;

struct SingularBasis {};

// Standard form: min c^T z, T z = b, z >= 0, b >= 0.  Columns are
// [structural | slacks | artificials]; row i starts with basis column
// start_col[i], which carries +1 in row i only.
class Simplex {
public:
    Simplex(Tableau t, RealVec cost, std::size_t first_art, std::vector<Eigen::Index> start_col, int max_iter)
        : t_(std::move(t)), first_art_(static_cast<Eigen::Index>(first_art)), basis_(std::move(start_col)),
          max_iter_(max_iter)
    {
        const Eigen::Index m = t_.rows();
        const Eigen::Index cols = t_.cols();  // last column is the rhs
        phase1_ = RealVec::Zero(cols);
        phase2_ = RealVec::Zero(cols);
        phase2_.head(cost.size()) = cost;
        for (Eigen::Index j = first_art_; j < cols - 1; ++j) phase1_(j) = 1.0;
        for (Eigen::Index i = 0; i < m; ++i) {
            const auto b = basis_[static_cast<std::size_t>(i)];
            if (phase1_(b) != 0.0) phase1_ -= phase1_(b) * t_.row(i).transpose();
            if (phase2_(b) != 0.0) phase2_ -= phase2_(b) * t_.row(i).transpose();
        }
        cost_scale_ = std::max(1.0, cost.size() ? cost.cwiseAbs().maxCoeff() : 0.0);
        t0_ = t_;
        cost1_ = RealVec::Zero(cols);
        cost2_ = RealVec::Zero(cols);
        cost2_.head(cost.size()) = cost;
        for (Eigen::Index j = first_art_; j < cols - 1; ++j) cost1_(j) = 1.0;
    }

    // Returns false when the artificial objective stays positive.
    bool phase_one()
    {
        run(phase1_, true);
        const double infeas = -phase1_(t_.cols() - 1);
        double rhs_scale = 1.0;
        for (Eigen::Index i = 0; i < t_.rows(); ++i) rhs_scale = std::max(rhs_scale, std::abs(t_(i, t_.cols() - 1)));
        if (infeas > 1e-9 * rhs_scale) return false;
        drive_out_artificials();
        return true;
    }

    // Returns false when unbounded.  The tableau is rebuilt from the
    // original data at each optimum so drift in the updated rows cannot fake
    // optimality.
    bool phase_two()
    {
        for (int round = 0; round < 4; ++round) {
            if (!run(phase2_, false)) return false;
            refactor();
            const double tol = 1e-11 * cost_scale_;
            if ((phase2_.head(first_art_).array() >= -tol).all()) return true;
        }
        return true;
    }

    int iterations() const { return iterations_; }
    const Tableau& tableau() const { return t_; }
    const std::vector<Eigen::Index>& basis() const { return basis_; }
    const RealVec& reduced_costs() const { return phase2_; }

private:
    void refactor()
    {
        const Eigen::Index m = t0_.rows();
        RealMat b(m, m);
        RealVec cb1(m), cb2(m);
        for (Eigen::Index i = 0; i < m; ++i) {
            const auto j = basis_[static_cast<std::size_t>(i)];
            b.col(i) = t0_.col(j);
            cb1(i) = cost1_(j);
            cb2(i) = cost2_(j);
        }
        Eigen::FullPivLU<RealMat> lu(b);
        if (!lu.isInvertible()) throw SingularBasis{};
        t_ = lu.solve(RealMat(t0_));
        for (Eigen::Index i = 0; i < m; ++i)
            if (t_(i, t_.cols() - 1) < 0.0 && t_(i, t_.cols() - 1) > -1e-12) t_(i, t_.cols() - 1) = 0.0;
        phase1_ = cost1_ - t_.transpose() * cb1;
        phase2_ = cost2_ - t_.transpose() * cb2;
    }

    void pivot(Eigen::Index r, Eigen::Index j)
    {
        const double p = t_(r, j);
        if (std::abs(p) < pivot_tol) throw SingularBasis{};
        t_.row(r) /= p;
        t_(r, j) = 1.0;
        for (Eigen::Index i = 0; i < t_.rows(); ++i) {
            if (i == r) continue;
            const double f = t_(i, j);
            if (f != 0.0) {
                t_.row(i) -= f * t_.row(r);
                t_(i, j) = 0.0;
            }
        }
        for (RealVec* z : {&phase1_, &phase2_}) {
            const double f = (*z)(j);
            if (f != 0.0) {
                *z -= f * t_.row(r).transpose();
                (*z)(j) = 0.0;
            }
        }
        basis_[static_cast<std::size_t>(r)] = j;
        if (++iterations_ > max_iter_) throw NumericError("simplex: iteration limit reached");
    }

    bool run(RealVec& z, bool allow_artificial)
    {
        const Eigen::Index rhs = t_.cols() - 1;
        const Eigen::Index limit = allow_artificial ? rhs : first_art_;
        const double tol = 1e-11 * (allow_artificial ? 1.0 : cost_scale_);
        for (;;) {
            // the artificial objective is bounded below by zero
            if (allow_artificial && z(rhs) >= -1e-14) return true;

            // Dantzig pricing; Bland's lowest-index rule after a run of
            // stalled pivots, until the objective moves again.  Once stalling
            // has recurred often, Bland stays on for the rest of the solve.
            Eigen::Index enter = -1;
            if (degenerate_run_ >= bland_after || stalls_ >= max_stalls) {
                for (Eigen::Index j = 0; j < limit; ++j)
                    if (z(j) < -tol) {
                        enter = j;
                        break;
                    }
            } else {
                double most = -tol;
                for (Eigen::Index j = 0; j < limit; ++j)
                    if (z(j) < most) {
                        most = z(j);
                        enter = j;
                    }
            }
            if (enter < 0) return true;

            Eigen::Index leave = -1;
            double best = std::numeric_limits<double>::infinity();
            for (Eigen::Index i = 0; i < t_.rows(); ++i) {
                const double a = t_(i, enter);
                if (a <= pivot_tol) continue;
                const double ratio = std::max(t_(i, rhs), 0.0) / a;
                const bool tie = leave >= 0 && std::abs(ratio - best) <= 1e-12 * std::max(1.0, best);
                if ((!tie && ratio < best) ||
                    (tie && basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(leave)])) {
                    best = std::min(best, ratio);
                    leave = i;
                }
            }
            if (leave < 0) return false;
            if (best * std::abs(z(enter)) <= 1e-12 * std::max(1.0, std::abs(z(rhs)))) {
                if (++degenerate_run_ == bland_after) ++stalls_;
            } else {
                degenerate_run_ = 0;
            }
            pivot(leave, enter);
        }
    }

    void drive_out_artificials()
    {
        for (Eigen::Index i = 0; i < t_.rows(); ++i) {
            if (basis_[static_cast<std::size_t>(i)] < first_art_) continue;
            Eigen::Index col = -1;
            double best = pivot_tol * 10;
            for (Eigen::Index j = 0; j < first_art_; ++j)
                if (std::abs(t_(i, j)) > best) {
                    best = std::abs(t_(i, j));
                    col = j;
                }
            if (col >= 0) pivot(i, col);  // otherwise the row is redundant
        }
    }

    Tableau t_;
    Tableau t0_;
    RealVec cost1_;
    RealVec cost2_;
    Eigen::Index first_art_;
    std::vector<Eigen::Index> basis_;
    RealVec phase1_;
    RealVec phase2_;
    double cost_scale_ = 1.0;
    int iterations_ = 0;
    int max_iter_;
    int degenerate_run_ = 0;
    int stalls_ = 0;
    static constexpr int bland_after = 50;
    static constexpr int max_stalls = 3;
};

LpSolution solve_once(const LinearProgram& lp, const RealVec& b_ineq, const RealVec& b_eq, const LpOptions& opt)
{
    const Eigen::Index n = lp.objective.size();
    const Eigen::Index m1 = lp.ineq.rows();
    const Eigen::Index m2 = lp.eq.rows();
    const Eigen::Index m = m1 + m2;

    // free variables are split as x = x+ - x-
    std::vector<Eigen::Index> neg_col(static_cast<std::size_t>(n), -1);
    Eigen::Index n_std = n;
    for (Eigen::Index j = 0; j < n; ++j)
        if (!lp.bounds.empty() && lp.bounds[static_cast<std::size_t>(j)] == VarBound::free)
            neg_col[static_cast<std::size_t>(j)] = n_std++;

    // row equilibration and sign normalisation (rhs >= 0)
    RealVec scale(m), sign(m), rhs(m);
    RealMat rows(m, n);
    if (m1) rows.topRows(m1) = lp.ineq;
    if (m2) rows.bottomRows(m2) = lp.eq;
    for (Eigen::Index i = 0; i < m; ++i) {
        const double b = i < m1 ? b_ineq(i) : b_eq(i - m1);
        const double amax = std::max(rows.row(i).cwiseAbs().maxCoeff(), std::abs(b));
        scale(i) = amax > 0.0 ? 1.0 / amax : 1.0;
        sign(i) = b < 0.0 ? -1.0 : 1.0;
        rhs(i) = sign(i) * scale(i) * b;
    }

    // slacks for every inequality row; artificials where the slack cannot start basic
    Eigen::Index n_art = 0;
    for (Eigen::Index i = 0; i < m; ++i)
        if (i >= m1 || sign(i) < 0) ++n_art;
    const Eigen::Index first_slack = n_std;
    const Eigen::Index first_art = n_std + m1;
    const Eigen::Index cols = first_art + n_art + 1;

    Tableau t = Tableau::Zero(m, cols);
    std::vector<Eigen::Index> start(static_cast<std::size_t>(m));
    Eigen::Index art = first_art;
    for (Eigen::Index i = 0; i < m; ++i) {
        const double f = sign(i) * scale(i);
        for (Eigen::Index j = 0; j < n; ++j) {
            t(i, j) = f * rows(i, j);
            if (neg_col[static_cast<std::size_t>(j)] >= 0) t(i, neg_col[static_cast<std::size_t>(j)]) = -f * rows(i, j);
        }
        if (i < m1) t(i, first_slack + i) = sign(i);
        if (i >= m1 || sign(i) < 0) {
            t(i, art) = 1.0;
            start[static_cast<std::size_t>(i)] = art++;
        } else {
            start[static_cast<std::size_t>(i)] = first_slack + i;
        }
        t(i, cols - 1) = rhs(i);
    }

    RealVec cost = RealVec::Zero(n_std);
    for (Eigen::Index j = 0; j < n; ++j) {
        cost(j) = lp.objective(j);
        if (neg_col[static_cast<std::size_t>(j)] >= 0) cost(neg_col[static_cast<std::size_t>(j)]) = -lp.objective(j);
    }

    Simplex sx(std::move(t), cost, static_cast<std::size_t>(first_art), start, opt.max_iterations);
    LpSolution sol;
    if (!sx.phase_one()) {
        sol.status = LpStatus::infeasible;
        sol.iterations = sx.iterations();
        return sol;
    }
    if (!sx.phase_two()) {
        sol.status = LpStatus::unbounded;
        sol.iterations = sx.iterations();
        return sol;
    }

    RealVec z = RealVec::Zero(cols - 1);
    for (Eigen::Index i = 0; i < m; ++i) z(sx.basis()[static_cast<std::size_t>(i)]) = sx.tableau()(i, cols - 1);
    sol.status = LpStatus::optimal;
    sol.iterations = sx.iterations();
    sol.x.resize(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const auto nc = neg_col[static_cast<std::size_t>(j)];
        sol.x(j) = z(j) - (nc >= 0 ? z(nc) : 0.0);
    }
    sol.value = lp.objective.dot(sol.x);

    // y_i = -(reduced cost of the row's starting column); undo scaling and sign
    RealVec y(m);
    for (Eigen::Index i = 0; i < m; ++i)
        y(i) = -sx.reduced_costs()(start[static_cast<std::size_t>(i)]) * sign(i) * scale(i);
    sol.ineq_duals = y.head(m1);
    sol.eq_duals = y.tail(m2);
    sol.dual_value = (m1 ? b_ineq.dot(sol.ineq_duals) : 0.0) + (m2 ? b_eq.dot(sol.eq_duals) : 0.0);
    sol.duality_gap = std::abs(sol.value - sol.dual_value);
    return sol;
}

double primal_violation(const LinearProgram& lp, const RealVec& x)
{
    double v = 0.0;
    if (lp.ineq.rows()) v = std::max(v, (lp.ineq * x - lp.ineq_rhs).maxCoeff());
    if (lp.eq.rows()) v = std::max(v, (lp.eq * x - lp.eq_rhs).cwiseAbs().maxCoeff());
    for (Eigen::Index j = 0; j < x.size(); ++j)
        if (lp.bounds.empty() || lp.bounds[static_cast<std::size_t>(j)] == VarBound::nonnegative)
            v = std::max(v, -x(j));
    return std::max(v, 0.0);
}

bool verified(const LinearProgram& lp, LpSolution& sol, const LpOptions& opt)
{
    if (sol.status != LpStatus::optimal) return true;
    sol.primal_residual = primal_violation(lp, sol.x);
    double bscale = 1.0;
    if (lp.ineq_rhs.size()) bscale = std::max(bscale, lp.ineq_rhs.cwiseAbs().maxCoeff());
    if (lp.eq_rhs.size()) bscale = std::max(bscale, lp.eq_rhs.cwiseAbs().maxCoeff());
    return sol.primal_residual <= opt.feasibility_tol * bscale &&
           sol.duality_gap <= opt.gap_tol * std::max(1.0, std::abs(sol.value));
}

} // namespace

std::string to_string(LpStatus s)
{
    switch (s) {
    case LpStatus::optimal: return "optimal";
    case LpStatus::unbounded: return "unbounded";
    case LpStatus::infeasible: return "infeasible";
    }
    return "?";
}

void LinearProgram::validate() const
{
    const auto n = objective.size();
    if (ineq.rows() != ineq_rhs.size() || (ineq.rows() > 0 && ineq.cols() != n))
        throw DimensionError("LinearProgram: inequality block has inconsistent shape");
    if (eq.rows() != eq_rhs.size() || (eq.rows() > 0 && eq.cols() != n))
        throw DimensionError("LinearProgram: equality block has inconsistent shape");
    if (!bounds.empty() && static_cast<Eigen::Index>(bounds.size()) != n)
        throw DimensionError("LinearProgram: bounds length differs from variable count");
    if (!objective.allFinite() || !ineq.allFinite() || !ineq_rhs.allFinite() || !eq.allFinite() ||
        !eq_rhs.allFinite())
        throw DomainError("LinearProgram: non-finite data");
}

LpSolution solve_lp(const LinearProgram& lp, const LpOptions& opt)
{
    lp.validate();
    if (lp.num_constraints() > opt.max_constraints)
        throw DomainError("LP has " + std::to_string(lp.num_constraints()) + " constraints, cap is " +
                          std::to_string(opt.max_constraints));

    RealVec b1 = lp.ineq_rhs;
    RealVec b2 = lp.eq_rhs;
    try {
        LpSolution sol = solve_once(lp, b1, b2, opt);
        if (verified(lp, sol, opt)) return sol;
    } catch (const SingularBasis&) {
    }

    // one deterministic perturbation of the right-hand side, then give up
    for (Eigen::Index i = 0; i < b1.size(); ++i) b1(i) += 1e-11 * (1.0 + std::abs(b1(i))) * (1.0 + 0.37 * (i % 7));
    for (Eigen::Index i = 0; i < b2.size(); ++i) b2(i) += 1e-11 * (1.0 + std::abs(b2(i))) * (1.0 + 0.41 * (i % 5));
    LpOptions relaxed = opt;
    relaxed.feasibility_tol = std::max(opt.feasibility_tol, 1e-9);
    try {
        LpSolution sol = solve_once(lp, b1, b2, relaxed);
        sol.perturbed = true;
        if (verified(lp, sol, relaxed)) return sol;
        throw NumericError("simplex: solution failed verification after perturbation (primal residual " +
                           std::to_string(sol.primal_residual) + ", duality gap " +
                           std::to_string(sol.duality_gap) + ")");
    } catch (const SingularBasis&) {
        throw NumericError("simplex: numerically singular basis after perturbation");
    }
}

std::string to_text(const LinearProgram& lp)
{
    std::ostringstream os;
    os.precision(17);
    os << "minimize";
    for (Eigen::Index j = 0; j < lp.objective.size(); ++j) os << ' ' << lp.objective(j);
    os << '\n';
    for (Eigen::Index i = 0; i < lp.ineq.rows(); ++i) {
        os << "ineq " << i << ':';
        for (Eigen::Index j = 0; j < lp.ineq.cols(); ++j) os << ' ' << lp.ineq(i, j);
        os << " <= " << lp.ineq_rhs(i) << '\n';
    }
    for (Eigen::Index i = 0; i < lp.eq.rows(); ++i) {
        os << "eq " << i << ':';
        for (Eigen::Index j = 0; j < lp.eq.cols(); ++j) os << ' ' << lp.eq(i, j);
        os << " = " << lp.eq_rhs(i) << '\n';
    }
    os << "bounds";
    for (Eigen::Index j = 0; j < lp.objective.size(); ++j) {
        const bool free = !lp.bounds.empty() && lp.bounds[static_cast<std::size_t>(j)] == VarBound::free;
        os << ' ' << (free ? "free" : ">=0");
    }
    os << '\n';
    return os.str();
}

namespace {

void check_basis(const Vec& f, const Mat& basis)
{
    if (basis.cols() == 0) throw DomainError("distance: basis must be nonempty");
    if (basis.rows() != f.size())
        throw DimensionError("distance: basis vectors have length " + std::to_string(basis.rows()) +
                             ", target has length " + std::to_string(f.size()));
}

// Dual of the distance problem in y = u - v (u, v >= 0):
//   minimize -(w f)^T (u - v)  s.t.  (W B)^T (u - v) = 0,  plus the unit-ball rows
// where W = diag(w) rescales coordinates.  Primal coefficients are minus the
// equality multipliers.
DistanceResult dual_distance(const RealVec& f, const RealMat& b, const RealVec& w, bool chebyshev,
                             const LpOptions& opt)
{
    const Eigen::Index n = f.size();
    const Eigen::Index k = b.cols();
    LinearProgram lp;
    lp.objective.resize(2 * n);
    lp.objective.head(n) = -w.cwiseProduct(f);
    lp.objective.tail(n) = w.cwiseProduct(f);
    const RealMat wb = w.asDiagonal() * b;
    lp.eq.resize(k, 2 * n);
    lp.eq.leftCols(n) = wb.transpose();
    lp.eq.rightCols(n) = -wb.transpose();
    lp.eq_rhs = RealVec::Zero(k);
    if (chebyshev) {
        lp.ineq = RealMat::Ones(1, 2 * n);
        lp.ineq_rhs = RealVec::Ones(1);
    } else {
        lp.ineq.resize(n, 2 * n);
        lp.ineq << RealMat::Identity(n, n), RealMat::Identity(n, n);
        lp.ineq_rhs = RealVec::Ones(n);
    }
    const LpSolution sol = solve_lp(lp, opt);
    if (sol.status != LpStatus::optimal)
        throw NumericError("distance LP ended " + to_string(sol.status) + "; the dual is always feasible and bounded");

    DistanceResult out;
    out.coefficients = -sol.eq_duals;
    out.lower_bound = std::max(0.0, -sol.value);
    out.iterations = sol.iterations;
    return out;
}

} // namespace

DistanceResult chebyshev_distance(const Vec& f, const Mat& basis, const LpOptions& opt)
{
    check_basis(f, basis);
    const RealVec fr = require_real(f, "chebyshev_distance target");
    const RealMat br = require_real(basis, "chebyshev_distance basis");
    DistanceResult out = dual_distance(fr, br, RealVec::Ones(fr.size()), true, opt);
    out.distance = fr.size() ? (fr - br * out.coefficients).cwiseAbs().maxCoeff() : 0.0;
    return out;
}

DistanceResult l1_distance(const Vec& f, const Mat& basis, const std::vector<double>& weight, const LpOptions& opt)
{
    check_basis(f, basis);
    const RealVec fr = require_real(f, "l1_distance target");
    const RealMat br = require_real(basis, "l1_distance basis");
    RealVec w = RealVec::Ones(fr.size());
    if (!weight.empty()) {
        if (static_cast<Eigen::Index>(weight.size()) != fr.size())
            throw DimensionError("l1_distance: weight length differs from vector length");
        for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = weight[static_cast<std::size_t>(i)];
    }
    DistanceResult out = dual_distance(fr, br, w, false, opt);
    out.distance = w.dot((fr - br * out.coefficients).cwiseAbs());
    return out;
}

} // namespace kbl
