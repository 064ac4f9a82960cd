#include "kbl/krylov.hpp"

#include "kbl/error.hpp"
#include "kbl/linalg.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>

namespace kbl {

Mat KrylovBasis::ortho_prefix(std::size_t m) const
{
    if (m == 0 || m > size())
        throw DomainError("Krylov prefix " + std::to_string(m) + " outside 1.." + std::to_string(size()));
    return ortho.leftCols(static_cast<Eigen::Index>(rank_after[m - 1]));
}

KrylovBasis build_krylov(const Operator& a, const Vec& g, std::size_t m, bool rescale, double rank_tol)
{
    if (m == 0) throw DomainError("build_krylov: m must be at least 1");
    if (static_cast<std::size_t>(g.size()) != a.dim())
        throw DimensionError("build_krylov: g has length " + std::to_string(g.size()) + ", operator dimension is " +
                             std::to_string(a.dim()));
    const double gnorm = g.norm();
    if (gnorm == 0.0) throw DomainError("build_krylov: g must be nonzero");

    const auto n = static_cast<Eigen::Index>(a.dim());
    const auto mm = static_cast<Eigen::Index>(m);
    KrylovBasis kb;
    kb.rescaled = rescale;
    kb.rank_tol = rank_tol;
    kb.raw.resize(n, mm);
    kb.ortho.resize(n, std::min(n, mm));

    double log_acc = 0.0;
    Vec cur = g;
    Eigen::Index r = 0;
    for (Eigen::Index k = 0; k < mm; ++k) {
        if (k > 0) cur = a.apply(Vec(kb.raw.col(k - 1)));
        double s = 1.0;
        if (rescale) {
            s = cur.norm();
            if (s > 0.0) cur *= 1.0 / s;
        }
        kb.step_scale.push_back(s);
        log_acc += std::log(s);
        kb.log_scale.push_back(s > 0.0 ? log_acc : -std::numeric_limits<double>::infinity());
        kb.raw.col(k) = cur;

        // modified Gram-Schmidt, two passes
        const double nv = cur.norm();
        bool accepted = false;
        if (nv > 0.0 && r < n) {
            Vec w = cur;
            for (int pass = 0; pass < 2; ++pass)
                for (Eigen::Index j = 0; j < r; ++j) w -= kb.ortho.col(j) * kb.ortho.col(j).dot(w);
            const double nw = w.norm();
            if (nw > rank_tol * nv) {
                kb.ortho.col(r++) = w * (1.0 / nw);
                accepted = true;
            }
        }
        if (!accepted && !kb.grade) kb.grade = static_cast<std::size_t>(k);
        kb.rank_after.push_back(static_cast<std::size_t>(r));
    }
    kb.ortho.conservativeResize(n, r);
    return kb;
}

KrylovDistance distance_to_krylov(const Vec& f, const KrylovBasis& kb, const SpaceSpec& space,
                                  std::optional<std::size_t> m_opt, const LpOptions& lp)
{
    space.check_dim(f);
    if (static_cast<Eigen::Index>(space.dim()) != kb.raw.rows())
        throw DimensionError("distance_to_krylov: space and Krylov basis dimensions differ");
    const std::size_t m = m_opt.value_or(kb.size());
    const Mat q = kb.ortho_prefix(m);

    KrylovDistance out;
    out.m = m;
    out.rank = static_cast<std::size_t>(q.cols());
    switch (space.p()) {
    case Exponent::two: {
        const auto n = f.size();
        RealVec sw(n);
        for (Eigen::Index i = 0; i < n; ++i) sw(i) = std::sqrt(space.weight(static_cast<std::size_t>(i)));
        const Mat wq = sw.asDiagonal() * q;
        const Vec wf = sw.asDiagonal() * f;
        out.ortho_coefficients = wq.colPivHouseholderQr().solve(wf);
        out.approximant = q * out.ortho_coefficients;
        out.distance = norm(space, f - out.approximant);
        out.lower_bound = out.distance;
        break;
    }
    case Exponent::inf: {
        const auto d = chebyshev_distance(f, q, lp);
        out.ortho_coefficients = d.coefficients.cast<Complex>();
        out.approximant = q * out.ortho_coefficients;
        out.distance = d.distance;
        out.lower_bound = d.lower_bound;
        out.lp_iterations = d.iterations;
        break;
    }
    case Exponent::one: {
        std::vector<double> w;
        if (space.weights()) w = *space.weights();
        const auto d = l1_distance(f, q, w, lp);
        out.ortho_coefficients = d.coefficients.cast<Complex>();
        out.approximant = q * out.ortho_coefficients;
        out.distance = d.distance;
        out.lower_bound = d.lower_bound;
        out.lp_iterations = d.iterations;
        break;
    }
    }

    // map back onto the raw vectors, then undo the rescaling
    const Mat c = q.adjoint() * kb.raw.leftCols(static_cast<Eigen::Index>(m));
    Vec b = c.completeOrthogonalDecomposition().solve(out.ortho_coefficients);
    for (Eigen::Index k = 0; k < b.size(); ++k) b(k) *= std::exp(-kb.log_scale[static_cast<std::size_t>(k)]);
    out.raw_coefficients = std::move(b);
    return out;
}

std::string to_string(Verdict v)
{
    switch (v) {
    case Verdict::solvable: return "solvable-in-Krylov";
    case Verdict::not_in_krylov: return "not-in-Krylov";
    case Verdict::inconclusive: return "inconclusive";
    }
    return "?";
}

SolvabilityReport solvability_sweep(const Operator& a, const Vec& f, const SpaceSpec& space, std::size_t big_m,
                                    const SweepThresholds& th, const LpOptions& lp)
{
    if (big_m < 2) throw DomainError("solvability_sweep: M must be at least 2");
    space.check_dim(f);
    SolvabilityReport rep;
    rep.f_norm = norm(space, f);
    if (rep.f_norm == 0.0) throw DomainError("solvability_sweep: f must be nonzero");
    const Vec g = a.apply(f);
    const KrylovBasis kb = build_krylov(a, g, big_m);
    rep.n = a.dim();
    rep.big_m = big_m;
    rep.grade = kb.grade;

    KrylovDistance last;
    for (std::size_t m = 1; m <= big_m; ++m) {
        last = distance_to_krylov(f, kb, space, m, lp);
        rep.distances.push_back(last.distance);
        rep.lower_bounds.push_back(last.lower_bound);
        rep.ranks.push_back(last.rank);
    }
    rep.final_coefficients = last.raw_coefficients;
    rep.final_ortho_coefficients = last.ortho_coefficients;
    rep.candidate_residual = norm(space, a.apply(last.approximant) - g);

    rep.eps_solve = th.eps_solve.value_or(1e-6 * rep.f_norm);
    rep.delta_floor = th.delta_floor.value_or(0.5 * rep.distances.front());
    const auto first = rep.distances.begin() + static_cast<std::ptrdiff_t>(big_m / 2 - 1);
    const auto [lo, hi] = std::minmax_element(first, rep.distances.end());
    rep.tail_spread = *hi > 0.0 ? (*hi - *lo) / *hi : 0.0;

    const double d_m = rep.distances.back();
    if (d_m <= rep.eps_solve)
        rep.verdict = Verdict::solvable;
    else if (d_m >= rep.delta_floor && rep.tail_spread < th.stagnation)
        rep.verdict = Verdict::not_in_krylov;
    else
        rep.verdict = Verdict::inconclusive;
    return rep;
}

namespace {

KrylovBasis full_krylov(const Operator& a, const Vec& g)
{
    KrylovBasis kb = build_krylov(a, g, a.dim() + 1);
    if (!kb.grade) throw NumericError("Krylov rank did not stagnate within N + 1 vectors");
    return kb;
}

Mat grade_space(const KrylovBasis& kb)
{
    return column_space(kb.raw.leftCols(static_cast<Eigen::Index>(*kb.grade)));
}

} // namespace

IntersectionReport krylov_intersection(const Operator& a, const Vec& g, const std::optional<Mat>& complement)
{
    const auto n = a.dim();
    const KrylovBasis kb = full_krylov(a, g);
    IntersectionReport rep;
    rep.grade = *kb.grade;
    rep.k_basis = grade_space(kb);
    rep.dim_k = static_cast<std::size_t>(rep.k_basis.cols());

    if (complement) {
        if (static_cast<std::size_t>(complement->rows()) != n)
            throw DimensionError("krylov_intersection: complement basis has wrong length");
        rep.complement_kind = ComplementKind::user;
        rep.g_basis = column_space(*complement);
        if (static_cast<std::size_t>(rep.g_basis.cols()) + rep.dim_k != n)
            throw DomainError("krylov_intersection: dim K + dim G = " +
                              std::to_string(rep.g_basis.cols() + rep.k_basis.cols()) + ", expected " +
                              std::to_string(n));
        if (numerical_rank(hstack(rep.k_basis, rep.g_basis)) != n)
            throw DomainError("krylov_intersection: K and G intersect, so G is not a complement");
    } else {
        rep.g_basis = orthogonal_complement(rep.k_basis, n);
    }
    rep.dim_g = static_cast<std::size_t>(rep.g_basis.cols());

    const Mat ag = rep.g_basis.cols() ? column_space(a.apply(rep.g_basis)) : Mat(static_cast<Eigen::Index>(n), 0);
    rep.dim_ag = static_cast<std::size_t>(ag.cols());
    const std::size_t dim_sum = numerical_rank(hstack(rep.k_basis, ag));
    rep.dim_intersection = rep.dim_k + rep.dim_ag - dim_sum;
    rep.trivial = rep.dim_intersection == 0;
    return rep;
}

bool check_density_criterion(const Operator& a, const Vec& g)
{
    const RealVec sv = Eigen::BDCSVD<Mat>(a.to_dense()).singularValues();
    if (sv(sv.size() - 1) <= rank_tolerance * sv(0))
        throw DomainError("check_density_criterion: A is numerically singular (smallest singular value " +
                          std::to_string(sv(sv.size() - 1)) + ")");
    const KrylovBasis kb = full_krylov(a, g);
    const Mat k = grade_space(kb);
    const Mat ak = column_space(a.apply(k));
    const auto rk = static_cast<std::size_t>(k.cols());
    return static_cast<std::size_t>(ak.cols()) == rk && numerical_rank(hstack(k, ak)) == rk;
}

double check_reduced(const Operator& a, const Mat& k_basis, const Mat& g_basis)
{
    const auto n = a.dim();
    if ((k_basis.cols() && static_cast<std::size_t>(k_basis.rows()) != n) ||
        (g_basis.cols() && static_cast<std::size_t>(g_basis.rows()) != n))
        throw DimensionError("check_reduced: basis length differs from operator dimension");
    if (numerical_rank(k_basis) != static_cast<std::size_t>(k_basis.cols()) ||
        numerical_rank(g_basis) != static_cast<std::size_t>(g_basis.cols()))
        throw DomainError("check_reduced: degenerate basis (dependent columns)");
    if (static_cast<std::size_t>(k_basis.cols() + g_basis.cols()) != n ||
        numerical_rank(hstack(k_basis, g_basis)) != n)
        throw DomainError("check_reduced: K and G are not complementary");
    if (g_basis.cols() == 0) return 0.0;

    const Mat qg = column_space(g_basis);
    const Mat ag = a.apply(g_basis);
    double worst = 0.0;
    for (Eigen::Index j = 0; j < ag.cols(); ++j) {
        const Vec w = ag.col(j);
        const double nw = w.norm();
        if (nw == 0.0) continue;
        worst = std::max(worst, (w - qg * (qg.adjoint() * w)).norm() / nw);
    }
    return worst;
}

namespace {

Mat grade_or_all(const KrylovBasis& kb)
{
    return kb.ortho_prefix(kb.grade.value_or(kb.size()));
}

} // namespace

double invariance_residual(const Operator& a, const KrylovBasis& kb)
{
    const Mat q = grade_or_all(kb);
    const Mat aq = a.apply(q);
    const Mat res = aq - q * (q.adjoint() * aq);
    double worst = 0.0;
    for (Eigen::Index j = 0; j < res.cols(); ++j) worst = std::max(worst, res.col(j).norm());
    return worst;
}

double krylov_membership_residual(const Vec& f, const KrylovBasis& kb)
{
    const double nf = f.norm();
    if (nf == 0.0) return 0.0;
    const Mat q = grade_or_all(kb);
    return (f - q * (q.adjoint() * f)).norm() / nf;
}

} // namespace kbl
