#include "kbl/resolvent.hpp"

#include "kbl/error.hpp"
#include "kbl/linalg.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace kbl {

namespace {

constexpr double unit_roundoff = std::numeric_limits<double>::epsilon() / 2;

double gamma(double k)
{
    return k * unit_roundoff / (1.0 - k * unit_roundoff);
}

std::string fmt(double x)
{
    std::ostringstream os;
    os.precision(6);
    os << x;
    return os.str();
}

std::string fmt(Complex z)
{
    std::ostringstream os;
    os.precision(6);
    os << z.real() << (z.imag() < 0 ? "-" : "+") << std::abs(z.imag()) << "i";
    return os.str();
}

// Two storage schemes for polynomials in A: full matrices, or the diagonal
// alone when A is diagonal.
struct DenseAlg {
    using T = Mat;
    const Operator* a;
    Eigen::Index n;

    T identity() const { return Mat::Identity(n, n); }
    T zero() const { return Mat::Zero(n, n); }
    T apply_a(const T& x) const { return a->apply(x); }
    T mul(const T& x, const T& y) const { return x * y; }
    double norm(const T& x) const { return inf_norm(x); }
    Mat to_mat(const T& x) const { return x; }
    // inner-product length entering each matrix-product rounding bound
    double dimf() const { return static_cast<double>(n) + 2.0; }
};

struct DiagAlg {
    using T = Vec;
    Vec sigma;

    T identity() const { return Vec::Ones(sigma.size()); }
    T zero() const { return Vec::Zero(sigma.size()); }
    T apply_a(const T& x) const { return sigma.cwiseProduct(x); }
    T mul(const T& x, const T& y) const { return x.cwiseProduct(y); }
    double norm(const T& x) const { return x.size() ? x.cwiseAbs().maxCoeff() : 0.0; }
    Mat to_mat(const T& x) const { return x.asDiagonal(); }
    double dimf() const { return 3.0; }
};

template <class Alg>
struct SeriesOut {
    typename Alg::T value;
    double bound = 0.0;
    double local = 0.0;  ///< truncation plus rounding of this step alone
};

// -sum_{k<=order} zeta^(-k-1) A^k with a certified tail.  The tail uses
// |A^k| <= |A^p|^q |A^r| (k = qp + r) for the best p with |A^p| < |zeta|^p.
// |S - R(zeta)| <= |S| r / (1 - r) with r = |(A - zeta) S - I| plus its rounding
double residual_bound(const DenseAlg& alg, const Mat& s, Complex zeta, double a_norm)
{
    Mat res = alg.apply_a(s) - zeta * s;
    res.diagonal().array() -= 1.0;
    const double snorm = alg.norm(s);
    const double r = alg.norm(res) + gamma(alg.dimf() + 2.0) * ((a_norm + std::abs(zeta)) * snorm + 1.0);
    if (!(r < 1.0)) return std::numeric_limits<double>::infinity();
    return snorm * r / (1.0 - r);
}

// entrywise: s_i - 1/(l_i - zeta) = s_i r_i / (1 + r_i)
double residual_bound(const DiagAlg& alg, const Vec& s, Complex zeta, double)
{
    double worst = 0.0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        const Complex shifted = alg.sigma(i) - zeta;
        const double r = std::abs(shifted * s(i) - 1.0) + gamma(4.0) * (std::abs(shifted) * std::abs(s(i)) + 1.0);
        if (!(r < 1.0)) return std::numeric_limits<double>::infinity();
        worst = std::max(worst, std::abs(s(i)) * r / (1.0 - r));
    }
    return worst;
}

template <class Alg>
SeriesOut<Alg> laurent_core(const Alg& alg, Complex zeta, std::size_t order, double a_norm)
{
    const double az = std::abs(zeta);
    auto p = alg.identity();
    auto s = alg.zero();
    std::vector<double> norms(order + 2);
    Complex zinv = 1.0 / zeta;
    Complex coef = zinv;
    for (std::size_t k = 0; k <= order; ++k) {
        s -= coef * p;
        norms[k] = alg.norm(p);
        p = alg.apply_a(p);
        coef *= zinv;
    }
    norms[order + 1] = alg.norm(p);

    double tail = std::numeric_limits<double>::infinity();
    double cprime = 0.0;
    for (std::size_t pp = 1; pp <= order + 1; ++pp) {
        const double inflate = 1.0 + gamma(alg.dimf() * static_cast<double>(pp));
        cprime = std::max(cprime, norms[pp - 1] * inflate / std::pow(az, static_cast<double>(pp - 1)));
        const double rho = norms[pp] * inflate / std::pow(az, static_cast<double>(pp));
        if (!(rho < 1.0)) continue;
        const double q0 = std::floor(static_cast<double>(order + 1) / static_cast<double>(pp));
        const double b = (cprime / az) * static_cast<double>(pp) * std::pow(rho, q0) / (1.0 - rho);
        tail = std::min(tail, b);
    }

    double round = 0.0;
    double term = 1.0 / az;
    for (std::size_t k = 0; k <= order; ++k) {
        round += term * (static_cast<double>(k) * gamma(alg.dimf()) + gamma(static_cast<double>(order) + 4.0));
        term *= a_norm / az;
    }
    double bound = tail + 2.0 * round;

    bound = std::min(bound, residual_bound(alg, s, zeta, a_norm));
    return {std::move(s), bound, tail + 2.0 * round};
}

template <class Alg>
SeriesOut<Alg> neumann_core(const Alg& alg, const typename Alg::T& r0, double eps0, Complex zeta0, Complex zeta,
                            std::size_t order, double a_norm)
{
    const Complex delta = zeta - zeta0;
    const double ad = std::abs(delta);
    const double rho_t = alg.norm(r0);
    const double rho_hat = rho_t + eps0;
    const double q_hat = ad * rho_hat;
    if (!(q_hat < 1.0))
        throw DomainError("first resolvent series: certified ratio |zeta - zeta0| (|R0| + eps0) = " + fmt(q_hat) +
                          " is not below 1");
    const double q_t = ad * rho_t;

    auto p = r0;                // R0^(n+1)
    auto q = alg.identity();    // R0^n
    auto s = alg.zero();
    auto t = alg.zero();
    Complex dn = 1.0;
    for (std::size_t n = 0; n <= order; ++n) {
        s += dn * p;
        t += dn * q;
        q = p;
        if (n < order) p = alg.mul(p, r0);
        dn *= delta;
    }

    const double nn = static_cast<double>(order);
    double round_s = 0.0, round_t = 0.0;
    double term = 1.0;  // |delta|^n rho_t^n
    for (std::size_t n = 0; n <= order; ++n) {
        const double g = static_cast<double>(n + 1) * gamma(alg.dimf()) + gamma(nn + 4.0);
        round_s += term * rho_t * g;
        round_t += term * g;
        term *= q_t;
    }
    round_s *= 2.0;
    round_t *= 2.0;

    // classical: truncation at rho_hat plus eps0 * sum (n+1) q_hat^n
    const double classical = rho_hat * std::pow(q_hat, nn + 1.0) / (1.0 - q_hat) + eps0 / ((1.0 - q_hat) * (1.0 - q_hat)) +
                             round_s;

    // a posteriori: F(X) = X (I - delta X)^-1 and
    //   F(X) - F(Y) = (I - delta X)^-1 (X - Y) (I - delta Y)^-1,
    //   (I - delta R(zeta0))^-1 = I + delta R(zeta)
    const double tau = rho_t * std::pow(q_t, nn + 1.0) / (1.0 - q_t) + round_s;
    const double a_inv = alg.norm(t) + std::pow(q_t, nn + 1.0) / (1.0 - q_t) + round_t;
    auto ids = alg.identity();
    ids += delta * s;
    const double b = alg.norm(ids) * (1.0 + 4.0 * unit_roundoff) + ad * round_s;
    double bound = classical;
    const double denom = 1.0 - a_inv * ad * eps0;
    if (denom > 0.0) {
        const double post = (tau + a_inv * b * eps0) / denom;
        bound = std::min(bound, post);
    }
    // the value is a polynomial in A whatever the incoming error; its residual
    // certifies it directly and stops the propagated bound from compounding
    bound = std::min(bound, residual_bound(alg, s, zeta, a_norm));
    return {std::move(s), bound, tau};
}

std::optional<DiagAlg> diag_alg(const Operator& a)
{
    if (const auto* d = a.as<Operator::Diagonal>()) return DiagAlg{d->sigma};
    return std::nullopt;
}

double spr_upper(const Operator& a)
{
    return spectral_radius(a, 30).upper;
}

} // namespace

std::string to_string(ResolventMethod m)
{
    switch (m) {
    case ResolventMethod::direct: return "direct";
    case ResolventMethod::series: return "series";
    case ResolventMethod::continuation: return "continuation";
    }
    return "?";
}

std::string to_string(StepKind k)
{
    switch (k) {
    case StepKind::laurent: return "laurent";
    case StepKind::neumann: return "neumann";
    case StepKind::shift_multiply: return "shift_multiply";
    }
    return "?";
}

ResolventPoint resolvent_direct(const Operator& a, Complex zeta)
{
    const auto n = static_cast<Eigen::Index>(a.dim());
    const std::optional<double> dist =
        a.spectrum() ? std::optional<double>(a.distance_to_spectrum(zeta)) : std::nullopt;
    auto fail = [&](const std::string& why) {
        std::string msg = "resolvent at " + fmt(zeta) + ": " + why;
        if (dist) msg += " (dist(zeta, spectrum) = " + fmt(*dist) + ")";
        throw DomainError(msg);
    };
    if (dist && *dist == 0.0) fail("zeta is an eigenvalue");

    ResolventPoint out;
    out.zeta = zeta;
    out.method = ResolventMethod::direct;
    if (const auto* d = a.as<Operator::Diagonal>()) {
        Vec inv(n);
        for (Eigen::Index i = 0; i < n; ++i) inv(i) = 1.0 / (d->sigma(i) - zeta);
        if (!inv.allFinite()) fail("singular shift");
        out.value = inv.asDiagonal();
        Vec res = (d->sigma - Vec::Constant(n, zeta)).cwiseProduct(inv) - Vec::Ones(n);
        out.residual = res.cwiseAbs().maxCoeff();
        out.error_bound = 4.0 * unit_roundoff * inv.cwiseAbs().maxCoeff();
        return out;
    }

    if (const auto col = a.lower_toeplitz_column()) {
        // (A - zeta I)^-1 is lower-triangular Toeplitz: u_0 = 1/t_0,
        // u_k = -(1/t_0) sum_{j=1..k} t_j u_{k-j}
        Vec t = *col;
        t(0) -= zeta;
        if (t(0) == Complex(0.0)) fail("singular triangular system");
        std::vector<Eigen::Index> nz;
        for (Eigen::Index j = 1; j < n; ++j)
            if (t(j) != Complex(0.0)) nz.push_back(j);
        const Complex inv0 = 1.0 / t(0);
        Vec u(n);
        u(0) = inv0;
        for (Eigen::Index k = 1; k < n; ++k) {
            Complex acc = 0.0;
            for (auto j : nz) {
                if (j > k) break;
                acc += t(j) * u(k - j);
            }
            u(k) = -inv0 * acc;
        }
        out.value = Mat::Zero(n, n);
        for (Eigen::Index j = 0; j < n; ++j) out.value.col(j).tail(n - j) = u.head(n - j);
    } else {
        Mat m = a.to_dense();
        m.diagonal().array() -= zeta;
        Eigen::PartialPivLU<Mat> lu(m);
        out.value = lu.solve(Mat::Identity(n, n));
    }
    if (!out.value.allFinite()) fail("singular or near-singular shift");

    Mat res = a.apply(out.value) - zeta * out.value;
    res.diagonal().array() -= 1.0;
    out.residual = inf_norm(res);
    const double xnorm = inf_norm(out.value);
    const double shifted = induced_norm(a, SpaceSpec::unweighted(Exponent::inf, a.dim())).value + std::abs(zeta);
    const double cond_scale = std::max(1.0, shifted * xnorm);
    if (out.residual > 1e-9 * cond_scale) fail("near-singular shift, residual " + fmt(out.residual));
    if (out.residual < 1.0) out.error_bound = xnorm * out.residual / (1.0 - out.residual);
    return out;
}

ResolventPoint resolvent_laurent(const Operator& a, Complex zeta, std::size_t order)
{
    const double spr = spr_upper(a);
    const double az = std::abs(zeta);
    if (!(az > spr))
        throw DomainError("Laurent series needs |zeta| > spr A; |zeta| = " + fmt(az) + ", spr upper bound " +
                          fmt(spr));
    const double a_norm = induced_norm(a, SpaceSpec::unweighted(Exponent::inf, a.dim())).value;
    ResolventPoint out;
    out.zeta = zeta;
    out.method = ResolventMethod::series;
    out.order = order;
    if (auto d = diag_alg(a)) {
        auto r = laurent_core(*d, zeta, order, a_norm);
        out.value = d->to_mat(r.value);
        out.error_bound = r.bound;
    } else {
        DenseAlg alg{&a, static_cast<Eigen::Index>(a.dim())};
        auto r = laurent_core(alg, zeta, order, a_norm);
        out.value = std::move(r.value);
        out.error_bound = r.bound;
    }
    if (!std::isfinite(*out.error_bound))
        throw NumericError("Laurent series at " + fmt(zeta) + ": no certified tail bound with order " +
                           std::to_string(order) + "; raise the order");
    return out;
}

ResolventPoint resolvent_neumann_step(const Operator& a, const ResolventPoint& r0, Complex zeta, std::size_t order)
{
    if (zeta == r0.zeta) return r0;
    if (!r0.error_bound) throw DomainError("first resolvent series: seed carries no error bound");
    const Complex delta = zeta - r0.zeta;
    if (a.spectrum()) {
        const double d0 = a.distance_to_spectrum(r0.zeta);
        if (std::abs(delta) > 0.75 * d0)
            throw DomainError("first resolvent series: |zeta - zeta0| = " + fmt(std::abs(delta)) +
                              " exceeds 3/4 dist(zeta0, spectrum) = " + fmt(0.75 * d0));
    }
    DenseAlg alg{&a, static_cast<Eigen::Index>(a.dim())};
    const double a_norm = induced_norm(a, SpaceSpec::unweighted(Exponent::inf, a.dim())).value;
    auto r = neumann_core(alg, r0.value, *r0.error_bound, r0.zeta, zeta, order, a_norm);
    ResolventPoint out;
    out.zeta = zeta;
    out.method = ResolventMethod::series;
    out.order = order;
    out.value = std::move(r.value);
    out.error_bound = r.bound;
    return out;
}

PathPlan plan_path(const Operator& a, Complex zeta0, Complex zeta1, const std::vector<Complex>& waypoints,
                   double eps_total)
{
    if (!a.spectrum()) throw DomainError("path continuation needs a spectrum oracle");
    if (!(eps_total > 0.0)) throw DomainError("plan_path: eps_total must be positive");
    const auto& spec = *a.spectrum();
    double spr = 0.0;
    for (const auto& z : spec) spr = std::max(spr, std::abs(z));
    if (!(std::abs(zeta0) > spr))
        throw DomainError("plan_path: |zeta0| = " + fmt(std::abs(zeta0)) + " must exceed spr A = " + fmt(spr));

    PathPlan plan;
    plan.eps_total = eps_total;
    plan.vertices.push_back(zeta0);
    for (const auto& w : waypoints) plan.vertices.push_back(w);
    plan.vertices.push_back(zeta1);

    double eta = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s + 1 < plan.vertices.size(); ++s)
        for (const auto& l : spec)
            eta = std::min(eta, distance_to_segment(l, plan.vertices[s], plan.vertices[s + 1]));
    plan.eta = eta;
    if (!(eta > 1e-8))
        throw DomainError("plan_path: polyline comes within " + fmt(eta) + " of the spectrum (margin 1e-8)");
    plan.radius = eta / 4.0;

    plan.centers.push_back(zeta0);
    for (std::size_t s = 0; s + 1 < plan.vertices.size(); ++s) {
        const Complex p = plan.vertices[s], q = plan.vertices[s + 1];
        const double len = std::abs(q - p);
        if (len == 0.0) continue;
        const auto k = static_cast<std::size_t>(std::ceil(len / (eta / 2.0)));
        for (std::size_t j = 1; j <= k; ++j)
            plan.centers.push_back(j == k ? q : p + (q - p) * (static_cast<double>(j) / static_cast<double>(k)));
    }
    plan.eps_step = eps_total / static_cast<double>(plan.centers.size());

    // seed order from |A|_inf when it is below |zeta0|, else from spr
    const double az = std::abs(zeta0);
    const double a_norm = induced_norm(a, SpaceSpec::unweighted(Exponent::inf, a.dim())).value;
    const double base = a_norm < az ? a_norm : spr;
    std::size_t n0 = 0;
    double b0 = 0.0;
    for (;; ++n0) {
        b0 = std::pow(base / az, static_cast<double>(n0 + 1)) / (az - base);
        if (b0 <= plan.eps_step || n0 >= 4000) break;
    }
    plan.orders.push_back(n0);
    plan.step_bounds.push_back(b0);

    for (std::size_t i = 1; i < plan.centers.size(); ++i) {
        const double rho = 1.0 / a.distance_to_spectrum(plan.centers[i - 1]);
        const double q = std::abs(plan.centers[i] - plan.centers[i - 1]) * rho;
        std::size_t n = 0;
        double b = 0.0;
        for (;; ++n) {
            b = rho * std::pow(q, static_cast<double>(n + 1)) / (1.0 - q);
            if (b <= plan.eps_step || n >= 500) break;
        }
        plan.orders.push_back(n);
        plan.step_bounds.push_back(b);
    }
    return plan;
}

namespace {

std::optional<std::uint64_t> mul_degree(std::optional<std::uint64_t> d, std::uint64_t f)
{
    if (!d) return std::nullopt;
    if (f != 0 && *d > std::numeric_limits<std::uint64_t>::max() / f) return std::nullopt;
    return *d * f;
}

std::optional<std::uint64_t> add_degree(std::optional<std::uint64_t> d, std::uint64_t k)
{
    if (!d || *d > std::numeric_limits<std::uint64_t>::max() - k) return std::nullopt;
    return *d + k;
}

// smallest n with rho q^(n+1) / (1 - q) <= tol
std::size_t hop_order(double rho, double q, double tol, std::size_t cap)
{
    std::size_t n = 0;
    double b = rho * q / (1.0 - q);
    while (b > tol && n < cap) {
        b *= q;
        ++n;
    }
    return n;
}

template <class Alg>
struct Executed {
    ApproxOperator ap;
    typename Alg::T last;
};

// tol[i] is the truncation budget of plan step i.  Hops whose certified
// ratio |delta| (|R| + eps) exceeds 1/2 are split into sub-hops along the
// same segment; this happens when |R|_inf is well above 1/dist(zeta, spectrum).
template <class Alg>
Executed<Alg> run_plan(const Operator& a, const Alg& alg, const PathPlan& plan, const std::vector<double>& tol)
{
    const double a_norm = induced_norm(a, SpaceSpec::unweighted(Exponent::inf, a.dim())).value;
    Executed<Alg> ex;
    ApproxOperator& ap = ex.ap;

    std::size_t n0 = plan.orders[0];
    SeriesOut<Alg> seed = laurent_core(alg, plan.centers[0], n0, a_norm);
    while (!(seed.bound <= tol[0]) && n0 < 5000) {
        n0 += std::max<std::size_t>(4, n0 / 2);
        seed = laurent_core(alg, plan.centers[0], n0, a_norm);
    }
    if (!std::isfinite(seed.bound))
        throw NumericError("continuation: Laurent seed at " + fmt(plan.centers[0]) + " has no certified bound");
    auto cur = std::move(seed.value);
    double eps = seed.bound;
    ap.provenance.push_back({StepKind::laurent, plan.centers[0], plan.centers[0], 0.0, n0, eps, eps});
    ap.degree_bound = n0;

    for (std::size_t i = 1; i < plan.centers.size(); ++i) {
        const Complex target = plan.centers[i];
        Complex pos = plan.centers[i - 1];
        const double len0 = std::abs(target - pos);
        const auto pieces = std::max<double>(1.0, std::ceil(2.0 * len0 * (alg.norm(cur) + eps)));
        std::size_t sub = 0;
        while (pos != target) {
            if (++sub > 100000) throw NumericError("continuation: hop into " + fmt(target) + " needs too many sub-steps");
            const double rho_t = alg.norm(cur);
            const double rho_hat = rho_t + eps;
            const Complex rest = target - pos;
            const double h = std::min(std::abs(rest), 0.5 / rho_hat);
            const Complex next = h >= std::abs(rest) ? target : pos + rest * (h / std::abs(rest));
            const double q_t = h * rho_t;
            std::size_t n = hop_order(rho_t, q_t, tol[i] / pieces, 2000);
            if (pieces == 1.0) n = std::max(n, plan.orders[i]);
            auto step = neumann_core(alg, cur, eps, pos, next, n, a_norm);
            ap.provenance.push_back(
                {StepKind::neumann, next, pos, 0.0, n, step.local, step.bound});
            ap.degree_bound = mul_degree(ap.degree_bound, n + 1);
            cur = std::move(step.value);
            eps = step.bound;
            pos = next;
        }
    }
    ap.value = alg.to_mat(cur);
    ap.zeta = plan.target();
    ap.error_bound = eps;
    ex.last = std::move(cur);
    return ex;
}

template <class Alg>
ApproxOperator continue_with(const Operator& a, const Alg& alg, const PathPlan& plan)
{
    const std::size_t m = plan.centers.size();
    Executed<Alg> ex = run_plan(a, alg, plan, std::vector<double>(m, plan.eps_step));
    if (ex.ap.error_bound <= plan.eps_total) return std::move(ex.ap);
    // one re-plan.  A truncation error made at zeta_i reaches the target
    // multiplied by (A - zeta_i) R(target) on both sides; estimate that
    // factor from the first run and shrink each step's budget by it.
    std::vector<double> tol(m);
    for (std::size_t i = 0; i < m; ++i) {
        auto x = alg.apply_a(ex.last);
        x -= plan.centers[i] * ex.last;
        const double g = std::max(1.0, alg.norm(x));
        tol[i] = plan.eps_total / (4.0 * static_cast<double>(m) * g * g);
    }
    Executed<Alg> again = run_plan(a, alg, plan, tol);
    again.ap.replans = 1;
    if (again.ap.error_bound > plan.eps_total)
        throw NumericError("continuation: certified bound " + fmt(again.ap.error_bound) + " exceeds eps_total " +
                           fmt(plan.eps_total) + " after re-planning");
    return std::move(again.ap);
}

} // namespace

ApproxOperator continue_resolvent(const Operator& a, const PathPlan& plan)
{
    if (plan.centers.empty() || plan.orders.size() != plan.centers.size())
        throw DomainError("continue_resolvent: malformed plan");
    if (auto d = diag_alg(a)) return continue_with(a, *d, plan);
    return continue_with(a, DenseAlg{&a, static_cast<Eigen::Index>(a.dim())}, plan);
}

VectorContinuation continue_resolvent(const Operator& a, const PathPlan& plan, const Vec& g)
{
    if (static_cast<std::size_t>(g.size()) != a.dim()) throw DimensionError("continue_resolvent: g has wrong length");
    VectorContinuation out;
    out.op = continue_resolvent(a, plan);
    out.value = out.op.value * g;
    out.error_bound = out.op.error_bound * inf_norm(g);
    return out;
}

ApproxOperator kclass_inverse(const Operator& a, double eps, const std::optional<std::vector<Complex>>& waypoints)
{
    if (!a.spectrum()) throw DomainError("kclass_inverse needs a spectrum oracle");
    const double d0 = a.distance_to_spectrum(0.0);
    if (!(d0 > 1e-8)) throw DomainError("kclass_inverse: 0 lies in the spectrum (distance " + fmt(d0) + ")");
    double spr = 0.0;
    for (const auto& z : *a.spectrum()) spr = std::max(spr, std::abs(z));
    const Complex zeta0 = 2.0 * spr;

    std::vector<std::vector<Complex>> candidates;
    if (waypoints)
        candidates.push_back(*waypoints);
    else
        candidates = {{}, {Complex(0.0, 1.0) * zeta0}, {Complex(0.0, -1.0) * zeta0}};

    std::optional<PathPlan> best;
    std::string last_error;
    for (const auto& wp : candidates) {
        try {
            PathPlan p = plan_path(a, zeta0, 0.0, wp, eps);
            if (!best || p.eta > best->eta) best = std::move(p);
        } catch (const DomainError& e) {
            last_error = e.what();
        }
    }
    if (!best) throw DomainError("kclass_inverse: no admissible path from " + fmt(zeta0) + " to 0 (" + last_error + ")");
    return continue_resolvent(a, *best);
}

namespace {

using Poly = std::vector<Complex>;

Poly poly_mul(const Poly& p, const Poly& q)
{
    Poly r(p.size() + q.size() - 1, Complex(0.0));
    for (std::size_t i = 0; i < p.size(); ++i)
        for (std::size_t j = 0; j < q.size(); ++j) r[i + j] += p[i] * q[j];
    return r;
}

void poly_axpy(Poly& acc, Complex c, const Poly& p)
{
    if (acc.size() < p.size()) acc.resize(p.size(), Complex(0.0));
    for (std::size_t i = 0; i < p.size(); ++i) acc[i] += c * p[i];
}

} // namespace

std::vector<Complex> extract_polynomial(const ApproxOperator& ap, std::uint64_t degree_cap)
{
    if (!ap.degree_bound || *ap.degree_bound > degree_cap)
        throw DegreeCapExceeded(ap.degree_bound.value_or(std::numeric_limits<std::uint64_t>::max()), degree_cap);
    Poly p;
    for (const auto& st : ap.provenance) {
        switch (st.kind) {
        case StepKind::laurent: {
            p.assign(st.order + 1, Complex(0.0));
            const Complex zinv = 1.0 / st.zeta;
            Complex c = zinv;
            for (std::size_t k = 0; k <= st.order; ++k) {
                p[k] = -c;
                c *= zinv;
            }
            break;
        }
        case StepKind::neumann: {
            const Complex delta = st.zeta - st.from;
            Poly acc{Complex(0.0)};
            Poly pw = p;
            Complex dn = 1.0;
            for (std::size_t n = 0; n <= st.order; ++n) {
                poly_axpy(acc, dn, pw);
                if (n < st.order) pw = poly_mul(pw, p);
                dn *= delta;
            }
            p = std::move(acc);
            break;
        }
        case StepKind::shift_multiply:
            for (std::size_t k = 0; k < st.order; ++k) p = poly_mul(p, Poly{-st.lambda, Complex(1.0)});
            break;
        }
    }
    p.resize(static_cast<std::size_t>(*ap.degree_bound) + 1, Complex(0.0));
    return p;
}

Mat evaluate_polynomial(const Operator& a, const std::vector<Complex>& coeffs)
{
    const auto n = static_cast<Eigen::Index>(a.dim());
    Mat x = Mat::Zero(n, n);
    for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) {
        x = a.apply(x);
        x.diagonal().array() += *it;
    }
    return x;
}

ApproxOperator shift_multiply(const ApproxOperator& ap, const Operator& a, Complex lambda, std::size_t k)
{
    ApproxOperator out = ap;
    const double a_norm = induced_norm(a, SpaceSpec::unweighted(Exponent::inf, a.dim())).value;
    const double factor = a_norm + std::abs(lambda);
    const double x0 = inf_norm(ap.value);
    for (std::size_t j = 0; j < k; ++j) out.value = a.apply(out.value) - lambda * out.value;
    const double amp = std::pow(factor, static_cast<double>(k));
    const double round = 2.0 * static_cast<double>(k) * gamma(static_cast<double>(a.dim()) + 2.0) * amp * x0;
    out.error_bound = amp * ap.error_bound + round;
    out.degree_bound = add_degree(ap.degree_bound, k);
    out.provenance.push_back({StepKind::shift_multiply, ap.zeta, ap.zeta, lambda, k, round, out.error_bound});
    return out;
}

} // namespace kbl
