#include "kbl/spectral.hpp"

#include "kbl/error.hpp"
#include "kbl/linalg.hpp"
#include "kbl/report.hpp"
#include "kbl/resolvent.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <future>
#include <numbers>
#include <sstream>

namespace kbl {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;
constexpr double node_margin = 1e-8;
constexpr double same_point = 1e-8;

std::string fmt(Complex z)
{
    std::ostringstream os;
    os.precision(6);
    os << z.real() << (z.imag() < 0 ? "-" : "+") << std::abs(z.imag()) << "i";
    return os.str();
}

struct NodeSums {
    Mat p;
    std::optional<Mat> reduced;
    double max_residual = 0.0;
};

// -(1/2 pi i) sum_i R(zeta_i) dzeta_i and, when zeta is given,
// -(1/2 pi i) sum_i R(zeta_i) dzeta_i / (zeta - zeta_i)
NodeSums node_sums(const Operator& a, const Contour& gamma, std::optional<Complex> zeta, const SpectralOptions& opt)
{
    if (a.spectrum())
        for (const auto& z : gamma.nodes()) {
            const double d = a.distance_to_spectrum(z);
            if (d <= node_margin)
                throw DomainError("contour node " + fmt(z) + " is " + format_double(d) +
                                  " from the spectrum (margin " + format_double(node_margin) + ")");
        }
    const auto n = static_cast<Eigen::Index>(a.dim());
    NodeSums out;
    out.p = Mat::Zero(n, n);
    if (zeta) out.reduced = Mat::Zero(n, n);
    const Complex scale = -1.0 / Complex(0.0, two_pi);
    auto add = [&](std::size_t i, const ResolventPoint& r) {
        const Complex w = scale * gamma.increments()[i];
        out.p += w * r.value;
        if (zeta) *out.reduced += (w / (*zeta - gamma.nodes()[i])) * r.value;
        out.max_residual = std::max(out.max_residual, r.residual);
    };
    const std::size_t jobs = std::max<std::size_t>(1, opt.jobs);
    const std::size_t m = gamma.size();
    if (jobs == 1) {
        for (std::size_t i = 0; i < m; ++i) add(i, resolvent_direct(a, gamma.nodes()[i]));
        return out;
    }
    for (std::size_t start = 0; start < m; start += jobs) {
        const std::size_t stop = std::min(m, start + jobs);
        std::vector<std::future<ResolventPoint>> batch;
        for (std::size_t i = start; i < stop; ++i)
            batch.push_back(std::async(std::launch::async, [&a, z = gamma.nodes()[i]] { return resolvent_direct(a, z); }));
        for (std::size_t i = start; i < stop; ++i) add(i, batch[i - start].get());
    }
    return out;
}

Mat right_multiply(const Mat& p, const Operator& a)
{
    if (const auto* d = a.as<Operator::Diagonal>()) return p * d->sigma.asDiagonal();
    const Mat dense = a.to_dense();
    if (a.is_lower_triangular()) return p * dense.triangularView<Eigen::Lower>();
    return p * dense;
}

ProjectionResult finish_projection(const Operator& a, const Contour& gamma, Mat p, double max_residual,
                                   const SpectralOptions& opt)
{
    ProjectionResult out;
    out.contour = gamma;
    out.quadrature_count = gamma.size();
    out.max_node_residual = max_residual;
    if (a.spectrum()) {
        std::size_t count = 0;
        for (const auto& z : *a.spectrum())
            if (gamma.winding_number(z) != 0) ++count;
        out.enclosed = count;
    }
    if (opt.diagnostics) {
        out.idempotency_residual = inf_norm(Mat(p * p - p));
        out.commutator_residual = inf_norm(Mat(right_multiply(p, a) - a.apply(p)));
        const RealVec s = Eigen::BDCSVD<Mat>(p).singularValues();
        const double smax = s.size() ? s(0) : 0.0;
        // P is a projection: its nonzero singular values are at least 1
        out.rank_tol = 1e-6 * std::max(1.0, smax);
        for (Eigen::Index i = 0; i < s.size(); ++i)
            if (s(i) > out.rank_tol) ++out.rank;
    }
    out.p = std::move(p);
    return out;
}

void require_single_eigenvalue(const Operator& a, Complex lambda, const Contour& gamma, bool allow_empty)
{
    if (!a.spectrum()) return;
    bool found = false;
    for (const auto& z : *a.spectrum()) {
        if (gamma.winding_number(z) == 0) continue;
        if (std::abs(z - lambda) > same_point)
            throw DomainError("contour encloses eigenvalue " + fmt(z) + " besides " + fmt(lambda));
        found = true;
    }
    if (!found && !allow_empty) throw DomainError("contour does not enclose the eigenvalue " + fmt(lambda));
}

} // namespace

std::string to_string(ContourKind k)
{
    return k == ContourKind::circle ? "circle" : "polygon";
}

Contour Contour::circle(Complex center, double radius, std::size_t nodes)
{
    if (!(radius > 0.0) || !std::isfinite(radius)) throw DomainError("circle contour: radius must be positive");
    if (nodes < 3) throw DomainError("circle contour: need at least 3 nodes");
    Contour c;
    c.kind_ = ContourKind::circle;
    c.center_ = center;
    c.radius_ = radius;
    const double dt = two_pi / static_cast<double>(nodes);
    for (std::size_t j = 0; j < nodes; ++j) {
        const Complex e = std::polar(1.0, dt * static_cast<double>(j));
        c.nodes_.push_back(center + radius * e);
        c.increments_.push_back(Complex(0.0, radius * dt) * e);
    }
    return c;
}

Contour Contour::polygon(std::vector<Complex> vertices, std::size_t per_edge)
{
    if (vertices.size() < 3) throw DomainError("polygon contour: need at least 3 vertices");
    if (per_edge < 1) throw DomainError("polygon contour: need at least one node per edge");
    Contour c;
    c.kind_ = ContourKind::polygon;
    Complex centroid = 0.0;
    for (const auto& v : vertices) centroid += v;
    c.center_ = centroid / static_cast<double>(vertices.size());
    for (std::size_t e = 0; e < vertices.size(); ++e) {
        const Complex p = vertices[e], q = vertices[(e + 1) % vertices.size()];
        if (p == q) throw DomainError("polygon contour: repeated vertex");
        const Complex h = (q - p) / static_cast<double>(per_edge);
        for (std::size_t j = 0; j < per_edge; ++j) {
            c.nodes_.push_back(p + h * (static_cast<double>(j) + 0.5));
            c.increments_.push_back(h);
        }
        c.radius_ = std::max(c.radius_, std::abs(p - c.center_));
    }
    c.vertices_ = std::move(vertices);
    return c;
}

int Contour::winding_number(Complex z) const
{
    const auto& pts = kind_ == ContourKind::polygon ? vertices_ : nodes_;
    double total = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const Complex u = pts[i] - z, v = pts[(i + 1) % pts.size()] - z;
        if (u == Complex(0.0) || v == Complex(0.0)) return 0;
        total += std::arg(v / u);
    }
    return static_cast<int>(std::lround(total / two_pi));
}

double Contour::node_distance(Complex z) const
{
    return distance_to_points(z, nodes_);
}

ProjectionResult projection(const Operator& a, const Contour& gamma, const SpectralOptions& opt)
{
    NodeSums s = node_sums(a, gamma, std::nullopt, opt);
    return finish_projection(a, gamma, std::move(s.p), s.max_residual, opt);
}

ReducedResolvent reduced_resolvent(const Operator& a, const Contour& gamma, Complex zeta, const SpectralOptions& opt)
{
    if (gamma.winding_number(zeta) != 1) throw DomainError("reduced resolvent: " + fmt(zeta) + " is not inside the contour");
    if (gamma.node_distance(zeta) <= node_margin)
        throw DomainError("reduced resolvent: " + fmt(zeta) + " lies on a contour node");
    NodeSums s = node_sums(a, gamma, zeta, opt);
    ReducedResolvent out;
    out.value = std::move(*s.reduced);
    out.proj = finish_projection(a, gamma, std::move(s.p), s.max_residual, opt);

    const bool regular = a.spectrum() ? a.distance_to_spectrum(zeta) > node_margin : true;
    if (regular) {
        try {
            const ResolventPoint r = resolvent_direct(a, zeta);
            Mat prod = r.value - r.value * out.proj.p;
            out.cross_residual = inf_norm(Mat(prod - out.value));
            out.product_form = std::move(prod);
        } catch (const DomainError&) {
            // singular after all: only the contour form is defined
        }
    }
    return out;
}

IsolatedSolve isolated_point_solve(const Operator& a, Complex lambda, const Contour& gamma, const Vec& g,
                                   const IsolatedSolveOptions& opt)
{
    if (static_cast<std::size_t>(g.size()) != a.dim()) throw DimensionError("isolated_point_solve: g has wrong length");
    if (gamma.winding_number(lambda) != 1)
        throw DomainError("isolated_point_solve: " + fmt(lambda) + " is not inside the contour");
    require_single_eigenvalue(a, lambda, gamma, false);

    ReducedResolvent rr = reduced_resolvent(a, gamma, lambda, opt.spectral);
    IsolatedSolve out;
    const double gn = inf_norm(g);
    const Vec pg = rr.proj.p * g;
    out.pg_ratio = gn > 0.0 ? inf_norm(pg) / gn : 0.0;
    if (out.pg_ratio > opt.eps_proj)
        throw DomainError("isolated_point_solve: |Pg| / |g| = " + std::to_string(out.pg_ratio) + " exceeds " +
                          std::to_string(opt.eps_proj) + "; g has a component in the eigenspace of " + fmt(lambda));
    out.f = rr.value * g;
    out.residual = inf_norm(Vec(a.apply(out.f) - lambda * out.f - g));

    if (opt.krylov_check && gn > 0.0) {
        const std::size_t m = std::min<std::size_t>(a.dim(), opt.krylov_max);
        const KrylovBasis kb = build_krylov(a, g, m);
        const auto d = distance_to_krylov(out.f, kb, SpaceSpec::unweighted(Exponent::two, a.dim()));
        out.krylov_distance = d.distance;
        out.krylov_dim = d.rank;
        out.krylov_member = d.distance <= opt.krylov_tol * std::max(1.0, inf_norm(out.f));
    }
    return out;
}

NilpotentPart nilpotent_part(const Operator& a, Complex lambda, const Contour& gamma, std::size_t k_max,
                             const SpectralOptions& opt)
{
    require_single_eigenvalue(a, lambda, gamma, true);
    NilpotentPart out;
    out.proj = projection(a, gamma, opt);
    out.d = a.apply(out.proj.p) - lambda * out.proj.p;
    Mat power = out.d;
    for (std::size_t k = 1; k <= k_max; ++k) {
        out.power_norms.push_back(inf_norm(power));
        if (k < k_max) power = power * out.d;
    }
    return out;
}

} // namespace kbl
