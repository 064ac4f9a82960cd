#include "kbl/operators.hpp"

#include "kbl/error.hpp"
#include "kbl/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace kbl {

namespace {

template <class... Fs>
struct overloaded : Fs... {
    using Fs::operator()...;
};
template <class... Fs>
overloaded(Fs...) -> overloaded<Fs...>;

// Row i of the Volterra stencil applied to columns of x, accumulated with a
// running prefix sum.  Works for vectors and matrices alike.
template <class M>
M volterra_apply(const M& x, QuadratureRule rule)
{
    const Eigen::Index n = x.rows();
    const double h = 1.0 / static_cast<double>(n);
    M out(x.rows(), x.cols());
    if (n == 0) return out;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        Complex prefix = 0.0;
        const Complex first = x(0, j);
        for (Eigen::Index i = 0; i < n; ++i) {
            const Complex xi = x(i, j);
            if (rule == QuadratureRule::rectangle)
                out(i, j) = h * prefix;
            else if (i == 0)
                out(0, j) = h * xi;
            else
                out(i, j) = h * (0.5 * first + prefix + 0.5 * xi);
            prefix += xi;
        }
    }
    return out;
}

template <class M>
M shift_apply(const M& x, std::size_t k)
{
    M out = M::Zero(x.rows(), x.cols());
    const auto n = static_cast<Eigen::Index>(x.rows());
    const auto kk = static_cast<Eigen::Index>(k);
    if (kk < n) out.bottomRows(n - kk) = x.topRows(n - kk);
    return out;
}

} // namespace

std::string to_string(QuadratureRule r)
{
    return r == QuadratureRule::rectangle ? "rectangle" : "trapezoid";
}

std::string to_string(OperatorKind k)
{
    switch (k) {
    case OperatorKind::dense: return "dense";
    case OperatorKind::diagonal: return "diag";
    case OperatorKind::shift: return "shift";
    case OperatorKind::volterra: return "volterra";
    }
    return "?";
}

std::string to_string(SprMethod m)
{
    return m == SprMethod::oracle ? "oracle" : "gelfand";
}

Operator Operator::dense(Mat matrix, std::optional<std::vector<Complex>> spectrum)
{
    if (matrix.rows() != matrix.cols())
        throw DimensionError("dense operator must be square, got " + std::to_string(matrix.rows()) + "x" +
                             std::to_string(matrix.cols()));
    if (matrix.rows() == 0) throw DimensionError("dense operator must be nonempty");
    if (!matrix.allFinite()) throw DomainError("dense operator has non-finite entries");
    const auto n = static_cast<std::size_t>(matrix.rows());
    if (spectrum && spectrum->size() != n)
        throw DimensionError("spectrum oracle must list " + std::to_string(n) + " eigenvalues with multiplicity");
    return Operator(Dense{std::move(matrix)}, n, std::move(spectrum));
}

Operator Operator::diagonal(Vec sigma)
{
    if (sigma.size() == 0) throw DimensionError("diagonal operator must be nonempty");
    if (!sigma.allFinite()) throw DomainError("diagonal operator has non-finite entries");
    std::vector<Complex> spec(sigma.data(), sigma.data() + sigma.size());
    const auto n = static_cast<std::size_t>(sigma.size());
    return Operator(Diagonal{std::move(sigma)}, n, std::move(spec));
}

Operator Operator::shift(std::size_t dim, std::size_t offset)
{
    if (dim == 0) throw DimensionError("shift operator must be nonempty");
    if (offset == 0) throw DomainError("shift offset must be at least 1");
    return Operator(Shift{offset}, dim, std::vector<Complex>(dim, Complex(0.0)));
}

Operator Operator::volterra(std::size_t n, QuadratureRule rule)
{
    if (n < 2) throw DomainError("Volterra discretisation needs n >= 2");
    const double h = 1.0 / static_cast<double>(n);
    std::vector<Complex> spec(n, Complex(0.0));
    if (rule == QuadratureRule::trapezoid) {
        // triangular with diagonal (h, h/2, ..., h/2)
        spec.assign(n, Complex(h / 2));
        spec[0] = h;
    }
    return Operator(Volterra{rule}, n, std::move(spec));
}

Operator volterra_matrix(std::size_t n, QuadratureRule rule)
{
    return Operator::volterra(n, rule);
}

OperatorKind Operator::kind() const noexcept
{
    return std::visit(overloaded{[](const Dense&) { return OperatorKind::dense; },
                                 [](const Diagonal&) { return OperatorKind::diagonal; },
                                 [](const Shift&) { return OperatorKind::shift; },
                                 [](const Volterra&) { return OperatorKind::volterra; }},
                      repr_);
}

void Operator::check_dim(Eigen::Index rows) const
{
    if (static_cast<std::size_t>(rows) != dim_)
        throw DimensionError("operand has " + std::to_string(rows) + " rows, operator dimension is " +
                             std::to_string(dim_));
}

Vec Operator::apply(const Vec& v) const
{
    check_dim(v.size());
    return std::visit(overloaded{[&](const Dense& d) -> Vec { return d.matrix * v; },
                                 [&](const Diagonal& d) -> Vec { return d.sigma.cwiseProduct(v); },
                                 [&](const Shift& s) -> Vec { return shift_apply(v, s.offset); },
                                 [&](const Volterra& w) -> Vec { return volterra_apply(v, w.rule); }},
                      repr_);
}

Mat Operator::apply(const Mat& x) const
{
    check_dim(x.rows());
    return std::visit(overloaded{[&](const Dense& d) -> Mat { return d.matrix * x; },
                                 [&](const Diagonal& d) -> Mat { return d.sigma.asDiagonal() * x; },
                                 [&](const Shift& s) -> Mat { return shift_apply(x, s.offset); },
                                 [&](const Volterra& w) -> Mat { return volterra_apply(x, w.rule); }},
                      repr_);
}

Mat Operator::to_dense() const
{
    const auto n = static_cast<Eigen::Index>(dim_);
    if (const auto* d = as<Dense>()) return d->matrix;
    if (const auto* d = as<Diagonal>()) return d->sigma.asDiagonal();
    return apply(Mat(Mat::Identity(n, n)));
}

std::optional<Vec> Operator::lower_toeplitz_column() const
{
    const auto n = static_cast<Eigen::Index>(dim_);
    if (const auto* s = as<Shift>()) {
        Vec t = Vec::Zero(n);
        if (static_cast<Eigen::Index>(s->offset) < n) t(static_cast<Eigen::Index>(s->offset)) = 1.0;
        return t;
    }
    if (const auto* w = as<Volterra>(); w && w->rule == QuadratureRule::rectangle) {
        Vec t = Vec::Constant(n, Complex(1.0 / static_cast<double>(n)));
        t(0) = 0.0;
        return t;
    }
    return std::nullopt;
}

bool Operator::is_lower_triangular() const
{
    if (const auto* d = as<Dense>()) return d->matrix.isLowerTriangular(0.0);
    return true;
}

double Operator::distance_to_spectrum(Complex z) const
{
    if (!spectrum_) throw DomainError("operator has no spectrum oracle");
    return distance_to_points(z, *spectrum_);
}

double graph_norm(const SpaceSpec& space, const Vec& v, const Operator& a)
{
    space.check_dim(v);
    return norm(space, v) + norm(space, a.apply(v));
}

namespace {

// |A| row sums for p = inf.
double inf_norm_exact(const Operator& a)
{
    if (const auto* d = a.as<Operator::Diagonal>()) return d->sigma.cwiseAbs().maxCoeff();
    if (const auto* s = a.as<Operator::Shift>()) return s->offset < a.dim() ? 1.0 : 0.0;
    if (a.as<Operator::Volterra>()) {
        // entries are nonnegative, so A * ones gives the row sums
        const Vec rows = a.apply(Vec(Vec::Ones(static_cast<Eigen::Index>(a.dim()))));
        return rows.real().maxCoeff();
    }
    return inf_norm(a.as<Operator::Dense>()->matrix);
}

// max_j (sum_i phi_i |a_ij|) / phi_j
double one_norm_exact(const Operator& a, const SpaceSpec& space)
{
    const auto n = a.dim();
    if (const auto* d = a.as<Operator::Diagonal>()) return d->sigma.cwiseAbs().maxCoeff();
    if (const auto* s = a.as<Operator::Shift>()) {
        double best = 0.0;
        for (std::size_t j = 0; j + s->offset < n; ++j)
            best = std::max(best, space.weight(j + s->offset) / space.weight(j));
        return best;
    }
    const Mat m = a.to_dense();
    double best = 0.0;
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        double col = 0.0;
        for (Eigen::Index i = 0; i < m.rows(); ++i) col += space.weight(i) * std::abs(m(i, j));
        best = std::max(best, col / space.weight(j));
    }
    return best;
}

} // namespace

NormEstimate induced_norm(const Operator& a, const SpaceSpec& space)
{
    if (space.dim() != a.dim())
        throw DimensionError("space dimension " + std::to_string(space.dim()) + " differs from operator dimension " +
                             std::to_string(a.dim()));
    NormEstimate out;
    switch (space.p()) {
    case Exponent::inf:
        out.value = inf_norm_exact(a);
        out.exact = true;
        return out;
    case Exponent::one:
        out.value = one_norm_exact(a, space);
        out.exact = true;
        return out;
    case Exponent::two:
        break;
    }

    // weighted l^2 norm of A equals the spectral norm of W^1/2 A W^-1/2
    if (const auto* d = a.as<Operator::Diagonal>()) {
        out.value = d->sigma.cwiseAbs().maxCoeff();
        out.exact = true;
        return out;
    }
    if (const auto* s = a.as<Operator::Shift>()) {
        double best = 0.0;
        for (std::size_t j = 0; j + s->offset < a.dim(); ++j)
            best = std::max(best, std::sqrt(space.weight(j + s->offset) / space.weight(j)));
        out.value = best;
        out.exact = true;
        return out;
    }

    const auto n = static_cast<Eigen::Index>(a.dim());
    RealVec sw(n);
    for (Eigen::Index i = 0; i < n; ++i) sw(i) = std::sqrt(space.weight(i));
    const Mat b = sw.asDiagonal() * a.to_dense() * sw.cwiseInverse().asDiagonal();

    // power iteration on B^H B from a fixed, generic start
    Vec x(n);
    for (Eigen::Index i = 0; i < n; ++i) x(i) = 1.0 + 0.5 * std::sin(static_cast<double>(i + 1));
    x.normalize();
    double theta = 0.0;
    constexpr int max_iter = 2000;
    for (int it = 1; it <= max_iter; ++it) {
        Vec y = b.adjoint() * (b * x);
        const double next = x.dot(y).real();
        out.iterations = it;
        out.residual = (y - next * x).norm();
        const double ny = y.norm();
        if (ny == 0.0) {
            theta = 0.0;
            break;
        }
        const bool done = std::abs(next - theta) <= 1e-15 * std::max(1.0, next);
        theta = next;
        x = y / ny;
        if (done) break;
    }
    out.value = std::sqrt(std::max(theta, 0.0));
    return out;
}

SpectralEstimate spectral_radius(const Operator& a, int k_max, bool use_oracle)
{
    if (k_max < 1) throw DomainError("spectral_radius: k_max must be at least 1");
    SpectralEstimate est;
    if (use_oracle && a.spectrum()) {
        double r = 0.0;
        for (const auto& z : *a.spectrum()) r = std::max(r, std::abs(z));
        est.lower = est.upper = r;
        est.method = SprMethod::oracle;
        return est;
    }

    const double log_n = std::log(static_cast<double>(a.dim()));
    Mat b = a.to_dense();
    double s = inf_norm(b);
    if (s == 0.0) {
        est.nilpotent = true;
        est.gelfand_sequence.push_back(0.0);
        return est;
    }
    b *= 1.0 / s;
    double log_c = std::log(s);  // A^(2^j) = exp(log_c) * b
    double lower = 0.0;
    double power = 1.0;
    auto trace_bound = [&] {
        const double t = std::abs(b.trace());
        if (t > 0.0) lower = std::max(lower, std::exp((std::log(t) + log_c - log_n) / power));
    };
    est.gelfand_sequence.push_back(s);
    trace_bound();
    for (int j = 1; j <= k_max; ++j) {
        b = b * b;
        power *= 2.0;
        s = inf_norm(b);
        if (!std::isfinite(s)) throw NumericError("spectral_radius: matrix power overflowed after rescaling");
        if (s == 0.0) {
            est.nilpotent = true;
            est.gelfand_sequence.push_back(0.0);
            est.lower = est.upper = 0.0;
            return est;
        }
        b *= 1.0 / s;
        log_c = 2.0 * log_c + std::log(s);
        est.gelfand_sequence.push_back(std::exp(log_c / power));
        trace_bound();
    }
    est.upper = est.gelfand_sequence.back();
    est.lower = std::min(lower, est.upper);
    return est;
}

Vec volterra_resolvent_exact(Complex zeta, const Vec& h, QuadratureRule rule)
{
    if (zeta == Complex(0.0)) throw DomainError("volterra_resolvent_exact: zeta must be nonzero");
    const Eigen::Index n = h.size();
    if (n < 2) throw DomainError("volterra_resolvent_exact: need at least 2 grid points");
    const double step = 1.0 / static_cast<double>(n);
    const Complex inv = 1.0 / zeta;
    // kernel exp((x_i - y)/zeta) on the grid depends only on the index gap
    Vec kern(n + 1);
    for (Eigen::Index d = 0; d <= n; ++d) kern(d) = std::exp(static_cast<double>(d) * step * inv);

    Vec out(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        Complex acc = 0.0;
        if (rule == QuadratureRule::rectangle) {
            for (Eigen::Index j = 0; j < i; ++j) acc += kern(i - j) * h(j);
        } else {
            // nodes 0 = x_0 < x_1 < ... < x_i, f(x_0) := f(x_1)
            acc = 0.5 * kern(i + 1) * h(0) + 0.5 * h(i);
            for (Eigen::Index j = 0; j < i; ++j) acc += kern(i - j) * h(j);
        }
        out(i) = -inv * h(i) - inv * inv * step * acc;
    }
    return out;
}

} // namespace kbl
