#include "kbl/linalg.hpp"

#include "kbl/error.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace kbl {

double inf_norm(const Mat& m)
{
    if (m.size() == 0) return 0.0;
    return m.cwiseAbs().rowwise().sum().maxCoeff();
}

double inf_norm(const Vec& v)
{
    if (v.size() == 0) return 0.0;
    return v.cwiseAbs().maxCoeff();
}

namespace {

Eigen::BDCSVD<Mat> thin_svd(const Mat& m)
{
    return Eigen::BDCSVD<Mat>(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
}

std::size_t rank_from_singular_values(const RealVec& s, double rel_tol)
{
    if (s.size() == 0 || s(0) == 0.0) return 0;
    const double cut = rel_tol * s(0);
    std::size_t r = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s(i) > cut) ++r;
    return r;
}

} // namespace

std::size_t numerical_rank(const Mat& m, double rel_tol)
{
    if (m.rows() == 0 || m.cols() == 0) return 0;
    Eigen::BDCSVD<Mat> svd(m);
    return rank_from_singular_values(svd.singularValues(), rel_tol);
}

Mat column_space(const Mat& m, double rel_tol)
{
    if (m.rows() == 0 || m.cols() == 0) return Mat(m.rows(), 0);
    auto svd = thin_svd(m);
    const auto r = rank_from_singular_values(svd.singularValues(), rel_tol);
    return svd.matrixU().leftCols(static_cast<Eigen::Index>(r));
}

Mat orthogonal_complement(const Mat& q, std::size_t dim, double rel_tol)
{
    const auto n = static_cast<Eigen::Index>(dim);
    if (q.cols() == 0) return Mat::Identity(n, n);
    if (q.rows() != n) throw DimensionError("orthogonal_complement: row count mismatch");
    Eigen::BDCSVD<Mat> svd(q, Eigen::ComputeFullU);
    const auto r = static_cast<Eigen::Index>(rank_from_singular_values(svd.singularValues(), rel_tol));
    return svd.matrixU().rightCols(n - r);
}

Mat hstack(const Mat& a, const Mat& b)
{
    if (a.cols() == 0) return b;
    if (b.cols() == 0) return a;
    if (a.rows() != b.rows()) throw DimensionError("hstack: row count mismatch");
    Mat out(a.rows(), a.cols() + b.cols());
    out << a, b;
    return out;
}

RealVec require_real(const Vec& v, std::string_view what, double rel_tol)
{
    const double scale = std::max(1.0, inf_norm(v));
    if (v.size() > 0 && v.imag().cwiseAbs().maxCoeff() > rel_tol * scale)
        throw DomainError(std::string(what) + ": complex input (only real data supported)");
    return v.real();
}

RealMat require_real(const Mat& m, std::string_view what, double rel_tol)
{
    const double scale = std::max(1.0, m.size() ? m.cwiseAbs().maxCoeff() : 0.0);
    if (m.size() > 0 && m.imag().cwiseAbs().maxCoeff() > rel_tol * scale)
        throw DomainError(std::string(what) + ": complex input (only real data supported)");
    return m.real();
}

double distance_to_points(Complex z, const std::vector<Complex>& points)
{
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : points) best = std::min(best, std::abs(z - p));
    return best;
}

double distance_to_segment(Complex z, Complex a, Complex b)
{
    const Complex d = b - a;
    const double len2 = std::norm(d);
    if (len2 == 0.0) return std::abs(z - a);
    const double t = std::clamp(((z - a) * std::conj(d)).real() / len2, 0.0, 1.0);
    return std::abs(z - (a + t * d));
}

} // namespace kbl
