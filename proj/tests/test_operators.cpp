#include "doctest.h"

#include "kbl/error.hpp"
#include "kbl/operators.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include <cmath>
#include <random>

using namespace kbl;

namespace {

Vec unit(Eigen::Index n, Eigen::Index i)
{
    Vec e = Vec::Zero(n);
    e(i) = 1.0;
    return e;
}

Vec random_vec(std::mt19937& rng, Eigen::Index n)
{
    std::normal_distribution<double> d;
    Vec v(n);
    for (auto& x : v) x = Complex(d(rng), d(rng));
    return v;
}

// explicit matrices written out entry by entry
Mat shift_dense(Eigen::Index n, Eigen::Index k)
{
    Mat m = Mat::Zero(n, n);
    for (Eigen::Index i = 0; i + k < n; ++i) m(i + k, i) = 1.0;
    return m;
}

Mat volterra_dense(Eigen::Index n, QuadratureRule rule)
{
    const double h = 1.0 / double(n);
    Mat m = Mat::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (rule == QuadratureRule::rectangle) {
            for (Eigen::Index j = 0; j < i; ++j) m(i, j) = h;
        } else if (i == 0) {
            m(0, 0) = h;
        } else {
            m(i, 0) = 1.5 * h;
            for (Eigen::Index j = 1; j < i; ++j) m(i, j) = h;
            m(i, i) = 0.5 * h;
        }
    }
    return m;
}

Vec inv_sqrt(Eigen::Index n)
{
    Vec s(n);
    for (Eigen::Index i = 0; i < n; ++i) s(i) = 1.0 / std::sqrt(double(i + 1));
    return s;
}

} // namespace

TEST_CASE("apply examples")
{
    CHECK(Operator::shift(5, 1).apply(unit(5, 0)) == unit(5, 1));
    CHECK(Operator::diagonal(inv_sqrt(6)).apply(unit(6, 3)) == 0.5 * unit(6, 3));
    CHECK(Operator::volterra(7).apply(Vec(Vec::Zero(7))) == Vec::Zero(7));
    CHECK_THROWS_AS(Operator::shift(5, 1).apply(Vec(Vec::Zero(4))), DimensionError);
    CHECK_THROWS_AS(Operator::dense(Mat::Zero(2, 3)), DimensionError);
    CHECK_THROWS_AS(Operator::volterra(1), DomainError);
}

TEST_CASE("structured apply agrees with explicit matrices")
{
    std::mt19937 rng(11);
    auto check = [&](const Operator& a, const Mat& m) {
        const auto n = m.rows();
        for (Eigen::Index i = 0; i < n; ++i) CHECK((a.apply(unit(n, i)) - m.col(i)).cwiseAbs().maxCoeff() <= 1e-12);
        for (int t = 0; t < 3; ++t) {
            const Vec v = random_vec(rng, n);
            CHECK((a.apply(v) - m * v).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, v.cwiseAbs().maxCoeff()));
        }
        const Mat x = Mat::Random(n, 3);
        CHECK((a.apply(x) - m * x).cwiseAbs().maxCoeff() <= 1e-12 * double(n));
        CHECK((a.to_dense() - m).cwiseAbs().maxCoeff() <= 1e-15);
    };
    for (Eigen::Index n = 1; n <= 8; ++n) {
        for (Eigen::Index k = 1; k <= n + 1; ++k) check(Operator::shift(std::size_t(n), std::size_t(k)), shift_dense(n, k));
        const Vec s = random_vec(rng, n);
        check(Operator::diagonal(s), Mat(s.asDiagonal()));
        const Mat d = Mat::Random(n, n);
        check(Operator::dense(d), d);
        if (n >= 2)
            for (auto r : {QuadratureRule::rectangle, QuadratureRule::trapezoid})
                check(Operator::volterra(std::size_t(n), r), volterra_dense(n, r));
    }
    for (Eigen::Index n : {37, 64, 101}) {
        check(Operator::shift(std::size_t(n), 3), shift_dense(n, 3));
        for (auto r : {QuadratureRule::rectangle, QuadratureRule::trapezoid})
            check(Operator::volterra(std::size_t(n), r), volterra_dense(n, r));
    }
}

TEST_CASE("shift annihilates the leading coordinates")
{
    std::mt19937 rng(3);
    for (std::size_t k = 1; k <= 4; ++k) {
        const auto a = Operator::shift(12, k);
        for (int t = 0; t < 10; ++t) {
            const Vec w = a.apply(random_vec(rng, 12));
            for (std::size_t i = 0; i < k; ++i) CHECK(w(Eigen::Index(i)) == Complex(0.0));
        }
    }
}

TEST_CASE("rectangle Volterra is nilpotent at its own dimension")
{
    for (std::size_t n : {2u, 5u, 16u, 33u}) {
        const auto v = Operator::volterra(n);
        Mat p = Mat::Identity(Eigen::Index(n), Eigen::Index(n));
        for (std::size_t k = 0; k < n; ++k) p = v.apply(p);
        CHECK(p.cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("volterra matrix examples")
{
    const Vec ones = Vec::Ones(4);
    const Vec w = Operator::volterra(4).apply(ones);
    CHECK(std::abs(w(0)) == 0.0);
    CHECK(std::abs(w(1) - 0.25) <= 1e-15);
    CHECK(std::abs(w(2) - 0.5) <= 1e-15);
    CHECK(std::abs(w(3) - 0.75) <= 1e-15);

    const std::size_t n = 1000;
    Vec x(n), exact(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double xi = double(i + 1) / double(n);
        x(Eigen::Index(i)) = xi;
        exact(Eigen::Index(i)) = xi * xi / 2;
    }
    CHECK((Operator::volterra(n).apply(x) - exact).cwiseAbs().maxCoeff() <= 1e-2);
    // trapezoid is exact on linear integrands once f(0) = f(x_1) is accounted for
    CHECK((Operator::volterra(n, QuadratureRule::trapezoid).apply(x) - exact).cwiseAbs().maxCoeff() <= 2e-3);
}

TEST_CASE("spectrum oracles")
{
    const auto tr = Operator::volterra(5, QuadratureRule::trapezoid);
    const auto& spec = *tr.spectrum();
    const Mat m = tr.to_dense();
    for (Eigen::Index i = 0; i < 5; ++i) CHECK(std::abs(spec[std::size_t(i)] - m(i, i)) <= 1e-16);
    CHECK(Operator::diagonal(inv_sqrt(3)).distance_to_spectrum(2.0) == doctest::Approx(1.0));
    CHECK_THROWS_AS(Operator::dense(Mat::Identity(2, 2)).distance_to_spectrum(0.0), DomainError);
}

TEST_CASE("induced norm examples")
{
    CHECK(induced_norm(Operator::shift(10, 1), SpaceSpec::unweighted(Exponent::inf, 10)).value == 1.0);
    for (std::size_t k = 1; k <= 3; ++k) {
        const auto r = induced_norm(Operator::shift(10, k), SpaceSpec::unweighted(Exponent::inf, 10));
        CHECK(r.value == 1.0);
        CHECK(r.exact);
    }
    CHECK(induced_norm(Operator::diagonal(inv_sqrt(50)), SpaceSpec::unweighted(Exponent::inf, 50)).value == 1.0);
    const auto id = induced_norm(Operator::dense(Mat::Identity(6, 6)), SpaceSpec::unweighted(Exponent::two, 6));
    CHECK(std::abs(id.value - 1.0) <= 1e-10);
    CHECK(id.iterations >= 1);
}

TEST_CASE("induced norms against explicit formulas")
{
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> u(0.1, 2.0);
    for (int t = 0; t < 10; ++t) {
        const Eigen::Index n = 6;
        const Mat m = Mat::Random(n, n);
        std::vector<double> w(n);
        for (auto& x : w) x = u(rng);
        const auto a = Operator::dense(m);

        double rows = 0.0, cols = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) rows = std::max(rows, m.row(i).cwiseAbs().sum());
        for (Eigen::Index j = 0; j < n; ++j) {
            double c = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) c += w[std::size_t(i)] * std::abs(m(i, j));
            cols = std::max(cols, c / w[std::size_t(j)]);
        }
        CHECK(induced_norm(a, SpaceSpec::unweighted(Exponent::inf, n)).value == doctest::Approx(rows).epsilon(1e-14));
        CHECK(induced_norm(a, SpaceSpec::weighted(Exponent::one, w)).value == doctest::Approx(cols).epsilon(1e-14));

        RealVec sw(n);
        for (Eigen::Index i = 0; i < n; ++i) sw(i) = std::sqrt(w[std::size_t(i)]);
        const Mat b = sw.asDiagonal() * m * sw.cwiseInverse().asDiagonal();
        const double smax = Eigen::JacobiSVD<Mat>(b).singularValues()(0);
        const auto est = induced_norm(a, SpaceSpec::weighted(Exponent::two, w));
        CHECK(est.value == doctest::Approx(smax).epsilon(1e-6));
    }
    // weighted shift has exact closed forms
    const auto s = SpaceSpec::exp_decay(Exponent::one, 8);
    CHECK(induced_norm(Operator::shift(8, 2), s).value == doctest::Approx(std::exp(-2.0)).epsilon(1e-14));
    CHECK(induced_norm(Operator::shift(8, 2), SpaceSpec::exp_decay(Exponent::two, 8)).value ==
          doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
}

TEST_CASE("spectral radius examples")
{
    const auto d = spectral_radius(Operator::diagonal(inv_sqrt(100)), 10);
    CHECK(d.method == SprMethod::oracle);
    CHECK(d.upper == 1.0);
    CHECK(d.lower == 1.0);

    const auto v = spectral_radius(Operator::volterra(64), 10, false);
    CHECK(v.nilpotent);
    CHECK(v.upper == 0.0);
    CHECK(spectral_radius(Operator::volterra(64), 10).upper == 0.0);

    const auto s = spectral_radius(Operator::shift(20, 2), 6, false);
    CHECK(s.nilpotent);
    CHECK(s.upper == 0.0);
    CHECK_THROWS_AS(spectral_radius(Operator::shift(20, 2), 0), DomainError);
}

TEST_CASE("Gelfand bounds bracket the eigenvalue radius")
{
    std::mt19937 rng(21);
    for (int t = 0; t < 20; ++t) {
        const Mat m = Mat::Random(7, 7) * (0.1 + 3.0 * t / 20.0);
        const double true_spr = Eigen::ComplexEigenSolver<Mat>(m).eigenvalues().cwiseAbs().maxCoeff();
        const auto e = spectral_radius(Operator::dense(m), 12);
        CHECK(e.method == SprMethod::gelfand);
        CHECK(e.lower <= true_spr * (1 + 1e-12));
        CHECK(e.upper >= true_spr * (1 - 1e-12));
        for (double g : e.gelfand_sequence) CHECK(g >= true_spr * (1 - 1e-12));
        CHECK(e.lower <= e.upper);
    }
    // huge entries rescale instead of overflowing
    const Mat big = Mat::Identity(3, 3) * 1e200;
    const auto e = spectral_radius(Operator::dense(big), 20);
    CHECK(e.upper == doctest::Approx(1e200).epsilon(1e-10));
}

TEST_CASE("Volterra resolvent formula")
{
    CHECK_THROWS_AS(volterra_resolvent_exact(0.0, Vec::Ones(4)), DomainError);
    CHECK(volterra_resolvent_exact(1.0, Vec::Zero(10)) == Vec::Zero(10));

    // h = 1, zeta = 1: -1 - (e^x - 1) = -e^x up to the O(1/n) quadrature error
    for (std::size_t n : {100u, 1000u}) {
        const Vec u = volterra_resolvent_exact(1.0, Vec::Ones(Eigen::Index(n)));
        double err = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            err = std::max(err, std::abs(u(Eigen::Index(i)) + std::exp(double(i + 1) / double(n))));
        CHECK(err <= (2 * std::exp(1.0) - 1) / double(n));
    }

    // against a direct LU solve of (V - zeta I) u = h with h(x) = x
    const std::size_t n = 400;
    Vec h(n);
    for (std::size_t i = 0; i < n; ++i) h(Eigen::Index(i)) = double(i + 1) / double(n);
    for (auto rule : {QuadratureRule::rectangle, QuadratureRule::trapezoid}) {
        const Mat v = volterra_dense(Eigen::Index(n), rule);
        for (Complex z : {Complex(1.0), Complex(-1.0), Complex(0.0, 2.0)}) {
            const Mat lhs = v - z * Mat::Identity(Eigen::Index(n), Eigen::Index(n));
            const Vec direct = lhs.partialPivLu().solve(h);
            const Vec formula = volterra_resolvent_exact(z, h, rule);
            CHECK((direct - formula).cwiseAbs().maxCoeff() <= 5.0 / double(n));
        }
    }
}
