#include "doctest.h"

#include "kbl/error.hpp"
#include "kbl/linalg.hpp"
#include "kbl/spectral.hpp"

#include <Eigen/LU>

#include <chrono>
#include <cmath>
#include <random>

using namespace kbl;

namespace {

double norm_inf(const Mat& m)
{
    return inf_norm(m);
}

Vec cvec(std::initializer_list<Complex> xs)
{
    Vec v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (auto x : xs) v(i++) = x;
    return v;
}

} // namespace

TEST_CASE("contour geometry")
{
    auto c = Contour::circle(Complex(1, 1), 2.0, 64);
    Complex sum = 0.0;
    for (auto d : c.increments()) sum += d;
    CHECK(std::abs(sum) < 1e-12);
    CHECK(c.winding_number(Complex(1, 1)) == 1);
    CHECK(c.winding_number(Complex(2.5, 1)) == 1);
    CHECK(c.winding_number(Complex(3.5, 1)) == 0);
    auto sq = Contour::polygon({Complex(-1, -1), Complex(1, -1), Complex(1, 1), Complex(-1, 1)}, 8);
    sum = 0.0;
    for (auto d : sq.increments()) sum += d;
    CHECK(std::abs(sum) < 1e-12);
    CHECK(sq.size() == 32);
    CHECK(sq.winding_number(0.0) == 1);
    CHECK(sq.winding_number(Complex(1.5, 0)) == 0);
    auto cw = Contour::polygon({Complex(-1, 1), Complex(1, 1), Complex(1, -1), Complex(-1, -1)}, 4);
    CHECK(cw.winding_number(0.0) == -1);
    CHECK_THROWS_AS(Contour::circle(0.0, -1.0, 16), DomainError);
    CHECK_THROWS_AS(Contour::circle(0.0, 1.0, 2), DomainError);
}

TEST_CASE("projection onto an enclosed eigenvalue")
{
    auto a = Operator::diagonal(cvec({2.0, 0.5, 0.4}));
    auto r = projection(a, Contour::circle(2.0, 0.5, 64));
    Mat expect = Mat::Zero(3, 3);
    expect(0, 0) = 1.0;
    CHECK(norm_inf(r.p - expect) <= 1e-10);
    CHECK(r.idempotency_residual <= 1e-10);
    CHECK(r.commutator_residual <= 1e-10);
    CHECK(r.rank == 1);
    REQUIRE(r.enclosed);
    CHECK(*r.enclosed == 1);

    auto none = projection(a, Contour::circle(Complex(0, 3), 0.5, 64));
    CHECK(norm_inf(none.p) <= 1e-12);
    CHECK(none.rank == 0);

    CHECK_THROWS_AS(projection(a, Contour::circle(2.0, 1.5, 4)), DomainError);
}

TEST_CASE("polygon contour projection")
{
    auto a = Operator::diagonal(cvec({2.0, 0.5, 0.4}));
    auto sq = Contour::polygon({Complex(1.5, -0.5), Complex(2.5, -0.5), Complex(2.5, 0.5), Complex(1.5, 0.5)}, 200);
    auto r = projection(a, sq);
    // midpoint rule converges algebraically on a polygon
    CHECK(std::abs(r.p(0, 0) - 1.0) <= 1e-4);
    CHECK(std::abs(r.p(1, 1)) <= 1e-4);
    CHECK(r.rank == 1);
}

TEST_CASE("projection matches the eigenvector oracle on dense matrices")
{
    std::mt19937 rng(3);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 10; ++trial) {
        const Eigen::Index n = 6;
        Mat v(n, n);
        for (auto& x : v.reshaped()) x = Complex(nd(rng), nd(rng));
        Vec ev(n);
        std::vector<Complex> spec;
        for (Eigen::Index i = 0; i < n; ++i) {
            ev(i) = Complex(i < 2 ? 0.1 * nd(rng) : 3.0 + std::abs(nd(rng)), i < 2 ? 0.1 * nd(rng) : 0.0);
            spec.push_back(ev(i));
        }
        Mat vinv = v.inverse();
        auto a = Operator::dense(v * ev.asDiagonal() * vinv, spec);
        Vec mask = Vec::Zero(n);
        mask(0) = mask(1) = 1.0;
        Mat oracle = v * mask.asDiagonal() * vinv;
        auto r = projection(a, Contour::circle(0.0, 1.0, 128));
        CHECK(norm_inf(r.p - oracle) <= 1e-8 * std::max(1.0, norm_inf(oracle)));
        CHECK(r.rank == 2);
        CHECK(r.idempotency_residual <= 1e-8 * std::max(1.0, norm_inf(oracle) * norm_inf(oracle)));
    }
}

TEST_CASE("projection is additive over disjoint contours")
{
    auto a = Operator::diagonal(cvec({1.0, Complex(1.2, 0.1), -1.0, 3.0}));
    auto p1 = projection(a, Contour::circle(1.1, 0.5, 96));
    auto p2 = projection(a, Contour::circle(-1.0, 0.5, 96));
    auto both = projection(a, Contour::circle(0.0, 2.0, 192));
    CHECK(norm_inf(p1.p + p2.p - both.p) <= 1e-8);
    CHECK(both.rank == 3);
}

TEST_CASE("doubling the node count converges spectrally")
{
    auto a = Operator::diagonal(cvec({2.0, 0.5, 0.4, Complex(2.1, 0.2)}));
    auto p128 = projection(a, Contour::circle(2.0, 0.6, 128));
    auto p256 = projection(a, Contour::circle(2.0, 0.6, 256));
    CHECK(norm_inf(p128.p - p256.p) <= 1e-10);
}

TEST_CASE("projection with several jobs matches the serial sum")
{
    auto a = Operator::volterra(60);
    auto c = Contour::circle(0.0, 1.0, 32);
    SpectralOptions par;
    par.jobs = 3;
    auto p1 = projection(a, c);
    auto p3 = projection(a, c, par);
    CHECK(norm_inf(p1.p - p3.p) == 0.0);
}

TEST_CASE("Volterra projection is the identity")
{
    const std::size_t n = 1000;
    auto a = Operator::volterra(n);
    const auto t0 = std::chrono::steady_clock::now();
    auto r = projection(a, Contour::circle(0.0, 1.0, 256));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    Mat id = Mat::Identity(n, n);
    CHECK(norm_inf(r.p - id) <= 1e-2);
    Vec g(n);
    for (std::size_t i = 0; i < n; ++i) g(static_cast<Eigen::Index>(i)) = static_cast<double>(i + 1) / static_cast<double>(n);
    CHECK((r.p * g - g).norm() / g.norm() <= 5e-3);
    CHECK(r.rank == n);
    CHECK(secs <= 60.0);
    MESSAGE("volterra projection seconds: " << secs);
}

TEST_CASE("reduced resolvent")
{
    auto a = Operator::diagonal(cvec({2.0, 0.5}));
    auto c = Contour::circle(2.0, 0.5, 64);
    auto rr = reduced_resolvent(a, c, 2.0);
    CHECK(std::abs(rr.value(0, 0)) <= 1e-12);
    CHECK(std::abs(rr.value(1, 1) - Complex(-2.0 / 3.0)) <= 1e-12);
    CHECK_FALSE(rr.cross_residual);

    auto inside = reduced_resolvent(a, c, Complex(2.1, 0.1));
    REQUIRE(inside.cross_residual);
    CHECK(*inside.cross_residual <= 1e-8);
    CHECK(std::abs(inside.value(1, 1) - 1.0 / (0.5 - Complex(2.1, 0.1))) <= 1e-12);

    CHECK_THROWS_AS(reduced_resolvent(a, c, 0.5), DomainError);

    // nilpotent: R(zeta)(I - P) = 0 inside, the contour form extends to zeta = 0
    auto nil = Operator::shift(4, 1);
    auto rn = reduced_resolvent(nil, Contour::circle(0.0, 1.0, 64), 0.0);
    CHECK(norm_inf(rn.value) <= 1e-12);
}

TEST_CASE("isolated point solve")
{
    auto a = Operator::diagonal(cvec({2.0, 0.5, 0.25}));
    auto c = Contour::circle(2.0, 0.5, 64);
    auto s = isolated_point_solve(a, 2.0, c, cvec({0.0, 1.0, 1.0}));
    CHECK(std::abs(s.f(0)) <= 1e-12);
    CHECK(std::abs(s.f(1) - Complex(-2.0 / 3.0)) <= 1e-12);
    CHECK(std::abs(s.f(2) - Complex(-4.0 / 7.0)) <= 1e-12);
    CHECK(s.residual <= 1e-9);
    CHECK(s.krylov_member);

    CHECK_THROWS_AS(isolated_point_solve(a, 2.0, c, cvec({1.0, 1.0, 1.0})), DomainError);
    CHECK_THROWS_AS(isolated_point_solve(a, 2.0, Contour::circle(1.0, 1.2, 64), cvec({0.0, 1.0, 1.0})), DomainError);
}

TEST_CASE("isolated point solve on random diagonals")
{
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::Index n = 8;
        Vec s(n), g(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            s(i) = Complex(u(rng), u(rng));
            g(i) = Complex(u(rng), u(rng));
        }
        const Complex lambda(3.0, 0.0);
        s(trial % n) = lambda;
        g(trial % n) = 0.0;
        auto a = Operator::diagonal(s);
        auto r = isolated_point_solve(a, lambda, Contour::circle(lambda, 1.0, 96), g);
        CHECK(r.residual <= 1e-8);
        REQUIRE(r.krylov_distance);
        CHECK(*r.krylov_distance <= 1e-6);
        Vec direct(n);
        for (Eigen::Index i = 0; i < n; ++i) direct(i) = i == trial % n ? Complex(0.0) : g(i) / (s(i) - lambda);
        CHECK(inf_norm(Vec(r.f - direct)) <= 1e-10);
    }
}

TEST_CASE("nilpotent part")
{
    Mat j(2, 2);
    j << 1.0, 1.0, 0.0, 1.0;
    auto a = Operator::dense(j, std::vector<Complex>{1.0, 1.0});
    auto np = nilpotent_part(a, 1.0, Contour::circle(1.0, 0.5, 64), 3);
    Mat expect(2, 2);
    expect << 0.0, 1.0, 0.0, 0.0;
    CHECK(norm_inf(np.d - expect) <= 1e-10);
    CHECK(np.power_norms[0] == doctest::Approx(1.0));
    CHECK(np.power_norms[1] <= 1e-8);

    auto d = Operator::diagonal(cvec({1.0, 2.0}));
    auto semisimple = nilpotent_part(d, 1.0, Contour::circle(1.0, 0.5, 64));
    CHECK(norm_inf(semisimple.d) <= 1e-10);
    auto empty = nilpotent_part(d, 5.0, Contour::circle(5.0, 0.5, 64));
    CHECK(norm_inf(empty.d) <= 1e-10);
    CHECK_THROWS_AS(nilpotent_part(d, 1.0, Contour::circle(1.5, 1.0, 64)), DomainError);
}

TEST_CASE("projection of g stays in the Krylov space")
{
    auto a = Operator::diagonal(cvec({2.0, Complex(2.1, 0.1), 0.5, -0.3, 0.7}));
    Vec g = cvec({1.0, 2.0, -1.0, 0.5, 1.5});
    auto r = projection(a, Contour::circle(2.0, 0.6, 128));
    Vec pg = r.p * g;
    auto kb = build_krylov(a, g, 5);
    auto d = distance_to_krylov(pg, kb, SpaceSpec::unweighted(Exponent::two, 5), kb.grade);
    CHECK(d.distance <= 1e-8);
}
