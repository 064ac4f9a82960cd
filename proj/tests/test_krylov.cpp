#include "doctest.h"

#include "kbl/error.hpp"
#include "kbl/krylov.hpp"
#include "kbl/linalg.hpp"

#include <Eigen/LU>
#include <Eigen/QR>
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

Mat random_real(std::mt19937& rng, Eigen::Index r, Eigen::Index c)
{
    std::normal_distribution<double> d;
    Mat m(r, c);
    for (auto& x : m.reshaped()) x = d(rng);
    return m;
}

// dim(span A cap span B) from principal angles: singular values of Qa^H Qb equal to 1
std::size_t intersection_by_angles(const Mat& a, const Mat& b)
{
    if (a.cols() == 0 || b.cols() == 0) return 0;
    const RealVec s = Eigen::JacobiSVD<Mat>(column_space(a).adjoint() * column_space(b)).singularValues();
    std::size_t k = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s(i) > 1.0 - 1e-8) ++k;
    return k;
}

double solve_in_span(const Operator& a, const Mat& q, const Vec& g)
{
    const Mat aq = a.apply(q);
    const Vec c = aq.colPivHouseholderQr().solve(g);
    return (aq * c - g).norm() / g.norm();
}

} // namespace

TEST_CASE("build_krylov examples")
{
    const auto kb = build_krylov(Operator::shift(6, 1), unit(6, 0), 3);
    for (Eigen::Index k = 0; k < 3; ++k) CHECK((kb.raw.col(k) - unit(6, k)).norm() == 0.0);
    CHECK(!kb.grade);
    CHECK(kb.rank_after.back() == 3);

    const Eigen::Index n = 30;
    Vec s(n), g(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        s(i) = 1.0 / std::sqrt(double(i + 1));
        g(i) = 1.0 / double(i + 1);
    }
    const auto a = Operator::diagonal(s);
    const auto plain = build_krylov(a, g, 6, false);
    const auto scaled = build_krylov(a, g, 6, true);
    for (Eigen::Index k = 0; k < 6; ++k)
        for (Eigen::Index i = 0; i < n; ++i) {
            const double expect = std::pow(double(i + 1), -1.0 - double(k) / 2);
            CHECK(std::abs(plain.raw(i, k) - expect) <= 1e-15 * expect);
            const Complex back = scaled.raw(i, k) * std::exp(scaled.log_scale[std::size_t(k)]);
            CHECK(std::abs(back - expect) <= 1e-13 * expect);
        }
    for (Eigen::Index k = 1; k < 6; ++k) {
        const Vec next = a.apply(Vec(scaled.raw.col(k - 1))) * (1.0 / scaled.step_scale[std::size_t(k)]);
        CHECK((next - scaled.raw.col(k)).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK(std::abs(scaled.raw.col(k).norm() - 1.0) <= 1e-14);
    }

    const auto id = build_krylov(Operator::dense(Mat::Identity(4, 4)), Vec::Ones(4), 3);
    REQUIRE(id.grade);
    CHECK(*id.grade == 1);

    CHECK_THROWS_AS(build_krylov(a, Vec::Zero(n), 3), DomainError);
    CHECK_THROWS_AS(build_krylov(a, g, 0), DomainError);
    CHECK_THROWS_AS(build_krylov(a, Vec::Ones(3), 2), DimensionError);
}

TEST_CASE("grade invariant and A-invariance")
{
    std::mt19937 rng(8);
    for (int t = 0; t < 40; ++t) {
        const Eigen::Index n = 3 + t % 6;
        Mat m = random_real(rng, n, n);
        if (t % 3 == 0) {
            // block structure with small Krylov grade
            m.bottomLeftCorner(n / 2, n - n / 2).setZero();
        }
        const auto a = Operator::dense(m);
        Vec g = random_real(rng, n, 1);
        if (t % 3 == 0) g.tail(n / 2).setZero();
        const auto kb = build_krylov(a, g, std::size_t(n) + 1);
        REQUIRE(kb.grade);
        const auto gr = *kb.grade;
        CHECK(kb.rank_after[gr - 1] == kb.rank_after[gr]);
        CHECK(numerical_rank(kb.raw.leftCols(Eigen::Index(gr))) == numerical_rank(kb.raw.leftCols(Eigen::Index(gr + 1))));
        const double an = induced_norm(a, SpaceSpec::unweighted(Exponent::two, std::size_t(n))).value;
        CHECK(invariance_residual(a, kb) <= 1e-9 * an);
    }
}

TEST_CASE("distance_to_krylov examples")
{
    const Eigen::Index n = 40;
    const auto shift2 = Operator::shift(std::size_t(n), 2);
    const auto kb = build_krylov(shift2, unit(n, 3), 12);
    for (auto p : {Exponent::one, Exponent::two, Exponent::inf}) {
        const auto sp = SpaceSpec::unweighted(p, std::size_t(n));
        CHECK(distance_to_krylov(unit(n, 3), kb, sp).distance <= 1e-12);
        for (std::size_t m = 1; m <= 12; ++m)
            CHECK(std::abs(distance_to_krylov(unit(n, 1), kb, sp, m).distance - 1.0) <= 1e-9);
    }

    // forward shift, g with xi_1 = 0: coordinate 1 of every Krylov vector vanishes
    std::mt19937 rng(4);
    std::uniform_real_distribution<double> u(-1, 1);
    const auto shift1 = Operator::shift(std::size_t(n), 1);
    for (int t = 0; t < 10; ++t) {
        Vec g(n), f(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            g(i) = u(rng);
            f(i) = u(rng);
        }
        g(0) = 0.0;
        const auto kbs = build_krylov(shift1, g, 10);
        const auto d = distance_to_krylov(f, kbs, SpaceSpec::unweighted(Exponent::inf, std::size_t(n)));
        CHECK(d.distance >= std::abs(f(0)) - 1e-9);
    }
}

TEST_CASE("distances are monotone and vanish on members")
{
    std::mt19937 rng(12);
    for (int t = 0; t < 12; ++t) {
        const Eigen::Index n = 12 + t;
        const auto a = Operator::dense(random_real(rng, n, n) * (1.0 / std::sqrt(double(n))));
        const Vec g = random_real(rng, n, 1);
        const auto kb = build_krylov(a, g, 8);
        std::vector<double> w(static_cast<std::size_t>(n));
        for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.5 + 0.1 * double(i % 5);
        const std::vector<SpaceSpec> spaces = {SpaceSpec::unweighted(Exponent::inf, std::size_t(n)),
                                               SpaceSpec::unweighted(Exponent::one, std::size_t(n)),
                                               SpaceSpec::weighted(Exponent::one, w),
                                               SpaceSpec::weighted(Exponent::two, w)};
        const Vec f = random_real(rng, n, 1);
        Vec member = kb.raw.leftCols(5) * random_real(rng, 5, 1);
        for (const auto& sp : spaces) {
            double prev = 1e300;
            for (std::size_t m = 1; m <= 8; ++m) {
                const auto d = distance_to_krylov(f, kb, sp, m);
                CHECK(d.distance <= prev + 1e-9);
                prev = d.distance;
                // raw coefficients reproduce the approximant
                Vec re = Vec::Zero(n);
                for (Eigen::Index k = 0; k < d.raw_coefficients.size(); ++k)
                    re += d.raw_coefficients(k) * std::exp(kb.log_scale[std::size_t(k)]) * kb.raw.col(k);
                CHECK((re - d.approximant).norm() <= 1e-8 * std::max(1.0, d.approximant.norm()));
            }
            CHECK(distance_to_krylov(member, kb, sp, 5).distance <= 1e-9 * norm(sp, member));
        }
    }
}

TEST_CASE("solvability sweep verdicts")
{
    const std::size_t n = 60;
    Vec e2 = unit(Eigen::Index(n), 1);
    for (auto p : {Exponent::one, Exponent::two, Exponent::inf}) {
        const auto rep = solvability_sweep(Operator::shift(n, 2), e2, SpaceSpec::unweighted(p, n), 10);
        for (double d : rep.distances) CHECK(std::abs(d - 1.0) <= 1e-9);
        CHECK(rep.verdict == Verdict::not_in_krylov);
    }

    const Eigen::Index m = 400;
    Vec s(m);
    for (Eigen::Index i = 0; i < m; ++i) s(i) = 1.0 / std::sqrt(double(i + 1));
    const auto rep = solvability_sweep(Operator::diagonal(s), s, SpaceSpec::unweighted(Exponent::inf, std::size_t(m)), 16);
    for (std::size_t k = 1; k < rep.distances.size(); ++k) CHECK(rep.distances[k] <= rep.distances[k - 1] + 1e-9);
    CHECK(rep.distances.back() < rep.distances.front() / 4);

    // invertible A, full grade: the exact solution is reached
    const auto inv = solvability_sweep(Operator::diagonal(Vec::LinSpaced(5, 1.0, 3.0)), Vec::Ones(5),
                                       SpaceSpec::unweighted(Exponent::two, 5), 6);
    CHECK(inv.distances.back() <= 1e-6 * inv.f_norm);
    CHECK(inv.verdict == Verdict::solvable);

    CHECK_THROWS_AS(solvability_sweep(Operator::shift(n, 2), Vec::Zero(Eigen::Index(n)),
                                      SpaceSpec::unweighted(Exponent::inf, n), 4),
                    DomainError);
    CHECK_THROWS_AS(solvability_sweep(Operator::shift(n, 2), e2, SpaceSpec::unweighted(Exponent::inf, n), 1),
                    DomainError);
}

TEST_CASE("Krylov intersection examples")
{
    Mat jb(2, 2);
    jb << 1, 1, 0, 1;
    const auto r = krylov_intersection(Operator::dense(jb), unit(2, 0));
    CHECK(r.dim_k == 1);
    CHECK(r.dim_g == 1);
    CHECK(r.dim_ag == 1);
    CHECK(r.trivial);
    CHECK(std::abs(std::abs(r.g_basis(1, 0)) - 1.0) <= 1e-12);

    const auto d = krylov_intersection(Operator::diagonal(Vec::LinSpaced(5, 1.0, 5.0)), Vec::Ones(5));
    CHECK(d.grade == 5);
    CHECK(d.dim_g == 0);
    CHECK(d.trivial);

    // user complements are validated
    CHECK_THROWS_AS(krylov_intersection(Operator::dense(jb), unit(2, 0), Mat(unit(2, 0))), DomainError);
    const auto u = krylov_intersection(Operator::dense(jb), unit(2, 0), Mat(Vec::Ones(2)));
    CHECK(u.complement_kind == ComplementKind::user);
    CHECK(u.trivial);  // A(1,1) = (2,1) is independent of e1

    // A e2 = e1 lands back in K = span e1
    Mat nil(2, 2);
    nil << 0, 1, 0, 0;
    const auto nt = krylov_intersection(Operator::dense(nil), unit(2, 0));
    CHECK(nt.dim_intersection == 1);
    CHECK(!nt.trivial);
}

TEST_CASE("intersection dimension agrees with principal angles")
{
    std::mt19937 rng(31);
    int nontrivial = 0;
    for (int t = 0; t < 150; ++t) {
        const Eigen::Index n = 2 + t % 5;
        Mat m = random_real(rng, n, n);
        if (t % 2) {
            // rank-deficient instance
            Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
            RealVec sv = svd.singularValues();
            sv(n - 1) = 0.0;
            if (t % 4 == 1 && n > 2) sv(n - 2) = 0.0;
            m = svd.matrixU() * sv.cast<Complex>().asDiagonal() * svd.matrixV().adjoint();
        }
        const auto a = Operator::dense(m);
        const Vec g = m * random_real(rng, n, 1);
        if (g.norm() == 0.0) continue;
        const auto rep = krylov_intersection(a, g);
        const Mat ag = a.apply(rep.g_basis);
        CHECK(rep.dim_k + rep.dim_g == std::size_t(n));
        CHECK(rep.dim_intersection == intersection_by_angles(rep.k_basis, ag));
        CHECK(rep.trivial == (rep.dim_intersection == 0));
        if (rep.trivial) CHECK(solve_in_span(a, rep.k_basis, g) <= 1e-8);
        if (!rep.trivial) ++nontrivial;
    }
    CHECK(nontrivial > 0);
}

TEST_CASE("density criterion")
{
    const auto a = Operator::diagonal(Vec::LinSpaced(6, 1.0, 2.0));
    CHECK(check_density_criterion(a, Vec::Ones(6)));
    const auto kb = build_krylov(a, Vec::Ones(6), 7);
    const Vec f = Vec::Ones(6).cwiseQuotient(Vec::LinSpaced(6, 1.0, 2.0));
    CHECK(krylov_membership_residual(f, kb) <= 1e-9);

    Mat nil(2, 2);
    nil << 0, 1, 0, 0;
    CHECK_THROWS_AS(check_density_criterion(Operator::dense(nil), unit(2, 1)), DomainError);

    std::mt19937 rng(77);
    for (int t = 0; t < 100; ++t) {
        const Mat m = random_real(rng, 5, 5) + 3.0 * Mat::Identity(5, 5);
        const auto op = Operator::dense(m);
        const Vec g = random_real(rng, 5, 1);
        const Vec sol = m.partialPivLu().solve(g);
        const bool direct = krylov_membership_residual(sol, build_krylov(op, g, 6)) <= 1e-8;
        CHECK(check_density_criterion(op, g) == direct);
    }
}

TEST_CASE("reducibility residual")
{
    const std::size_t n = 8;
    Vec s(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < s.size(); ++i) s(i) = 1.0 / double(i + 1);
    const auto ev = Mask::evens(n);
    CHECK(check_reduced(Operator::diagonal(s), ev.basis(), ev.complement().basis()) <= 1e-12);

    Mat k(n, n - 1);
    for (Eigen::Index j = 0; j < Eigen::Index(n) - 1; ++j) k.col(j) = unit(Eigen::Index(n), j + 1);
    CHECK(check_reduced(Operator::shift(n, 1), k, Mat(unit(Eigen::Index(n), 0))) == doctest::Approx(1.0));
    CHECK(check_reduced(Operator::shift(n, 1), Mat::Identity(Eigen::Index(n), Eigen::Index(n)),
                        Mat(Eigen::Index(n), 0)) == 0.0);
    CHECK_THROWS_AS(check_reduced(Operator::shift(n, 1), k, Mat(unit(Eigen::Index(n), 1))), DomainError);
}
