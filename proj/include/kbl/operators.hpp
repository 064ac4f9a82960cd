#pragma once

// The operator zoo: dense matrices plus the structured generators used by
// the worked examples (diagonal, forward shift by k, discretised Volterra
// integration).  Structured kinds apply in closed form and carry an exact
// spectrum oracle.

#include "kbl/spaces.hpp"
#include "kbl/types.hpp"

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace kbl {

enum class QuadratureRule { rectangle, trapezoid };

std::string to_string(QuadratureRule r);

enum class OperatorKind { dense, diagonal, shift, volterra };

std::string to_string(OperatorKind k);

class Operator {
public:
    struct Dense {
        Mat matrix;
    };
    struct Diagonal {
        Vec sigma;
    };
    struct Shift {
        std::size_t offset;
    };
    struct Volterra {
        QuadratureRule rule;
    };

    /// `spectrum` lists eigenvalues with multiplicity; it is trusted as given.
    static Operator dense(Mat matrix, std::optional<std::vector<Complex>> spectrum = std::nullopt);
    static Operator diagonal(Vec sigma);
    /// Matrix entry (i + k, i) = 1 on the N-dimensional truncation.
    static Operator shift(std::size_t dim, std::size_t offset);
    static Operator volterra(std::size_t n, QuadratureRule rule = QuadratureRule::rectangle);

    std::size_t dim() const noexcept { return dim_; }
    OperatorKind kind() const noexcept;
    const std::optional<std::vector<Complex>>& spectrum() const noexcept { return spectrum_; }

    template <class T>
    const T* as() const noexcept
    {
        return std::get_if<T>(&repr_);
    }

    Vec apply(const Vec& v) const;
    /// A * X, column by column.
    Mat apply(const Mat& x) const;
    Mat to_dense() const;

    /// First column when the matrix is lower-triangular Toeplitz (shift and
    /// rectangle-rule Volterra); such operators invert in O(N^2).
    std::optional<Vec> lower_toeplitz_column() const;
    bool is_lower_triangular() const;

    /// Exact distance from z to the oracle spectrum; throws DomainError when
    /// no oracle is attached.
    double distance_to_spectrum(Complex z) const;

private:
    using Repr = std::variant<Dense, Diagonal, Shift, Volterra>;

    Operator(Repr repr, std::size_t dim, std::optional<std::vector<Complex>> spectrum)
        : repr_(std::move(repr)), dim_(dim), spectrum_(std::move(spectrum))
    {
    }

    void check_dim(Eigen::Index rows) const;

    Repr repr_;
    std::size_t dim_;
    std::optional<std::vector<Complex>> spectrum_;
};

inline Vec apply(const Operator& a, const Vec& v) { return a.apply(v); }

/// |v| + |A v| in v's space.
double graph_norm(const SpaceSpec& space, const Vec& v, const Operator& a);

struct NormEstimate {
    double value = 0.0;
    bool exact = false;
    int iterations = 0;     ///< power iterations used (0 for closed forms)
    double residual = 0.0;  ///< eigen-residual of the final power iterate
};

/// Induced operator norm in `space`.  Exact for p = 1 and p = inf, and for
/// diagonal or shift operators in every norm; power iteration otherwise.
NormEstimate induced_norm(const Operator& a, const SpaceSpec& space);

enum class SprMethod { gelfand, oracle };

std::string to_string(SprMethod m);

struct SpectralEstimate {
    double lower = 0.0;
    double upper = 0.0;
    SprMethod method = SprMethod::gelfand;
    /// |A^(2^j)|_inf^(1/2^j) for j = 0, 1, ...; each entry bounds spr from above.
    std::vector<double> gelfand_sequence;
    /// A power vanished exactly, so spr = 0.
    bool nilpotent = false;
};

/// Oracle answer when available (and `use_oracle`), otherwise up to k_max
/// repeated squarings.  The lower bound is (|tr A^k| / N)^(1/k), which holds
/// for every k since |tr A^k| <= N spr^k.
SpectralEstimate spectral_radius(const Operator& a, int k_max, bool use_oracle = true);

/// Grid x_i = i/n, i = 1..n.
///   rectangle: (Vf)(x_i) = (1/n) sum_{j<i} f(x_j)   (strictly lower triangular)
///   trapezoid: composite trapezoid on 0 = x_0 < x_1 < ... < x_i with f
///              extended to x_0 by its first sample, i.e.
///              (Vf)(x_i) = (1/n) (f_1/2 + sum_{j<i} f_j + f_i/2)
Operator volterra_matrix(std::size_t n, QuadratureRule rule = QuadratureRule::rectangle);

/// (R(z,V)h)(x) = -h(x)/z - z^-2 int_0^x exp((x-y)/z) h(y) dy, the integral
/// taken with the same grid and stencil as volterra_matrix.  n = h.size().
Vec volterra_resolvent_exact(Complex zeta, const Vec& h, QuadratureRule rule = QuadratureRule::rectangle);

} // namespace kbl
