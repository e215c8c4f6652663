#pragma once

// Correlated binary (+1/-1) noise sources that set the polarizations of the
// two beams, plus the conditional-probability algebra that characterizes them.

#include <bellnoise/errors.hpp>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <concepts>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <random>
#include <span>
#include <string>

namespace bellnoise {

namespace detail {
inline std::string format_value(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}
} // namespace detail

/// Correlation r = <s1 s2> between the two noise signals, validated to [-1, 1].
class CorrelationCoefficient {
public:
    explicit CorrelationCoefficient(double r) : value_(r) {
        if (!(r >= -1.0 && r <= 1.0)) {
            throw InvalidParameter("correlation coefficient must lie in [-1, 1], got " +
                                   detail::format_value(r));
        }
    }

    double value() const noexcept { return value_; }

    friend bool operator==(CorrelationCoefficient, CorrelationCoefficient) = default;

private:
    double value_;
};

/// N(1|1) = N(-1|-1) and N(1|-1) = N(-1|1) for a pair with fair marginals.
struct ConditionalProbabilities {
    double n_same;
    double n_diff;
};

/// n_same = (1 + r) / 2, n_diff = (1 - r) / 2. The larger of the two is formed
/// as the complement of the smaller so the pair sums to exactly 1.
inline ConditionalProbabilities conditional_probs(CorrelationCoefficient r) {
    const double x = r.value();
    if (x >= 0.0) {
        const double n_diff = (1.0 - x) / 2.0;
        return {1.0 - n_diff, n_diff};
    }
    const double n_same = (1.0 + x) / 2.0;
    return {n_same, 1.0 - n_same};
}

/// r = 1 - 2 N(1|-1).
inline CorrelationCoefficient corr_from_conditional(double n_diff) {
    if (!(n_diff >= 0.0 && n_diff <= 1.0)) {
        throw InvalidParameter("conditional probability must lie in [0, 1], got " +
                               detail::format_value(n_diff));
    }
    return CorrelationCoefficient(1.0 - 2.0 * n_diff);
}

enum class Polarization { vertical, horizontal };

/// One trial's pair of signs and the polarizations they select
/// (+1 -> vertical, -1 -> horizontal).
struct TrialPolarizations {
    int s1 = 1;
    int s2 = 1;
    Polarization pol1 = Polarization::vertical;
    Polarization pol2 = Polarization::vertical;

    static constexpr Polarization polarization_of(int sign) noexcept {
        return sign > 0 ? Polarization::vertical : Polarization::horizontal;
    }

    static constexpr TrialPolarizations from_signs(int s1, int s2) noexcept {
        const int a = s1 > 0 ? 1 : -1;
        const int b = s2 > 0 ? 1 : -1;
        return {a, b, polarization_of(a), polarization_of(b)};
    }

    constexpr bool aligned() const noexcept { return pol1 == pol2; }

    friend bool operator==(const TrialPolarizations&, const TrialPolarizations&) = default;
};

// ---------------------------------------------------------------------------
// Random streams
// ---------------------------------------------------------------------------

/// SplitMix64 finalizer; used to derive child seeds (e.g. one per sweep row).
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// A std::mt19937_64 keyed by (seed, stream_id) through std::seed_seq. Both
/// the engine and the seeding algorithm are fully specified by the standard,
/// so a given key yields the same stream on every conforming implementation.
inline std::mt19937_64 make_stream_engine(std::uint64_t seed, std::uint64_t stream_id) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream_id),
                      static_cast<std::uint32_t>(stream_id >> 32)};
    return std::mt19937_64(seq);
}

/// Uniform double in [0, 1) from the top 53 bits of one engine output.
inline double uniform01(std::mt19937_64& engine) noexcept {
    return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

/// Pair of random telegraph signals with correlation r. s1 is a fair sign;
/// s2 copies s1 with probability (1 + r) / 2 and is flipped otherwise, which
/// keeps both marginals exactly fair.
class RtwPairSource {
public:
    RtwPairSource(CorrelationCoefficient r, std::uint64_t seed, std::uint64_t stream_id = 0)
        : r_(r), probs_(conditional_probs(r)), seed_(seed), stream_id_(stream_id),
          engine_(make_stream_engine(seed, stream_id)) {}

    TrialPolarizations next() {
        const int s1 = (engine_() >> 63) != 0 ? 1 : -1;
        const bool same = uniform01(engine_) < probs_.n_same;
        return TrialPolarizations::from_signs(s1, same ? s1 : -s1);
    }

    CorrelationCoefficient correlation() const noexcept { return r_; }
    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream_id() const noexcept { return stream_id_; }

private:
    CorrelationCoefficient r_;
    ConditionalProbabilities probs_;
    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::mt19937_64 engine_;
};

/// Sign of a latent draw; an exact zero (either signed zero) maps to +1.
constexpr int sign_with_positive_tie(double x) noexcept { return x >= 0.0 ? 1 : -1; }

/// Signs of a standard bivariate Gaussian pair with latent correlation rho.
/// A draw of exactly zero counts as +1.
class GaussianSignSource {
public:
    GaussianSignSource(double rho, std::uint64_t seed, std::uint64_t stream_id = 0)
        : rho_(rho), seed_(seed), stream_id_(stream_id),
          engine_(make_stream_engine(seed, stream_id)) {
        if (!(rho >= -1.0 && rho <= 1.0)) {
            throw InvalidParameter("latent correlation rho must lie in [-1, 1], got " +
                                   detail::format_value(rho));
        }
        complement_ = std::sqrt(std::max(0.0, 1.0 - rho * rho));
    }

    TrialPolarizations next() {
        const double x = normal_(engine_);
        const double z = normal_(engine_);
        const double y = rho_ * x + complement_ * z;
        return TrialPolarizations::from_signs(sign_with_positive_tie(x), sign_with_positive_tie(y));
    }

    double rho() const noexcept { return rho_; }
    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream_id() const noexcept { return stream_id_; }

private:
    double rho_;
    double complement_ = 0.0;
    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_;
};

/// Anything that emits one TrialPolarizations per call to next().
template <class S>
concept PairSource = requires(S source) {
    { source.next() } -> std::same_as<TrialPolarizations>;
};

// ---------------------------------------------------------------------------
// Sample statistics
// ---------------------------------------------------------------------------

/// Sum and sum of squares of a scalar sample. Merging is plain addition, so
/// reducing partial accumulators in a fixed order is deterministic.
struct RunningMoments {
    std::uint64_t count = 0;
    double sum = 0.0;
    double sum_sq = 0.0;

    void add(double x) noexcept {
        ++count;
        sum += x;
        sum_sq += x * x;
    }

    RunningMoments& operator+=(const RunningMoments& other) noexcept {
        count += other.count;
        sum += other.sum;
        sum_sq += other.sum_sq;
        return *this;
    }

    double mean() const noexcept { return sum / static_cast<double>(count); }

    /// Unbiased sample variance, clamped at zero against cancellation.
    double sample_variance() const noexcept {
        const double n = static_cast<double>(count);
        return std::max(0.0, (sum_sq - sum * sum / n) / (n - 1.0));
    }

    double standard_error() const noexcept {
        return std::sqrt(sample_variance() / static_cast<double>(count));
    }
};

struct Estimate {
    double value;
    double std_err;
};

/// Mean of s1 * s2 over the trials with its standard error.
inline Estimate empirical_correlation(std::span<const TrialPolarizations> trials) {
    if (trials.size() < 2) {
        throw InsufficientData("empirical_correlation needs at least 2 trials");
    }
    RunningMoments m;
    for (const auto& t : trials) m.add(static_cast<double>(t.s1 * t.s2));
    return {m.mean(), m.standard_error()};
}

// ---------------------------------------------------------------------------
// Gaussian sign-source calibration
// ---------------------------------------------------------------------------

/// E[sign(X) sign(Y)] for a standard bivariate Gaussian with correlation rho,
/// by quadrature of 2 * integral_0^inf phi(x) erf(k x) dx with
/// k = rho / sqrt(2 (1 - rho^2)). The erf edge at x ~ 1/|k| gets its own panel.
inline double gaussian_sign_correlation(double rho) {
    if (!(rho >= -1.0 && rho <= 1.0)) {
        throw InvalidParameter("latent correlation rho must lie in [-1, 1]");
    }
    if (rho == 1.0 || rho == -1.0) return rho;
    if (rho == 0.0) return 0.0;

    using boost::math::quadrature::gauss_kronrod;
    const double k = rho / std::sqrt(2.0 * (1.0 - rho * rho));
    constexpr double inv_sqrt_2pi = 0.39894228040143267794;
    auto integrand = [k](double x) { return inv_sqrt_2pi * std::exp(-0.5 * x * x) * std::erf(k * x); };

    constexpr double upper = 12.0;
    const double edge = std::min(upper, 1.0 / std::abs(k));
    constexpr unsigned max_depth = 20;
    constexpr double tol = 1e-14;
    double total = gauss_kronrod<double, 31>::integrate(integrand, 0.0, edge, max_depth, tol);
    if (edge < upper) {
        total += gauss_kronrod<double, 31>::integrate(integrand, edge, upper, max_depth, tol);
    }
    return std::clamp(2.0 * total, -1.0, 1.0);
}

struct GaussianCalibration {
    double rho;
    double achieved_r;   ///< sign correlation at rho
    double residual;     ///< achieved_r - target
    int iterations;
};

inline constexpr int kCalibrationMaxIterations = 200;
inline constexpr double kDefaultCalibrationTolerance = 1e-3;

/// Latent correlation rho whose sign correlation matches target_r within
/// tolerance, by bisection on [-1, 1] (the sign correlation is increasing in
/// rho). Throws CalibrationFailure carrying the best rho seen.
inline GaussianCalibration calibrate_gaussian(CorrelationCoefficient target_r,
                                              double tolerance = kDefaultCalibrationTolerance) {
    if (!(tolerance > 0.0)) throw InvalidParameter("calibration tolerance must be positive");
    const double target = target_r.value();
    if (target == 1.0 || target == -1.0) return {target, target, 0.0, 0};

    double lo = -1.0;
    double hi = 1.0;
    double best_rho = 0.0;
    double best_residual = std::numeric_limits<double>::infinity();
    for (int it = 1; it <= kCalibrationMaxIterations; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double achieved = gaussian_sign_correlation(mid);
        const double residual = achieved - target;
        if (std::abs(residual) < std::abs(best_residual)) {
            best_rho = mid;
            best_residual = residual;
        }
        if (std::abs(residual) <= tolerance) return {mid, achieved, residual, it};
        if (residual < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
        if (lo == hi) break;
    }
    throw CalibrationFailure("Gaussian calibration did not reach tolerance " +
                                 detail::format_value(tolerance),
                             best_rho, best_residual);
}

} // namespace bellnoise
