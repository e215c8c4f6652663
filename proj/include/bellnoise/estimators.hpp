#pragma once

// Coincidence probabilities, the correlation estimator E and the CHSH value S,
// both in closed form and by Monte Carlo over a correlated pair source.

#include <bellnoise/noise_core.hpp>
#include <bellnoise/parallel.hpp>
#include <bellnoise/polarization_model.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

namespace bellnoise {

inline constexpr double kClassicalBound = 2.0;
/// 2 sqrt(2), the quantum-mechanical maximum of S; a reference constant only.
inline constexpr double kQuantumReference = 2.0 * std::numbers::sqrt2;
/// Threshold figure printed in the published analysis. It does not follow from
/// S = sqrt(2) + r (which crosses 2 at 2 - sqrt(2)) and is kept for reporting.
inline constexpr double kPublishedThreshold = 0.656;

/// Detector orientations for the two settings on each side.
struct AngleSet {
    Angle a;
    Angle b;
    Angle c;
    Angle d;

    /// (0, 22.5, 45, 67.5) degrees.
    static AngleSet standard() {
        return {Angle::degrees(0.0), Angle::degrees(22.5), Angle::degrees(45.0), Angle::degrees(67.5)};
    }

    static AngleSet from_degrees(double a, double b, double c, double d) {
        return {Angle::degrees(a), Angle::degrees(b), Angle::degrees(c), Angle::degrees(d)};
    }

    AngleSet rotated(Angle offset) const { return {a + offset, b + offset, c + offset, d + offset}; }

    std::array<double, 4> degrees() const { return {a.deg(), b.deg(), c.deg(), d.deg()}; }

    friend bool operator==(const AngleSet&, const AngleSet&) = default;
};

enum class Pairing { ab = 0, ad = 1, cb = 2, cd = 3 };

inline constexpr std::array<Pairing, 4> kPairings{Pairing::ab, Pairing::ad, Pairing::cb, Pairing::cd};

inline constexpr std::string_view to_string(Pairing p) noexcept {
    switch (p) {
    case Pairing::ab: return "AB";
    case Pairing::ad: return "AD";
    case Pairing::cb: return "CB";
    case Pairing::cd: return "CD";
    }
    return "?";
}

inline std::pair<Angle, Angle> pairing_angles(const AngleSet& angles, Pairing p) {
    switch (p) {
    case Pairing::ab: return {angles.a, angles.b};
    case Pairing::ad: return {angles.a, angles.d};
    case Pairing::cb: return {angles.c, angles.b};
    case Pairing::cd: return {angles.c, angles.d};
    }
    return {angles.a, angles.b};
}

// ---------------------------------------------------------------------------
// Closed form
// ---------------------------------------------------------------------------

/// P(V,V) = P(H,H) = 1/2 cos^2(delta) (1 + r) / 2.
inline double analytic_p_aligned(Angle delta, CorrelationCoefficient r) {
    const double c = cos_deg(delta.deg());
    return 0.5 * c * c * conditional_probs(r).n_same;
}

/// P(V,H) = P(H,V) = 1/2 sin^2(delta) (1 - r) / 2.
inline double analytic_p_mismatched(Angle delta, CorrelationCoefficient r) {
    const double s = sin_deg(delta.deg());
    return 0.5 * s * s * conditional_probs(r).n_diff;
}

/// E = 1/2 cos(2 delta) + r / 2.
inline double analytic_e(Angle delta, CorrelationCoefficient r) {
    return 0.5 * cos_deg(2.0 * delta.deg()) + 0.5 * r.value();
}

inline double chsh_value(double e_ab, double e_ad, double e_cb, double e_cd) noexcept {
    return std::abs(e_ab - e_ad) + std::abs(e_cb + e_cd);
}

enum class EstimationMode { analytic, monte_carlo };

struct ChshResult {
    double e_ab = 0.0;
    double e_ad = 0.0;
    double e_cb = 0.0;
    double e_cd = 0.0;
    std::array<double, 4> e_std_err{}; ///< per-pairing, in kPairings order
    double s_value = 0.0;
    double std_err = 0.0;
    bool violated = false;
    EstimationMode mode = EstimationMode::analytic;

    std::array<double, 4> estimators() const { return {e_ab, e_ad, e_cb, e_cd}; }
};

inline ChshResult make_chsh_result(const std::array<double, 4>& e, const std::array<double, 4>& e_err,
                                   EstimationMode mode) {
    ChshResult res;
    res.e_ab = e[0];
    res.e_ad = e[1];
    res.e_cb = e[2];
    res.e_cd = e[3];
    res.e_std_err = e_err;
    res.s_value = chsh_value(e[0], e[1], e[2], e[3]);
    double var = 0.0;
    for (double s : e_err) var += s * s;
    res.std_err = std::sqrt(var);
    res.violated = res.s_value > kClassicalBound;
    res.mode = mode;
    return res;
}

inline ChshResult analytic_chsh(const AngleSet& angles, CorrelationCoefficient r) {
    std::array<double, 4> e{};
    for (Pairing p : kPairings) {
        const auto [ti, tj] = pairing_angles(angles, p);
        e[static_cast<std::size_t>(p)] = 0.5 * cos_deg(2.0 * (ti.deg() - tj.deg())) + 0.5 * r.value();
    }
    return make_chsh_result(e, {}, EstimationMode::analytic);
}

// ---------------------------------------------------------------------------
// Monte Carlo
// ---------------------------------------------------------------------------

/// Per-trial score whose mean is E: +cos^2(delta) for an aligned trial,
/// -sin^2(delta) for a mismatched one (twice the signed intensity).
inline double trial_score(const TrialOutcome& outcome) noexcept {
    return is_aligned(outcome.label) ? 2.0 * outcome.intensity : -2.0 * outcome.intensity;
}

/// Accumulated intensities and counts for one detector pairing.
struct PairStatistics {
    std::array<double, 4> intensity_sum{};    ///< indexed by OutcomeLabel
    std::array<double, 4> intensity_sq_sum{};
    std::array<std::uint64_t, 4> count{};
    std::uint64_t total_trials = 0;
    double score_sum = 0.0;
    double sum_of_squared_scores = 0.0;

    void add(const TrialOutcome& outcome) noexcept {
        const auto k = static_cast<std::size_t>(outcome.label);
        intensity_sum[k] += outcome.intensity;
        intensity_sq_sum[k] += outcome.intensity * outcome.intensity;
        ++count[k];
        ++total_trials;
        const double u = trial_score(outcome);
        score_sum += u;
        sum_of_squared_scores += u * u;
    }

    PairStatistics& operator+=(const PairStatistics& other) noexcept {
        for (std::size_t k = 0; k < 4; ++k) {
            intensity_sum[k] += other.intensity_sum[k];
            intensity_sq_sum[k] += other.intensity_sq_sum[k];
            count[k] += other.count[k];
        }
        total_trials += other.total_trials;
        score_sum += other.score_sum;
        sum_of_squared_scores += other.sum_of_squared_scores;
        return *this;
    }

    double intensity(OutcomeLabel l) const noexcept { return intensity_sum[static_cast<std::size_t>(l)]; }
    std::uint64_t trials(OutcomeLabel l) const noexcept { return count[static_cast<std::size_t>(l)]; }
};

/// Streams n_trials from `source` through the coincidence model.
template <PairSource Source>
PairStatistics mc_pair_run(Source& source, Angle theta_i, Angle theta_j, std::uint64_t n_trials) {
    if (n_trials == 0) throw EmptyRun("Monte Carlo run needs at least one trial");
    PairStatistics stats;
    for (std::uint64_t t = 0; t < n_trials; ++t) stats.add(trial_outcome(source.next(), theta_i, theta_j));
    return stats;
}

/// Empirical P_xy = 2 * (intensity sum of label xy) / N. Each has expectation
/// equal to the closed-form P(X,Y) of the same label.
struct CoincidenceEstimates {
    double p_vv;
    double p_hh;
    double p_vh;
    double p_hv;
};

inline CoincidenceEstimates estimate_p(const PairStatistics& stats) {
    if (stats.total_trials == 0) throw EmptyRun("no trials accumulated");
    const double scale = 2.0 / static_cast<double>(stats.total_trials);
    return {scale * stats.intensity(OutcomeLabel::vv), scale * stats.intensity(OutcomeLabel::hh),
            scale * stats.intensity(OutcomeLabel::vh), scale * stats.intensity(OutcomeLabel::hv)};
}

/// P_vv + P_hh and P_vh + P_hv with standard errors. Their expectations are
/// cos^2(delta) (1 + r) / 2 and sin^2(delta) (1 - r) / 2.
struct CoincidenceSums {
    Estimate aligned;
    Estimate mismatched;
};

inline CoincidenceSums coincidence_sums(const PairStatistics& stats) {
    if (stats.total_trials < 2) throw InsufficientData("coincidence sums need at least 2 trials");
    auto combine = [&](OutcomeLabel x, OutcomeLabel y) {
        // per-trial value w = 2 I on the selected labels and 0 elsewhere
        RunningMoments m;
        m.count = stats.total_trials;
        m.sum = 2.0 * (stats.intensity(x) + stats.intensity(y));
        m.sum_sq = 4.0 * (stats.intensity_sq_sum[static_cast<std::size_t>(x)] +
                          stats.intensity_sq_sum[static_cast<std::size_t>(y)]);
        return Estimate{m.mean(), m.standard_error()};
    };
    return {combine(OutcomeLabel::vv, OutcomeLabel::hh), combine(OutcomeLabel::vh, OutcomeLabel::hv)};
}

/// E = P_vv + P_hh - P_vh - P_hv, computed as the mean per-trial score.
inline Estimate mc_e(const PairStatistics& stats) {
    if (stats.total_trials < 2) throw InsufficientData("estimator needs at least 2 trials");
    RunningMoments m{stats.total_trials, stats.score_sum, stats.sum_of_squared_scores};
    return {m.mean(), m.standard_error()};
}

/// Trials per chunk for chunked runs. Fixed so that results depend only on
/// (seed, n_trials), never on the worker count.
inline constexpr std::uint64_t kChunkTrials = 65536;

/// Stream id of one chunk of one pairing: pairing index in the high word,
/// chunk index in the low word.
constexpr std::uint64_t chunk_stream_id(std::uint64_t pairing_index, std::uint64_t chunk_index) noexcept {
    return (pairing_index << 32) | (chunk_index & 0xFFFFFFFFULL);
}

/// Callable mapping a stream id to a fresh pair source.
template <class F>
concept SourceFactory = requires(const F& f, std::uint64_t stream_id) {
    { f(stream_id) } -> PairSource;
};

inline auto rtw_factory(CorrelationCoefficient r, std::uint64_t seed) {
    return [r, seed](std::uint64_t stream_id) { return RtwPairSource(r, seed, stream_id); };
}

inline auto gaussian_factory(double rho, std::uint64_t seed) {
    GaussianSignSource probe(rho, seed); // validates rho up front
    return [rho, seed](std::uint64_t stream_id) { return GaussianSignSource(rho, seed, stream_id); };
}

/// mc_pair_run split into kChunkTrials-sized chunks, each on its own stream,
/// run on up to `threads` workers and summed in chunk order.
template <SourceFactory Factory>
PairStatistics mc_pair_run_chunked(const Factory& make_source, std::uint64_t pairing_index, Angle theta_i,
                                   Angle theta_j, std::uint64_t n_trials, unsigned threads = 1) {
    if (n_trials == 0) throw EmptyRun("Monte Carlo run needs at least one trial");
    const std::uint64_t n_chunks = (n_trials + kChunkTrials - 1) / kChunkTrials;
    std::vector<PairStatistics> partial(n_chunks);
    parallel_for_index(n_chunks, threads, [&](std::size_t chunk) {
        auto source = make_source(chunk_stream_id(pairing_index, chunk));
        const std::uint64_t begin = chunk * kChunkTrials;
        const std::uint64_t len = std::min(kChunkTrials, n_trials - begin);
        partial[chunk] = mc_pair_run(source, theta_i, theta_j, len);
    });
    PairStatistics total;
    for (const auto& p : partial) total += p;
    return total;
}

struct MonteCarloChsh {
    ChshResult result;
    std::array<PairStatistics, 4> pairs; ///< kPairings order
};

/// Four independent pairings (one stream family each), combined into S with
/// root-sum-square standard error.
template <SourceFactory Factory>
MonteCarloChsh mc_chsh_detailed(const Factory& make_source, const AngleSet& angles,
                                std::uint64_t n_trials_per_pair, unsigned threads = 1) {
    if (n_trials_per_pair == 0) throw EmptyRun("Monte Carlo CHSH needs trials per pairing");
    if (n_trials_per_pair < 2) throw InsufficientData("Monte Carlo CHSH needs at least 2 trials per pairing");
    MonteCarloChsh out;
    std::array<double, 4> e{};
    std::array<double, 4> err{};
    for (Pairing p : kPairings) {
        const auto k = static_cast<std::size_t>(p);
        const auto [ti, tj] = pairing_angles(angles, p);
        out.pairs[k] = mc_pair_run_chunked(make_source, k, ti, tj, n_trials_per_pair, threads);
        const Estimate est = mc_e(out.pairs[k]);
        e[k] = est.value;
        err[k] = est.std_err;
    }
    out.result = make_chsh_result(e, err, EstimationMode::monte_carlo);
    return out;
}

inline ChshResult mc_chsh(CorrelationCoefficient r, const AngleSet& angles, std::uint64_t n_trials_per_pair,
                          std::uint64_t seed, unsigned threads = 1) {
    return mc_chsh_detailed(rtw_factory(r, seed), angles, n_trials_per_pair, threads).result;
}

// ---------------------------------------------------------------------------
// Violation threshold
// ---------------------------------------------------------------------------

enum class ThresholdBranch {
    increasing, ///< smallest r beyond which S > 2 as r grows toward 1
    decreasing, ///< largest r below which S > 2 as r falls toward -1
};

inline constexpr double kThresholdTolerance = 1e-10;
inline constexpr int kThresholdMaxIterations = 200;

/// Correlation at which S(r) = 2 on the chosen branch, or nullopt when S stays
/// below 2 at that branch's end point. For fixed angles S(r) = |x| + |y + r|
/// is convex and piecewise linear with its minimum |x| <= sqrt(2) at r = -y,
/// so each branch crosses 2 at most once.
inline std::optional<double> violation_threshold(const AngleSet& angles,
                                                 ThresholdBranch branch = ThresholdBranch::increasing) {
    auto s_of = [&](double r) { return analytic_chsh(angles, CorrelationCoefficient(r)).s_value; };
    const double end = branch == ThresholdBranch::increasing ? 1.0 : -1.0;
    const double s_end = s_of(end);
    if (std::abs(s_end - kClassicalBound) <= kThresholdTolerance) return end;
    if (s_end < kClassicalBound) return std::nullopt;

    const ChshResult at_zero = analytic_chsh(angles, CorrelationCoefficient(0.0));
    const double kink = std::clamp(-(at_zero.e_cb + at_zero.e_cd), -1.0, 1.0);
    if (s_of(kink) >= kClassicalBound) return kink;

    // inside: S < 2, outside: S > 2
    double inside = kink;
    double outside = end;
    double mid = 0.5 * (inside + outside);
    for (int it = 0; it < kThresholdMaxIterations; ++it) {
        mid = 0.5 * (inside + outside);
        const double s = s_of(mid);
        if (std::abs(s - kClassicalBound) <= kThresholdTolerance) break;
        if (s < kClassicalBound) {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    return mid;
}

} // namespace bellnoise
