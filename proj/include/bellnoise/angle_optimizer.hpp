#pragma once

// Search over detector orientations for the largest closed-form S at a fixed
// noise correlation. S has period 180 degrees in every angle and is invariant
// under a common rotation, so the lattice search pins theta_A = 0 and scans
// the other three over [0, 180).

#include <bellnoise/estimators.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

namespace bellnoise {

struct TraceStep {
    AngleSet angles;
    double s_value;
};

struct OptimizationResult {
    AngleSet best_angles;
    double best_s = 0.0;
    std::uint64_t evaluations = 0;
    std::vector<TraceStep> trace; ///< improvements in evaluation order, when requested
};

struct GridSearchOptions {
    bool record_trace = false;
    unsigned threads = 1;
};

/// Lattice {0, step, 2 step, ...} below 180 degrees.
inline std::vector<double> angle_lattice(double step_deg) {
    std::vector<double> values;
    for (std::uint64_t k = 0;; ++k) {
        const double v = static_cast<double>(k) * step_deg;
        if (v >= 180.0) break;
        values.push_back(v);
    }
    return values;
}

/// Exhaustive search over theta_B, theta_C, theta_D on the lattice with
/// theta_A = 0. Among equal maxima the lexicographically smallest
/// (theta_B, theta_C, theta_D) wins: the scan is lexicographic and only a
/// strictly larger S replaces the incumbent. Slices of fixed theta_B run in
/// parallel and are merged in slice order, which reproduces the serial result.
inline OptimizationResult grid_search(CorrelationCoefficient r, Angle step, GridSearchOptions options = {}) {
    const double step_deg = step.deg();
    if (!(step_deg > 0.0 && step_deg <= 45.0)) {
        throw InvalidParameter("grid step must lie in (0, 45] degrees");
    }
    const std::vector<double> lattice = angle_lattice(step_deg);
    const std::size_t n = lattice.size();

    struct Slice {
        AngleSet best;
        double best_s = -1.0;
        std::vector<TraceStep> trace;
    };
    std::vector<Slice> slices(n);
    parallel_for_index(n, options.threads, [&](std::size_t ib) {
        Slice& slice = slices[ib];
        for (std::size_t ic = 0; ic < n; ++ic) {
            for (std::size_t id = 0; id < n; ++id) {
                const AngleSet set = AngleSet::from_degrees(0.0, lattice[ib], lattice[ic], lattice[id]);
                const double s = analytic_chsh(set, r).s_value;
                if (s > slice.best_s) {
                    slice.best_s = s;
                    slice.best = set;
                    if (options.record_trace) slice.trace.push_back({set, s});
                }
            }
        }
    });

    OptimizationResult result;
    result.best_s = -1.0;
    for (const Slice& slice : slices) {
        if (options.record_trace) {
            for (const TraceStep& step_entry : slice.trace) {
                if (step_entry.s_value > result.best_s) {
                    result.trace.push_back(step_entry);
                    result.best_s = step_entry.s_value;
                    result.best_angles = step_entry.angles;
                }
            }
        } else if (slice.best_s > result.best_s) {
            result.best_s = slice.best_s;
            result.best_angles = slice.best;
        }
    }
    result.evaluations = static_cast<std::uint64_t>(n) * n * n;
    return result;
}

struct RefineOptions {
    double initial_step_deg = 10.0;
    double min_step_deg = 1e-9;
    int max_cycles = 100000;
    bool record_trace = false;
};

/// Coordinate-wise pattern search from `start`. Each cycle tries every angle
/// in both directions at the current step, doubling the step while a
/// direction keeps paying off; a cycle without an accepted move halves the
/// step. A move is accepted only if it raises S by more than `tolerance`, so
/// the incumbent never decreases and a local optimum is returned unchanged.
inline OptimizationResult refine(CorrelationCoefficient r, const AngleSet& start, double tolerance,
                                 RefineOptions options = {}) {
    if (!(tolerance > 0.0)) throw InvalidParameter("refine tolerance must be positive");

    std::array<double, 4> best = start.degrees();
    auto evaluate = [&](const std::array<double, 4>& x) {
        return analytic_chsh(AngleSet::from_degrees(x[0], x[1], x[2], x[3]), r).s_value;
    };

    OptimizationResult result;
    result.best_angles = start;
    result.best_s = evaluate(best);
    result.evaluations = 1;
    if (options.record_trace) result.trace.push_back({start, result.best_s});

    double step = options.initial_step_deg;
    for (int cycle = 0; cycle < options.max_cycles && step >= options.min_step_deg; ++cycle) {
        bool moved = false;
        for (std::size_t coord = 0; coord < 4; ++coord) {
            for (double dir : {1.0, -1.0}) {
                double h = step;
                bool accepted_here = false;
                for (;;) {
                    auto candidate = best;
                    candidate[coord] += dir * h;
                    const double s = evaluate(candidate);
                    ++result.evaluations;
                    if (!(s > result.best_s + tolerance)) break;
                    best = candidate;
                    result.best_s = s;
                    accepted_here = true;
                    if (options.record_trace) {
                        result.trace.push_back({AngleSet::from_degrees(best[0], best[1], best[2], best[3]), s});
                    }
                    if (h < 90.0) h *= 2.0;
                }
                if (accepted_here) {
                    moved = true;
                    break;
                }
            }
        }
        if (!moved) step *= 0.5;
    }
    result.best_angles = AngleSet::from_degrees(best[0], best[1], best[2], best[3]);
    // stored angles are normalized; report S exactly as recomputed from them
    result.best_s = analytic_chsh(result.best_angles, r).s_value;
    return result;
}

} // namespace bellnoise
