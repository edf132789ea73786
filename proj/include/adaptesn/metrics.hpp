#pragma once

// Benchmark error measures and the surrogate score normalization.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "adaptesn/error.hpp"
#include "adaptesn/lorenz.hpp"

namespace adaptesn {

inline constexpr std::size_t kHistogramBins = 41;
inline constexpr std::size_t kShortTimeHorizon = 20;
/// Edge padding relative to the data range.
inline constexpr double kEdgePadding = 0.05;
inline constexpr double kFewShotEdgePadding = 0.20;

/// Per-coordinate bin boundaries, strictly increasing.
using BinEdges = std::array<std::vector<double>, 3>;

struct HistogramSignature {
    BinEdges edges;
    std::array<std::vector<double>, 3> counts;  // normalized frequencies per coordinate
};

/// Evenly spaced edges spanning each coordinate's [min, max] widened by
/// `padding * (max - min)` on both sides. A constant coordinate gets a unit
/// wide span centred on its value.
[[nodiscard]] inline BinEdges make_edges(const Trajectory& traj, double padding = kEdgePadding,
                                         std::size_t bins = kHistogramBins)
{
    if (traj.empty()) {
        throw InvalidArgument("make_edges: empty trajectory");
    }
    if (bins < 1 || !(padding >= 0.0)) {
        throw InvalidArgument("make_edges: need bins >= 1 and padding >= 0");
    }
    BinEdges edges;
    for (int c = 0; c < 3; ++c) {
        double lo = traj[0][c];
        double hi = lo;
        for (const auto& p : traj.points) {
            lo = std::min(lo, p[c]);
            hi = std::max(hi, p[c]);
        }
        double span = hi - lo;
        if (span > 0.0) {
            lo -= padding * span;
            hi += padding * span;
        } else {
            lo -= 0.5;
            hi += 0.5;
        }
        span = hi - lo;
        auto& e = edges[static_cast<std::size_t>(c)];
        e.resize(bins + 1);
        for (std::size_t b = 0; b <= bins; ++b) {
            e[b] = lo + span * static_cast<double>(b) / static_cast<double>(bins);
        }
        e.back() = hi;
    }
    return edges;
}

/// Normalized per-coordinate histograms over shared edges. Samples outside
/// the edge span are clamped into the first or last bin.
[[nodiscard]] inline HistogramSignature build_histogram(const Trajectory& traj, const BinEdges& edges)
{
    if (traj.empty()) {
        throw InvalidArgument("build_histogram: empty trajectory");
    }
    HistogramSignature sig{edges, {}};
    for (std::size_t c = 0; c < 3; ++c) {
        const auto& e = edges[c];
        if (e.size() < 2 || !std::is_sorted(e.begin(), e.end(), std::less_equal<>{})) {
            throw InvalidArgument("build_histogram: edges must be strictly increasing with >= 2 entries");
        }
        const std::size_t bins = e.size() - 1;
        std::vector<double> counts(bins, 0.0);
        for (const auto& p : traj.points) {
            const double v = p[static_cast<Eigen::Index>(c)];
            // Bin b covers [e[b], e[b+1]); the final bin is closed.
            const auto it = std::upper_bound(e.begin(), e.end(), v);
            auto b = static_cast<std::ptrdiff_t>(it - e.begin()) - 1;
            b = std::clamp<std::ptrdiff_t>(b, 0, static_cast<std::ptrdiff_t>(bins) - 1);
            counts[static_cast<std::size_t>(b)] += 1.0;
        }
        const auto n = static_cast<double>(traj.size());
        for (auto& f : counts) {
            f /= n;
        }
        sig.counts[c] = std::move(counts);
    }
    return sig;
}

/// Sum over coordinates and bins of squared frequency differences.
[[nodiscard]] inline double histogram_l2(const HistogramSignature& a, const HistogramSignature& b)
{
    if (a.edges != b.edges) {
        throw DimensionError("histogram_l2: signatures use different bin edges");
    }
    double sum = 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t k = 0; k < a.counts[c].size(); ++k) {
            const double d = a.counts[c][k] - b.counts[c][k];
            sum += d * d;
        }
    }
    return sum;
}

/// Root mean square error over the first k steps and all coordinates.
[[nodiscard]] inline double short_time_rmse(const Trajectory& pred, const Trajectory& truth,
                                            std::size_t k = kShortTimeHorizon)
{
    if (k == 0 || pred.size() < k || truth.size() < k) {
        throw DimensionError("short_time_rmse: both trajectories need at least k steps");
    }
    double ss = 0.0;
    for (std::size_t t = 0; t < k; ++t) {
        ss += (pred[t] - truth[t]).squaredNorm();
    }
    return std::sqrt(ss / (3.0 * static_cast<double>(k)));
}

/// Length-normalized RMS error over the whole trajectory.
[[nodiscard]] inline double reconstruction_error(const Trajectory& pred, const Trajectory& truth)
{
    if (pred.size() != truth.size() || pred.empty()) {
        throw DimensionError("reconstruction_error: trajectories must be nonempty and equally long");
    }
    return short_time_rmse(pred, truth, pred.size());
}

/// Linear surrogate score: 100 at zero error, -100 at (or beyond) the
/// reference error of a naive baseline.
[[nodiscard]] inline double normalize_score(double raw_error, double reference_error)
{
    if (!(reference_error > 0.0)) {
        throw InvalidArgument("normalize_score: reference error must be positive");
    }
    if (!(raw_error >= 0.0)) {
        throw InvalidArgument("normalize_score: raw error must be nonnegative");
    }
    return 100.0 * (1.0 - 2.0 * std::min(raw_error / reference_error, 1.0));
}

} // namespace adaptesn
