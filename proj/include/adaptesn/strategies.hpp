#pragma once

// Scenario-specific inference pipelines, one per pair family.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

#include "adaptesn/error.hpp"
#include "adaptesn/esn.hpp"
#include "adaptesn/lorenz.hpp"
#include "adaptesn/metrics.hpp"
#include "adaptesn/pairs.hpp"
#include "adaptesn/parallel.hpp"
#include "adaptesn/rng.hpp"

namespace adaptesn {

[[nodiscard]] inline ReservoirConfig default_fewshot_config()
{
    ReservoirConfig c;
    c.n_units = 300;
    c.ridge_lambda = 1e-4;
    c.washout = 10;
    return c;
}

struct StrategyConfig {
    ReservoirConfig esn{};
    std::size_t n_candidates = 20;
    double perturbation_sigma = 3e-6;
    std::size_t warmup_length = 100;
    std::size_t n_seeds = 30;
    ReservoirConfig fewshot_esn = default_fewshot_config();
    /// Seeds the candidate perturbations and the few-shot reservoir sweep.
    std::uint64_t seed = 42;
    /// Worker threads for candidate and seed sweeps (0 = hardware concurrency).
    std::size_t threads = 0;

    void validate() const
    {
        esn.validate();
        fewshot_esn.validate();
        if (n_candidates < 1 || n_seeds < 1) {
            throw InvalidArgument("StrategyConfig: n_candidates and n_seeds must be >= 1");
        }
        if (!(perturbation_sigma >= 0.0)) {
            throw InvalidArgument("StrategyConfig: perturbation_sigma must be >= 0");
        }
        if (warmup_length < 1) {
            throw InvalidArgument("StrategyConfig: warmup_length must be >= 1");
        }
    }
};

enum class StrategyKind {
    exact_sync,           // pair 1
    teacher_forced,       // pairs 2, 4
    histogram_selection,  // pairs 3, 5
    seed_sweep,           // pairs 6, 7
    sequential_chain,     // pairs 8, 9
};

[[nodiscard]] inline std::string_view to_string(StrategyKind k) noexcept
{
    switch (k) {
    case StrategyKind::exact_sync: return "exact_sync";
    case StrategyKind::teacher_forced: return "teacher_forced";
    case StrategyKind::histogram_selection: return "histogram_selection";
    case StrategyKind::seed_sweep: return "seed_sweep";
    case StrategyKind::sequential_chain: return "sequential_chain";
    }
    return "unknown";
}

[[nodiscard]] constexpr StrategyKind strategy_for(Scenario s) noexcept
{
    switch (s) {
    case Scenario::baseline: return StrategyKind::exact_sync;
    case Scenario::reconstruction: return StrategyKind::teacher_forced;
    case Scenario::noisy_forecast: return StrategyKind::histogram_selection;
    case Scenario::fewshot: return StrategyKind::seed_sweep;
    case Scenario::parametric: return StrategyKind::sequential_chain;
    }
    return StrategyKind::exact_sync;
}

/// Exact synchronization: forecast straight from the stored terminal state.
[[nodiscard]] inline Trajectory run_baseline(const Trajectory& train, const StrategyConfig& cfg, std::size_t n_steps)
{
    const FittedModel model = fit(cfg.esn, train);
    return forecast(model, n_steps);
}

/// Teacher-forced denoising of the training trajectory itself. The readout
/// learns from the noisy next observations; positions inside the washout
/// window repeat the observations because the reservoir has not yet
/// synchronized there.
[[nodiscard]] inline Trajectory run_reconstruction(const Trajectory& train_noisy, const StrategyConfig& cfg)
{
    const FittedModel model = fit(cfg.esn, train_noisy);
    return reconstruct(model, train_noisy, cfg.esn.washout + 1);
}

inline constexpr double kDivergedScore = std::numeric_limits<double>::infinity();

/// Index of the smallest score; the lowest index wins ties. Returns
/// scores.size() when every score is infinite.
[[nodiscard]] inline std::size_t argmin_score(std::span<const double> scores) noexcept
{
    std::size_t best = scores.size();
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (scores[i] < kDivergedScore && (best == scores.size() || scores[i] < scores[best])) {
            best = i;
        }
    }
    return best;
}

struct CandidateSelection {
    Trajectory forecast;
    std::size_t selected_index = 0;
    std::vector<double> scores;  // per candidate; +inf for diverged ones
};

/// Histogram-guided candidate selection for noisy forecasting.
///
/// Fits once on the full noisy trajectory, then for every candidate perturbs
/// the last `warmup_length` observations with N(0, sigma^2) noise, re-drives
/// the reservoir through them from the state stored just before the warmup
/// window, forecasts, and scores the forecast's marginal histograms against
/// the training histograms. Returns the lowest-scoring candidate.
[[nodiscard]] inline CandidateSelection run_histogram_forecast(const Trajectory& train_noisy,
                                                               const StrategyConfig& cfg, std::size_t n_steps)
{
    cfg.validate();
    const std::size_t len = train_noisy.size();
    const std::size_t warmup = cfg.warmup_length;
    if (warmup + cfg.esn.washout + 2 > len) {
        throw InsufficientDataError("run_histogram_forecast: warmup window overlaps the washout");
    }
    const FittedModel model = fit(cfg.esn, train_noisy, FitOptions{len - warmup});
    const BinEdges edges = make_edges(train_noisy, kEdgePadding);
    const HistogramSignature reference = build_histogram(train_noisy, edges);

    std::vector<double> scores(cfg.n_candidates, kDivergedScore);
    std::vector<Trajectory> forecasts(cfg.n_candidates);
    parallel_for(
        cfg.n_candidates,
        [&](std::size_t c) {
            Xoshiro256 rng(derive_seed(cfg.seed, c));
            std::vector<Vec3> window(train_noisy.points.end() - static_cast<std::ptrdiff_t>(warmup),
                                     train_noisy.points.end());
            if (cfg.perturbation_sigma > 0.0) {
                for (auto& p : window) {
                    for (int k = 0; k < 3; ++k) {
                        p[k] += cfg.perturbation_sigma * rng.normal();
                    }
                }
            }
            const State r = synchronize(model, *model.checkpoint_state,
                                        std::span<const Vec3>(window.data(), window.size() - 1));
            try {
                forecasts[c] = forecast(model, r, window.back(), n_steps);
                scores[c] = histogram_l2(reference, build_histogram(forecasts[c], edges));
            } catch (const DivergenceError&) {
                scores[c] = kDivergedScore;
            }
        },
        cfg.threads);

    const std::size_t best = argmin_score(scores);
    if (best == scores.size()) {
        throw DivergenceError("run_histogram_forecast: every candidate diverged");
    }
    return {std::move(forecasts[best]), best, std::move(scores)};
}

struct SeedSelection {
    Trajectory forecast;
    std::uint64_t selected_seed = 0;
    std::vector<double> scores;  // indexed by seed offset
    std::size_t n_samples = 0;   // regression rows per fit
};

/// Few-shot sweep: fit one small reservoir per seed (cfg.seed + i), forecast
/// from each exact terminal state, and keep the forecast whose histograms
/// best match the training data. Edges are widened by 20% because a short
/// sample underestimates the attractor extent.
[[nodiscard]] inline SeedSelection run_fewshot(const Trajectory& train, const StrategyConfig& cfg, std::size_t n_steps)
{
    cfg.validate();
    const BinEdges edges = make_edges(train, kFewShotEdgePadding);
    const HistogramSignature reference = build_histogram(train, edges);

    std::vector<double> scores(cfg.n_seeds, kDivergedScore);
    std::vector<Trajectory> forecasts(cfg.n_seeds);
    std::vector<std::size_t> samples(cfg.n_seeds, 0);
    parallel_for(
        cfg.n_seeds,
        [&](std::size_t i) {
            ReservoirConfig rc = cfg.fewshot_esn;
            rc.seed = cfg.seed + i;
            try {
                const FittedModel model = fit(rc, train);
                samples[i] = model.n_samples;
                forecasts[i] = forecast(model, n_steps);
                scores[i] = histogram_l2(reference, build_histogram(forecasts[i], edges));
            } catch (const DivergenceError&) {
                scores[i] = kDivergedScore;
            } catch (const NumericalError&) {
                scores[i] = kDivergedScore;
            }
        },
        cfg.threads);

    const std::size_t best = argmin_score(scores);
    if (best == scores.size()) {
        throw DivergenceError("run_fewshot: every seed diverged");
    }
    return {std::move(forecasts[best]), cfg.seed + best, std::move(scores), samples[best]};
}

/// Forecasts from a model after teacher-forcing `init` through its terminal
/// state. An empty `init` forecasts from the terminal state directly.
[[nodiscard]] inline Trajectory forecast_after_init(const FittedModel& model, const Trajectory& init,
                                                    std::size_t n_steps)
{
    if (init.empty()) {
        return forecast(model, n_steps);
    }
    const State r = synchronize(model, model.terminal_state,
                                std::span<const Vec3>(init.points.data(), init.size() - 1));
    return forecast(model, r, init.back(), n_steps);
}

/// Parametric generalization: chain the training sequences through one
/// reservoir, synchronize to the test regime with the init sequence, then
/// forecast.
[[nodiscard]] inline Trajectory run_parametric(std::span<const Trajectory> trains, const Trajectory& init,
                                               const StrategyConfig& cfg, std::size_t n_steps)
{
    const FittedModel model = fit_sequential(cfg.esn, trains);
    return forecast_after_init(model, init, n_steps);
}

/// Variants the strategies are compared against.
namespace ablation {

/// Discard r* and re-warm a zero state on the last `replay` training points
/// before forecasting.
[[nodiscard]] inline Trajectory warmup_replay_forecast(const FittedModel& model, const Trajectory& train,
                                                       std::size_t n_steps, std::size_t replay = 100)
{
    if (replay < 1 || replay > train.size()) {
        throw InvalidArgument("warmup_replay_forecast: replay length out of range");
    }
    const auto tail = std::span<const Vec3>(train.points).last(replay);
    const State r = synchronize(model, zero_state(model.reservoir), tail.first(replay - 1));
    return forecast(model, r, tail.back(), n_steps);
}

[[nodiscard]] inline Trajectory warmup_replay_forecast(const Trajectory& train, const StrategyConfig& cfg,
                                                       std::size_t n_steps, std::size_t replay = 100)
{
    return warmup_replay_forecast(fit(cfg.esn, train), train, n_steps, replay);
}

/// Parametric pipeline with every training sequence started from zero and
/// washed out on its own.
[[nodiscard]] inline Trajectory independent_parametric(std::span<const Trajectory> trains, const Trajectory& init,
                                                       const StrategyConfig& cfg, std::size_t n_steps)
{
    FitOptions opts;
    opts.chain = ChainPolicy::independent;
    const FittedModel model = fit_sequential(cfg.esn, trains, opts);
    return forecast_after_init(model, init, n_steps);
}

} // namespace ablation

} // namespace adaptesn
