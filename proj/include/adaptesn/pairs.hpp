#pragma once

// The nine benchmark pairs and their deterministic synthesis.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "adaptesn/error.hpp"
#include "adaptesn/lorenz.hpp"
#include "adaptesn/rng.hpp"

namespace adaptesn {

enum class Scenario { baseline, reconstruction, noisy_forecast, fewshot, parametric };

[[nodiscard]] inline std::string_view to_string(Scenario s) noexcept
{
    switch (s) {
    case Scenario::baseline: return "baseline";
    case Scenario::reconstruction: return "reconstruction";
    case Scenario::noisy_forecast: return "noisy_forecast";
    case Scenario::fewshot: return "fewshot";
    case Scenario::parametric: return "parametric";
    }
    return "unknown";
}

[[nodiscard]] inline Scenario scenario_from_string(std::string_view name)
{
    for (auto s : {Scenario::baseline, Scenario::reconstruction, Scenario::noisy_forecast,
                   Scenario::fewshot, Scenario::parametric}) {
        if (to_string(s) == name) {
            return s;
        }
    }
    throw InvalidArgument("unknown scenario '" + std::string(name) + "'");
}

enum class MetricKind { short_time, long_time, reconstruction };

[[nodiscard]] inline std::string_view to_string(MetricKind m) noexcept
{
    switch (m) {
    case MetricKind::short_time: return "short_time";
    case MetricKind::long_time: return "long_time";
    case MetricKind::reconstruction: return "reconstruction";
    }
    return "unknown";
}

struct EvalSlot {
    int eval_id;  // 1..12
    MetricKind kind;
};

struct PairSpec {
    int pair_id = 1;
    Scenario scenario = Scenario::baseline;
    std::vector<std::size_t> train_lengths{10000};
    double noise_level = 0.0;
    std::vector<double> rho_train{28.0};
    double rho_test = 28.0;
    std::size_t init_length = 0;
    std::size_t forecast_length = 2000;
    double dt = 0.05;
    std::size_t transient = 1000;

    void validate() const
    {
        if (pair_id < 1 || pair_id > 9) {
            throw InvalidArgument("PairSpec: pair_id must be in 1..9");
        }
        if (train_lengths.empty() || train_lengths.size() != rho_train.size()) {
            throw InvalidArgument("PairSpec: train_lengths and rho_train must be nonempty and equal in size");
        }
        for (auto len : train_lengths) {
            if (len < 2) {
                throw InvalidArgument("PairSpec: training sequences need at least 2 steps");
            }
        }
        if (!(noise_level >= 0.0)) {
            throw InvalidArgument("PairSpec: noise_level must be >= 0");
        }
        if (forecast_length == 0) {
            throw InvalidArgument("PairSpec: forecast_length must be >= 1");
        }
        if (scenario == Scenario::parametric) {
            if (rho_train.size() != 3 || init_length != 100) {
                throw InvalidArgument("PairSpec: parametric pairs need 3 training rho values and init_length 100");
            }
        } else if (init_length != 0) {
            throw InvalidArgument("PairSpec: init_length is only used by parametric pairs");
        }
    }
};

/// Table of pair -> scenario, data, and evaluation ids.
[[nodiscard]] inline PairSpec standard_pair_spec(int pair_id)
{
    PairSpec s;
    s.pair_id = pair_id;
    switch (pair_id) {
    case 1: s.scenario = Scenario::baseline; break;
    case 2: s.scenario = Scenario::reconstruction; s.noise_level = 0.05; break;
    case 3: s.scenario = Scenario::noisy_forecast; s.noise_level = 0.05; break;
    case 4: s.scenario = Scenario::reconstruction; s.noise_level = 0.20; break;
    case 5: s.scenario = Scenario::noisy_forecast; s.noise_level = 0.20; break;
    case 6: s.scenario = Scenario::fewshot; s.train_lengths = {100}; break;
    case 7: s.scenario = Scenario::fewshot; s.train_lengths = {100}; s.noise_level = 0.05; break;
    case 8:
    case 9:
        s.scenario = Scenario::parametric;
        s.train_lengths = {10000, 10000, 10000};
        s.rho_train = {28.0, 30.0, 32.0};
        s.rho_test = pair_id == 8 ? 31.0 : 35.8;
        s.init_length = 100;
        break;
    default: throw InvalidArgument("standard_pair_spec: pair_id must be in 1..9");
    }
    if (s.scenario != Scenario::parametric) {
        s.rho_test = s.rho_train.front();
    }
    return s;
}

[[nodiscard]] inline std::vector<EvalSlot> pair_evals(int pair_id)
{
    using enum MetricKind;
    switch (pair_id) {
    case 1: return {{1, short_time}, {2, long_time}};
    case 2: return {{3, reconstruction}};
    case 3: return {{4, long_time}};
    case 4: return {{5, reconstruction}};
    case 5: return {{6, long_time}};
    case 6: return {{7, short_time}, {8, long_time}};
    case 7: return {{9, short_time}, {10, long_time}};
    case 8: return {{11, short_time}};
    case 9: return {{12, short_time}};
    default: throw InvalidArgument("pair_evals: pair_id must be in 1..9");
    }
}

struct PairData {
    std::vector<Trajectory> train;
    std::optional<Trajectory> init;
    /// Held-out reference: the clean continuation for forecasting pairs, the
    /// clean version of the training data for reconstruction pairs.
    Trajectory truth;
};

namespace detail {

inline Vec3 seeded_initial_condition(std::uint64_t seed)
{
    Xoshiro256 rng(seed);
    Vec3 ic(1.0, 1.0, 1.0);
    for (int c = 0; c < 3; ++c) {
        ic[c] += rng.uniform(-1.0, 1.0);
    }
    return ic;
}

// Stream tags under the per-pair seed.
inline constexpr std::uint64_t kTrainIcTag = 1;     // + sequence index
inline constexpr std::uint64_t kTestIcTag = 50;
inline constexpr std::uint64_t kNoiseTag = 100;

} // namespace detail

/// Synthesizes one pair. Every random choice flows from
/// `derive_seed(master_seed, pair_id)`; see README for the stream layout.
[[nodiscard]] inline PairData generate_pair(const PairSpec& spec, std::uint64_t master_seed)
{
    spec.validate();
    const std::uint64_t pair_seed = derive_seed(master_seed, static_cast<std::uint64_t>(spec.pair_id));
    Xoshiro256 noise_rng(derive_seed(pair_seed, detail::kNoiseTag));
    auto observe = [&](const Trajectory& clean) { return add_noise(clean, spec.noise_level, noise_rng); };

    PairData data;
    if (spec.scenario == Scenario::parametric) {
        for (std::size_t s = 0; s < spec.train_lengths.size(); ++s) {
            LorenzParams params;
            params.rho = spec.rho_train[s];
            const Vec3 ic = detail::seeded_initial_condition(derive_seed(pair_seed, detail::kTrainIcTag + s));
            data.train.push_back(observe(simulate(ic, spec.train_lengths[s], spec.dt, params, spec.transient)));
        }
        LorenzParams test;
        test.rho = spec.rho_test;
        const Vec3 ic = detail::seeded_initial_condition(derive_seed(pair_seed, detail::kTestIcTag));
        const Trajectory full = simulate(ic, spec.init_length + spec.forecast_length, spec.dt, test, spec.transient);
        data.init = observe(full.slice(0, spec.init_length));
        data.truth = full.slice(spec.init_length, spec.forecast_length);
        return data;
    }

    LorenzParams params;
    params.rho = spec.rho_train.front();
    const std::size_t train_len = spec.train_lengths.front();
    const Vec3 ic = detail::seeded_initial_condition(derive_seed(pair_seed, detail::kTrainIcTag));
    if (spec.scenario == Scenario::reconstruction) {
        const Trajectory clean = simulate(ic, train_len, spec.dt, params, spec.transient);
        data.train.push_back(observe(clean));
        data.truth = clean;
        return data;
    }
    const Trajectory full = simulate(ic, train_len + spec.forecast_length, spec.dt, params, spec.transient);
    data.train.push_back(observe(full.slice(0, train_len)));
    data.truth = full.slice(train_len, spec.forecast_length);
    return data;
}

} // namespace adaptesn
