#pragma once

// Benchmark runner: pair data in, E1-E12 reports out.
//
// A run produces two JSON documents. The report holds everything that is a
// pure function of the configuration (scores, selections, configuration
// echo) and is byte-identical across repeated runs. Wall-clock timings go to
// a sidecar file next to it (`<report>.timings.json`).

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "adaptesn/error.hpp"
#include "adaptesn/esn.hpp"
#include "adaptesn/metrics.hpp"
#include "adaptesn/model_io.hpp"
#include "adaptesn/pairs.hpp"
#include "adaptesn/strategies.hpp"
#include "adaptesn/trajectory_io.hpp"

namespace adaptesn {

inline constexpr int kReportSchemaVersion = 1;
inline constexpr const char* kDataDirEnv = "ADAPTESN_DATA_DIR";

struct RunConfig {
    std::uint64_t master_seed = 42;
    std::vector<int> pairs{1, 2, 3, 4, 5, 6, 7, 8, 9};
    /// Load pair files from here; synthesize in memory when unset.
    std::optional<std::filesystem::path> data_dir;
    std::filesystem::path output_path = "report.json";
    /// Per-pair patches keyed "1".."9", plus "all" applied first. Keys are
    /// PairSpec and StrategyConfig field names.
    nlohmann::json overrides = nlohmann::json::object();
    double time_budget = 90.0;
    /// Save the fitted model of each pair here when set.
    std::optional<std::filesystem::path> models_dir;
    /// Replace every prediction with the ground truth (plumbing check).
    bool oracle_predictions = false;

    void validate() const
    {
        if (pairs.empty()) {
            throw InvalidArgument("RunConfig: pairs must be nonempty");
        }
        for (int p : pairs) {
            if (p < 1 || p > 9) {
                throw InvalidArgument("RunConfig: pair ids must be in 1..9");
            }
        }
        if (!(time_budget > 0.0)) {
            throw InvalidArgument("RunConfig: time_budget must be positive");
        }
        if (!overrides.is_object()) {
            throw InvalidArgument("RunConfig: overrides must be an object");
        }
    }
};

struct EvalReport {
    int eval_id = 0;
    int pair_id = 0;
    MetricKind metric = MetricKind::short_time;
    StrategyKind strategy = StrategyKind::exact_sync;
    double raw_error = 0.0;
    double reference_error = 0.0;
    double normalized_score = 0.0;
    std::uint64_t seed = 0;
    double runtime_seconds = 0.0;  // shared pair runtime; not part of the report file
};

struct PairResult {
    int pair_id = 0;
    Scenario scenario = Scenario::baseline;
    StrategyKind strategy = StrategyKind::exact_sync;
    std::vector<EvalReport> evals;
    nlohmann::json details = nlohmann::json::object();
    std::optional<std::string> error;
    double runtime_seconds = 0.0;
};

struct RunResult {
    RunConfig config;
    std::vector<PairResult> pairs;
    double total_seconds = 0.0;

    [[nodiscard]] std::vector<EvalReport> evaluations() const
    {
        std::vector<EvalReport> all;
        for (const auto& p : pairs) {
            all.insert(all.end(), p.evals.begin(), p.evals.end());
        }
        std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.eval_id < b.eval_id; });
        return all;
    }
};

// ---------------------------------------------------------------- overrides

namespace detail {

inline void apply_pair_override(PairSpec& spec, const std::string& key, const nlohmann::json& v)
{
    if (key == "noise_level") spec.noise_level = v.get<double>();
    else if (key == "rho_test") spec.rho_test = v.get<double>();
    else if (key == "rho_train") spec.rho_train = v.get<std::vector<double>>();
    else if (key == "train_lengths") spec.train_lengths = v.get<std::vector<std::size_t>>();
    else if (key == "init_length") spec.init_length = v.get<std::size_t>();
    else if (key == "forecast_length") spec.forecast_length = v.get<std::size_t>();
    else if (key == "transient") spec.transient = v.get<std::size_t>();
    else if (key == "dt") spec.dt = v.get<double>();
    else throw InvalidArgument("unknown override key '" + key + "'");
}

inline bool apply_strategy_override(StrategyConfig& cfg, const std::string& key, const nlohmann::json& v)
{
    if (key == "esn") from_json(v, cfg.esn);
    else if (key == "fewshot_esn") from_json(v, cfg.fewshot_esn);
    else if (key == "n_candidates") cfg.n_candidates = v.get<std::size_t>();
    else if (key == "perturbation_sigma") cfg.perturbation_sigma = v.get<double>();
    else if (key == "warmup_length") cfg.warmup_length = v.get<std::size_t>();
    else if (key == "n_seeds") cfg.n_seeds = v.get<std::size_t>();
    else if (key == "threads") cfg.threads = v.get<std::size_t>();
    else return false;
    return true;
}

inline void apply_overrides(const nlohmann::json& patch, PairSpec& spec, StrategyConfig& cfg)
{
    if (!patch.is_object()) {
        throw InvalidArgument("overrides: each entry must be an object");
    }
    try {
        for (const auto& [key, value] : patch.items()) {
            if (!apply_strategy_override(cfg, key, value)) {
                apply_pair_override(spec, key, value);
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("overrides: ") + e.what());
    }
}

} // namespace detail

/// Pair description and strategy settings after applying overrides. The
/// reservoir and sweep seeds are the master seed.
inline void resolve_pair(const RunConfig& run, int pair_id, PairSpec& spec, StrategyConfig& cfg)
{
    spec = standard_pair_spec(pair_id);
    cfg = StrategyConfig{};
    cfg.seed = run.master_seed;
    cfg.esn.seed = run.master_seed;
    if (run.overrides.contains("all")) {
        detail::apply_overrides(run.overrides.at("all"), spec, cfg);
    }
    const std::string key = std::to_string(pair_id);
    if (run.overrides.contains(key)) {
        detail::apply_overrides(run.overrides.at(key), spec, cfg);
    }
    for (const auto& [k, _] : run.overrides.items()) {
        if (k != "all" && (k.size() != 1 || k[0] < '1' || k[0] > '9')) {
            throw InvalidArgument("overrides: unknown section '" + k + "' (use \"all\" or \"1\"..\"9\")");
        }
    }
    spec.validate();
    cfg.validate();
}

// ---------------------------------------------------------------- pair files

[[nodiscard]] inline std::filesystem::path pair_dir(const std::filesystem::path& root, int pair_id)
{
    return root / ("pair" + std::to_string(pair_id));
}

[[nodiscard]] inline std::string train_file_name(std::size_t index, std::size_t count)
{
    return count == 1 ? std::string("train.txt") : "train" + std::to_string(index) + ".txt";
}

inline void save_pair(const std::filesystem::path& root, const PairSpec& spec, const PairData& data)
{
    const auto dir = pair_dir(root, spec.pair_id);
    std::filesystem::create_directories(dir);
    for (std::size_t i = 0; i < data.train.size(); ++i) {
        save_trajectory(dir / train_file_name(i, data.train.size()), data.train[i]);
    }
    if (data.init) {
        save_trajectory(dir / "init.txt", *data.init);
    }
    save_trajectory(dir / "truth.txt", data.truth);
}

[[nodiscard]] inline PairData load_pair(const std::filesystem::path& root, const PairSpec& spec)
{
    const auto dir = pair_dir(root, spec.pair_id);
    PairData data;
    const std::size_t count = spec.train_lengths.size();
    for (std::size_t i = 0; i < count; ++i) {
        data.train.push_back(load_trajectory(dir / train_file_name(i, count)));
    }
    if (spec.scenario == Scenario::parametric) {
        data.init = load_trajectory(dir / "init.txt");
    }
    data.truth = load_trajectory(dir / "truth.txt");
    return data;
}

// ---------------------------------------------------------------- evaluation

namespace detail {

inline constexpr std::uint64_t kReferenceTag = 200;

[[nodiscard]] inline Trajectory persistence(const Vec3& last, std::size_t n, double dt)
{
    return {std::vector<Vec3>(n, last), dt};
}

} // namespace detail

/// Runs one pair end to end. Errors are caught and recorded in the result.
[[nodiscard]] inline PairResult run_pair(int pair_id, const RunConfig& run)
{
    PairResult result;
    result.pair_id = pair_id;
    const auto start = std::chrono::steady_clock::now();
    try {
        PairSpec spec;
        StrategyConfig cfg;
        resolve_pair(run, pair_id, spec, cfg);
        result.scenario = spec.scenario;
        result.strategy = strategy_for(spec.scenario);

        const PairData data = run.data_dir ? load_pair(*run.data_dir, spec) : generate_pair(spec, run.master_seed);
        const Trajectory& observed = data.train.back();
        const std::size_t horizon = data.truth.size();

        Trajectory prediction;
        std::optional<FittedModel> model;
        auto& details = result.details;
        switch (result.strategy) {
        case StrategyKind::exact_sync:
            if (run.oracle_predictions) {
                prediction = data.truth;
            } else {
                model = fit(cfg.esn, observed);
                prediction = forecast(*model, horizon);
            }
            break;
        case StrategyKind::teacher_forced:
            prediction = run.oracle_predictions ? data.truth : run_reconstruction(observed, cfg);
            if (run.models_dir) {
                model = fit(cfg.esn, observed);
            }
            break;
        case StrategyKind::histogram_selection: {
            if (run.oracle_predictions) {
                prediction = data.truth;
                break;
            }
            auto sel = run_histogram_forecast(observed, cfg, horizon);
            details["selected_candidate"] = sel.selected_index;
            details["candidate_scores"] = sel.scores;
            prediction = std::move(sel.forecast);
            if (run.models_dir) {
                model = fit(cfg.esn, observed);
            }
            break;
        }
        case StrategyKind::seed_sweep: {
            if (run.oracle_predictions) {
                prediction = data.truth;
                break;
            }
            auto sel = run_fewshot(observed, cfg, horizon);
            details["selected_seed"] = sel.selected_seed;
            details["effective_samples"] = sel.n_samples;
            details["seed_scores"] = sel.scores;
            prediction = std::move(sel.forecast);
            if (run.models_dir) {
                ReservoirConfig rc = cfg.fewshot_esn;
                rc.seed = sel.selected_seed;
                model = fit(rc, observed);
            }
            break;
        }
        case StrategyKind::sequential_chain:
            if (run.oracle_predictions) {
                prediction = data.truth;
            } else {
                model = fit_sequential(cfg.esn, data.train);
                prediction = forecast_after_init(*model, data.init.value_or(Trajectory{}), horizon);
                double z_max = prediction[0].z();
                for (const auto& p : prediction.points) {
                    z_max = std::max(z_max, p.z());
                }
                details["forecast_z_max"] = z_max;
                details["z_bound"] = attractor_z_bound(spec.rho_test);
            }
            break;
        }
        if (run.models_dir && model) {
            save_model(*run.models_dir / ("pair" + std::to_string(pair_id) + ".model.json"), *model);
        }

        const Vec3 last_observed = data.init && !data.init->empty() ? data.init->back() : observed.back();
        for (const auto& slot : pair_evals(pair_id)) {
            EvalReport ev;
            ev.eval_id = slot.eval_id;
            ev.pair_id = pair_id;
            ev.metric = slot.kind;
            ev.strategy = result.strategy;
            ev.seed = run.master_seed;
            switch (slot.kind) {
            case MetricKind::short_time:
                ev.raw_error = short_time_rmse(prediction, data.truth);
                ev.reference_error =
                    short_time_rmse(detail::persistence(last_observed, kShortTimeHorizon, data.truth.dt), data.truth);
                break;
            case MetricKind::long_time: {
                const double padding = spec.scenario == Scenario::fewshot ? kFewShotEdgePadding : kEdgePadding;
                const BinEdges edges = make_edges(observed, padding);
                const HistogramSignature truth_hist = build_histogram(data.truth, edges);
                ev.raw_error = histogram_l2(build_histogram(prediction, edges), truth_hist);
                // Naive baseline: one training window of the forecast length
                // at a uniformly random phase.
                const std::size_t window = std::min(prediction.size(), observed.size());
                Xoshiro256 rng(derive_seed(derive_seed(run.master_seed, static_cast<std::uint64_t>(pair_id)),
                                           detail::kReferenceTag));
                const std::size_t offset = rng.below(observed.size() - window + 1);
                ev.reference_error = histogram_l2(build_histogram(observed.slice(offset, window), edges), truth_hist);
                break;
            }
            case MetricKind::reconstruction:
                ev.raw_error = reconstruction_error(prediction, data.truth);
                ev.reference_error = reconstruction_error(observed, data.truth);
                break;
            }
            ev.normalized_score = normalize_score(ev.raw_error, ev.reference_error);
            result.evals.push_back(ev);
        }
    } catch (const std::exception& e) {
        result.evals.clear();
        result.error = e.what();
    }
    result.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    for (auto& ev : result.evals) {
        ev.runtime_seconds = result.runtime_seconds;
    }
    return result;
}

[[nodiscard]] inline RunResult run_all(const RunConfig& config)
{
    config.validate();
    RunResult result;
    result.config = config;
    const auto start = std::chrono::steady_clock::now();
    std::vector<int> pairs = config.pairs;
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
    for (int p : pairs) {
        result.pairs.push_back(run_pair(p, config));
    }
    result.total_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

// ---------------------------------------------------------------- reports

[[nodiscard]] inline std::string eval_name(int eval_id) { return "E" + std::to_string(eval_id); }

[[nodiscard]] inline nlohmann::json config_to_json(const RunConfig& c)
{
    return nlohmann::json{
        {"master_seed", c.master_seed},
        {"pairs", c.pairs},
        {"data_source", c.data_dir ? c.data_dir->generic_string() : std::string("synthesized")},
        {"time_budget", c.time_budget},
        {"overrides", c.overrides},
        {"oracle_predictions", c.oracle_predictions},
    };
}

/// The deterministic report document.
[[nodiscard]] inline nlohmann::json report_to_json(const RunResult& r)
{
    auto evals = nlohmann::json::array();
    double score_sum = 0.0;
    const auto all = r.evaluations();
    for (const auto& ev : all) {
        evals.push_back({{"eval", eval_name(ev.eval_id)},
                         {"pair", ev.pair_id},
                         {"metric", std::string(to_string(ev.metric))},
                         {"strategy", std::string(to_string(ev.strategy))},
                         {"raw_error", ev.raw_error},
                         {"reference_error", ev.reference_error},
                         {"normalized_score", ev.normalized_score},
                         {"seed", ev.seed}});
        score_sum += ev.normalized_score;
    }
    auto pairs = nlohmann::json::array();
    auto failed = nlohmann::json::array();
    for (const auto& p : r.pairs) {
        nlohmann::json entry{{"pair", p.pair_id},
                             {"scenario", std::string(to_string(p.scenario))},
                             {"strategy", std::string(to_string(p.strategy))},
                             {"status", p.error ? "error" : "ok"},
                             {"details", p.details}};
        if (p.error) {
            entry["error"] = *p.error;
            failed.push_back(p.pair_id);
        }
        pairs.push_back(std::move(entry));
    }
    return nlohmann::json{
        {"schema_version", kReportSchemaVersion},
        {"note", "normalized_score = 100 * (1 - 2 * min(raw_error / reference_error, 1)); reference errors come from "
                 "naive baselines (persistence, random training window, raw noisy input). Not comparable to any "
                 "official leaderboard."},
        {"config", config_to_json(r.config)},
        {"evaluations", std::move(evals)},
        {"pairs", std::move(pairs)},
        {"summary",
         {{"evaluations", all.size()},
          {"mean_normalized_score", all.empty() ? 0.0 : score_sum / static_cast<double>(all.size())},
          {"failed_pairs", std::move(failed)}}},
    };
}

/// Wall-clock sidecar document.
[[nodiscard]] inline nlohmann::json timings_to_json(const RunResult& r)
{
    auto pairs = nlohmann::json::array();
    for (const auto& p : r.pairs) {
        auto evals = nlohmann::json::array();
        for (const auto& ev : p.evals) {
            evals.push_back(eval_name(ev.eval_id));
        }
        pairs.push_back({{"pair", p.pair_id}, {"seconds", p.runtime_seconds}, {"evaluations", std::move(evals)}});
    }
    return nlohmann::json{{"schema_version", kReportSchemaVersion},
                          {"pairs", std::move(pairs)},
                          {"total_seconds", r.total_seconds},
                          {"time_budget", r.config.time_budget},
                          {"within_budget", r.total_seconds < r.config.time_budget}};
}

[[nodiscard]] inline std::filesystem::path timings_path(const std::filesystem::path& report)
{
    auto p = report;
    p.replace_extension();
    return p.string() + ".timings.json";
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j)
{
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw DataError("cannot open '" + path.string() + "' for writing");
    }
    os << j.dump(2) << '\n';
}

inline void write_reports(const RunResult& r, const std::filesystem::path& report_path)
{
    write_json(report_path, report_to_json(r));
    write_json(timings_path(report_path), timings_to_json(r));
}

// ---------------------------------------------------------------- config files

/// Reads a JSON config whose keys mirror RunConfig field names
/// (master_seed, pairs, data_dir, output_path, overrides, time_budget,
/// models_dir) into `config`; keys absent from the file keep their value.
inline void load_run_config(const std::filesystem::path& path, RunConfig& config)
{
    std::ifstream is(path);
    if (!is) {
        throw DataError("missing config file '" + path.string() + "'");
    }
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    if (!j.is_object()) {
        throw DataError(path.string() + ": config must be a JSON object");
    }
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "master_seed") config.master_seed = value.get<std::uint64_t>();
            else if (key == "pairs") config.pairs = value.get<std::vector<int>>();
            else if (key == "data_dir") config.data_dir = value.get<std::string>();
            else if (key == "output_path") config.output_path = value.get<std::string>();
            else if (key == "overrides") config.overrides = value;
            else if (key == "time_budget") config.time_budget = value.get<double>();
            else if (key == "models_dir") config.models_dir = value.get<std::string>();
            else throw DataError(path.string() + ": unknown config key '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

/// Synthesizes and writes every requested pair under `root`.
inline void generate_data(const RunConfig& run, const std::filesystem::path& root)
{
    run.validate();
    for (int p : run.pairs) {
        PairSpec spec;
        StrategyConfig cfg;
        resolve_pair(run, p, spec, cfg);
        save_pair(root, spec, generate_pair(spec, run.master_seed));
    }
}

} // namespace adaptesn
