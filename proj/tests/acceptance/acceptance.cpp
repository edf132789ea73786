// Acceptance suite: one PASS/FAIL line per criterion. Thresholds are fixed
// constants below. Exit status 1 on any unexpected result.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <iostream>
#include <sstream>
#include <thread>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "adaptesn/adaptesn.hpp"
#include "oracles.hpp"

using namespace adaptesn;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSeed = 42;

// Criterion thresholds.
constexpr double kRidgeTolerance = 1e-8;
constexpr double kMetricTolerance = 1e-12;
constexpr double kRk4RatioLow = 12.0;
constexpr double kRk4RatioHigh = 20.0;
constexpr double kSpectralTolerance = 0.01;
constexpr double kContractionDistance = 1e-4;
constexpr int kContractionMinSeeds = 9;
constexpr double kSyncTolerance = 1e-12;
constexpr double kBaselineRmseFraction = 0.05;
constexpr double kBaselineHistogram = 0.05;
constexpr int kFewShotMinReplications = 4;
constexpr std::size_t kFewShotSamples = 88;
constexpr double kZBoundFactor = 1.2;
constexpr double kGramTolerance = 1e-8;
constexpr double kRunBudgetSeconds = 90.0;
// Largest possible histogram L2 (three coordinates, each at most 2); scored
// for a forecast that diverged.
constexpr double kWorstHistogram = 6.0;

// Criteria that fail on this implementation for reasons analysed in the
// README ("Known shortfall"). They still print FAIL; they do not fail the
// test run. Any other failure does, and so does a known failure that starts
// passing, so this list cannot go stale.
const std::set<std::string> kKnownFailures{"C11"};

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double z_max(const Trajectory& t)
{
    double z = -INFINITY;
    for (const auto& p : t.points) {
        z = std::max(z, p.z());
    }
    return z;
}

// ------------------------------------------------------------------ C1

Outcome ridge_oracle()
{
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 20; ++s) {
        Xoshiro256 rng(derive_seed(kSeed, 1000 + s));
        const std::size_t n = 5 + rng.below(46);
        const std::size_t rows = n + 5 + rng.below(3 * n);
        std::vector<State> states;
        std::vector<Vec3> targets;
        for (std::size_t i = 0; i < rows; ++i) {
            State st(static_cast<Eigen::Index>(n));
            for (auto& v : st) {
                v = rng.uniform(-1, 1);
            }
            states.push_back(st);
            targets.emplace_back(rng.normal(), rng.normal(), rng.normal());
        }
        ReadoutAccumulator acc(n);
        accumulate(acc, states, targets);
        const double lambda = std::pow(10.0, rng.uniform(-6, 0));
        const Eigen::MatrixXd expected = oracle::ridge_inverse(oracle::gram_loop(states), acc.cross, lambda);
        const Eigen::MatrixXd got = solve_readout(acc, lambda).w_out;
        worst = std::max(worst, (got - expected).norm() / expected.norm());
    }
    const double t = seconds_since(t0);
    return {worst < kRidgeTolerance && t < 1.0,
            fmt("max relative error %.2e over 20 instances (< %.0e), %.3f s (< 1 s)", worst, kRidgeTolerance, t)};
}

// ------------------------------------------------------------------ C2

Outcome metric_oracles()
{
    const auto t0 = std::chrono::steady_clock::now();
    double worst_rmse = 0, worst_hist = 0, worst_rec = 0;
    for (std::uint64_t s = 0; s < 100; ++s) {
        Xoshiro256 rng(derive_seed(kSeed, 2000 + s));
        const std::size_t len = 20 + rng.below(400);
        const auto a = oracle::random_trajectory(len, rng());
        const auto b = oracle::random_trajectory(len, rng(), 5.0 + 10.0 * rng.uniform01());
        worst_rmse = std::max(worst_rmse, std::abs(short_time_rmse(a, b) - oracle::rmse_loop(a, b, 20)));
        worst_rec = std::max(worst_rec, std::abs(reconstruction_error(a, b) - oracle::rmse_loop(a, b, len)));
        const BinEdges edges = make_edges(a, kEdgePadding);
        const double h = histogram_l2(build_histogram(a, edges), build_histogram(b, edges));
        worst_hist = std::max(worst_hist, std::abs(h - oracle::histogram_l2_loop(a, b, edges)));
    }
    const double t = seconds_since(t0);
    const double worst = std::max({worst_rmse, worst_hist, worst_rec});
    return {worst < kMetricTolerance && t < 1.0,
            fmt("max abs error rmse %.1e, histogram %.1e, reconstruction %.1e (< %.0e), %.3f s (< 1 s)", worst_rmse,
                worst_hist, worst_rec, kMetricTolerance, t)};
}

// ------------------------------------------------------------------ C3

Outcome rk4_order()
{
    const auto t0 = std::chrono::steady_clock::now();
    const LorenzParams p;
    const Vec3 ic = simulate(Vec3(1, 1, 1), 1, 0.05, p, 1000).front();
    // Reference: 2000 steps of dt = 0.0005 over one time unit.
    const Vec3 ref = oracle::fine_integrate(ic, 1.0, 2000, p);
    const double e1 = (simulate(ic, 21, 0.05, p).back() - ref).norm();
    const double e2 = (simulate(ic, 41, 0.025, p).back() - ref).norm();
    const double ratio = e1 / e2;
    const double t = seconds_since(t0);
    return {ratio >= kRk4RatioLow && ratio <= kRk4RatioHigh && t < 5.0,
            fmt("error ratio %.2f (in [%.0f, %.0f]), errors %.3e / %.3e, %.3f s (< 5 s)", ratio, kRk4RatioLow,
                kRk4RatioHigh, e1, e2, t)};
}

// ------------------------------------------------------------------ C4

Outcome spectral_scaling()
{
    std::ostringstream os;
    bool pass = true;
    for (std::size_t n : {300u, 1000u}) {
        ReservoirConfig cfg;
        cfg.n_units = n;
        cfg.seed = kSeed;
        const Reservoir res = build_reservoir(cfg);
        const double power = oracle::power_growth_rate(res.w_res(), 10000, derive_seed(kSeed, 4000 + n));
        const double rel = std::abs(power - cfg.spectral_radius) / cfg.spectral_radius;
        pass = pass && rel < kSpectralTolerance;
        os << fmt("N=%zu radius %.4f (rel %.2e); ", n, power, rel);
    }
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 10; ++s) {
        Xoshiro256 rng(derive_seed(kSeed, 4100 + s));
        Eigen::MatrixXd a(50, 50);
        for (Eigen::Index i = 0; i < a.size(); ++i) {
            a.data()[i] = rng.uniform(-1, 1);
        }
        const double est = estimate_spectral_radius(a, kSpectralIterations, s);
        const double ref = oracle::power_growth_rate(a, 10000, derive_seed(kSeed, 4200 + s));
        worst = std::max(worst, std::abs(est - ref) / ref);
    }
    pass = pass && worst < kSpectralTolerance;
    os << fmt("estimator vs 10k-iteration oracle max rel %.2e on 10 matrices (< %.0e)", worst, kSpectralTolerance);
    return {pass, os.str()};
}

// ------------------------------------------------------------------ C5

Outcome contraction()
{
    const auto t0 = std::chrono::steady_clock::now();
    int contracted = 0;
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 10; ++s) {
        ReservoirConfig cfg;
        cfg.seed = kSeed + s;
        const Reservoir res = build_reservoir(cfg);
        Xoshiro256 rng(derive_seed(kSeed, 5000 + s));
        const Vec3 ic(1 + rng.uniform(-1, 1), 1 + rng.uniform(-1, 1), 1 + rng.uniform(-1, 1));
        const Trajectory data = simulate(ic, 1000, 0.05, {}, 1000);
        const Trajectory input = InputScaling::from_data(std::span(&data, 1)).to_model(data);
        State a(res.size()), dir(res.size());
        for (Eigen::Index i = 0; i < a.size(); ++i) {
            a[i] = rng.uniform(-0.5, 0.5);
            dir[i] = rng.normal();
        }
        State b = a + dir.normalized();
        StateUpdater up(res);
        for (const auto& x : input.points) {
            up.step(a, x);
            up.step(b, x);
        }
        const double d = (a - b).norm();
        worst = std::max(worst, d);
        contracted += d <= kContractionDistance ? 1 : 0;
    }
    const double t = seconds_since(t0);
    return {contracted >= kContractionMinSeeds && t < 10.0,
            fmt("%d/10 seeds reach distance <= %.0e (need %d), worst %.2e, %.2f s (< 10 s)", contracted,
                kContractionDistance, kContractionMinSeeds, worst, t)};
}

// ------------------------------------------------------------------ C6

Outcome exact_sync()
{
    ReservoirConfig cfg;
    cfg.seed = kSeed;
    const PairData d0 = generate_pair(standard_pair_spec(1), kSeed);
    const FittedModel m0 = fit(cfg, d0.train[0]);
    // Independent re-drive: dense products, fresh reservoir, explicit scaling.
    const Reservoir res = build_reservoir(cfg);
    State r = zero_state(res);
    for (std::size_t t = 0; t + 1 < d0.train[0].size(); ++t) {
        r = update_state(res, r, d0.train[0][t] / m0.scaling.scale, ProductPath::dense);
    }
    const double sync_err = (r - m0.terminal_state).cwiseAbs().maxCoeff();

    double sum_exact = 0, sum_replay = 0;
    for (std::uint64_t s = 0; s < 10; ++s) {
        const PairData d = s == 0 ? d0 : generate_pair(standard_pair_spec(1), kSeed + s);
        ReservoirConfig c = cfg;
        c.seed = kSeed + s;
        const FittedModel m = s == 0 ? m0 : fit(c, d.train[0]);
        sum_exact += short_time_rmse(forecast(m, kShortTimeHorizon), d.truth);
        Trajectory replay;
        try {
            replay = ablation::warmup_replay_forecast(m, d.train[0], kShortTimeHorizon);
            sum_replay += short_time_rmse(replay, d.truth);
        } catch (const DivergenceError&) {
            sum_replay += INFINITY;
        }
    }
    const double mean_exact = sum_exact / 10, mean_replay = sum_replay / 10;
    return {sync_err <= kSyncTolerance && mean_exact < mean_replay,
            fmt("r* vs re-driven max diff %.1e (<= %.0e); mean 20-step RMSE over 10 seeds: exact %.4g < replay %.4g",
                sync_err, kSyncTolerance, mean_exact, mean_replay)};
}

// ------------------------------------------------------------------ C7

Outcome baseline_quality()
{
    const auto t0 = std::chrono::steady_clock::now();
    const PairSpec spec = standard_pair_spec(1);
    const PairData d = generate_pair(spec, kSeed);
    StrategyConfig cfg;
    cfg.esn.seed = kSeed;
    const Trajectory f = run_baseline(d.train[0], cfg, spec.forecast_length);
    const Vec3 sd = d.train[0].coordinate_std();
    double worst_fraction = 0.0;
    for (int c = 0; c < 3; ++c) {
        double ss = 0;
        for (std::size_t t = 0; t < kShortTimeHorizon; ++t) {
            ss += std::pow(f[t][c] - d.truth[t][c], 2);
        }
        worst_fraction = std::max(worst_fraction, std::sqrt(ss / kShortTimeHorizon) / sd[c]);
    }
    const BinEdges edges = make_edges(d.train[0], kEdgePadding);
    const double hist = histogram_l2(build_histogram(f, edges), build_histogram(d.train[0], edges));
    const double t = seconds_since(t0);
    return {worst_fraction < kBaselineRmseFraction && hist < kBaselineHistogram && t < 30.0,
            fmt("20-step RMSE max %.2e of coordinate std (< %.2f), 2000-step histogram L2 %.4f (< %.2f), %.1f s (< 30 s)",
                worst_fraction, kBaselineRmseFraction, hist, kBaselineHistogram, t)};
}

// ------------------------------------------------------------------ C8

Outcome denoising()
{
    std::ostringstream os;
    bool pass = true;
    for (int pair : {2, 4}) {
        const PairSpec spec = standard_pair_spec(pair);
        const PairData d = generate_pair(spec, kSeed);
        StrategyConfig cfg;
        cfg.esn.seed = kSeed;
        const double rec = reconstruction_error(run_reconstruction(d.train[0], cfg), d.truth);
        const double raw = reconstruction_error(d.train[0], d.truth);
        pass = pass && rec < raw;
        os << fmt("noise %.2f: reconstruction %.4f < raw %.4f; ", spec.noise_level, rec, raw);
    }
    return {pass, os.str()};
}

// ------------------------------------------------------------------ C9

Outcome histogram_selection()
{
    const PairSpec spec = standard_pair_spec(3);
    const PairData d = generate_pair(spec, kSeed);
    StrategyConfig cfg;
    cfg.seed = kSeed;
    cfg.esn.seed = kSeed;
    const auto sel = run_histogram_forecast(d.train[0], cfg, spec.forecast_length);
    const double chosen = sel.scores[sel.selected_index];
    const bool minimal = std::all_of(sel.scores.begin(), sel.scores.end(), [&](double s) { return chosen <= s; });

    cfg.perturbation_sigma = 0.0;
    const auto zero = run_histogram_forecast(d.train[0], cfg, spec.forecast_length);
    return {minimal && zero.selected_index == 0,
            fmt("selected %zu of %zu with score %.4g <= all; sigma=0 selects index %zu", sel.selected_index,
                sel.scores.size(), chosen, zero.selected_index)};
}

// ------------------------------------------------------------------ C10

Outcome fewshot_sweep()
{
    int dominated = 0;
    bool samples_ok = true;
    std::ostringstream os;
    for (std::uint64_t rep = 0; rep < 5; ++rep) {
        const PairSpec spec = standard_pair_spec(6);
        const PairData d = generate_pair(spec, kSeed + rep);
        StrategyConfig cfg;
        cfg.seed = kSeed + rep;
        const auto sel = run_fewshot(d.train[0], cfg, spec.forecast_length);
        std::vector<double> sorted = sel.scores;
        std::sort(sorted.begin(), sorted.end());
        const double median = 0.5 * (sorted[sorted.size() / 2 - 1] + sorted[sorted.size() / 2]);
        const double best = sel.scores[sel.selected_seed - cfg.seed];
        dominated += best <= median ? 1 : 0;
        samples_ok = samples_ok && sel.n_samples == kFewShotSamples;
        os << fmt("%.3g<=%.3g ", best, median);
    }
    return {dominated >= kFewShotMinReplications && samples_ok,
            fmt("best <= median in %d/5 replications (need %d) [", dominated, kFewShotMinReplications) + os.str() +
                fmt("]; effective samples %s %zu", samples_ok ? "==" : "!=", kFewShotSamples)};
}

// ------------------------------------------------------------------ C11

struct ParametricScore {
    std::size_t violations = 0;
    double histogram = 0.0;
};

ParametricScore score_parametric(const std::function<Trajectory()>& run, const PairSpec& spec,
                                 const PairData& d)
{
    const double bound = attractor_z_bound(spec.rho_test) * kZBoundFactor;
    const BinEdges edges = make_edges(d.truth, kEdgePadding);
    try {
        const Trajectory f = run();
        ParametricScore s;
        for (const auto& p : f.points) {
            s.violations += p.z() > bound ? 1 : 0;
        }
        s.histogram = histogram_l2(build_histogram(f, edges), build_histogram(d.truth, edges));
        return s;
    } catch (const DivergenceError&) {
        return {spec.forecast_length, kWorstHistogram};
    }
}

Outcome sequential_training()
{
    std::ostringstream os;
    bool bounded = true;
    for (int pair : {8, 9}) {
        const PairSpec spec = standard_pair_spec(pair);
        const PairData d = generate_pair(spec, kSeed);
        StrategyConfig cfg;
        cfg.esn.seed = kSeed;
        const Trajectory f = run_parametric(d.train, *d.init, cfg, spec.forecast_length);
        const double bound = attractor_z_bound(spec.rho_test) * kZBoundFactor;
        bounded = bounded && f.size() == spec.forecast_length && z_max(f) <= bound;
        os << fmt("rho %.1f z_max %.2f <= %.2f; ", spec.rho_test, z_max(f), bound);
    }

    // Chained accumulation against one concatenated regression matrix.
    double gram_rel = 0.0, cross_rel = 0.0;
    {
        const PairData d = generate_pair(standard_pair_spec(8), kSeed);
        ReservoirConfig cfg;
        cfg.n_units = 300;
        cfg.seed = kSeed;
        const Reservoir res = build_reservoir(cfg);
        const InputScaling scaling = InputScaling::from_data(d.train);
        std::vector<Trajectory> scaled;
        for (const auto& t : d.train) {
            scaled.push_back(scaling.to_model(t));
        }
        const ChainAccumulation chain = accumulate_chain(res, scaled);
        std::vector<State> rows;
        std::vector<Vec3> targets;
        State r = zero_state(res);
        for (std::size_t s = 0; s < scaled.size(); ++s) {
            const std::size_t first = s == 0 ? cfg.washout : 0;
            for (std::size_t t = 0; t + 1 < scaled[s].size(); ++t) {
                r = update_state(res, r, scaled[s][t], ProductPath::dense);
                if (t >= first && t + 3 <= scaled[s].size()) {
                    rows.push_back(r);
                    targets.push_back(scaled[s][t + 1]);
                }
            }
        }
        Eigen::MatrixXd big(static_cast<Eigen::Index>(rows.size()), res.w_in().rows());
        Eigen::MatrixXd y(static_cast<Eigen::Index>(rows.size()), 3);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            big.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
            y.row(static_cast<Eigen::Index>(i)) = targets[i].transpose();
        }
        const Eigen::MatrixXd gram = big.transpose() * big;
        const Eigen::MatrixXd cross = big.transpose() * y;
        gram_rel = (chain.acc.gram - gram).norm() / gram.norm();
        cross_rel = (chain.acc.cross - cross).norm() / cross.norm();
        if (chain.acc.n_samples != rows.size()) {
            gram_rel = INFINITY;
        }
    }
    os << fmt("chained vs concatenated Gram rel %.1e, cross rel %.1e (< %.0e); ", gram_rel, cross_rel,
              kGramTolerance);

    // Ablation at the extrapolation regime.
    ParametricScore seq, ind;
    const PairSpec spec = standard_pair_spec(9);
    for (std::uint64_t s = 0; s < 10; ++s) {
        const PairData d = generate_pair(spec, kSeed + s);
        StrategyConfig cfg;
        cfg.esn.seed = kSeed + s;
        const auto a =
            score_parametric([&] { return run_parametric(d.train, *d.init, cfg, spec.forecast_length); }, spec, d);
        const auto b = score_parametric(
            [&] { return ablation::independent_parametric(d.train, *d.init, cfg, spec.forecast_length); }, spec, d);
        seq.violations += a.violations;
        seq.histogram += a.histogram / 10.0;
        ind.violations += b.violations;
        ind.histogram += b.histogram / 10.0;
    }
    const bool worse = ind.violations > seq.violations || ind.histogram > seq.histogram;
    os << fmt("10 seeds at rho 35.8: z-bound violations sequential %zu vs independent %zu, mean histogram "
              "%.4f vs %.4f (independent strictly worse on either: %s)",
              seq.violations, ind.violations, seq.histogram, ind.histogram, worse ? "yes" : "no");
    return {bounded && gram_rel < kGramTolerance && cross_rel < kGramTolerance && worse, os.str()};
}

// ------------------------------------------------------------------ C12, C13

std::string slurp(const fs::path& p)
{
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

struct CliRun {
    int status = -1;
    double seconds = 0.0;
};

CliRun run_cli(const fs::path& out)
{
    const std::string cmd = std::string(ADAPTESN_CLI_PATH) + " run --seed 42 --out " + out.string() + " > " +
                            (out.parent_path() / "stdout.txt").string() + " 2>&1";
    const auto t0 = std::chrono::steady_clock::now();
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, seconds_since(t0)};
}

fs::path scratch_dir()
{
    const fs::path dir = fs::temp_directory_path() / ("adaptesn-acceptance-" + std::to_string(::getpid()));
    fs::create_directories(dir / "a");
    fs::create_directories(dir / "b");
    return dir;
}

Outcome end_to_end(const fs::path& dir)
{
    const CliRun run = run_cli(dir / "a" / "report.json");
    std::size_t timed = 0;
    double sum = 0.0;
    if (run.status == 0 && fs::exists(dir / "a" / "report.timings.json")) {
        const auto t = nlohmann::json::parse(slurp(dir / "a" / "report.timings.json"));
        for (const auto& p : t.at("pairs")) {
            timed += p.contains("seconds") ? 1 : 0;
            sum += p.at("seconds").get<double>();
        }
    }
    return {run.status == 0 && run.seconds < kRunBudgetSeconds && timed == 9,
            fmt("exit %d, wall clock %.1f s (< %.0f s), per-pair timings for %zu/9 pairs (sum %.1f s), "
                "%u hardware threads",
                run.status, run.seconds, kRunBudgetSeconds, timed, sum, std::thread::hardware_concurrency())};
}

Outcome determinism(const fs::path& dir)
{
    const CliRun run = run_cli(dir / "b" / "report.json");
    const std::string a = slurp(dir / "a" / "report.json");
    const std::string b = slurp(dir / "b" / "report.json");
    const bool same = run.status == 0 && !a.empty() && a == b;
    return {same, fmt("second run exit %d; reports %s (%zu bytes)", run.status, same ? "byte-identical" : "DIFFER",
                      a.size())};
}

} // namespace

int main()
{
    struct Criterion {
        const char* name;
        std::function<Outcome()> check;
    };
    const fs::path dir = scratch_dir();
    const std::vector<Criterion> criteria{
        {"C1  ridge oracle equivalence", ridge_oracle},
        {"C2  metric oracle equivalence", metric_oracles},
        {"C3  RK4 convergence order", rk4_order},
        {"C4  spectral scaling", spectral_scaling},
        {"C5  echo-state contraction", contraction},
        {"C6  exact synchronization", exact_sync},
        {"C7  baseline forecast quality", baseline_quality},
        {"C8  denoising beats identity", denoising},
        {"C9  histogram selection optimality", histogram_selection},
        {"C10 few-shot sweep dominance", fewshot_sweep},
        {"C11 sequential-training stability", sequential_training},
        {"C12 end-to-end runtime", [&] { return end_to_end(dir); }},
        {"C13 determinism", [&] { return determinism(dir); }},
    };
    int failures = 0;
    int unexpected = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const std::string id = std::string(c.name).substr(0, std::string(c.name).find(' '));
        const bool known = kKnownFailures.count(id) != 0;
        failures += o.pass ? 0 : 1;
        unexpected += o.pass == known ? 1 : 0;
        std::cout << (o.pass ? "PASS " : "FAIL ") << c.name << " | " << o.detail
                  << fmt(" [%.1f s]", seconds_since(t0));
        if (known) {
            std::cout << (o.pass ? " (listed as known failure; remove it from the list)" : " (known failure)");
        }
        std::cout << std::endl;
    }
    std::error_code ec;
    fs::remove_all(dir, ec);
    std::cout << (criteria.size() - static_cast<std::size_t>(failures)) << "/" << criteria.size()
              << " acceptance criteria passed, " << unexpected << " unexpected result(s)" << std::endl;
    return unexpected == 0 ? 0 : 1;
}
