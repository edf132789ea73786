#pragma once

// Echo State Network core: reservoir construction, leaky-integrator state
// updates, teacher-forced driving, ridge readout, and closed-loop forecasts.
//
// Conventions
//   * A state is indexed by the last input it has consumed: states[t] is the
//     reservoir state after update_state(..., inputs[t]).
//   * The readout maps states[t] to the next observation x[t+1].
//   * Readout regression rows exclude the terminal state r*; r* is stored in
//     the fitted model and seeds every forecast together with the final
//     training observation.
//   * A fitted model divides observations by one scalar (the pooled standard
//     deviation of its training data) before they reach W_in, and trains the
//     readout on equally scaled targets. Reservoir-level functions (update,
//     drive) work in those model units; fit, forecast and reconstruct take
//     and return data units.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>

#include "adaptesn/error.hpp"
#include "adaptesn/lorenz.hpp"
#include "adaptesn/rng.hpp"

namespace adaptesn {

using State = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct ReservoirConfig {
    std::size_t n_units = 1000;
    double spectral_radius = 1.2;
    double sparsity = 0.1;
    double leak_rate = 0.3;
    double input_scaling = 0.5;
    double ridge_lambda = 1e-7;
    std::size_t washout = 500;
    std::uint64_t seed = 42;

    void validate() const
    {
        if (n_units < 1) {
            throw InvalidArgument("ReservoirConfig: n_units must be >= 1");
        }
        if (!(sparsity > 0.0 && sparsity <= 1.0)) {
            throw InvalidArgument("ReservoirConfig: sparsity must be in (0, 1]");
        }
        if (!(leak_rate > 0.0 && leak_rate <= 1.0)) {
            throw InvalidArgument("ReservoirConfig: leak_rate must be in (0, 1]");
        }
        if (!(spectral_radius > 0.0) || !std::isfinite(spectral_radius)) {
            throw InvalidArgument("ReservoirConfig: spectral_radius must be positive");
        }
        if (!(ridge_lambda >= 0.0) || !std::isfinite(ridge_lambda)) {
            throw InvalidArgument("ReservoirConfig: ridge_lambda must be >= 0");
        }
        if (!(input_scaling >= 0.0) || !std::isfinite(input_scaling)) {
            throw InvalidArgument("ReservoirConfig: input_scaling must be >= 0");
        }
    }

    friend bool operator==(const ReservoirConfig&, const ReservoirConfig&) = default;
};

/// Number of power-iteration steps used when scaling a reservoir.
inline constexpr std::size_t kSpectralIterations = 60;

/// Estimates the spectral radius of a square matrix from `iterations`
/// normalized matrix-vector products started at a seeded random vector.
///
/// Each new iterate is orthogonalized against the previous ones (Arnoldi
/// form of power iteration) and the estimate is the largest modulus among
/// the eigenvalues of the projected Rayleigh-quotient matrix Q^T A Q. Plain
/// scalar power iteration does not converge when the dominant eigenvalues
/// form a complex-conjugate pair, which is the typical case for random
/// reservoir matrices; the projected form handles that case.
template <class Matrix>
[[nodiscard]] double estimate_spectral_radius(const Matrix& a, std::size_t iterations, std::uint64_t seed = 0)
{
    const auto n = static_cast<std::size_t>(a.rows());
    if (n == 0 || static_cast<std::size_t>(a.cols()) != n) {
        throw DimensionError("estimate_spectral_radius: matrix must be square and nonempty");
    }
    if (iterations < 1) {
        throw InvalidArgument("estimate_spectral_radius: iterations must be >= 1");
    }
    const std::size_t k_max = std::min(iterations, n);

    Xoshiro256 rng(seed);
    Eigen::MatrixXd basis(n, k_max + 1);
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k_max + 1),
                                                 static_cast<Eigen::Index>(k_max));
    Eigen::VectorXd v(n);
    for (std::size_t i = 0; i < n; ++i) {
        v[static_cast<Eigen::Index>(i)] = rng.uniform(-1.0, 1.0);
    }
    basis.col(0) = v / v.norm();

    Eigen::Index used = 0;
    Eigen::VectorXd w(n);
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(k_max); ++j) {
        w.noalias() = a * basis.col(j);
        if (!w.allFinite()) {
            throw NumericalError("estimate_spectral_radius: non-finite iterate");
        }
        const double w_norm = w.norm();
        // Two passes of modified Gram-Schmidt keep the basis orthogonal.
        for (int pass = 0; pass < 2; ++pass) {
            for (Eigen::Index i = 0; i <= j; ++i) {
                const double coeff = basis.col(i).dot(w) / basis.col(i).squaredNorm();
                hess(i, j) += coeff;
                w -= coeff * basis.col(i);
            }
        }
        used = j + 1;
        const double residual = w.norm();
        hess(j + 1, j) = residual;
        if (residual <= 1e-12 * w_norm || residual < 1e-300) {
            break;  // invariant subspace reached; Ritz values are exact
        }
        basis.col(j + 1) = w / residual;
    }

    const Eigen::MatrixXd projected = hess.topLeftCorner(used, used);
    double radius = 0.0;
    if (used == 1) {
        radius = std::abs(projected(0, 0));
    } else {
        Eigen::EigenSolver<Eigen::MatrixXd> solver(projected, false);
        if (solver.info() != Eigen::Success) {
            throw NumericalError("estimate_spectral_radius: projected eigenproblem failed");
        }
        radius = solver.eigenvalues().cwiseAbs().maxCoeff();
    }
    if (!(radius >= 1e-300)) {
        throw NumericalError("estimate_spectral_radius: iterate norm underflowed (zero matrix?)");
    }
    return radius;
}

/// Fixed random recurrent layer.
///
/// The recurrent matrix is held in compressed row form; a dense copy is
/// materialized on first request and cached. Copies share the cache, and the
/// object is immutable after construction, so it can be used from several
/// threads at once.
class Reservoir {
public:
    Reservoir(ReservoirConfig config, SparseMatrix w_res, Eigen::MatrixXd w_in)
        : config_(std::move(config)), w_res_(std::move(w_res)), w_in_(std::move(w_in)),
          dense_(std::make_shared<DenseCache>())
    {
        const auto n = static_cast<Eigen::Index>(config_.n_units);
        if (w_res_.rows() != n || w_res_.cols() != n || w_in_.rows() != n || w_in_.cols() != 3) {
            throw DimensionError("Reservoir: matrix shapes do not match n_units");
        }
        w_res_.makeCompressed();
    }

    [[nodiscard]] const ReservoirConfig& config() const noexcept { return config_; }
    [[nodiscard]] std::size_t size() const noexcept { return config_.n_units; }
    [[nodiscard]] const SparseMatrix& w_res() const noexcept { return w_res_; }
    [[nodiscard]] const Eigen::MatrixXd& w_in() const noexcept { return w_in_; }

    [[nodiscard]] const Eigen::MatrixXd& dense_w_res() const
    {
        std::call_once(dense_->once, [this] { dense_->matrix = Eigen::MatrixXd(w_res_); });
        return dense_->matrix;
    }

    [[nodiscard]] bool dense_cached() const noexcept
    {
        return dense_->matrix.size() != 0;
    }

private:
    struct DenseCache {
        std::once_flag once;
        Eigen::MatrixXd matrix;
    };

    ReservoirConfig config_;
    SparseMatrix w_res_;
    Eigen::MatrixXd w_in_;
    std::shared_ptr<DenseCache> dense_;
};

/// Draws W_res (uniform [-1, 1] at the configured density, rescaled to the
/// configured spectral radius) and W_in (uniform [-s, s]) from config.seed.
[[nodiscard]] inline Reservoir build_reservoir(const ReservoirConfig& config)
{
    config.validate();
    const auto n = static_cast<Eigen::Index>(config.n_units);
    Xoshiro256 rng(config.seed);

    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(static_cast<std::size_t>(static_cast<double>(n) * static_cast<double>(n) * config.sparsity * 1.1) + 16);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            if (rng.uniform01() < config.sparsity) {
                entries.emplace_back(i, j, rng.uniform(-1.0, 1.0));
            }
        }
    }
    SparseMatrix w_res(n, n);
    w_res.setFromTriplets(entries.begin(), entries.end());

    Eigen::MatrixXd w_in(n, 3);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index c = 0; c < 3; ++c) {
            w_in(i, c) = rng.uniform(-config.input_scaling, config.input_scaling);
        }
    }

    double radius = 0.0;
    try {
        radius = estimate_spectral_radius(w_res, kSpectralIterations, derive_seed(config.seed, 0x5EC7));
    } catch (const NumericalError&) {
        radius = 0.0;
    }
    if (!(radius >= 1e-12)) {
        throw NumericalError("build_reservoir: degenerate recurrent matrix (spectral radius ~ 0)");
    }
    w_res *= config.spectral_radius / radius;
    return {config, std::move(w_res), std::move(w_in)};
}

/// Which copy of W_res the recurrent product reads.
enum class ProductPath { sparse, dense };

/// Applies the leaky-integrator update in place, reusing its scratch buffer.
class StateUpdater {
public:
    explicit StateUpdater(const Reservoir& reservoir, ProductPath path = ProductPath::sparse)
        : res_(&reservoir), path_(path), pre_(static_cast<Eigen::Index>(reservoir.size()))
    {
        if (path_ == ProductPath::dense) {
            dense_ = &reservoir.dense_w_res();
        }
    }

    /// r <- (1 - a) r + a tanh(W_res r + W_in x)
    void step(State& r, const Vec3& x)
    {
        if (path_ == ProductPath::dense) {
            pre_.noalias() = *dense_ * r;
        } else {
            pre_.noalias() = res_->w_res() * r;
        }
        pre_.noalias() += res_->w_in() * x;
        const double a = res_->config().leak_rate;
        r = (1.0 - a) * r + a * pre_.array().tanh().matrix();
    }

private:
    const Reservoir* res_;
    ProductPath path_;
    const Eigen::MatrixXd* dense_ = nullptr;
    Eigen::VectorXd pre_;
};

[[nodiscard]] inline State update_state(const Reservoir& reservoir, const State& r, const Vec3& x,
                                        ProductPath path = ProductPath::sparse)
{
    if (static_cast<std::size_t>(r.size()) != reservoir.size()) {
        throw DimensionError("update_state: state size does not match reservoir");
    }
    State next = r;
    StateUpdater(reservoir, path).step(next, x);
    return next;
}

[[nodiscard]] inline State zero_state(const Reservoir& reservoir)
{
    return State::Zero(static_cast<Eigen::Index>(reservoir.size()));
}

/// Streaming teacher-forced drive: calls `visit(t, state)` after each input
/// and returns the final state. Only O(N) memory is held.
template <class Visitor>
State drive_streaming(const Reservoir& reservoir, std::span<const Vec3> inputs, State r, Visitor&& visit)
{
    if (static_cast<std::size_t>(r.size()) != reservoir.size()) {
        throw DimensionError("drive: initial state size does not match reservoir");
    }
    StateUpdater updater(reservoir);
    for (std::size_t t = 0; t < inputs.size(); ++t) {
        updater.step(r, inputs[t]);
        visit(t, static_cast<const State&>(r));
    }
    return r;
}

struct DriveResult {
    std::vector<State> states;
    State final_state;
};

/// Teacher-forced drive that keeps every intermediate state.
[[nodiscard]] inline DriveResult drive(const Reservoir& reservoir, std::span<const Vec3> inputs, const State& r0)
{
    if (inputs.empty()) {
        throw InvalidArgument("drive: inputs must be nonempty");
    }
    DriveResult out;
    out.states.reserve(inputs.size());
    out.final_state = drive_streaming(reservoir, inputs, r0,
                                      [&](std::size_t, const State& r) { out.states.push_back(r); });
    return out;
}

[[nodiscard]] inline DriveResult drive(const Reservoir& reservoir, const Trajectory& inputs, const State& r0)
{
    return drive(reservoir, std::span<const Vec3>(inputs.points), r0);
}

/// Normal-equation accumulators R^T R and R^T Y for the ridge readout.
struct ReadoutAccumulator {
    Eigen::MatrixXd gram;   // N x N, kept exactly symmetric
    Eigen::MatrixXd cross;  // N x 3
    std::size_t n_samples = 0;

    ReadoutAccumulator() = default;
    explicit ReadoutAccumulator(std::size_t n)
        : gram(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n))),
          cross(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), 3))
    {
    }

    [[nodiscard]] std::size_t size() const noexcept { return static_cast<std::size_t>(gram.rows()); }

    /// Adds a block of rows: `states` is m x N, `targets` is m x 3.
    template <class StatesBlock, class TargetsBlock>
    void add_rows(const Eigen::MatrixBase<StatesBlock>& states, const Eigen::MatrixBase<TargetsBlock>& targets)
    {
        if (states.rows() != targets.rows() || states.cols() != gram.rows() || targets.cols() != 3) {
            throw DimensionError("ReadoutAccumulator: block shapes do not match");
        }
        if (states.rows() == 0) {
            return;
        }
        gram.template selfadjointView<Eigen::Lower>().rankUpdate(states.transpose());
        gram.template triangularView<Eigen::StrictlyUpper>() = gram.transpose();
        cross.noalias() += states.transpose() * targets;
        n_samples += static_cast<std::size_t>(states.rows());
    }

    /// Sums another accumulator into this one (per-worker merge).
    void merge(const ReadoutAccumulator& other)
    {
        if (other.gram.rows() != gram.rows()) {
            throw DimensionError("ReadoutAccumulator::merge: size mismatch");
        }
        gram += other.gram;
        cross += other.cross;
        n_samples += other.n_samples;
    }
};

/// gram += S^T S, cross += S^T T for row-wise states S and targets T.
inline void accumulate(ReadoutAccumulator& acc, std::span<const State> states, std::span<const Vec3> targets)
{
    if (states.size() != targets.size() || states.empty()) {
        throw DimensionError("accumulate: states and targets must be nonempty and equally long");
    }
    const auto n = acc.gram.rows();
    Eigen::MatrixXd s(static_cast<Eigen::Index>(states.size()), n);
    Eigen::MatrixXd y(static_cast<Eigen::Index>(states.size()), 3);
    for (std::size_t i = 0; i < states.size(); ++i) {
        if (states[i].size() != n) {
            throw DimensionError("accumulate: state size does not match accumulator");
        }
        s.row(static_cast<Eigen::Index>(i)) = states[i].transpose();
        y.row(static_cast<Eigen::Index>(i)) = targets[i].transpose();
    }
    acc.add_rows(s, y);
}

/// Buffers rows and flushes them into an accumulator in fixed-size blocks.
class BlockedAccumulator {
public:
    BlockedAccumulator(ReadoutAccumulator& acc, Eigen::Index block_rows = 256)
        : acc_(&acc), states_(block_rows, acc.gram.rows()), targets_(block_rows, 3)
    {
    }
    BlockedAccumulator(const BlockedAccumulator&) = delete;
    BlockedAccumulator& operator=(const BlockedAccumulator&) = delete;
    ~BlockedAccumulator() { flush(); }

    void push(const State& state, const Vec3& target)
    {
        states_.row(fill_) = state.transpose();
        targets_.row(fill_) = target.transpose();
        if (++fill_ == states_.rows()) {
            flush();
        }
    }

    void flush()
    {
        if (fill_ > 0) {
            acc_->add_rows(states_.topRows(fill_), targets_.topRows(fill_));
            fill_ = 0;
        }
    }

private:
    ReadoutAccumulator* acc_;
    Eigen::MatrixXd states_;
    Eigen::MatrixXd targets_;
    Eigen::Index fill_ = 0;
};

/// Trained linear map; prediction is x_hat = W_out^T r.
struct Readout {
    Eigen::MatrixXd w_out;  // N x 3

    [[nodiscard]] Vec3 apply(const State& r) const { return w_out.transpose() * r; }
};

/// Solves (gram + lambda I) W = cross by Cholesky factorization.
[[nodiscard]] inline Readout solve_readout(const ReadoutAccumulator& acc, double lambda)
{
    if (acc.n_samples < 1) {
        throw InsufficientDataError("solve_readout: no accumulated samples");
    }
    if (!(lambda >= 0.0)) {
        throw InvalidArgument("solve_readout: lambda must be >= 0");
    }
    Eigen::MatrixXd system = acc.gram;
    system.diagonal().array() += lambda;
    const Eigen::LLT<Eigen::MatrixXd> llt(system);
    if (llt.info() != Eigen::Success) {
        throw NumericalError("solve_readout: system is not positive definite (singular gram?)");
    }
    const double max_diag = system.diagonal().cwiseAbs().maxCoeff();
    const double min_pivot = llt.matrixL().toDenseMatrix().diagonal().cwiseAbs2().minCoeff();
    if (!(min_pivot > 64.0 * std::numeric_limits<double>::epsilon() * max_diag)) {
        throw NumericalError("solve_readout: system is numerically singular");
    }
    Readout out{llt.solve(acc.cross)};
    if (!out.w_out.allFinite()) {
        throw NumericalError("solve_readout: non-finite readout weights");
    }
    return out;
}

/// Scalar map between data units and the units the reservoir sees.
struct InputScaling {
    double scale = 1.0;

    [[nodiscard]] Vec3 to_model(const Vec3& x) const { return x / scale; }
    [[nodiscard]] Vec3 to_data(const Vec3& x) const { return x * scale; }
    [[nodiscard]] Trajectory to_model(const Trajectory& traj) const
    {
        Trajectory out = traj;
        for (auto& p : out.points) {
            p /= scale;
        }
        return out;
    }

    /// Square root of the mean per-coordinate variance over all sequences.
    [[nodiscard]] static InputScaling from_data(std::span<const Trajectory> trains)
    {
        Vec3 sum = Vec3::Zero();
        double count = 0.0;
        for (const auto& t : trains) {
            for (const auto& p : t.points) {
                sum += p;
                count += 1.0;
            }
        }
        const Vec3 mean = sum / count;
        Vec3 ss = Vec3::Zero();
        for (const auto& t : trains) {
            for (const auto& p : t.points) {
                ss += (p - mean).cwiseAbs2();
            }
        }
        const double pooled = count > 1.0 ? std::sqrt(ss.sum() / (3.0 * (count - 1.0))) : 0.0;
        return {pooled > 1e-12 ? pooled : 1.0};
    }
};

struct FittedModel {
    Reservoir reservoir;
    Readout readout;
    InputScaling scaling;
    State terminal_state;  // r*: state after the second-to-last training input
    Vec3 terminal_input;   // last training observation, data units
    double dt = 0.05;
    std::size_t n_samples = 0;  // regression rows used
    /// State before a requested input index of the final sequence (see FitOptions).
    std::optional<State> checkpoint_state;
};

/// How multiple training sequences share reservoir state.
enum class ChainPolicy {
    /// Each sequence starts from the previous terminal state; washout only on
    /// the first.
    sequential,
    /// Each sequence starts from zero and is washed out separately.
    independent,
};

struct FitOptions {
    /// When set, record the state just before the final sequence consumes
    /// the input at this index.
    std::optional<std::size_t> checkpoint;
    ChainPolicy chain = ChainPolicy::sequential;
};

namespace detail {

inline void validate_sequences(const ReservoirConfig& config, std::span<const Trajectory> trains)
{
    if (trains.empty()) {
        throw InsufficientDataError("fit: no training sequences");
    }
    if (trains.front().size() < config.washout + 3) {
        throw InsufficientDataError("fit: first training sequence must be longer than washout + 2 steps");
    }
    for (const auto& t : trains) {
        if (t.size() < 2) {
            throw InsufficientDataError("fit: every training sequence needs at least 2 steps");
        }
        if (t.dt != trains.front().dt) {
            throw InvalidArgument("fit: training sequences must share one dt");
        }
    }
}

} // namespace detail

/// Normal equations and end states gathered from driving a reservoir
/// through one or more training sequences.
struct ChainAccumulation {
    ReadoutAccumulator acc;
    State terminal_state;
    std::optional<State> checkpoint_state;
};

/// Drives `reservoir` through `trains` (model units) as one continuous chain
/// and sums the regression rows: each sequence starts from the previous
/// sequence's terminal state and washout applies to the first sequence only.
///
/// Per sequence of length T the inputs x[0..T-2] are driven; the state after
/// x[t] is paired with target x[t+1] for t in [washout, T-3] (first
/// sequence) or [0, T-3] (later ones). The state after x[T-2] becomes the
/// next sequence's start and, for the last sequence, the terminal state r*.
/// `ChainPolicy::independent` instead restarts every sequence from zero with
/// its own washout.
[[nodiscard]] inline ChainAccumulation accumulate_chain(const Reservoir& reservoir, std::span<const Trajectory> trains,
                                                        const FitOptions& options = {})
{
    const std::size_t washout = reservoir.config().washout;
    ChainAccumulation out{ReadoutAccumulator(reservoir.size()), zero_state(reservoir), std::nullopt};
    State& r = out.terminal_state;
    {
        BlockedAccumulator rows(out.acc);
        for (std::size_t s = 0; s < trains.size(); ++s) {
            const auto& pts = trains[s].points;
            const bool restart = options.chain == ChainPolicy::independent;
            const std::size_t first_row = (s == 0 || restart) ? washout : 0;
            const bool is_last = s + 1 == trains.size();
            if (restart) {
                r = zero_state(reservoir);
            }
            if (is_last && options.checkpoint && *options.checkpoint == 0) {
                out.checkpoint_state = r;
            }
            r = drive_streaming(reservoir, std::span<const Vec3>(pts.data(), pts.size() - 1), std::move(r),
                                [&](std::size_t t, const State& state) {
                                    if (t >= first_row && t + 3 <= pts.size()) {
                                        rows.push(state, pts[t + 1]);
                                    }
                                    if (is_last && options.checkpoint && t + 1 == *options.checkpoint) {
                                        out.checkpoint_state = state;
                                    }
                                });
        }
    }
    if (options.checkpoint && !out.checkpoint_state) {
        throw InvalidArgument("fit: checkpoint index beyond the driven range");
    }
    return out;
}

/// Trains a readout on `trains` processed as one chain (see
/// accumulate_chain). Inputs are divided by the pooled training std first.
[[nodiscard]] inline FittedModel fit_sequential(const ReservoirConfig& config, std::span<const Trajectory> trains,
                                                const FitOptions& options = {})
{
    config.validate();
    detail::validate_sequences(config, trains);
    if (options.chain == ChainPolicy::independent) {
        for (const auto& t : trains) {
            if (t.size() < config.washout + 3) {
                throw InsufficientDataError("fit: independent sequences must each exceed washout + 2 steps");
            }
        }
    }
    const InputScaling scaling = InputScaling::from_data(trains);
    std::vector<Trajectory> scaled;
    scaled.reserve(trains.size());
    for (const auto& t : trains) {
        scaled.push_back(scaling.to_model(t));
    }
    Reservoir reservoir = build_reservoir(config);
    ChainAccumulation chain = accumulate_chain(reservoir, scaled, options);
    Readout readout = solve_readout(chain.acc, config.ridge_lambda);
    return FittedModel{std::move(reservoir),
                       std::move(readout),
                       scaling,
                       std::move(chain.terminal_state),
                       trains.back().back(),
                       trains.back().dt,
                       chain.acc.n_samples,
                       std::move(chain.checkpoint_state)};
}

[[nodiscard]] inline FittedModel fit(const ReservoirConfig& config, const Trajectory& train,
                                     const FitOptions& options = {})
{
    return fit_sequential(config, std::span<const Trajectory>(&train, 1), options);
}

/// Teacher-forces data-unit observations through the model's reservoir
/// starting from `r`, returning the state after the last observation.
[[nodiscard]] inline State synchronize(const FittedModel& model, State r, std::span<const Vec3> observations)
{
    if (static_cast<std::size_t>(r.size()) != model.reservoir.size()) {
        throw DimensionError("synchronize: state size does not match reservoir");
    }
    StateUpdater updater(model.reservoir);
    for (const auto& x : observations) {
        updater.step(r, model.scaling.to_model(x));
    }
    return r;
}

/// Forecast magnitude beyond which a closed-loop run is declared diverged.
inline constexpr double kForecastBound = 1e4;

/// Closed-loop forecast: repeatedly r <- update(r, x), x <- readout(r).
/// `x_start` is in data units; the first emitted point is the prediction for
/// the step after it.
[[nodiscard]] inline Trajectory forecast(const FittedModel& model, State r, const Vec3& x_start, std::size_t n_steps)
{
    if (n_steps < 1) {
        throw InvalidArgument("forecast: n_steps must be >= 1");
    }
    if (static_cast<std::size_t>(r.size()) != model.reservoir.size()) {
        throw DimensionError("forecast: start state size does not match reservoir");
    }
    StateUpdater updater(model.reservoir);
    std::vector<Vec3> out;
    out.reserve(n_steps);
    Vec3 x = model.scaling.to_model(x_start);
    for (std::size_t i = 0; i < n_steps; ++i) {
        updater.step(r, x);
        x = model.readout.apply(r);
        const Vec3 y = model.scaling.to_data(x);
        if (!y.allFinite() || y.cwiseAbs().maxCoeff() > kForecastBound) {
            throw DivergenceError("forecast: diverged at step " + std::to_string(i));
        }
        out.push_back(y);
    }
    return {std::move(out), model.dt};
}

/// Forecast from the stored terminal synchronization point.
[[nodiscard]] inline Trajectory forecast(const FittedModel& model, std::size_t n_steps)
{
    return forecast(model, model.terminal_state, model.terminal_input, n_steps);
}

/// Teacher-forced streaming denoiser. Calls `emit(t, estimate)` for every
/// position t of `noisy`: estimate t + 1 is the readout of the state after
/// consuming noisy[t]. The first `passthrough` positions (at least one) emit
/// the observation itself, which covers the leading sample and optionally a
/// synchronization window while the reservoir forgets its start state.
/// Auxiliary memory is O(N).
template <class Emit>
void reconstruct_streaming(const FittedModel& model, const Trajectory& noisy, Emit&& emit, std::size_t passthrough = 1,
                           std::optional<State> r0 = std::nullopt)
{
    if (noisy.size() < 2) {
        throw InsufficientDataError("reconstruct: need at least 2 observations");
    }
    passthrough = std::max<std::size_t>(passthrough, 1);
    State r = r0 ? std::move(*r0) : zero_state(model.reservoir);
    if (static_cast<std::size_t>(r.size()) != model.reservoir.size()) {
        throw DimensionError("reconstruct: start state size does not match reservoir");
    }
    emit(std::size_t{0}, static_cast<const Vec3&>(noisy.front()));
    StateUpdater updater(model.reservoir);
    for (std::size_t t = 0; t + 1 < noisy.size(); ++t) {
        updater.step(r, model.scaling.to_model(noisy[t]));
        if (t + 1 < passthrough) {
            emit(t + 1, static_cast<const Vec3&>(noisy[t + 1]));
        } else {
            emit(t + 1, static_cast<const Vec3&>(model.scaling.to_data(model.readout.apply(r))));
        }
    }
}

/// Collecting form of reconstruct_streaming; the result has the same length
/// as `noisy`.
[[nodiscard]] inline Trajectory reconstruct(const FittedModel& model, const Trajectory& noisy,
                                            std::size_t passthrough = 1, std::optional<State> r0 = std::nullopt)
{
    std::vector<Vec3> out;
    out.reserve(noisy.size());
    reconstruct_streaming(
        model, noisy, [&](std::size_t, const Vec3& x) { out.push_back(x); }, passthrough, std::move(r0));
    return {std::move(out), noisy.dt};
}

} // namespace adaptesn
