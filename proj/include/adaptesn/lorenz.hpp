#pragma once

// Lorenz-63 integration and trajectory containers.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "adaptesn/error.hpp"
#include "adaptesn/rng.hpp"

namespace adaptesn {

using Vec3 = Eigen::Vector3d;

struct LorenzParams {
    double sigma = 10.0;
    double rho = 28.0;
    double beta = 8.0 / 3.0;

    void validate() const
    {
        if (!(std::isfinite(sigma) && std::isfinite(rho) && std::isfinite(beta))) {
            throw InvalidArgument("LorenzParams: non-finite parameter");
        }
        if (sigma <= 0.0 || rho <= 0.0 || beta <= 0.0) {
            throw InvalidArgument("LorenzParams: parameters must be positive");
        }
    }
};

/// Uniformly sampled 3-d trajectory.
struct Trajectory {
    std::vector<Vec3> points;
    double dt = 0.05;

    Trajectory() = default;
    Trajectory(std::vector<Vec3> pts, double step) : points(std::move(pts)), dt(step) {}

    [[nodiscard]] std::size_t size() const noexcept { return points.size(); }
    [[nodiscard]] bool empty() const noexcept { return points.empty(); }
    [[nodiscard]] const Vec3& operator[](std::size_t i) const { return points[i]; }
    [[nodiscard]] Vec3& operator[](std::size_t i) { return points[i]; }
    [[nodiscard]] const Vec3& front() const { return points.front(); }
    [[nodiscard]] const Vec3& back() const { return points.back(); }

    /// Contiguous sub-range [first, first + count).
    [[nodiscard]] Trajectory slice(std::size_t first, std::size_t count) const
    {
        if (first + count > points.size()) {
            throw DimensionError("Trajectory::slice: range exceeds length");
        }
        return {std::vector<Vec3>(points.begin() + static_cast<std::ptrdiff_t>(first),
                                  points.begin() + static_cast<std::ptrdiff_t>(first + count)),
                dt};
    }

    [[nodiscard]] Trajectory tail(std::size_t count) const
    {
        if (count > points.size()) {
            throw DimensionError("Trajectory::tail: count exceeds length");
        }
        return slice(points.size() - count, count);
    }

    /// Checks the container invariants: dt > 0, nonempty, finite entries.
    void validate() const
    {
        if (!(dt > 0.0) || !std::isfinite(dt)) {
            throw InvalidArgument("Trajectory: dt must be positive and finite");
        }
        if (points.empty()) {
            throw InvalidArgument("Trajectory: empty");
        }
        for (const auto& p : points) {
            if (!p.allFinite()) {
                throw InvalidArgument("Trajectory: non-finite component");
            }
        }
    }

    /// Per-coordinate sample standard deviation (n - 1 denominator).
    [[nodiscard]] Vec3 coordinate_std() const
    {
        const auto n = static_cast<double>(points.size());
        Vec3 mean = Vec3::Zero();
        for (const auto& p : points) {
            mean += p;
        }
        mean /= n;
        Vec3 ss = Vec3::Zero();
        for (const auto& p : points) {
            ss += (p - mean).cwiseAbs2();
        }
        return points.size() > 1 ? Vec3((ss / (n - 1.0)).cwiseSqrt()) : Vec3::Zero();
    }

    friend bool operator==(const Trajectory& a, const Trajectory& b)
    {
        return a.dt == b.dt && a.points == b.points;
    }
};

[[nodiscard]] inline Vec3 lorenz_rhs(const Vec3& s, const LorenzParams& p) noexcept
{
    return {p.sigma * (s.y() - s.x()),
            s.x() * (p.rho - s.z()) - s.y(),
            s.x() * s.y() - p.beta * s.z()};
}

/// One classical fourth-order Runge-Kutta step.
[[nodiscard]] inline Vec3 rk4_step(const Vec3& s, double dt, const LorenzParams& p) noexcept
{
    const Vec3 k1 = lorenz_rhs(s, p);
    const Vec3 k2 = lorenz_rhs(s + 0.5 * dt * k1, p);
    const Vec3 k3 = lorenz_rhs(s + 0.5 * dt * k2, p);
    const Vec3 k4 = lorenz_rhs(s + dt * k3, p);
    return s + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

inline constexpr double kSimulationBound = 1e6;

/// Integrates from `ic`, drops `transient` steps, and returns the next
/// `n_steps` states. The first returned point is `transient` RK4 steps past
/// `ic` (so `transient == 0` returns `ic` itself first).
[[nodiscard]] inline Trajectory simulate(const Vec3& ic, std::size_t n_steps, double dt,
                                         const LorenzParams& params, std::size_t transient = 0)
{
    params.validate();
    if (n_steps == 0) {
        throw InvalidArgument("simulate: n_steps must be >= 1");
    }
    if (!(dt > 0.0)) {
        throw InvalidArgument("simulate: dt must be positive");
    }
    auto check = [](const Vec3& s) {
        if (!s.allFinite() || s.cwiseAbs().maxCoeff() > kSimulationBound) {
            throw DivergenceError("simulate: trajectory diverged (|component| > 1e6)");
        }
    };
    Vec3 state = ic;
    check(state);
    for (std::size_t i = 0; i < transient; ++i) {
        state = rk4_step(state, dt, params);
        check(state);
    }
    std::vector<Vec3> pts;
    pts.reserve(n_steps);
    pts.push_back(state);
    for (std::size_t i = 1; i < n_steps; ++i) {
        state = rk4_step(state, dt, params);
        check(state);
        pts.push_back(state);
    }
    return {std::move(pts), dt};
}

/// Adds i.i.d. Gaussian observation noise scaled per coordinate by the
/// sample standard deviation of `traj`.
[[nodiscard]] inline Trajectory add_noise(const Trajectory& traj, double noise_level, Xoshiro256& rng)
{
    if (!(noise_level >= 0.0)) {
        throw InvalidArgument("add_noise: noise_level must be >= 0");
    }
    if (noise_level == 0.0) {
        return traj;
    }
    const Vec3 scale = noise_level * traj.coordinate_std();
    Trajectory out = traj;
    for (auto& p : out.points) {
        for (int c = 0; c < 3; ++c) {
            p[c] += scale[c] * rng.normal();
        }
    }
    return out;
}

/// Largest z reachable on the attractor, 2(rho - 1).
[[nodiscard]] inline double attractor_z_bound(double rho) noexcept { return 2.0 * (rho - 1.0); }

} // namespace adaptesn
