#pragma once

// Fitted-model serialization as a single JSON document:
//
//   {"format": "adaptesn-model", "version": 1,
//    "config": {...}, "dt": ..., "input_scale": ..., "n_samples": ...,
//    "w_res": {"n": N, "triplets": [[row, col, value], ...]},
//    "w_in": [[...3...] x N], "w_out": [[...3...] x N],
//    "terminal_state": [...N...], "terminal_input": [x, y, z]}
//
// Doubles are written in shortest round-trip form, so a loaded model
// reproduces the saved one bit for bit.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "adaptesn/error.hpp"
#include "adaptesn/esn.hpp"

namespace adaptesn {

inline constexpr int kModelFormatVersion = 1;

inline void to_json(nlohmann::json& j, const ReservoirConfig& c)
{
    j = nlohmann::json{{"n_units", c.n_units},         {"spectral_radius", c.spectral_radius},
                       {"sparsity", c.sparsity},       {"leak_rate", c.leak_rate},
                       {"input_scaling", c.input_scaling}, {"ridge_lambda", c.ridge_lambda},
                       {"washout", c.washout},         {"seed", c.seed}};
}

/// Patch semantics: only keys present in `j` are assigned; unknown keys throw.
inline void from_json(const nlohmann::json& j, ReservoirConfig& c)
{
    for (const auto& [key, value] : j.items()) {
        if (key == "n_units") c.n_units = value.get<std::size_t>();
        else if (key == "spectral_radius") c.spectral_radius = value.get<double>();
        else if (key == "sparsity") c.sparsity = value.get<double>();
        else if (key == "leak_rate") c.leak_rate = value.get<double>();
        else if (key == "input_scaling") c.input_scaling = value.get<double>();
        else if (key == "ridge_lambda") c.ridge_lambda = value.get<double>();
        else if (key == "washout") c.washout = value.get<std::size_t>();
        else if (key == "seed") c.seed = value.get<std::uint64_t>();
        else throw InvalidArgument("unknown reservoir config key '" + key + "'");
    }
}

namespace detail {

template <class Derived>
nlohmann::json rows_to_json(const Eigen::MatrixBase<Derived>& m)
{
    auto out = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        auto row = nlohmann::json::array();
        for (Eigen::Index k = 0; k < m.cols(); ++k) {
            row.push_back(m(i, k));
        }
        out.push_back(std::move(row));
    }
    return out;
}

inline Eigen::MatrixXd rows_from_json(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols,
                                      const char* what)
{
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows) {
        throw DataError(std::string("model file: '") + what + "' has the wrong number of rows");
    }
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto& row = j[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
            throw DataError(std::string("model file: '") + what + "' has a malformed row");
        }
        for (Eigen::Index k = 0; k < cols; ++k) {
            m(i, k) = row[static_cast<std::size_t>(k)].get<double>();
        }
    }
    return m;
}

} // namespace detail

[[nodiscard]] inline nlohmann::json model_to_json(const FittedModel& model)
{
    const auto& res = model.reservoir;
    auto triplets = nlohmann::json::array();
    const auto& w = res.w_res();
    for (Eigen::Index row = 0; row < w.outerSize(); ++row) {
        for (SparseMatrix::InnerIterator it(w, row); it; ++it) {
            triplets.push_back({it.row(), it.col(), it.value()});
        }
    }
    return nlohmann::json{
        {"format", "adaptesn-model"},
        {"version", kModelFormatVersion},
        {"config", res.config()},
        {"dt", model.dt},
        {"input_scale", model.scaling.scale},
        {"n_samples", model.n_samples},
        {"w_res", {{"n", res.size()}, {"triplets", std::move(triplets)}}},
        {"w_in", detail::rows_to_json(res.w_in())},
        {"w_out", detail::rows_to_json(model.readout.w_out)},
        {"terminal_state", std::vector<double>(model.terminal_state.begin(), model.terminal_state.end())},
        {"terminal_input", {model.terminal_input.x(), model.terminal_input.y(), model.terminal_input.z()}},
    };
}

[[nodiscard]] inline FittedModel model_from_json(const nlohmann::json& j)
{
    try {
        if (j.at("format") != "adaptesn-model") {
            throw DataError("model file: not an adaptesn model");
        }
        if (j.at("version").get<int>() != kModelFormatVersion) {
            throw DataError("model file: unsupported version " + j.at("version").dump());
        }
        ReservoirConfig config;
        from_json(j.at("config"), config);
        const auto n = static_cast<Eigen::Index>(config.n_units);
        if (j.at("w_res").at("n").get<Eigen::Index>() != n) {
            throw DataError("model file: w_res size does not match config");
        }
        std::vector<Eigen::Triplet<double>> entries;
        for (const auto& t : j.at("w_res").at("triplets")) {
            const auto row = t.at(0).get<Eigen::Index>();
            const auto col = t.at(1).get<Eigen::Index>();
            if (row < 0 || row >= n || col < 0 || col >= n) {
                throw DataError("model file: w_res triplet out of range");
            }
            entries.emplace_back(row, col, t.at(2).get<double>());
        }
        SparseMatrix w_res(n, n);
        w_res.setFromTriplets(entries.begin(), entries.end());
        Reservoir reservoir(config, std::move(w_res), detail::rows_from_json(j.at("w_in"), n, 3, "w_in"));

        Readout readout{detail::rows_from_json(j.at("w_out"), n, 3, "w_out")};
        const auto state = j.at("terminal_state").get<std::vector<double>>();
        if (static_cast<Eigen::Index>(state.size()) != n) {
            throw DataError("model file: terminal_state size does not match config");
        }
        const auto input = j.at("terminal_input").get<std::vector<double>>();
        if (input.size() != 3) {
            throw DataError("model file: terminal_input must have 3 entries");
        }
        return FittedModel{std::move(reservoir),
                           std::move(readout),
                           InputScaling{j.at("input_scale").get<double>()},
                           Eigen::Map<const State>(state.data(), n),
                           Vec3(input[0], input[1], input[2]),
                           j.at("dt").get<double>(),
                           j.at("n_samples").get<std::size_t>(),
                           std::nullopt};
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("model file: ") + e.what());
    }
}

inline void save_model(const std::filesystem::path& path, const FittedModel& model)
{
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream os(path);
    if (!os) {
        throw DataError("cannot open '" + path.string() + "' for writing");
    }
    os << model_to_json(model).dump() << '\n';
}

[[nodiscard]] inline FittedModel load_model(const std::filesystem::path& path)
{
    std::ifstream is(path);
    if (!is) {
        throw DataError("missing model file '" + path.string() + "'");
    }
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    return model_from_json(j);
}

} // namespace adaptesn
