#pragma once

// Plain-text trajectory files:
//
//   # dt=0.05 cols=x,y,z
//   x0 y0 z0
//   x1 y1 z1
//   ...
//
// Values are written with 17 significant digits so a write/read cycle is
// lossless.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "adaptesn/error.hpp"
#include "adaptesn/lorenz.hpp"

namespace adaptesn {

inline void write_trajectory(std::ostream& os, const Trajectory& traj)
{
    os.precision(17);
    os << "# dt=" << traj.dt << " cols=x,y,z\n";
    for (const auto& p : traj.points) {
        os << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
    }
}

[[nodiscard]] inline Trajectory read_trajectory(std::istream& is, const std::string& origin = "<stream>")
{
    std::string line;
    if (!std::getline(is, line)) {
        throw DataError(origin + ": empty trajectory file");
    }
    const auto dt_pos = line.find("dt=");
    if (line.rfind('#', 0) != 0 || dt_pos == std::string::npos) {
        throw DataError(origin + ": missing '# dt=<value> cols=x,y,z' header");
    }
    Trajectory traj;
    try {
        traj.dt = std::stod(line.substr(dt_pos + 3));
    } catch (const std::exception&) {
        throw DataError(origin + ": unparseable dt in header");
    }
    std::size_t row = 1;
    while (std::getline(is, line)) {
        ++row;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        std::istringstream fields(line);
        Vec3 p;
        std::string extra;
        if (!(fields >> p.x() >> p.y() >> p.z()) || (fields >> extra)) {
            throw DataError(origin + ": line " + std::to_string(row) + " is not three numbers");
        }
        traj.points.push_back(p);
    }
    try {
        traj.validate();
    } catch (const InvalidArgument& e) {
        throw DataError(origin + ": " + e.what());
    }
    return traj;
}

inline void save_trajectory(const std::filesystem::path& path, const Trajectory& traj)
{
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream os(path);
    if (!os) {
        throw DataError("cannot open '" + path.string() + "' for writing");
    }
    write_trajectory(os, traj);
}

[[nodiscard]] inline Trajectory load_trajectory(const std::filesystem::path& path)
{
    std::ifstream is(path);
    if (!is) {
        throw DataError("missing data file '" + path.string() + "'");
    }
    return read_trajectory(is, path.string());
}

} // namespace adaptesn
