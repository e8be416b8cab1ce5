// io.hpp — Result persistence: CSV writers (17 significant digits, atomic
// temp+rename), control-field round trips, Bohr-frequency traces, trajectory
// dumps, and the per-run JSON manifest.

#pragma once

#include "qoct/diagnostics.hpp"
#include "qoct/oct.hpp"
#include "qoct/thermal.hpp"

#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace qoct {

inline std::string format_float(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline uint64_t fnv1a64(const std::string& s) {
    uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// temp file + rename; partial writes never land under the final name
inline void write_text_atomic(const std::filesystem::path& path,
                              const std::string& text) {
    namespace fs = std::filesystem;
    std::error_code ec;
    if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("cannot open for writing: " + tmp.string());
        os << text;
        if (!os) throw IoError("write failed: " + tmp.string());
    }
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("rename failed: " + path.string() + ": " + ec.message());
}

inline std::string csv_text(const std::vector<std::string>& header,
                            const std::vector<std::vector<std::string>>& rows) {
    std::ostringstream os;
    for (size_t i = 0; i < header.size(); ++i)
        os << header[i] << (i + 1 < header.size() ? "," : "");
    os << "\n";
    for (const auto& row : rows) {
        for (size_t i = 0; i < row.size(); ++i)
            os << row[i] << (i + 1 < row.size() ? "," : "");
        os << "\n";
    }
    return os.str();
}

inline void write_csv_atomic(const std::filesystem::path& path,
                             const std::vector<std::string>& header,
                             const std::vector<std::vector<std::string>>& rows) {
    write_text_atomic(path, csv_text(header, rows));
}

// --------------------------- domain writers ---------------------------------

inline void write_iteration_log(const std::filesystem::path& path,
                                const std::vector<IterationRecord>& recs) {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(recs.size());
    for (const auto& r : recs)
        rows.push_back({std::to_string(r.iteration), format_float(r.j_max),
                        format_float(r.fidelity), format_float(r.infidelity),
                        format_float(r.field_change_norm), format_float(r.seconds)});
    write_csv_atomic(path, {"iter", "J_max", "F", "IF", "field_norm", "seconds"},
                     rows);
}

inline void write_field_csv(const std::filesystem::path& path,
                            const ControlField& f) {
    std::vector<std::string> header{"t"};
    for (int c = 0; c < f.n_channels(); ++c)
        header.push_back("eps_" + std::to_string(c + 1));
    std::vector<std::vector<std::string>> rows;
    rows.reserve(f.grid.n_points);
    for (int k = 0; k < f.grid.n_points; ++k) {
        std::vector<std::string> row{format_float(f.grid.time(k))};
        for (int c = 0; c < f.n_channels(); ++c)
            row.push_back(format_float(f.amplitudes(c, k)));
        rows.push_back(std::move(row));
    }
    write_csv_atomic(path, header, rows);
}

// Reads a field CSV back; the grid is inferred from the time column.
inline ControlField read_field_csv(const std::filesystem::path& path,
                                   const ShapeEnvelope& shape) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open field file: " + path.string());
    std::string line;
    if (!std::getline(is, line)) throw IoError("empty field file: " + path.string());
    std::vector<std::vector<double>> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        rows.push_back(std::move(row));
    }
    require(rows.size() >= 2, "field file needs at least two samples");
    const int n_channels = static_cast<int>(rows.front().size()) - 1;
    require(n_channels >= 1, "field file has no amplitude columns");
    ControlField f;
    f.grid.dt = rows[1][0] - rows[0][0];
    f.grid.n_points = static_cast<int>(rows.size());
    f.shape = shape;
    f.amplitudes = Eigen::MatrixXd::Zero(n_channels, f.grid.n_points);
    for (size_t k = 0; k < rows.size(); ++k)
        for (int c = 0; c < n_channels; ++c)
            f.amplitudes(c, static_cast<int>(k)) = rows[k][c + 1];
    return f;
}

// Bohr-frequency traces: columns t, omega_i_j over all ordered pairs.
inline void write_bohr_trace(const std::filesystem::path& path,
                             const ThermalGenerator& gen, const TimeGrid& grid) {
    std::vector<std::string> header{"t"};
    {
        const auto chans = gen.channels_at(0.0);
        for (const auto& ch : chans)
            header.push_back("omega_" + std::to_string(ch.from) + "_" +
                             std::to_string(ch.to));
    }
    std::vector<std::vector<std::string>> rows;
    rows.reserve(grid.n_points);
    for (int k = 0; k < grid.n_points; ++k) {
        const double t = grid.time(k);
        std::vector<std::string> row{format_float(t)};
        for (const auto& ch : gen.channels_at(t)) row.push_back(format_float(ch.omega));
        rows.push_back(std::move(row));
    }
    write_csv_atomic(path, header, rows);
}

inline void write_scan_csv(const std::filesystem::path& path, const ScanResult& s) {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(s.points.size());
    for (const auto& p : s.points)
        rows.push_back({format_float(p.gamma), format_float(p.temperature),
                        format_float(p.if_u), format_float(p.if_noise),
                        format_float(p.if_controlled), format_float(p.log_ratio),
                        format_float(p.gain), format_float(p.purity_sub),
                        format_float(p.delta_e), std::to_string(p.iterations)});
    write_csv_atomic(path,
                     {"gamma", "T", "IF_U", "IF_noise", "IF_controlled",
                      "log_ratio", "gain", "purity_sub", "delta_E", "iters"},
                     rows);
}

// Map trajectory dump: CSV (one row per time, row-major re/im pairs) or raw
// binary with a small text header.
inline void write_trajectory_csv(const std::filesystem::path& path,
                                 const MapTrajectory& traj) {
    const int N = static_cast<int>(traj.maps.front().rows());
    std::vector<std::string> header{"t"};
    for (int r = 0; r < N; ++r)
        for (int c = 0; c < N; ++c) {
            header.push_back("re_" + std::to_string(r) + "_" + std::to_string(c));
            header.push_back("im_" + std::to_string(r) + "_" + std::to_string(c));
        }
    std::vector<std::vector<std::string>> rows;
    rows.reserve(traj.times.size());
    for (size_t k = 0; k < traj.times.size(); ++k) {
        std::vector<std::string> row{format_float(traj.times[k])};
        for (int r = 0; r < N; ++r)
            for (int c = 0; c < N; ++c) {
                row.push_back(format_float(traj.maps[k](r, c).real()));
                row.push_back(format_float(traj.maps[k](r, c).imag()));
            }
        rows.push_back(std::move(row));
    }
    write_csv_atomic(path, header, rows);
}

inline void write_trajectory_binary(const std::filesystem::path& path,
                                    const MapTrajectory& traj) {
    const int N = static_cast<int>(traj.maps.front().rows());
    std::ostringstream os(std::ios::binary);
    os << "qoct-map-trajectory v1 dim=" << N
       << " n_times=" << traj.times.size() << "\n";
    for (size_t k = 0; k < traj.times.size(); ++k) {
        const double t = traj.times[k];
        os.write(reinterpret_cast<const char*>(&t), sizeof t);
        for (int r = 0; r < N; ++r)
            for (int c = 0; c < N; ++c) {
                const double re = traj.maps[k](r, c).real();
                const double im = traj.maps[k](r, c).imag();
                os.write(reinterpret_cast<const char*>(&re), sizeof re);
                os.write(reinterpret_cast<const char*>(&im), sizeof im);
            }
    }
    write_text_atomic(path, os.str());
}

// Per-run manifest: resolved configuration, its hash, and timings.
inline void write_manifest(const std::filesystem::path& path,
                           const std::string& command,
                           const std::string& resolved_config,
                           const std::vector<std::pair<std::string, double>>& timings,
                           const std::string& version) {
    nlohmann::json j;
    j["command"] = command;
    j["version"] = version;
    j["config_hash"] = fnv1a64(resolved_config);
    j["resolved_config"] = resolved_config;
    nlohmann::json t;
    for (const auto& [name, sec] : timings) t[name] = sec;
    j["timings_seconds"] = t;
    write_text_atomic(path, j.dump(2) + "\n");
}

}  // namespace qoct
