// config.hpp — One structured-text (INI-style) configuration per run; every
// key has a typed default, unknown keys are rejected with their full path,
// and serialize() echoes the fully resolved state so parse(serialize(c)) == c.

#pragma once

#include "qoct/diagnostics.hpp"
#include "qoct/models.hpp"
#include "qoct/oct.hpp"
#include "qoct/propagator.hpp"
#include "qoct/thermal.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace qoct {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class ModelKind { qubit_ancillas, two_qubit };
enum class GuessKind { sinusoid, zero, file };
enum class TrajectoryDump { none, csv, binary };

struct RunConfig {
    // model
    ModelKind model_type = ModelKind::qubit_ancillas;
    int n_ancillas = 1;
    double omega = 1.0;
    double eps_uc_scale = 2e-4;
    UncontrolledMode uc_mode = UncontrolledMode::constant;
    bool direct_channel = false;
    std::vector<double> coeff_a{1.0}, coeff_b{1.0}, coeff_c{1.0}, coeff_d{1.0};
    double a_x = 1.0, a_y = 1.0, a_phase = 0.0;
    // bath
    double gamma = 0.0;
    double temperature = 1.0;
    SpectralDensity spectral_density = SpectralDensity::ohmic;
    double gamma_phase = 0.0;
    // grid
    double dt = 0.1;
    int n_steps = 4000;
    // propagator
    StepMethod method = StepMethod::automatic;
    int cheb_points = 7;
    int krylov_dim = 3;
    double inner_tol = 1e-11;
    int max_inner_iters = 40;
    int substeps = 1;
    // oct
    double lambda = 1.0;
    double gamma_a = 0.0;
    int max_iters = 500;
    double target_infidelity = 1e-4;
    UpdateMode update_mode = UpdateMode::sequential_krotov;
    double regression_tol = 1e-9;
    GuessKind guess = GuessKind::sinusoid;
    double guess_amplitude = 0.2;
    std::string guess_file;
    unsigned long seed = 0;
    double shape_floor = 1e-4;
    double shape_sigma_frac = 1.0 / 6.0;
    // target
    Gate gate = Gate::hadamard;
    // scan
    std::vector<double> scan_gammas{1e-5, 1e-4, 1e-3, 1e-2};
    std::vector<double> scan_temperatures{0.5, 5.0};
    ScanMode scan_mode = ScanMode::degrade_only;
    int scan_workers = 0;
    std::string reference_field;
    // output
    std::string output_directory = "out";
    std::string output_prefix = "run";
    TrajectoryDump trajectory_dump = TrajectoryDump::none;

    bool operator==(const RunConfig&) const = default;
};

namespace detail_config {

inline std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    size_t b = s.find_last_not_of(" \t\r\n");
    return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing characters");
        return x;
    } catch (const std::exception&) {
        throw ConfigError(key + ": not a number: '" + v + "'");
    }
}

inline long parse_int(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const long x = std::stol(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing characters");
        return x;
    } catch (const std::exception&) {
        throw ConfigError(key + ": not an integer: '" + v + "'");
    }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(key + ": not a boolean: '" + v + "'");
}

inline std::vector<double> parse_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        cell = trim(cell);
        if (!cell.empty()) out.push_back(parse_double(key, cell));
    }
    if (out.empty()) throw ConfigError(key + ": empty list");
    return out;
}

inline std::string join(const std::vector<double>& v) {
    std::ostringstream os;
    for (size_t i = 0; i < v.size(); ++i) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", v[i]);
        os << (i ? "," : "") << buf;
    }
    return os.str();
}

inline std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

template <typename T>
inline T parse_enum(const std::string& key, const std::string& v,
                    const std::vector<std::pair<std::string, T>>& table) {
    for (const auto& [name, val] : table)
        if (name == v) return val;
    std::string allowed;
    for (const auto& [name, val] : table) allowed += (allowed.empty() ? "" : "|") + name;
    throw ConfigError(key + ": '" + v + "' not one of " + allowed);
}

template <typename T>
inline std::string enum_name(T v, const std::vector<std::pair<std::string, T>>& table) {
    for (const auto& [name, val] : table)
        if (val == v) return name;
    return "?";
}

inline const std::vector<std::pair<std::string, ModelKind>>& model_names() {
    static const std::vector<std::pair<std::string, ModelKind>> t{
        {"qutrit", ModelKind::qubit_ancillas},
        {"qubit_ancillas", ModelKind::qubit_ancillas},
        {"two_qubit", ModelKind::two_qubit}};
    return t;
}
inline const std::vector<std::pair<std::string, SpectralDensity>>& sd_names() {
    static const std::vector<std::pair<std::string, SpectralDensity>> t{
        {"ohmic", SpectralDensity::ohmic}, {"flat", SpectralDensity::flat}};
    return t;
}
inline const std::vector<std::pair<std::string, StepMethod>>& method_names() {
    static const std::vector<std::pair<std::string, StepMethod>> t{
        {"auto", StepMethod::automatic},
        {"semi_global", StepMethod::semi_global},
        {"expm_midpoint", StepMethod::expm_midpoint},
        {"unitary_exact", StepMethod::unitary_exact}};
    return t;
}
inline const std::vector<std::pair<std::string, UpdateMode>>& mode_names() {
    static const std::vector<std::pair<std::string, UpdateMode>> t{
        {"sequential_krotov", UpdateMode::sequential_krotov},
        {"full_sweep_gradient", UpdateMode::full_sweep_gradient}};
    return t;
}
inline const std::vector<std::pair<std::string, GuessKind>>& guess_names() {
    static const std::vector<std::pair<std::string, GuessKind>> t{
        {"sinusoid", GuessKind::sinusoid},
        {"zero", GuessKind::zero},
        {"file", GuessKind::file}};
    return t;
}
inline const std::vector<std::pair<std::string, UncontrolledMode>>& uc_names() {
    static const std::vector<std::pair<std::string, UncontrolledMode>> t{
        {"constant", UncontrolledMode::constant},
        {"shaped", UncontrolledMode::shaped}};
    return t;
}
inline const std::vector<std::pair<std::string, Gate>>& gate_names() {
    static const std::vector<std::pair<std::string, Gate>> t{
        {"hadamard", Gate::hadamard}, {"cix", Gate::cix}, {"identity", Gate::identity}};
    return t;
}
inline const std::vector<std::pair<std::string, ScanMode>>& scan_names() {
    static const std::vector<std::pair<std::string, ScanMode>> t{
        {"degrade_only", ScanMode::degrade_only}, {"mitigate", ScanMode::mitigate}};
    return t;
}
inline const std::vector<std::pair<std::string, TrajectoryDump>>& dump_names() {
    static const std::vector<std::pair<std::string, TrajectoryDump>> t{
        {"none", TrajectoryDump::none},
        {"csv", TrajectoryDump::csv},
        {"binary", TrajectoryDump::binary}};
    return t;
}

}  // namespace detail_config

inline void apply_config_entry(RunConfig& c, const std::string& path,
                               const std::string& value) {
    using namespace detail_config;
    const std::string& v = value;
    if (path == "model.type") c.model_type = parse_enum(path, v, model_names());
    else if (path == "model.n_ancillas") c.n_ancillas = static_cast<int>(parse_int(path, v));
    else if (path == "model.omega") c.omega = parse_double(path, v);
    else if (path == "model.eps_uc_scale") c.eps_uc_scale = parse_double(path, v);
    else if (path == "model.uc_mode") c.uc_mode = parse_enum(path, v, uc_names());
    else if (path == "model.direct_channel") c.direct_channel = parse_bool(path, v);
    else if (path == "model.coeff_a") c.coeff_a = parse_list(path, v);
    else if (path == "model.coeff_b") c.coeff_b = parse_list(path, v);
    else if (path == "model.coeff_c") c.coeff_c = parse_list(path, v);
    else if (path == "model.coeff_d") c.coeff_d = parse_list(path, v);
    else if (path == "model.a_x") c.a_x = parse_double(path, v);
    else if (path == "model.a_y") c.a_y = parse_double(path, v);
    else if (path == "model.a_phase") c.a_phase = parse_double(path, v);
    else if (path == "bath.gamma") c.gamma = parse_double(path, v);
    else if (path == "bath.temperature") c.temperature = parse_double(path, v);
    else if (path == "bath.spectral_density") c.spectral_density = parse_enum(path, v, sd_names());
    else if (path == "bath.gamma_phase") c.gamma_phase = parse_double(path, v);
    else if (path == "grid.dt") c.dt = parse_double(path, v);
    else if (path == "grid.n_steps") c.n_steps = static_cast<int>(parse_int(path, v));
    else if (path == "propagator.method") c.method = parse_enum(path, v, method_names());
    else if (path == "propagator.m") c.cheb_points = static_cast<int>(parse_int(path, v));
    else if (path == "propagator.k") c.krylov_dim = static_cast<int>(parse_int(path, v));
    else if (path == "propagator.inner_tol") c.inner_tol = parse_double(path, v);
    else if (path == "propagator.max_inner_iters") c.max_inner_iters = static_cast<int>(parse_int(path, v));
    else if (path == "propagator.substeps") c.substeps = static_cast<int>(parse_int(path, v));
    else if (path == "oct.lambda") c.lambda = parse_double(path, v);
    else if (path == "oct.gamma_a") c.gamma_a = parse_double(path, v);
    else if (path == "oct.max_iters") c.max_iters = static_cast<int>(parse_int(path, v));
    else if (path == "oct.target_infidelity") c.target_infidelity = parse_double(path, v);
    else if (path == "oct.mode") c.update_mode = parse_enum(path, v, mode_names());
    else if (path == "oct.regression_tol") c.regression_tol = parse_double(path, v);
    else if (path == "oct.guess") c.guess = parse_enum(path, v, guess_names());
    else if (path == "oct.guess_amplitude") c.guess_amplitude = parse_double(path, v);
    else if (path == "oct.guess_file") c.guess_file = v;
    else if (path == "oct.seed") c.seed = static_cast<unsigned long>(parse_int(path, v));
    else if (path == "oct.shape_floor") c.shape_floor = parse_double(path, v);
    else if (path == "oct.shape_sigma_frac") c.shape_sigma_frac = parse_double(path, v);
    else if (path == "target.gate") c.gate = parse_enum(path, v, gate_names());
    else if (path == "scan.gammas") c.scan_gammas = parse_list(path, v);
    else if (path == "scan.temperatures") c.scan_temperatures = parse_list(path, v);
    else if (path == "scan.mode") c.scan_mode = parse_enum(path, v, scan_names());
    else if (path == "scan.workers") c.scan_workers = static_cast<int>(parse_int(path, v));
    else if (path == "scan.reference_field") c.reference_field = v;
    else if (path == "output.directory") c.output_directory = v;
    else if (path == "output.prefix") c.output_prefix = v;
    else if (path == "output.trajectory_dump") c.trajectory_dump = parse_enum(path, v, dump_names());
    else throw ConfigError("unknown key: " + path);
}

inline RunConfig parse_config_text(const std::string& text) {
    using namespace detail_config;
    RunConfig c;
    std::istringstream is(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw ConfigError("line " + std::to_string(lineno) + ": bad section header");
            section = trim(t.substr(1, t.size() - 2));
            continue;
        }
        const size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (section.empty())
            throw ConfigError("line " + std::to_string(lineno) + ": key outside any section");
        apply_config_entry(c, section + "." + key, value);
    }
    return c;
}

inline RunConfig parse_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config_text(ss.str());
}

// Canonical text with every resolved value; its hash identifies the run.
inline std::string serialize_config(const RunConfig& c) {
    using namespace detail_config;
    std::ostringstream os;
    os << "[model]\n";
    os << "type = " << enum_name(c.model_type, model_names()) << "\n";
    os << "n_ancillas = " << c.n_ancillas << "\n";
    os << "omega = " << fmt(c.omega) << "\n";
    os << "eps_uc_scale = " << fmt(c.eps_uc_scale) << "\n";
    os << "uc_mode = " << enum_name(c.uc_mode, uc_names()) << "\n";
    os << "direct_channel = " << (c.direct_channel ? "true" : "false") << "\n";
    os << "coeff_a = " << join(c.coeff_a) << "\n";
    os << "coeff_b = " << join(c.coeff_b) << "\n";
    os << "coeff_c = " << join(c.coeff_c) << "\n";
    os << "coeff_d = " << join(c.coeff_d) << "\n";
    os << "a_x = " << fmt(c.a_x) << "\n";
    os << "a_y = " << fmt(c.a_y) << "\n";
    os << "a_phase = " << fmt(c.a_phase) << "\n";
    os << "[bath]\n";
    os << "gamma = " << fmt(c.gamma) << "\n";
    os << "temperature = " << fmt(c.temperature) << "\n";
    os << "spectral_density = " << enum_name(c.spectral_density, sd_names()) << "\n";
    os << "gamma_phase = " << fmt(c.gamma_phase) << "\n";
    os << "[grid]\n";
    os << "dt = " << fmt(c.dt) << "\n";
    os << "n_steps = " << c.n_steps << "\n";
    os << "[propagator]\n";
    os << "method = " << enum_name(c.method, method_names()) << "\n";
    os << "m = " << c.cheb_points << "\n";
    os << "k = " << c.krylov_dim << "\n";
    os << "inner_tol = " << fmt(c.inner_tol) << "\n";
    os << "max_inner_iters = " << c.max_inner_iters << "\n";
    os << "substeps = " << c.substeps << "\n";
    os << "[oct]\n";
    os << "lambda = " << fmt(c.lambda) << "\n";
    os << "gamma_a = " << fmt(c.gamma_a) << "\n";
    os << "max_iters = " << c.max_iters << "\n";
    os << "target_infidelity = " << fmt(c.target_infidelity) << "\n";
    os << "mode = " << enum_name(c.update_mode, mode_names()) << "\n";
    os << "regression_tol = " << fmt(c.regression_tol) << "\n";
    os << "guess = " << enum_name(c.guess, guess_names()) << "\n";
    os << "guess_amplitude = " << fmt(c.guess_amplitude) << "\n";
    os << "guess_file = " << c.guess_file << "\n";
    os << "seed = " << c.seed << "\n";
    os << "shape_floor = " << fmt(c.shape_floor) << "\n";
    os << "shape_sigma_frac = " << fmt(c.shape_sigma_frac) << "\n";
    os << "[target]\n";
    os << "gate = " << enum_name(c.gate, gate_names()) << "\n";
    os << "[scan]\n";
    os << "gammas = " << join(c.scan_gammas) << "\n";
    os << "temperatures = " << join(c.scan_temperatures) << "\n";
    os << "mode = " << enum_name(c.scan_mode, scan_names()) << "\n";
    os << "workers = " << c.scan_workers << "\n";
    os << "reference_field = " << c.reference_field << "\n";
    os << "[output]\n";
    os << "directory = " << c.output_directory << "\n";
    os << "prefix = " << c.output_prefix << "\n";
    os << "trajectory_dump = " << enum_name(c.trajectory_dump, dump_names()) << "\n";
    return os.str();
}

inline void validate_config(const RunConfig& c) {
    auto check = [](bool ok, const std::string& msg) {
        if (!ok) throw ConfigError(msg);
    };
    check(c.n_ancillas >= 1 && c.n_ancillas <= 3,
          "model.n_ancillas: must be in {1,2,3}");
    check(c.omega > 0.0, "model.omega: must be > 0");
    check(c.gamma >= 0.0, "bath.gamma: must be >= 0");
    check(c.temperature > 0.0, "bath.temperature: must be > 0");
    check(c.gamma_phase >= 0.0, "bath.gamma_phase: must be >= 0");
    check(c.dt > 0.0, "grid.dt: must be > 0");
    check(c.n_steps >= 1, "grid.n_steps: must be >= 1");
    check(c.cheb_points >= 2, "propagator.m: must be >= 2");
    check(c.krylov_dim >= 1, "propagator.k: must be >= 1");
    check(c.inner_tol > 0.0, "propagator.inner_tol: must be > 0");
    check(c.max_inner_iters >= 1, "propagator.max_inner_iters: must be >= 1");
    check(c.substeps >= 1, "propagator.substeps: must be >= 1");
    check(c.lambda > 0.0, "oct.lambda: must be > 0");
    check(c.target_infidelity > 0.0 && c.target_infidelity < 1.0,
          "oct.target_infidelity: must be in (0,1)");
    check(c.max_iters >= 0, "oct.max_iters: must be >= 0");
    check(c.guess_amplitude >= 0.0, "oct.guess_amplitude: must be >= 0");
    check(c.shape_floor >= 0.0, "oct.shape_floor: must be >= 0");
    check(c.shape_sigma_frac > 0.0, "oct.shape_sigma_frac: must be > 0");
    check(c.scan_workers >= 0, "scan.workers: must be >= 0");
    check(!(c.guess == GuessKind::file && c.guess_file.empty()),
          "oct.guess_file: required when oct.guess = file");
    if (c.model_type == ModelKind::two_qubit)
        check(c.gate != Gate::hadamard,
              "target.gate: hadamard needs the qubit_ancillas model");
    else
        check(c.gate != Gate::cix, "target.gate: cix needs the two_qubit model");
    const int dim = c.model_type == ModelKind::two_qubit ? 4 : c.n_ancillas + 2;
    const int d2m1 = dim * dim - 1;
    check(c.krylov_dim <= d2m1, "propagator.k: must be <= dim^2 - 1");
}

// --------------------------- builders ---------------------------------------

inline ModelSystem make_model(const RunConfig& c) {
    if (c.model_type == ModelKind::two_qubit)
        return build_two_qubit_model(c.omega, c.a_phase, c.a_x, c.a_y);
    ModelSystem m = build_qubit_ancilla_model(
        c.n_ancillas, c.omega, {c.coeff_a, c.coeff_b, c.coeff_c, c.coeff_d},
        c.eps_uc_scale, c.direct_channel);
    m.uc_mode = c.uc_mode;
    return m;
}

inline TimeGrid make_grid(const RunConfig& c) { return {c.dt, c.n_steps + 1}; }

inline ShapeEnvelope make_shape(const RunConfig& c) {
    return ShapeEnvelope::for_horizon(make_grid(c).horizon(), c.shape_sigma_frac,
                                      c.shape_floor);
}

inline BathSpec make_bath(const RunConfig& c) {
    return {c.gamma, c.temperature, c.spectral_density, c.gamma_phase};
}

inline PropagatorConfig make_propagator_config(const RunConfig& c) {
    PropagatorConfig p;
    p.dt = c.dt;
    p.cheb_points = c.cheb_points;
    p.krylov_dim = c.krylov_dim;
    p.inner_tol = c.inner_tol;
    p.max_inner_iters = c.max_inner_iters;
    p.method = c.method;
    p.substeps = c.substeps;
    return p;
}

inline OCTConfig make_oct_config(const RunConfig& c) {
    OCTConfig o;
    o.lambda = c.lambda;
    o.gamma_a = c.gamma_a;
    o.max_iters = c.max_iters;
    o.target_infidelity = c.target_infidelity;
    o.mode = c.update_mode;
    o.regression_tol = c.regression_tol;
    return o;
}

inline GateTarget make_target(const RunConfig& c, const ModelSystem& m) {
    return target_superoperator(c.gate, m.dim);
}

}  // namespace qoct
