// qoct — map propagation, Krotov optimization, and (gamma, T) scans for
// thermally noisy gate control, driven by one INI-style config per run.

#include "qoct/config.hpp"
#include "qoct/io.hpp"
#include "qoct/version.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>

namespace {

using namespace qoct;
namespace fs = std::filesystem;

constexpr int kExitConfig = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitIo = 3;

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    }
};

RunConfig load_config(const std::string& path,
                      const std::vector<std::string>& overrides,
                      const std::string& output_flag) {
    RunConfig cfg = parse_config_file(path);
    for (const auto& ov : overrides) {
        const size_t eq = ov.find('=');
        if (eq == std::string::npos)
            throw ConfigError("--set expects section.key=value, got '" + ov + "'");
        apply_config_entry(cfg, ov.substr(0, eq), ov.substr(eq + 1));
    }
    if (const char* env = std::getenv("QOCT_OUTPUT_DIR"); env && *env)
        cfg.output_directory = env;
    if (!output_flag.empty()) cfg.output_directory = output_flag;
    validate_config(cfg);
    return cfg;
}

ControlField build_initial_field(const RunConfig& cfg, const ModelSystem& model) {
    const TimeGrid grid = make_grid(cfg);
    const ShapeEnvelope shape = make_shape(cfg);
    switch (cfg.guess) {
        case GuessKind::zero:
            return ControlField::zero(model.n_channels(), grid, shape);
        case GuessKind::file: {
            ControlField f = read_field_csv(cfg.guess_file, shape);
            if (std::abs(f.grid.dt - grid.dt) > 1e-12 ||
                f.grid.n_points != grid.n_points)
                throw ConfigError("oct.guess_file: grid mismatch with [grid]");
            if (f.n_channels() > model.n_channels())
                throw ConfigError("oct.guess_file: more channels than the model");
            if (f.n_channels() < model.n_channels()) {
                // pad missing channels with zeros (warm starts on extended models)
                Eigen::MatrixXd amps =
                    Eigen::MatrixXd::Zero(model.n_channels(), grid.n_points);
                amps.topRows(f.n_channels()) = f.amplitudes;
                f.amplitudes = amps;
            }
            return f;
        }
        case GuessKind::sinusoid:
        default:
            return guess_field(model, grid, shape, cfg.guess_amplitude, cfg.seed);
    }
}

fs::path out_path(const RunConfig& cfg, const std::string& suffix) {
    return fs::path(cfg.output_directory) / (cfg.output_prefix + "_" + suffix);
}

void maybe_dump_trajectory(const RunConfig& cfg, const MapTrajectory& traj) {
    if (cfg.trajectory_dump == TrajectoryDump::csv)
        write_trajectory_csv(out_path(cfg, "trajectory.csv"), traj);
    else if (cfg.trajectory_dump == TrajectoryDump::binary)
        write_trajectory_binary(out_path(cfg, "trajectory.bin"), traj);
}

nlohmann::json diagnostics_json(const ModelSystem& model, const GateTarget& target,
                                const MapTrajectory& traj) {
    const SuperOperator& lam = traj.final_map();
    const CptpReport rep = choi_cptp_check(lam);
    nlohmann::json j;
    j["infidelity"] = 1.0 - fidelity(lam, target);
    j["fidelity"] = fidelity(lam, target);
    j["tp_residual"] = rep.tp_residual;
    j["choi_min_eig"] = rep.choi_min_eig;
    j["cptp_pass"] = rep.tp_ok && rep.cp_ok;
    j["purity_sub"] = subspace_purity(lam, working_selection(target));
    j["delta_E_literal"] = energy_change(lam, model.drift);
    j["delta_E"] = energy_change_heisenberg(lam, model.drift);
    j["working_directions"] = target.working.size();
    return j;
}

int run(const std::string& command, const RunConfig& cfg) {
    Timer timer;
    const ModelSystem model = make_model(cfg);
    const GateTarget target = make_target(cfg, model);
    const BathSpec bath = make_bath(cfg);
    const PropagatorConfig pcfg = make_propagator_config(cfg);
    const std::string resolved = serialize_config(cfg);
    std::vector<std::pair<std::string, double>> timings;

    if (command == "validate") {
        std::cout << resolved;
        std::cout << "validate: ok (config hash " << fnv1a64(resolved) << ")\n";
        return 0;
    }

    if (command == "propagate" || command == "diagnose") {
        const ControlField field = build_initial_field(cfg, model);
        const MapTrajectory traj = forward_propagate(model, field, bath, pcfg);
        timings.emplace_back("propagate", timer.seconds());
        const nlohmann::json diag = diagnostics_json(model, target, traj);
        write_text_atomic(out_path(cfg, "diagnostics.json"), diag.dump(2) + "\n");
        maybe_dump_trajectory(cfg, traj);
        if (command == "diagnose") {
            // time-resolved trace: subspace purity, CPTP residuals, purity-loss rate
            ThermalGenerator gen(model, field, bath);
            const SubspaceSelection sel = working_selection(target);
            std::vector<std::vector<std::string>> rows;
            rows.reserve(traj.times.size());
            for (size_t k = 0; k < traj.times.size(); ++k) {
                const CptpReport rep = choi_cptp_check(traj.maps[k]);
                const double rate = bath.closed()
                                        ? 0.0
                                        : purity_loss_rate(
                                              traj.maps[k],
                                              gen.dissipator_at(traj.times[k]));
                rows.push_back({format_float(traj.times[k]),
                                format_float(subspace_purity(traj.maps[k], sel)),
                                format_float(rep.tp_residual),
                                format_float(rep.choi_min_eig),
                                format_float(rate)});
            }
            write_csv_atomic(out_path(cfg, "diagnose_trace.csv"),
                             {"t", "purity_sub", "tp_residual", "choi_min_eig",
                              "purity_loss_rate"},
                             rows);
            timings.emplace_back("trace", timer.seconds());
        }
        write_manifest(out_path(cfg, "manifest.json"), command, resolved, timings,
                       kVersion);
        std::cout << command << ": IF = " << format_float(diag["infidelity"])
                  << ", CPTP " << (diag["cptp_pass"].get<bool>() ? "pass" : "FAIL")
                  << "\n";
        return 0;
    }

    if (command == "optimize") {
        const ControlField field0 = build_initial_field(cfg, model);
        const OCTConfig octcfg = make_oct_config(cfg);
        const OptimizeResult res = optimize(model, bath, target, octcfg, pcfg, field0);
        timings.emplace_back("optimize", timer.seconds());
        write_iteration_log(out_path(cfg, "iterations.csv"), res.records);
        write_field_csv(out_path(cfg, "field.csv"), res.field);
        write_manifest(out_path(cfg, "manifest.json"), command, resolved, timings,
                       kVersion);
        std::cout << "optimize: best IF = " << format_float(res.best_infidelity)
                  << " at iteration " << res.best_iteration << " of "
                  << (res.records.size() - 1)
                  << (res.reached_target ? " (target reached)" : "") << "\n";
        return 0;
    }

    if (command == "scan") {
        if (cfg.reference_field.empty())
            throw ConfigError("scan.reference_field: required for scan");
        ControlField ref = read_field_csv(cfg.reference_field, make_shape(cfg));
        if (ref.n_channels() != model.n_channels())
            throw ConfigError("scan.reference_field: channel count mismatch");
        const OCTConfig octcfg = make_oct_config(cfg);
        const ScanResult scan =
            scan_grid(model, target, ref, cfg.scan_gammas, cfg.scan_temperatures,
                      bath, pcfg, octcfg, cfg.scan_mode, cfg.scan_workers);
        timings.emplace_back("scan", timer.seconds());
        write_scan_csv(out_path(cfg, "scan.csv"), scan);
        write_manifest(out_path(cfg, "manifest.json"), command, resolved, timings,
                       kVersion);
        int failures = 0;
        for (const auto& p : scan.points) failures += p.ok ? 0 : 1;
        std::cout << "scan: " << scan.points.size() << " points ("
                  << cfg.scan_gammas.size() << " gammas x "
                  << cfg.scan_temperatures.size() << " temperatures), " << failures
                  << " failed\n";
        return 0;
    }

    if (command == "bohr-trace") {
        const ControlField field = build_initial_field(cfg, model);
        ThermalGenerator gen(model, field, bath);
        write_bohr_trace(out_path(cfg, "bohr.csv"), gen, field.grid);
        timings.emplace_back("bohr-trace", timer.seconds());
        write_manifest(out_path(cfg, "manifest.json"), command, resolved, timings,
                       kVersion);
        std::cout << "bohr-trace: " << field.grid.n_points << " samples, "
                  << model.dim * (model.dim - 1) << " channels\n";
        return 0;
    }

    throw ConfigError("unknown command: " + command);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Thermally consistent optimal control of noisy quantum gates"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    std::string output_dir;

    for (const char* name :
         {"validate", "propagate", "optimize", "scan", "bohr-trace", "diagnose"}) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("-c,--config", config_path, "run configuration file")
            ->required();
        sub->add_option("--set", overrides,
                        "override a config key (section.key=value)");
        sub->add_option("-o,--output", output_dir, "output directory override");
    }

    CLI11_PARSE(app, argc, argv);
    const std::string command = app.get_subcommands().front()->get_name();

    try {
        const qoct::RunConfig cfg = load_config(config_path, overrides, output_dir);
        return run(command, cfg);
    } catch (const qoct::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const qoct::ValidationError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const qoct::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const qoct::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    }
}
