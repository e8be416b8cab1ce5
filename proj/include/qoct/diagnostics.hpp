// diagnostics.hpp — Post-run metrics: subspace purity of the map, gate energy
// exchange, instantaneous purity-loss rate, infidelity ratios, and the
// (gamma, T) scan driver with optional noise-aware re-optimization.

#pragma once

#include "qoct/oct.hpp"
#include "qoct/operator_core.hpp"

#include <cmath>
#include <future>
#include <string>
#include <thread>
#include <vector>

namespace qoct {

// --------------------------- map metrics ------------------------------------

struct SubspaceSelection {
    std::vector<int> indices;  // operator-basis directions
    int logical_dim = 0;       // M
};

// Tr(Lambda_sub^dag Lambda_sub) / |selection|; 1 for a unitary-restricted map.
inline double subspace_purity(const SuperOperator& lambda,
                              const SubspaceSelection& sel) {
    require(!sel.indices.empty(), "subspace_purity: empty selection");
    const int ns = static_cast<int>(sel.indices.size());
    Eigen::MatrixXcd sub(ns, ns);
    for (int r = 0; r < ns; ++r)
        for (int c = 0; c < ns; ++c)
            sub(r, c) = lambda(sel.indices[r], sel.indices[c]);
    return sub.squaredNorm() / ns;
}

inline SubspaceSelection working_selection(const GateTarget& t) {
    return {t.working, t.logical_dim};
}

// Map applied to the drift observable, literally: tr(Lambda[H0]) - tr(H0).
// Identically zero for trace-preserving maps; kept as the documented default.
inline double energy_change(const SuperOperator& lambda, const Operator& H0) {
    if (lambda.rows() != H0.size())
        throw ShapeError("energy_change: dimension mismatch");
    const Operator out = unvectorize(lambda * vectorize(H0));
    return (out.trace() - H0.trace()).real();
}

// Adjoint (Heisenberg) variant tr(Lambda^dag[H0]) - tr(H0); equals the energy
// exchanged with the bath starting from the infinite-temperature state, up to
// the dimension factor, and vanishes for unitary channels.
inline double energy_change_heisenberg(const SuperOperator& lambda,
                                       const Operator& H0) {
    if (lambda.rows() != H0.size())
        throw ShapeError("energy_change_heisenberg: dimension mismatch");
    const Operator out = unvectorize(lambda.adjoint() * vectorize(H0));
    return (out.trace() - H0.trace()).real();
}

// d/dt Tr{Lambda^dag Lambda} = 2 Re Tr{Lambda^dag L_D Lambda}; the unitary
// part drops out, which callers assert by passing either L_D or the full L.
inline double purity_loss_rate(const SuperOperator& lambda,
                               const SuperOperator& dissipator) {
    return 2.0 * ((lambda.adjoint() * dissipator * lambda).trace()).real();
}

struct InfidelityMetrics {
    double ratio = 0.0;      // IF_noise / IF_U
    double log_ratio = 0.0;  // log10 of ratio
    double gain = 0.0;       // log10(IF_C / IF_noise)
};

inline InfidelityMetrics infidelity_metrics(double if_u, double if_noise,
                                            double if_controlled) {
    require(if_u > 0.0, "infidelity_metrics: IF_U must be > 0");
    InfidelityMetrics m;
    m.ratio = if_noise / if_u;
    m.log_ratio = std::log10(m.ratio);
    m.gain = std::log10(if_controlled / if_noise);
    return m;
}

// --------------------------- (gamma, T) scans --------------------------------

enum class ScanMode { degrade_only, mitigate };

struct ScanPoint {
    double gamma = 0.0;
    double temperature = 0.0;
    double if_u = 0.0;
    double if_noise = 0.0;
    double if_controlled = std::numeric_limits<double>::quiet_NaN();
    double log_ratio = 0.0;
    double gain = std::numeric_limits<double>::quiet_NaN();
    double purity_sub = 0.0;
    double delta_e = 0.0;
    int iterations = 0;
    bool ok = true;
    std::string error;
};

struct ScanResult {
    ScanMode mode = ScanMode::degrade_only;
    std::vector<ScanPoint> points;  // gamma-major, temperature-minor order
};

// Forward-propagates the converged closed reference field across the grid of
// bath parameters; in mitigate mode each point also re-optimizes from the
// reference. Points run in parallel and are assembled in deterministic order.
inline ScanResult scan_grid(const ModelSystem& model, const GateTarget& target,
                            const ControlField& reference_field,
                            const std::vector<double>& gammas,
                            const std::vector<double>& temperatures,
                            const BathSpec& bath_template,
                            const PropagatorConfig& pcfg, const OCTConfig& octcfg,
                            ScanMode mode, int workers = 0) {
    BathSpec closed = bath_template;
    closed.gamma = 0.0;
    closed.gamma_phase = 0.0;
    const MapTrajectory ref = forward_propagate(model, reference_field, closed, pcfg);
    const double if_u = 1.0 - fidelity(ref.final_map(), target);
    require(if_u > 0.0, "scan_grid: closed reference infidelity must be > 0");

    const SubspaceSelection sel = working_selection(target);
    auto run_point = [&](double g, double T) {
        ScanPoint p;
        p.gamma = g;
        p.temperature = T;
        p.if_u = if_u;
        try {
            BathSpec bath = bath_template;
            bath.gamma = g;
            bath.temperature = T;
            const MapTrajectory noisy =
                forward_propagate(model, reference_field, bath, pcfg);
            p.if_noise = 1.0 - fidelity(noisy.final_map(), target);
            p.log_ratio = std::log10(p.if_noise / if_u);
            p.purity_sub = subspace_purity(noisy.final_map(), sel);
            p.delta_e = energy_change_heisenberg(noisy.final_map(), model.drift);
            if (mode == ScanMode::mitigate) {
                const OptimizeResult opt = optimize(model, bath, target, octcfg,
                                                    pcfg, reference_field);
                p.if_controlled = opt.best_infidelity;
                p.iterations = static_cast<int>(opt.records.size()) - 1;
                p.gain = std::log10(p.if_controlled / p.if_noise);
                BathSpec b2 = bath;
                const MapTrajectory ctrl = forward_propagate(model, opt.field, b2, pcfg);
                p.purity_sub = subspace_purity(ctrl.final_map(), sel);
                p.delta_e = energy_change_heisenberg(ctrl.final_map(), model.drift);
            }
        } catch (const std::exception& e) {
            p.ok = false;
            p.error = e.what();
        }
        return p;
    };

    std::vector<std::pair<double, double>> grid;
    for (double g : gammas)
        for (double T : temperatures) grid.emplace_back(g, T);

    ScanResult out;
    out.mode = mode;
    out.points.resize(grid.size());
    const int n_workers = workers > 0
                              ? workers
                              : std::max(1u, std::thread::hardware_concurrency());
    for (size_t base = 0; base < grid.size(); base += n_workers) {
        std::vector<std::future<ScanPoint>> batch;
        const size_t end = std::min(grid.size(), base + n_workers);
        for (size_t i = base; i < end; ++i)
            batch.push_back(std::async(std::launch::async, run_point,
                                       grid[i].first, grid[i].second));
        for (size_t i = base; i < end; ++i) out.points[i] = batch[i - base].get();
    }
    return out;
}

}  // namespace qoct
