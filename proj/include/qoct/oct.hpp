// oct.hpp — Krotov-type optimal control of dynamical maps: fidelity
// functional, forward/adjoint propagation, sequential field updates with
// step damping, and an exact-gradient full-sweep mode kept for verification.

#pragma once

#include "qoct/models.hpp"
#include "qoct/propagator.hpp"
#include "qoct/thermal.hpp"

#include <chrono>
#include <cmath>
#include <utility>
#include <vector>

namespace qoct {

// --------------------------- objective --------------------------------------

// F = Re Tr{O^dag Lambda(tau)} / Tr{O^dag O}; 1 exactly when the map matches
// the target on its working directions.
inline double fidelity(const SuperOperator& lambda_final, const GateTarget& target) {
    const double norm = target.target.squaredNorm();
    require(norm > 1e-24, "fidelity: zero-norm target");
    if (lambda_final.rows() != target.target.rows())
        throw ShapeError("fidelity: dimension mismatch");
    const Complex j = (target.target.adjoint() * lambda_final).trace();
    return j.real() / norm;
}

inline double j_max(const SuperOperator& lambda_final, const GateTarget& target) {
    return ((target.target.adjoint() * lambda_final).trace()).real();
}

// --------------------------- configuration ----------------------------------

enum class UpdateMode { sequential_krotov, full_sweep_gradient };

struct OCTConfig {
    double lambda = 1.0;            // penalty weight, > 0
    double gamma_a = 0.0;           // dissipator-derivative weight (0: simplified)
    int max_iters = 500;
    double target_infidelity = 1e-4;
    UpdateMode mode = UpdateMode::sequential_krotov;
    double regression_tol = 1e-9;   // J drop beyond this damps lambda
    double lambda_damping = 2.0;
    double fd_eps = 1e-5;           // finite-difference step for gamma_a mode

    void validate() const {
        require(lambda > 0.0, "oct.lambda must be > 0");
        require(target_infidelity > 0.0 && target_infidelity < 1.0,
                "oct.target_infidelity must be in (0,1)");
        require(max_iters >= 0, "oct.max_iters must be >= 0");
    }
};

struct IterationRecord {
    int iteration = 0;
    double j_max = 0.0;
    double fidelity = 0.0;
    double infidelity = 0.0;
    double field_change_norm = 0.0;
    double seconds = 0.0;
    bool monotone_ok = true;
};

struct OptimizeResult {
    ControlField field;  // best iterate
    std::vector<IterationRecord> records;
    double best_infidelity = 1.0;
    int best_iteration = 0;
    bool reached_target = false;
    double final_lambda = 0.0;
};

// --------------------------- propagation fronts -----------------------------

inline MapTrajectory forward_propagate(const ModelSystem& m, const ControlField& f,
                                       const BathSpec& bath, PropagatorConfig pcfg) {
    pcfg.dt = f.grid.dt;
    ThermalGenerator gen(m, f, bath);
    return propagate_map(gen, f.grid.horizon(), pcfg, Direction::forward);
}

inline MapTrajectory backward_propagate(const ModelSystem& m, const ControlField& f,
                                        const BathSpec& bath, const GateTarget& target,
                                        PropagatorConfig pcfg) {
    pcfg.dt = f.grid.dt;
    ThermalGenerator gen(m, f, bath);
    const Eigen::MatrixXcd terminal = target.target.adjoint();
    return propagate_map(gen, f.grid.horizon(), pcfg, Direction::adjoint, &terminal);
}

// --------------------------- field update -----------------------------------

// Y is the co-state in the row convention Y(t) = O^dag Lambda(tau,t), so
// dJ/d eps(t) = Im Tr{Y K_c Lambda} with K_c the Hermitian commutator kernel
// of the channel generator.
inline double krotov_field_update(const Eigen::MatrixXcd& Y,
                                  const Eigen::MatrixXcd& lambda,
                                  const SuperOperator& channel_kernel,
                                  double shape_value, double lambda_penalty,
                                  double gamma_a = 0.0,
                                  const SuperOperator* dissipator_curvature = nullptr) {
    const Complex tr = (Y * channel_kernel * lambda).trace();
    if (gamma_a != 0.0 && dissipator_curvature != nullptr) {
        const Complex denom =
            lambda_penalty + gamma_a * (Y * (*dissipator_curvature) * lambda).trace();
        if (std::abs(denom) >= 1e-12 * lambda_penalty)
            return 0.5 * shape_value * std::imag(tr / denom);
    }
    return shape_value / (2.0 * lambda_penalty) * std::imag(tr);
}

namespace detail {

// 1/2 d^2 L_D / d eps^2 by central differences of the dissipator at the step
// midpoint; the closed propagator is re-stepped across this interval only.
inline SuperOperator dissipator_curvature_fd(const ModelSystem& m,
                                             const ControlField& f,
                                             const BathSpec& bath, int channel,
                                             int k, double eps_fd) {
    ControlField fp = f;
    fp.amplitudes(channel, k) += eps_fd;
    ControlField fm = f;
    fm.amplitudes(channel, k) -= eps_fd;
    const double tmid = f.grid.time(k) + 0.5 * f.grid.dt;
    const SuperOperator d0 = ThermalGenerator(m, f, bath).dissipator_at(tmid);
    const SuperOperator dp = ThermalGenerator(m, fp, bath).dissipator_at(tmid);
    const SuperOperator dm = ThermalGenerator(m, fm, bath).dissipator_at(tmid);
    return (dp - 2.0 * d0 + dm) / (2.0 * eps_fd * eps_fd);
}

}  // namespace detail

// --------------------------- exact discrete gradient ------------------------

// J evaluated with per-step midpoint exponentials; the discretization whose
// gradient the full-sweep mode computes exactly (Frechet derivative through
// the augmented exponential).
inline double objective_expm(const ModelSystem& m, const ControlField& f,
                             const BathSpec& bath, const GateTarget& target) {
    ThermalGenerator gen(m, f, bath);
    const int n = f.grid.n_steps();
    const int N = gen.size();
    Eigen::MatrixXcd lam = Eigen::MatrixXcd::Identity(N, N);
    for (int k = 0; k < n; ++k) {
        const double tm = f.grid.time(k) + 0.5 * f.grid.dt;
        lam = (reference_step_expm(gen.at(tm), f.grid.dt) * lam).eval();
    }
    return j_max(lam, target);
}

// dJ/d eps_{c,k} for the objective above, all channels and steps at once.
inline Eigen::MatrixXd gradient_full_sweep(const ModelSystem& m,
                                           const ControlField& f,
                                           const BathSpec& bath,
                                           const GateTarget& target) {
    ThermalGenerator gen(m, f, bath);
    const int n = f.grid.n_steps();
    const int N = gen.size();
    const int nc = m.n_channels();

    std::vector<Eigen::MatrixXcd> L(n), G(n);
    std::vector<Eigen::MatrixXcd> lam(n + 1);
    lam[0] = Eigen::MatrixXcd::Identity(N, N);
    for (int k = 0; k < n; ++k) {
        L[k] = gen.at(f.grid.time(k) + 0.5 * f.grid.dt);
        G[k] = reference_step_expm(L[k], f.grid.dt);
        lam[k + 1] = G[k] * lam[k];
    }
    std::vector<Eigen::MatrixXcd> Y(n + 1);
    Y[n] = target.target.adjoint();
    for (int k = n - 1; k >= 0; --k) Y[k] = Y[k + 1] * G[k];

    std::vector<SuperOperator> dL(nc);
    for (int c = 0; c < nc; ++c) dL[c] = commutator_superop(m.control_generators[c]);

    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(nc, f.grid.n_points);
    const double dt = f.grid.dt;
    for (int k = 0; k < n; ++k) {
        for (int c = 0; c < nc; ++c) {
            // Frechet derivative of exp((L + eps dL) dt) via the block trick
            Eigen::MatrixXcd aug = Eigen::MatrixXcd::Zero(2 * N, 2 * N);
            aug.topLeftCorner(N, N) = L[k] * dt;
            aug.bottomRightCorner(N, N) = L[k] * dt;
            aug.topRightCorner(N, N) = dL[c] * dt;
            const Eigen::MatrixXcd E = aug.exp();
            const Eigen::MatrixXcd dG = E.topRightCorner(N, N);
            g(c, k) = ((Y[k + 1] * dG * lam[k]).trace()).real();
        }
    }
    return g;
}

// --------------------------- optimization loop ------------------------------

namespace detail {

struct SweepResult {
    double j = 0.0;
    double field_change_sq = 0.0;
};

// Forward sweep with sequential updates. The thermal generator is bound to
// the mutable field and its propagator cache only ever extends behind the
// sweep, which keeps the dissipator consistent with the updated amplitudes.
inline SweepResult sequential_sweep(const ModelSystem& m, ControlField& f,
                                    const BathSpec& bath, const GateTarget& target,
                                    const std::vector<Eigen::MatrixXcd>& Y,
                                    const OCTConfig& cfg,
                                    const PropagatorConfig& pcfg_in,
                                    double lambda_penalty) {
    PropagatorConfig pcfg = pcfg_in;
    pcfg.dt = f.grid.dt;
    const int n = f.grid.n_steps();
    const int nc = m.n_channels();
    const int N = m.dim * m.dim;

    std::vector<SuperOperator> kernels(nc);
    for (int c = 0; c < nc; ++c)
        kernels[c] = commutator_kernel(m.control_generators[c]);

    ThermalGenerator gen(m, f, bath);
    const bool closed = bath.closed();
    const StepMethod method =
        closed ? StepMethod::unitary_exact
               : (pcfg.method == StepMethod::automatic ? StepMethod::semi_global
                                                       : pcfg.method);
    SemiGlobalStepper stepper(pcfg, N, N);

    Eigen::MatrixXcd lam = Eigen::MatrixXcd::Identity(N, N);
    SweepResult res;
    for (int k = 0; k < n; ++k) {
        for (int c = 0; c < nc; ++c) {
            double de;
            if (cfg.gamma_a != 0.0) {
                const SuperOperator curv =
                    dissipator_curvature_fd(m, f, bath, c, k, cfg.fd_eps);
                de = krotov_field_update(Y[k], lam, kernels[c],
                                         f.shape(f.grid.time(k)), lambda_penalty,
                                         cfg.gamma_a, &curv);
            } else {
                de = krotov_field_update(Y[k], lam, kernels[c],
                                         f.shape(f.grid.time(k)), lambda_penalty);
            }
            f.amplitudes(c, k) += de;
            res.field_change_sq += de * de * f.grid.dt;
        }
        const double t0 = f.grid.time(k);
        switch (method) {
            case StepMethod::unitary_exact: {
                const Operator u = unitary_step(gen.hamiltonian_at(t0 + 0.5 * pcfg.dt),
                                                pcfg.dt);
                lam = (conjugation_superop(u) * lam).eval();
                break;
            }
            case StepMethod::expm_midpoint: {
                const double h = pcfg.dt / pcfg.substeps;
                for (int ss = 0; ss < pcfg.substeps; ++ss)
                    lam = (reference_step_expm(gen.at(t0 + (ss + 0.5) * h), h) * lam)
                              .eval();
                break;
            }
            default:
                lam = stepper.step(gen, t0, lam);
                break;
        }
    }
    res.j = j_max(lam, target);
    return res;
}

}  // namespace detail

// Krotov loop: adjoint propagation with the previous iterate's field, then a
// forward sweep applying updates in place. Keeps the best iterate; damps the
// step (lambda *= damping) whenever J regresses beyond the tolerance.
inline OptimizeResult optimize(const ModelSystem& m, const BathSpec& bath,
                               const GateTarget& target, const OCTConfig& cfg,
                               const PropagatorConfig& pcfg,
                               const ControlField& initial_field) {
    cfg.validate();
    bath.validate();
    const auto t_start = std::chrono::steady_clock::now();
    auto seconds = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                             t_start)
            .count();
    };
    const double troo = target.target.squaredNorm();

    OptimizeResult out;
    ControlField field = initial_field;
    double lambda = cfg.lambda;

    MapTrajectory fwd = forward_propagate(m, field, bath, pcfg);
    double j = j_max(fwd.final_map(), target);
    double f_val = j / troo;
    out.records.push_back({0, j, f_val, 1.0 - f_val, 0.0, seconds(), true});
    out.field = field;
    out.best_infidelity = 1.0 - f_val;
    out.best_iteration = 0;
    out.reached_target = out.best_infidelity <= cfg.target_infidelity;

    for (int it = 1; it <= cfg.max_iters && !out.reached_target; ++it) {
        double j_new = j;
        double change_norm = 0.0;
        if (cfg.mode == UpdateMode::sequential_krotov) {
            MapTrajectory bwd = backward_propagate(m, field, bath, target, pcfg);
            const auto res = detail::sequential_sweep(m, field, bath, target,
                                                      bwd.maps, cfg, pcfg, lambda);
            j_new = res.j;
            change_norm = std::sqrt(res.field_change_sq);
        } else {
            const Eigen::MatrixXd g = gradient_full_sweep(m, field, bath, target);
            double accum = 0.0;
            for (int k = 0; k < field.grid.n_steps(); ++k)
                for (int c = 0; c < m.n_channels(); ++c) {
                    const double de = field.shape(field.grid.time(k)) /
                                      (2.0 * lambda) * g(c, k) / field.grid.dt;
                    field.amplitudes(c, k) += de;
                    accum += de * de * field.grid.dt;
                }
            change_norm = std::sqrt(accum);
            j_new = objective_expm(m, field, bath, target);
        }
        const bool monotone = j_new >= j - cfg.regression_tol;
        if (!monotone) lambda *= cfg.lambda_damping;
        j = j_new;
        f_val = j / troo;
        const double inf = 1.0 - f_val;
        out.records.push_back({it, j, f_val, inf, change_norm, seconds(), monotone});
        if (inf < out.best_infidelity) {
            out.best_infidelity = inf;
            out.best_iteration = it;
            out.field = field;
        }
        if (inf <= cfg.target_infidelity) out.reached_target = true;
    }
    out.final_lambda = lambda;
    return out;
}

}  // namespace qoct
