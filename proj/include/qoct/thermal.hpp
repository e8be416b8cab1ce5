// thermal.hpp — The invariant-based time-dependent thermal dissipator:
// initial invariants from the t=0 spectral decomposition, propagation by
// unitary conjugation, eigenoperator jump channels with instantaneous Bohr
// frequencies, detailed-balance rates, and the assembled GKLS generator.
// A Lie-algebra coefficient ODE reconstruction is kept as a cross-check.

#pragma once

#include "qoct/generator.hpp"
#include "qoct/models.hpp"
#include "qoct/operator_core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace qoct {

// --------------------------- bath & rates ----------------------------------

enum class SpectralDensity { ohmic, flat };

struct BathSpec {
    double gamma = 0.0;        // overall noise rate
    double temperature = 1.0;  // k_B = 1
    SpectralDensity spectral_density = SpectralDensity::ohmic;
    double gamma_phase = 0.0;  // controller phase noise, 0 disables

    void validate() const {
        require(gamma >= 0.0, "bath.gamma must be >= 0");
        require(temperature > 0.0, "bath.temperature must be > 0");
        require(gamma_phase >= 0.0, "bath.gamma_phase must be >= 0");
    }
    bool closed() const { return gamma == 0.0 && gamma_phase == 0.0; }
};

struct ThermalRates {
    double up = 0.0;    // excitation, gamma J(|w|) n_T(|w|)
    double down = 0.0;  // decay, gamma J(|w|) (n_T(|w|) + 1)
};

inline constexpr double kDegenerateGap = 1e-9;
inline constexpr double kFlatOmegaMin = 1e-6;

// Rates for gap |omega|; detailed balance up/down = exp(-|omega|/T) holds
// exactly. Ohmic J = |omega| has the finite limit gamma*T at zero gap; flat
// J = 1 clamps |omega| away from zero in the Bose factor.
inline ThermalRates thermal_rates(double omega, const BathSpec& bath) {
    bath.validate();
    const double T = bath.temperature;
    double a = std::abs(omega);
    if (bath.spectral_density == SpectralDensity::ohmic) {
        if (a < kDegenerateGap) return {bath.gamma * T, bath.gamma * T};
        const double n = 1.0 / std::expm1(a / T);
        return {bath.gamma * a * n, bath.gamma * a * (n + 1.0)};
    }
    a = std::max(a, kFlatOmegaMin);
    const double n = 1.0 / std::expm1(a / T);
    return {bath.gamma * n, bath.gamma * (n + 1.0)};
}

// --------------------------- t = 0 spectral data ----------------------------

// Labeled eigenframe of H(0): eigenvectors are matched to computational
// indices by greedy max-overlap so A_j(0) ~ |j><j| keeps its label under
// small initial fields; ties fall back to ascending-energy order.
struct SpectralFrame {
    Operator basis;            // column j = labeled eigenvector v_j
    Eigen::VectorXd energies;  // eps_j in label order
    int dim() const { return static_cast<int>(energies.size()); }
};

inline SpectralFrame spectral_frame(const Operator& H0) {
    require(is_hermitian(H0, 1e-10), "spectral_frame: H(0) is not Hermitian");
    const int d = static_cast<int>(H0.rows());
    Eigen::SelfAdjointEigenSolver<Operator> es(H0);
    const Operator V = es.eigenvectors();
    // greedy assignment: biggest |V(i,j)| first claims row i for column j
    std::vector<int> col_of_row(d, -1);
    std::vector<bool> col_used(d, false);
    std::vector<std::pair<double, std::pair<int, int>>> mags;
    mags.reserve(d * d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) mags.push_back({std::abs(V(i, j)), {i, j}});
    std::stable_sort(mags.begin(), mags.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (const auto& [mag, ij] : mags) {
        const auto [i, j] = ij;
        if (col_of_row[i] == -1 && !col_used[j]) {
            col_of_row[i] = j;
            col_used[j] = true;
        }
    }
    SpectralFrame fr;
    fr.basis = Operator(d, d);
    fr.energies = Eigen::VectorXd(d);
    for (int i = 0; i < d; ++i) {
        Eigen::VectorXcd v = V.col(col_of_row[i]);
        // deterministic phase: largest-magnitude component real positive
        int imax = 0;
        for (int r = 1; r < d; ++r)
            if (std::abs(v(r)) > std::abs(v(imax))) imax = r;
        if (std::abs(v(imax)) > 0) v *= std::conj(v(imax)) / std::abs(v(imax));
        fr.basis.col(i) = v;
        fr.energies(i) = es.eigenvalues()(col_of_row[i]);
    }
    return fr;
}

inline std::vector<Operator> initial_invariants(const SpectralFrame& fr) {
    std::vector<Operator> out;
    out.reserve(fr.dim());
    for (int j = 0; j < fr.dim(); ++j)
        out.push_back(fr.basis.col(j) * fr.basis.col(j).adjoint());
    return out;
}

inline std::vector<Operator> initial_invariants(const ModelSystem& m,
                                                const ControlField& f) {
    return initial_invariants(spectral_frame(hamiltonian_at(m, f, 0.0)));
}

// --------------------------- jump operators & frequencies ------------------

inline bool is_rank1_projector(const Operator& A, double tol = 1e-8) {
    return is_hermitian(A, tol) && max_abs(A * A - A) <= tol &&
           std::abs(A.trace() - 1.0) <= tol;
}

// F_ij(t) = U |j><i| U^dag, unit Hilbert-Schmidt norm; lowers the i
// population into j at t=0 and satisfies [A_i - A_j, F_ij] = -2 F_ij by
// covariance of the commutator under conjugation.
inline Operator jump_operator(const Operator& A_i, const Operator& A_j,
                              const Operator& U_t) {
    require(is_rank1_projector(A_i) && is_rank1_projector(A_j),
            "jump_operator: inputs must be rank-1 projectors");
    auto principal_vector = [](const Operator& P) {
        Eigen::SelfAdjointEigenSolver<Operator> es(P);
        Eigen::VectorXcd v = es.eigenvectors().col(P.rows() - 1);  // eig ~ 1
        int imax = 0;
        for (int r = 1; r < v.size(); ++r)
            if (std::abs(v(r)) > std::abs(v(imax))) imax = r;
        if (std::abs(v(imax)) > 0) v *= std::conj(v(imax)) / std::abs(v(imax));
        return v;
    };
    const Eigen::VectorXcd vi = principal_vector(A_i);
    const Eigen::VectorXcd vj = principal_vector(A_j);
    Operator F = (U_t * vj) * (U_t * vi).adjoint();
    return F / F.norm();
}

// Raw Hilbert-Schmidt projection frequency Re Tr{F^dag [H, F]} / Tr{F^dag F}.
// For static diagonal H and F = |j><i| this returns eps_j - eps_i; channel
// bookkeeping flips the sign so the reported omega_ij(0) = eps_i - eps_j.
inline double bohr_frequency(const Operator& H_t, const Operator& F_t) {
    const double nrm2 = F_t.squaredNorm();
    require(nrm2 > 1e-24, "bohr_frequency: zero-norm jump operator");
    const Complex num = (F_t.adjoint() * (H_t * F_t - F_t * H_t)).trace();
    return num.real() / nrm2;
}

// --------------------------- invariant tables ------------------------------

struct InvariantSet {
    TimeGrid grid;
    std::vector<Operator> u_grid;                  // U(t_k)
    std::vector<std::vector<Operator>> invariants; // [k][j] = A_j(t_k)
    SpectralFrame frame;
};

inline std::vector<Operator> closed_propagator_grid(const ModelSystem& m,
                                                    const ControlField& f) {
    const int d = m.dim;
    std::vector<Operator> u(f.grid.n_points);
    u[0] = Operator::Identity(d, d);
    for (int k = 0; k < f.grid.n_steps(); ++k) {
        const Operator H = hamiltonian_at(m, f, f.grid.time(k));
        u[k + 1] = unitary_step(H, f.grid.dt) * u[k];
    }
    return u;
}

// A_j(t) = U(t) A_j(0) U^dag(t): solves the invariant equation exactly.
inline InvariantSet propagate_invariants(const ModelSystem& m,
                                         const ControlField& f) {
    InvariantSet s;
    s.grid = f.grid;
    s.frame = spectral_frame(hamiltonian_at(m, f, 0.0));
    s.u_grid = closed_propagator_grid(m, f);
    const auto P0 = initial_invariants(s.frame);
    s.invariants.resize(s.u_grid.size());
    for (size_t k = 0; k < s.u_grid.size(); ++k) {
        s.invariants[k].reserve(P0.size());
        for (const auto& P : P0)
            s.invariants[k].push_back(s.u_grid[k] * P * s.u_grid[k].adjoint());
    }
    return s;
}

// --------------------------- thermal generator -----------------------------

struct JumpChannelSample {
    int from = 0;  // i: population leaves here at t=0
    int to = 0;    // j
    Operator op;   // F_ij(t)
    double omega = 0.0;  // reported omega_ij(t), anchor eps_i - eps_j at t=0
    double rate = 0.0;
};

// NAME generator L(t) = -i[H(t), .] + L_D(t) (+ phase noise). The field is
// zero-order hold, so U(t) is an exact product of Hermitian exponentials;
// the grid cache grows lazily and can be truncated when the tail of the
// field is rewritten mid-sweep. One instance per thread.
class ThermalGenerator : public GeneratorProvider {
  public:
    ThermalGenerator(const ModelSystem& model, const ControlField& field,
                     const BathSpec& bath)
        : model_(&model), field_(&field), bath_(bath) {
        bath_.validate();
        frame_ = spectral_frame(qoct::hamiltonian_at(model, field, 0.0));
        u_cache_.assign(1, Operator::Identity(model.dim, model.dim));
    }

    int size() const override { return model_->dim * model_->dim; }
    bool hamiltonian_only() const override { return bath_.closed(); }
    Operator hamiltonian_at(double t) const override {
        return qoct::hamiltonian_at(*model_, *field_, t);
    }
    const SpectralFrame& frame() const { return frame_; }
    const BathSpec& bath() const { return bath_; }

    // Exact ZOH closed propagator at arbitrary t.
    Operator propagator_at(double t) const {
        const TimeGrid& g = field_->grid;
        int k = g.interval_of(t);
        extend_cache(k);
        const double rem = t - g.time(k);
        if (std::abs(rem) < 1e-14) return u_cache_[k];
        const Operator H = qoct::hamiltonian_at(*model_, *field_, g.time(k));
        return unitary_step(H, rem) * u_cache_[k];
    }

    // Drop cached propagators for t > t_k; used by sequential field updates.
    void invalidate_after(int k) const {
        if (static_cast<int>(u_cache_.size()) > k + 1) u_cache_.resize(k + 1);
    }

    std::vector<JumpChannelSample> channels_at(double t) const {
        const Operator U = propagator_at(t);
        const Operator H = hamiltonian_at(t);
        const int d = model_->dim;
        std::vector<JumpChannelSample> out;
        out.reserve(d * (d - 1));
        for (int i = 0; i < d; ++i) {
            for (int j = 0; j < d; ++j) {
                if (i == j) continue;
                JumpChannelSample ch;
                ch.from = i;
                ch.to = j;
                const Eigen::VectorXcd wi = U * frame_.basis.col(i);
                const Eigen::VectorXcd wj = U * frame_.basis.col(j);
                ch.op = wj * wi.adjoint();
                ch.omega = -bohr_frequency(H, ch.op);
                const ThermalRates r = thermal_rates(ch.omega, bath_);
                ch.rate = ch.omega >= 0.0 ? r.down : r.up;
                out.push_back(ch);
            }
        }
        return out;
    }

    SuperOperator dissipator_at(double t) const {
        const int d = model_->dim;
        SuperOperator L = SuperOperator::Zero(d * d, d * d);
        if (bath_.gamma > 0.0) {
            std::vector<std::pair<Operator, double>> chans;
            for (auto& ch : channels_at(t)) chans.emplace_back(ch.op, ch.rate);
            L = gkls_superop(chans, d);
        }
        if (bath_.gamma_phase > 0.0)
            L += phase_noise_superop(hamiltonian_at(t), bath_.gamma_phase);
        return L;
    }

    Eigen::MatrixXcd at(double t) const override {
        const Operator H = hamiltonian_at(t);
        SuperOperator L = commutator_superop(H);
        if (!bath_.closed()) L += dissipator_at(t);
        return L;
    }

  private:
    void extend_cache(int k) const {
        const TimeGrid& g = field_->grid;
        while (static_cast<int>(u_cache_.size()) <= k) {
            const int kk = static_cast<int>(u_cache_.size()) - 1;
            const Operator H = qoct::hamiltonian_at(*model_, *field_, g.time(kk));
            u_cache_.push_back(unitary_step(H, g.dt) * u_cache_.back());
        }
    }

    const ModelSystem* model_;
    const ControlField* field_;
    BathSpec bath_;
    SpectralFrame frame_;
    mutable std::vector<Operator> u_cache_;
};

// Accumulated channel phases phi_ij(t) = int_0^t omega_ij dt' on the grid
// (trapezoid rule), ordered-pair-major. Stored for export; the dissipator
// never applies the gauge rotation.
inline Eigen::MatrixXd accumulated_phases(const ThermalGenerator& gen,
                                          const TimeGrid& grid) {
    const auto first = gen.channels_at(0.0);
    const int nc = static_cast<int>(first.size());
    Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(nc, grid.n_points);
    std::vector<double> prev(nc);
    for (int c = 0; c < nc; ++c) prev[c] = first[c].omega;
    for (int k = 1; k < grid.n_points; ++k) {
        const auto chans = gen.channels_at(grid.time(k));
        for (int c = 0; c < nc; ++c) {
            phi(c, k) = phi(c, k - 1) + 0.5 * grid.dt * (prev[c] + chans[c].omega);
            prev[c] = chans[c].omega;
        }
    }
    return phi;
}

// Assembled dissipator at a grid index, from a precomputed invariant table.
inline SuperOperator thermal_dissipator_at(const InvariantSet& inv, int t_index,
                                           const ModelSystem& m,
                                           const ControlField& f,
                                           const BathSpec& bath) {
    require(t_index >= 0 && t_index < static_cast<int>(inv.u_grid.size()),
            "thermal_dissipator_at: index out of range");
    ThermalGenerator gen(m, f, bath);
    return gen.dissipator_at(f.grid.time(t_index));
}

// Gibbs state exp(-H/T)/Z.
inline Operator gibbs_state(const Operator& H, double temperature) {
    Eigen::SelfAdjointEigenSolver<Operator> es(H);
    Eigen::VectorXd w = es.eigenvalues();
    const double w0 = w.minCoeff();
    Eigen::VectorXd p = (-(w.array() - w0) / temperature).exp();
    p /= p.sum();
    return es.eigenvectors() * p.asDiagonal() * es.eigenvectors().adjoint();
}

// --------------------------- Lie-algebra oracle -----------------------------

// Gell-Mann set plus the identity: a complete Hermitian operator basis.
struct LieBasis {
    std::vector<Operator> ops;
    std::vector<Eigen::MatrixXcd> adjoint_rep;  // [l](k,n) = C^k_{ln}
};

inline LieBasis lie_basis(int d) {
    LieBasis b;
    b.ops = gellmann_basis(d);
    b.ops.push_back(Operator::Identity(d, d));
    const int n = static_cast<int>(b.ops.size());
    std::vector<double> norm2(n);
    for (int k = 0; k < n; ++k) norm2[k] = b.ops[k].squaredNorm();
    b.adjoint_rep.assign(n, Eigen::MatrixXcd::Zero(n, n));
    for (int l = 0; l < n; ++l)
        for (int m = 0; m < n; ++m) {
            const Operator comm = b.ops[l] * b.ops[m] - b.ops[m] * b.ops[l];
            if (max_abs(comm) < 1e-14) continue;
            Operator resid = comm;
            for (int k = 0; k < n; ++k) {
                const Complex c = hs_inner(b.ops[k], comm) / norm2[k];
                if (std::abs(c) > 1e-14) {
                    b.adjoint_rep[l](k, m) = c;
                    resid -= c * b.ops[k];
                }
            }
            require(max_abs(resid) < 1e-10, "lie_basis: basis does not close");
        }
    return b;
}

inline Eigen::VectorXcd expand_in_basis(const Operator& X, const LieBasis& b,
                                        double tol = 1e-12) {
    const int n = static_cast<int>(b.ops.size());
    Eigen::VectorXcd c(n);
    Operator resid = X;
    for (int k = 0; k < n; ++k) {
        c(k) = hs_inner(b.ops[k], X) / b.ops[k].squaredNorm();
        resid -= c(k) * b.ops[k];
    }
    if (max_abs(resid) > tol)
        throw NumericalError("expand_in_basis: operator outside basis span");
    return c;
}

// Integrates dc/dt = M(t) c, M_kn = -i sum_l C^k_{ln} h_l(t), with RK4 over
// each ZOH interval, and reconstructs the invariants. Cross-check for the
// conjugation path; slower but entirely independent of it.
inline InvariantSet invariant_ode_oracle(const ModelSystem& m,
                                         const ControlField& f,
                                         int substeps_per_interval = 40) {
    const int d = m.dim;
    const LieBasis basis = lie_basis(d);
    const int n = static_cast<int>(basis.ops.size());

    InvariantSet s;
    s.grid = f.grid;
    s.frame = spectral_frame(hamiltonian_at(m, f, 0.0));
    const auto P0 = initial_invariants(s.frame);

    std::vector<Eigen::VectorXcd> coeff(d);
    for (int j = 0; j < d; ++j) coeff[j] = expand_in_basis(P0[j], basis);

    s.invariants.resize(f.grid.n_points);
    s.u_grid.clear();
    auto record = [&](int k) {
        s.invariants[k].resize(d);
        for (int j = 0; j < d; ++j) {
            Operator A = Operator::Zero(d, d);
            for (int l = 0; l < n; ++l) A += coeff[j](l) * basis.ops[l];
            s.invariants[k][j] = A;
        }
    };
    record(0);
    for (int k = 0; k < f.grid.n_steps(); ++k) {
        const Operator H = hamiltonian_at(m, f, f.grid.time(k));
        const Eigen::VectorXcd h = expand_in_basis(H, basis);
        Eigen::MatrixXcd M = Eigen::MatrixXcd::Zero(n, n);
        for (int l = 0; l < n; ++l)
            if (std::abs(h(l)) > 1e-16) M += h(l) * basis.adjoint_rep[l];
        M *= Complex(0, -1);
        const double hstep = f.grid.dt / substeps_per_interval;
        for (int j = 0; j < d; ++j) {
            Eigen::VectorXcd c = coeff[j];
            for (int ss = 0; ss < substeps_per_interval; ++ss) {
                const Eigen::VectorXcd k1 = M * c;
                const Eigen::VectorXcd k2 = M * (c + 0.5 * hstep * k1);
                const Eigen::VectorXcd k3 = M * (c + 0.5 * hstep * k2);
                const Eigen::VectorXcd k4 = M * (c + hstep * k3);
                c += (hstep / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
            coeff[j] = c;
        }
        record(k + 1);
    }
    return s;
}

}  // namespace qoct
