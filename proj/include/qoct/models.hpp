// models.hpp — Drift/control Hamiltonians for the qubit+ancilla ladder and the
// direct two-qubit system, control fields on a uniform grid with a shaped
// envelope, guess-field synthesis, and logical gate targets in Liouville space.

#pragma once

#include "qoct/operator_core.hpp"
#include "qoct/types.hpp"

#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace qoct {

// --------------------------- time grid & fields ----------------------------

struct TimeGrid {
    double dt = 0.1;
    int n_points = 4001;  // samples at t_k = k*dt, k = 0..n_points-1

    int n_steps() const { return n_points - 1; }
    double horizon() const { return dt * n_steps(); }
    double time(int k) const { return dt * k; }
    // index of the zero-order-hold interval containing t
    int interval_of(double t) const {
        int k = static_cast<int>(std::floor(t / dt + 1e-12));
        if (k < 0) k = 0;
        if (k > n_steps() - 1) k = n_steps() - 1;
        return k;
    }
};

// Gaussian envelope with the endpoint value subtracted, so s(0)=s(tau)=floor.
struct ShapeEnvelope {
    double center = 200.0;
    double sigma = 400.0 / 6.0;
    double floor = 1e-4;
    double t_final = 400.0;

    double operator()(double t) const {
        const double g = std::exp(-(t - center) * (t - center) / (2 * sigma * sigma));
        const double g0 = std::exp(-center * center / (2 * sigma * sigma));
        return std::max(g - g0, 0.0) + floor;
    }
    static ShapeEnvelope for_horizon(double tau, double sigma_frac = 1.0 / 6.0,
                                     double floor = 1e-4) {
        return ShapeEnvelope{tau / 2.0, tau * sigma_frac, floor, tau};
    }
};

// Per-channel real amplitudes, zero-order hold on the grid intervals.
struct ControlField {
    TimeGrid grid;
    Eigen::MatrixXd amplitudes;  // n_channels x n_points
    ShapeEnvelope shape;

    int n_channels() const { return static_cast<int>(amplitudes.rows()); }
    double value(int channel, double t) const {
        return amplitudes(channel, grid.interval_of(t));
    }
    double sample(int channel, int k) const { return amplitudes(channel, k); }

    static ControlField zero(int n_channels, const TimeGrid& grid,
                             const ShapeEnvelope& shape) {
        ControlField f;
        f.grid = grid;
        f.shape = shape;
        f.amplitudes = Eigen::MatrixXd::Zero(n_channels, grid.n_points);
        return f;
    }
};

// --------------------------- model systems ---------------------------------

enum class UncontrolledMode { constant, shaped };

struct ModelSystem {
    int dim = 3;
    Operator drift;                            // H0, diagonal
    std::vector<Operator> control_generators;  // multiply eps_k(t)
    Operator uncontrolled_generator;           // multiplies eps_uc
    double eps_uc = 0.0;
    UncontrolledMode uc_mode = UncontrolledMode::constant;
    Eigen::VectorXd level_energies;            // diag of H0
    std::vector<double> carrier_frequencies;   // guess-field carriers per channel
    std::vector<double> coeff_table;           // builder coefficients, as given

    int n_channels() const { return static_cast<int>(control_generators.size()); }
};

// H(t) = H0 + sum_k eps_k(t) V_k + eps_uc(t) V_uc with ZOH field samples.
inline Operator hamiltonian_at(const ModelSystem& m, const ControlField& f, double t) {
    Operator H = m.drift;
    for (int c = 0; c < m.n_channels(); ++c)
        H += f.value(c, t) * m.control_generators[c];
    if (m.eps_uc != 0.0) {
        const double a = (m.uc_mode == UncontrolledMode::shaped)
                             ? m.eps_uc * f.shape(t)
                             : m.eps_uc;
        H += a * m.uncontrolled_generator;
    }
    return H;
}

inline Operator eval_hamiltonian(const ModelSystem& m, const ControlField& f,
                                 int t_index) {
    require(t_index >= 0 && t_index < f.grid.n_points,
            "eval_hamiltonian: index out of range");
    Operator H = m.drift;
    for (int c = 0; c < m.n_channels(); ++c)
        H += f.sample(c, t_index) * m.control_generators[c];
    if (m.eps_uc != 0.0) {
        const double a = (m.uc_mode == UncontrolledMode::shaped)
                             ? m.eps_uc * f.shape(f.grid.time(t_index))
                             : m.eps_uc;
        H += a * m.uncontrolled_generator;
    }
    return H;
}

struct QubitAncillaCoeffs {
    std::vector<double> a, b, c, d;  // per-ancilla; all default to 1
};

// Single qubit + n ancilla levels. n=1 uses the three-level Gell-Mann form
// H0 = (w/2) G3 + (4w/(2 sqrt 3)) G8; n=2,3 use the ladder
// H0 = (w/2) diag(1,-1,0,..) + sum_j 4 j w |a_j><a_j|.
// include_direct_channel adds a controllable sigma_x on the qubit pair,
// used when mitigating noise with a direct drive.
inline ModelSystem build_qubit_ancilla_model(int n_ancillas, double omega,
                                             const QubitAncillaCoeffs& coeffs = {},
                                             double eps_uc_scale = 0.0,
                                             bool include_direct_channel = false) {
    require(n_ancillas >= 1 && n_ancillas <= 3,
            "build_qubit_ancilla_model: n_ancillas must be in {1,2,3}");
    require(omega > 0.0, "build_qubit_ancilla_model: omega must be > 0");
    const int d = n_ancillas + 2;
    auto coef = [](const std::vector<double>& v, int j) {
        return j < static_cast<int>(v.size()) ? v[j] : 1.0;
    };

    ModelSystem m;
    m.dim = d;
    if (n_ancillas == 1) {
        const auto G = gellmann_basis(3);
        m.drift = (omega / 2.0) * G[2] + (4.0 * omega / (2.0 * std::sqrt(3.0))) * G[7];
        m.control_generators = {coef(coeffs.a, 0) * G[3], coef(coeffs.b, 0) * G[5]};
        m.uncontrolled_generator = G[0];
        m.carrier_frequencies = {2.5 * omega, 1.5 * omega};
    } else {
        Operator H0 = Operator::Zero(d, d);
        H0(0, 0) = omega / 2.0;
        H0(1, 1) = -omega / 2.0;
        for (int j = 1; j <= n_ancillas; ++j) H0(1 + j, 1 + j) = 4.0 * j * omega;
        m.drift = H0;
        // shared-epsilon channel over all G4^(j), then one G6^(j) channel each
        Operator shared = Operator::Zero(d, d);
        for (int j = 1; j <= n_ancillas; ++j) {
            shared(0, 1 + j) += coef(coeffs.a, j - 1);
            shared(1 + j, 0) += coef(coeffs.a, j - 1);
        }
        m.control_generators.push_back(shared);
        m.carrier_frequencies.push_back(std::abs(omega / 2.0 - 4.0 * omega));
        for (int j = 1; j <= n_ancillas; ++j) {
            Operator g6 = Operator::Zero(d, d);
            g6(1, 1 + j) = coef(coeffs.b, j - 1);
            g6(1 + j, 1) = coef(coeffs.b, j - 1);
            m.control_generators.push_back(g6);
            m.carrier_frequencies.push_back(std::abs(-omega / 2.0 - 4.0 * j * omega));
        }
        Operator uc = Operator::Zero(d, d);
        for (int j = 1; j <= n_ancillas; ++j) {
            uc(0, 1 + j) += coef(coeffs.c, j - 1);
            uc(1 + j, 0) += coef(coeffs.c, j - 1);
            uc(1, 1 + j) += coef(coeffs.d, j - 1);
            uc(1 + j, 1) += coef(coeffs.d, j - 1);
        }
        m.uncontrolled_generator = uc;
    }
    if (include_direct_channel) {
        Operator gx = Operator::Zero(d, d);
        gx(0, 1) = 1.0;
        gx(1, 0) = 1.0;
        m.control_generators.push_back(gx);
        m.carrier_frequencies.push_back(omega);
    }
    m.eps_uc = eps_uc_scale;
    m.level_energies = m.drift.diagonal().real();
    m.coeff_table = {};
    for (int j = 0; j < n_ancillas; ++j)
        for (const auto* v : {&coeffs.a, &coeffs.b, &coeffs.c, &coeffs.d})
            m.coeff_table.push_back(coef(*v, j));
    return m;
}

// Two logical qubits plus ancilla levels mediating the control: drift
// w diag(-1,0,0,1) on the logical block with ancilla detunings 4jw, and one
// coupler G_alpha^(j) = |alpha><a_j| + |a_j><alpha| channel per (basis
// state, ancilla) pair for each of the two control groups. Constructor only;
// no gate experiments attach to it.
inline ModelSystem build_two_qubit_ancilla_model(int n_ancillas, double omega) {
    require(n_ancillas >= 1 && n_ancillas <= 2,
            "build_two_qubit_ancilla_model: n_ancillas must be 1 or 2");
    require(omega > 0.0, "build_two_qubit_ancilla_model: omega must be > 0");
    const int d = 4 + n_ancillas;
    ModelSystem m;
    m.dim = d;
    Operator H0 = Operator::Zero(d, d);
    H0(0, 0) = -omega;
    H0(3, 3) = omega;
    for (int j = 1; j <= n_ancillas; ++j) H0(3 + j, 3 + j) = 4.0 * j * omega;
    m.drift = H0;
    for (int group = 0; group < 2; ++group)
        for (int j = 1; j <= n_ancillas; ++j)
            for (int alpha = 0; alpha < 4; ++alpha) {
                Operator g = Operator::Zero(d, d);
                g(alpha, 3 + j) = 1.0;
                g(3 + j, alpha) = 1.0;
                m.control_generators.push_back(g);
                m.carrier_frequencies.push_back(
                    std::abs(H0(alpha, alpha).real() - 4.0 * j * omega));
            }
    m.uncontrolled_generator = Operator::Zero(d, d);
    m.level_energies = m.drift.diagonal().real();
    return m;
}

// Direct two-qubit system: drift a I + w1 sz(x)I, channel 1 the conditional
// target-qubit drive sum_i a_i (I - sz)(x)sigma_i, channel 2 sx(x)sz.
inline ModelSystem build_two_qubit_model(double omega1, double a_phase = 0.0,
                                         double a_x = 1.0, double a_y = 1.0) {
    require(omega1 > 0.0, "build_two_qubit_model: omega1 must be > 0");
    Operator sx(2, 2), sy(2, 2), sz(2, 2), id = Operator::Identity(2, 2);
    sx << 0, 1, 1, 0;
    sy << 0, Complex(0, -1), Complex(0, 1), 0;
    sz << 1, 0, 0, -1;

    ModelSystem m;
    m.dim = 4;
    m.drift = a_phase * Eigen::kroneckerProduct(id, id).eval() +
              omega1 * Eigen::kroneckerProduct(sz, id).eval();
    m.control_generators = {
        Eigen::kroneckerProduct((id - sz).eval(), (a_x * sx + a_y * sy).eval()),
        Eigen::kroneckerProduct(sx, sz)};
    m.uncontrolled_generator = Operator::Zero(4, 4);
    m.eps_uc = 0.0;
    m.level_energies = m.drift.diagonal().real();
    m.carrier_frequencies = {0.5 * omega1, 2.0 * omega1};
    m.coeff_table = {a_x, a_y};
    return m;
}

// --------------------------- guess fields ----------------------------------

// Sinusoids at the per-channel carrier frequencies under the shape envelope.
// seed != 0 adds reproducible phase jitter for multi-start searches.
inline ControlField guess_field(const ModelSystem& m, const TimeGrid& grid,
                                const ShapeEnvelope& shape, double amplitude,
                                unsigned long seed = 0) {
    ControlField f = ControlField::zero(m.n_channels(), grid, shape);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);
    for (int c = 0; c < m.n_channels(); ++c) {
        const double w = c < static_cast<int>(m.carrier_frequencies.size())
                             ? m.carrier_frequencies[c]
                             : 1.0;
        const double ph = seed ? phase(rng) : 0.0;
        for (int k = 0; k < grid.n_points; ++k) {
            const double t = grid.time(k);
            f.amplitudes(c, k) = amplitude * shape(t) * std::cos(w * t + ph);
        }
    }
    return f;
}

// --------------------------- gate targets ----------------------------------

enum class Gate { hadamard, cix, identity };

struct GateTarget {
    int dim = 0;          // Hilbert dimension
    int logical_dim = 0;  // M
    SuperOperator target; // U_emb (x) conj(U_emb)
    std::vector<int> working;  // operator-basis columns with nonzero norm
};

inline std::vector<int> nonzero_columns(const SuperOperator& O, double tol = 1e-12) {
    std::vector<int> idx;
    for (int c = 0; c < O.cols(); ++c)
        if (O.col(c).norm() > tol) idx.push_back(c);
    return idx;
}

// Columns on which the map differs from the identity superoperator; for a
// full unitary target this is the set of operator directions the gate moves.
inline std::vector<int> nontrivial_directions(const SuperOperator& O,
                                              double tol = 1e-12) {
    std::vector<int> idx;
    const SuperOperator id = SuperOperator::Identity(O.rows(), O.cols());
    for (int c = 0; c < O.cols(); ++c)
        if ((O.col(c) - id.col(c)).norm() > tol) idx.push_back(c);
    return idx;
}

inline GateTarget target_superoperator(Gate gate, int dim) {
    GateTarget t;
    t.dim = dim;
    Operator u_emb = Operator::Zero(dim, dim);
    switch (gate) {
        case Gate::hadamard: {
            require(dim >= 3 && dim <= 5,
                    "target_superoperator: hadamard expects dim in 3..5");
            const double r = 1.0 / std::sqrt(2.0);
            u_emb(0, 0) = r; u_emb(0, 1) = r;
            u_emb(1, 0) = r; u_emb(1, 1) = -r;
            t.logical_dim = 2;
            break;
        }
        case Gate::cix: {
            require(dim == 4, "target_superoperator: cix expects dim == 4");
            u_emb(0, 0) = 1; u_emb(1, 1) = 1;
            u_emb(2, 3) = kImag; u_emb(3, 2) = kImag;
            t.logical_dim = 4;
            break;
        }
        case Gate::identity: {
            u_emb = Operator::Identity(dim, dim);
            t.logical_dim = dim;
            break;
        }
    }
    t.target = conjugation_superop(u_emb);
    t.working = nonzero_columns(t.target);
    return t;
}

}  // namespace qoct
