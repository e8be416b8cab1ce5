#include "qoct/oct.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <random>

using namespace qoct;
using Catch::Matchers::WithinAbs;

namespace {

ModelSystem zero_drift_model(int d) {
    ModelSystem m;
    m.dim = d;
    m.drift = Operator::Zero(d, d);
    Operator g = Operator::Zero(d, d);
    g(0, 1) = g(1, 0) = 1.0;
    m.control_generators = {g};
    m.uncontrolled_generator = Operator::Zero(d, d);
    m.level_energies = Eigen::VectorXd::Zero(d);
    m.carrier_frequencies = {1.0};
    return m;
}

ControlField qutrit_guess(const ModelSystem& m, double tau, double amp) {
    TimeGrid grid{0.1, static_cast<int>(std::llround(tau / 0.1)) + 1};
    return guess_field(m, grid, ShapeEnvelope::for_horizon(tau), amp);
}

}  // namespace

TEST_CASE("fidelity of exact, scaled and orthogonal maps", "[oct]") {
    const GateTarget t = target_superoperator(Gate::hadamard, 3);
    CHECK_THAT(fidelity(t.target, t), WithinAbs(1.0, 1e-14));
    CHECK_THAT(fidelity(0.5 * t.target, t), WithinAbs(0.5, 1e-14));

    // qubit Hadamard channel against the identity channel: |tr(H^dag I)|^2/4 = 0
    Operator had(2, 2);
    const double r = 1.0 / std::sqrt(2.0);
    had << r, r, r, -r;
    GateTarget t2;
    t2.dim = 2;
    t2.logical_dim = 2;
    t2.target = conjugation_superop(had);
    t2.working = {0, 1, 2, 3};
    CHECK_THAT(fidelity(SuperOperator::Identity(4, 4), t2), WithinAbs(0.0, 1e-14));

    GateTarget empty;
    empty.target = SuperOperator::Zero(4, 4);
    CHECK_THROWS_AS(fidelity(SuperOperator::Identity(4, 4), empty), ValidationError);
}

TEST_CASE("krotov update: gating and denominator guard", "[oct]") {
    const SuperOperator K = SuperOperator::Identity(4, 4);
    const Eigen::MatrixXcd Y = Eigen::MatrixXcd::Identity(4, 4);
    const Eigen::MatrixXcd L = Eigen::MatrixXcd::Identity(4, 4);
    // real trace: no update
    CHECK(krotov_field_update(Y, L, K, 1.0, 1.0) == 0.0);
    // zero shape: no update regardless of the trace
    const Eigen::MatrixXcd Yc = kImag * Y;
    CHECK(krotov_field_update(Yc, L, K, 0.0, 1.0) == 0.0);
    CHECK(krotov_field_update(Yc, L, K, 1.0, 1.0) != 0.0);

    // denominator collapse falls back to the simplified step
    const double lambda = 2.0, gamma_a = 1.0;
    // Tr{Y C L} = -lambda/gamma_a makes the denominator vanish (Y = i I here)
    const SuperOperator C =
        kImag * (lambda / gamma_a / 4.0) * SuperOperator::Identity(4, 4);
    const double with_guard =
        krotov_field_update(Yc, L, K, 1.0, lambda, gamma_a, &C);
    const double simplified = krotov_field_update(Yc, L, K, 1.0, lambda);
    CHECK_THAT(with_guard, WithinAbs(simplified, 1e-15));
}

TEST_CASE("full-sweep gradient matches high-order finite differences", "[oct]") {
    const ModelSystem m = build_qubit_ancilla_model(1, 1.0, {}, 2e-4);
    TimeGrid grid{0.1, 21};  // tau = 2, a random small problem
    ControlField f =
        guess_field(m, grid, ShapeEnvelope::for_horizon(grid.horizon()), 0.3, 5);
    BathSpec closed{0.0, 1.0, SpectralDensity::ohmic, 0.0};
    const GateTarget target = target_superoperator(Gate::hadamard, 3);

    const Eigen::MatrixXd g = gradient_full_sweep(m, f, closed, target);

    std::mt19937_64 rng(17);
    std::uniform_int_distribution<int> uc(0, 1), uk(0, grid.n_steps() - 1);
    const double d = 1e-3;
    for (int probe = 0; probe < 20; ++probe) {
        const int c = uc(rng), k = uk(rng);
        auto jval = [&](double de) {
            ControlField fp = f;
            fp.amplitudes(c, k) += de;
            return objective_expm(m, fp, closed, target);
        };
        // five-point stencil kills the cubic truncation term
        const double fd =
            (8.0 * (jval(d) - jval(-d)) - (jval(2 * d) - jval(-2 * d))) / (12.0 * d);
        REQUIRE_THAT(g(c, k), WithinAbs(fd, 1e-6 * std::max(1.0, std::abs(fd))));
        REQUIRE(std::abs(g(c, k) - fd) <= 1e-6 * std::max(std::abs(fd), 1e-4));
    }
}

TEST_CASE("identity target with zero drift converges immediately", "[oct]") {
    const ModelSystem m = zero_drift_model(3);
    TimeGrid grid{0.1, 11};
    const ControlField f =
        ControlField::zero(1, grid, ShapeEnvelope::for_horizon(grid.horizon()));
    const GateTarget target = target_superoperator(Gate::identity, 3);
    BathSpec closed{0.0, 1.0, SpectralDensity::ohmic, 0.0};
    OCTConfig cfg;
    cfg.max_iters = 10;
    const OptimizeResult res =
        optimize(m, closed, target, cfg, PropagatorConfig{}, f);
    CHECK(res.reached_target);
    CHECK(res.records.size() == 1);  // converged at iteration 0
    CHECK_THAT(res.records[0].fidelity, WithinAbs(1.0, 1e-12));
}

TEST_CASE("sequential Krotov is monotone on the qutrit Hadamard", "[oct]") {
    const ModelSystem m = build_qubit_ancilla_model(1, 1.0, {}, 2e-4);
    const ControlField f = qutrit_guess(m, 100.0, 0.2);
    BathSpec closed{0.0, 1.0, SpectralDensity::ohmic, 0.0};
    const GateTarget target = target_superoperator(Gate::hadamard, 3);
    OCTConfig cfg;
    cfg.max_iters = 25;
    cfg.target_infidelity = 1e-12;
    const OptimizeResult res =
        optimize(m, closed, target, cfg, PropagatorConfig{}, f);
    for (size_t i = 1; i < res.records.size(); ++i) {
        INFO("iteration " << i);
        REQUIRE(res.records[i].j_max >= res.records[i - 1].j_max - 1e-12);
        REQUIRE(res.records[i].monotone_ok);
    }
    CHECK(res.records.back().infidelity < res.records.front().infidelity);
}

TEST_CASE("larger penalty strictly shrinks the field update", "[oct]") {
    const ModelSystem m = build_qubit_ancilla_model(1, 1.0, {}, 2e-4);
    const ControlField f = qutrit_guess(m, 50.0, 0.2);
    BathSpec closed{0.0, 1.0, SpectralDensity::ohmic, 0.0};
    const GateTarget target = target_superoperator(Gate::hadamard, 3);
    OCTConfig cfg;
    cfg.max_iters = 1;
    cfg.target_infidelity = 1e-15;
    double norms[2];
    int idx = 0;
    for (double lam : {1.0, 10.0}) {
        cfg.lambda = lam;
        const OptimizeResult res =
            optimize(m, closed, target, cfg, PropagatorConfig{}, f);
        norms[idx++] = res.records.back().field_change_norm;
    }
    CHECK(norms[1] < norms[0]);
    CHECK(norms[1] > 0.0);
}

TEST_CASE("warm-started noisy run never ends above its starting infidelity",
          "[oct]") {
    const ModelSystem m = build_qubit_ancilla_model(1, 1.0, {}, 2e-4);
    const ControlField guess = qutrit_guess(m, 50.0, 0.2);
    const GateTarget target = target_superoperator(Gate::hadamard, 3);
    BathSpec closed{0.0, 1.0, SpectralDensity::ohmic, 0.0};
    OCTConfig cfg;
    cfg.max_iters = 40;
    const OptimizeResult ref =
        optimize(m, closed, target, cfg, PropagatorConfig{}, guess);

    BathSpec bath{1e-3, 2.0, SpectralDensity::ohmic, 0.0};
    OCTConfig noisy_cfg;
    noisy_cfg.max_iters = 4;
    noisy_cfg.target_infidelity = 1e-9;
    const OptimizeResult noisy =
        optimize(m, bath, target, noisy_cfg, PropagatorConfig{}, ref.field);
    CHECK(noisy.best_infidelity <= noisy.records.front().infidelity + 1e-15);
}

TEST_CASE("closed-system C-iX reaches 1e-4 with reachable coefficients", "[oct]") {
    const ModelSystem m = build_two_qubit_model(1.0, 0.0, 1.0, 0.0);
    TimeGrid grid{0.1, 1001};
    const ControlField f =
        guess_field(m, grid, ShapeEnvelope::for_horizon(grid.horizon()), 0.3);
    const GateTarget target = target_superoperator(Gate::cix, 4);
    BathSpec closed{0.0, 1.0, SpectralDensity::ohmic, 0.0};
    OCTConfig cfg;
    cfg.max_iters = 50;
    cfg.target_infidelity = 1e-4;
    const OptimizeResult res =
        optimize(m, closed, target, cfg, PropagatorConfig{}, f);
    INFO("best IF " << res.best_infidelity << " at " << res.best_iteration);
    CHECK(res.reached_target);
    CHECK(res.best_infidelity <= 1e-4);
}

TEST_CASE("adjoint trajectory fronts the propagator module", "[oct]") {
    const ModelSystem m = build_qubit_ancilla_model(1, 1.0, {}, 2e-4);
    const ControlField f = qutrit_guess(m, 10.0, 0.25);
    const GateTarget target = target_superoperator(Gate::hadamard, 3);
    BathSpec closed{0.0, 1.0, SpectralDensity::ohmic, 0.0};
    const MapTrajectory Y =
        backward_propagate(m, f, closed, target, PropagatorConfig{});
    REQUIRE(Y.maps.size() == static_cast<size_t>(f.grid.n_points));
    CHECK(max_abs(Y.maps.back() - target.target.adjoint()) < 1e-12);
    const MapTrajectory lam = forward_propagate(m, f, closed, PropagatorConfig{});
    const double j0 = ((Y.maps[0] * lam.maps[0]).trace()).real();
    CHECK_THAT(((Y.maps[50] * lam.maps[50]).trace()).real(), WithinAbs(j0, 1e-9));
}
