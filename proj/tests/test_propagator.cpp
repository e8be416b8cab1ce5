#include "qoct/propagator.hpp"

#include "qoct/models.hpp"
#include "qoct/thermal.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <random>

using namespace qoct;
using Catch::Matchers::WithinAbs;

namespace {

// independent phi-function oracle: straight long-double Taylor series
Complex phi_oracle(int m, Complex z) {
    std::complex<long double> zl(z.real(), z.imag());
    std::complex<long double> term = 1.0L;
    for (int j = 1; j <= m; ++j) term /= j;
    std::complex<long double> acc = term;
    for (int j = 1; j < 120; ++j) {
        term *= zl / static_cast<long double>(j + m);
        acc += term;
        if (std::abs(term) < 1e-30L) break;
    }
    return {static_cast<double>(acc.real()), static_cast<double>(acc.imag())};
}

Eigen::MatrixXcd random_antihermitian(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> nd;
    Eigen::MatrixXcd A(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) A(i, j) = Complex(nd(rng), nd(rng));
    return 0.5 * (A - A.adjoint()).eval();
}

}  // namespace

TEST_CASE("reference step: identity, drift phases, qubit decay", "[propagator]") {
    CHECK(max_abs(reference_step_expm(Eigen::MatrixXcd::Zero(4, 4), 0.3) -
                  Eigen::MatrixXcd::Identity(4, 4)) < 1e-15);

    // diagonal H: coherence components rotate at the Bohr frequencies
    Operator H = Operator::Zero(3, 3);
    H(0, 0) = 0.5;
    H(1, 1) = -0.3;
    H(2, 2) = 2.0;
    const double dt = 0.37;
    const SuperOperator G = reference_step_expm(commutator_superop(H), dt);
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
            const Complex want =
                std::exp(Complex(0, -(H(a, a).real() - H(b, b).real()) * dt));
            CHECK(std::abs(G(a * 3 + b, a * 3 + b) - want) < 1e-13);
        }

    // pure decay channel: populations relax as exp(-Gamma t)
    Operator sm(2, 2);
    sm << 0, 1, 0, 0;
    const double Gam = 0.8, t = 1.7;
    const SuperOperator lam = reference_step_expm(gkls_superop({{sm, Gam}}), t);
    Operator X = Operator::Zero(2, 2);
    X(1, 1) = 1.0;
    const Operator out = unvectorize(lam * vectorize(X));
    CHECK_THAT(out(1, 1).real(), WithinAbs(std::exp(-Gam * t), 1e-12));
    CHECK_THAT(out(0, 0).real(), WithinAbs(1.0 - std::exp(-Gam * t), 1e-12));

    CHECK_THROWS_AS(
        reference_step_expm(1e6 * Eigen::MatrixXcd::Identity(2, 2), 1.0),
        NumericalError);
}

TEST_CASE("reference propagation: drift and convergence order", "[propagator]") {
    ConstantGenerator zero(Eigen::MatrixXcd::Zero(9, 9));
    const MapTrajectory t0 = propagate_reference(zero, 2.0, 0.1);
    CHECK(max_abs(t0.final_map() - Eigen::MatrixXcd::Identity(9, 9)) < 1e-14);

    // constant generator: concatenation equals the one-shot exponential
    std::mt19937_64 rng(4);
    Operator H = Operator::Zero(3, 3);
    H(0, 0) = 1.1;
    H(1, 1) = -0.4;
    H(2, 2) = 0.2;
    H(0, 1) = Complex(0.2, 0.1);
    H(1, 0) = std::conj(H(0, 1));
    ConstantGenerator drift(commutator_superop(H));
    const MapTrajectory many = propagate_reference(drift, 2.0, 0.05);
    const Eigen::MatrixXcd oneshot = reference_step_expm(drift.at(0.0), 2.0);
    CHECK(max_abs(many.final_map() - oneshot) < 1e-12);

    // smooth driven problem: halving dt gains a factor ~4 (order >= 1.9)
    Operator V(2, 2);
    V << 0, 1, 1, 0;
    Operator H0(2, 2);
    H0 << 0.5, 0, 0, -0.5;
    FunctionGenerator gen(4, [&](double t) {
        return commutator_superop(H0 + std::sin(1.3 * t) * V);
    });
    const Eigen::MatrixXcd fine = propagate_reference(gen, 2.0, 0.002).final_map();
    const double e1 = max_abs(propagate_reference(gen, 2.0, 0.04).final_map() - fine);
    const double e2 = max_abs(propagate_reference(gen, 2.0, 0.02).final_map() - fine);
    const double order = std::log2(e1 / e2);
    CHECK(order >= 1.9);
}

TEST_CASE("Chebyshev source fit: constants, lines, full-degree polynomials",
          "[propagator]") {
    const double dt = 0.5;
    const int M = 7;
    const auto theta = chebyshev_gauss_times(M, dt);

    // the scaled-monomial form trades raw-coefficient conditioning for exact
    // reconstruction, so "coefficient = 0" is asserted through its
    // contribution |s_n| theta^n / n! at the step scale
    auto contribution = [&](const Eigen::VectorXcd& sn, int n) {
        double c = 1.0;
        for (int j = 1; j <= n; ++j) c *= dt / j;
        return std::abs(sn(0)) * c;
    };
    std::vector<Eigen::VectorXcd> samples(M, Eigen::VectorXcd::Constant(1, 3.25));
    auto s = chebyshev_sample_source(samples, dt);
    CHECK(std::abs(s[0](0) - 3.25) < 1e-13);
    for (int n = 1; n < M; ++n) CHECK(contribution(s[n], n) < 1e-10);

    for (int m = 0; m < M; ++m)
        samples[m](0) = 0.4 - 2.0 * theta[m];  // linear
    s = chebyshev_sample_source(samples, dt);
    CHECK(std::abs(s[0](0) - 0.4) < 1e-12);
    CHECK(std::abs(s[1](0) + 2.0) < 1e-11);  // 1! * slope
    for (int n = 2; n < M; ++n) CHECK(contribution(s[n], n) < 1e-10);

    // random degree-(M-1) polynomial reproduces exactly
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<double> coef(M);
    for (auto& c : coef) c = u(rng);
    auto poly = [&](double x) {
        double acc = 0, p = 1;
        for (int n = 0; n < M; ++n) {
            acc += coef[n] * p;
            p *= x;
        }
        return acc;
    };
    for (int m = 0; m < M; ++m) samples[m](0) = poly(theta[m]);
    s = chebyshev_sample_source(samples, dt);
    for (double x : {0.0, 0.1, 0.27, 0.49, dt}) {
        double acc = 0, c = 1;
        for (int n = 0; n < M; ++n) {
            if (n > 0) c *= x / n;
            acc += c * s[n](0).real();
        }
        REQUIRE_THAT(acc, WithinAbs(poly(x), 1e-12));
    }
}

TEST_CASE("fm_apply: zero generator, scalar oracle, Krylov accuracy",
          "[propagator]") {
    const double t = 0.73;
    Eigen::VectorXcd s0 = Eigen::VectorXcd::Constant(3, Complex(1.0, -0.5));
    const Eigen::VectorXcd r =
        fm_apply(Eigen::MatrixXcd::Zero(3, 3), t, {s0}, 2);
    CHECK(max_abs(r - t * s0) < 1e-14);  // f_1(0,t) = t

    // scalar L = z I against the independent series oracle
    const Complex z(0.4, -1.1);
    Eigen::MatrixXcd zi = z * Eigen::MatrixXcd::Identity(1, 1);
    std::vector<Eigen::VectorXcd> s(4, Eigen::VectorXcd::Zero(1));
    s[0](0) = 1.3;
    s[1](0) = Complex(0, -0.7);
    s[2](0) = 0.2;
    s[3](0) = -2.0;
    Complex want = 0.0;
    for (int n = 0; n < 4; ++n)
        want += std::pow(t, n + 1) * phi_oracle(n + 1, z * t) * s[n](0);
    const Eigen::VectorXcd got = fm_apply(zi, t, s, 1);
    CHECK(std::abs(got(0) - want) < 1e-13);

    // 6x6 anti-Hermitian: small Krylov space vs the full one
    std::mt19937_64 rng(21);
    const Eigen::MatrixXcd L = 2.0 * random_antihermitian(6, rng);
    std::vector<Eigen::VectorXcd> src(5);
    for (auto& v : src) {
        v = Eigen::VectorXcd(6);
        for (int i = 0; i < 6; ++i)
            v(i) = Complex(std::uniform_real_distribution<double>(-1, 1)(rng),
                           std::uniform_real_distribution<double>(-1, 1)(rng));
    }
    const Eigen::VectorXcd approx = fm_apply(L, 0.1, src, 5);
    const Eigen::VectorXcd full = fm_apply(L, 0.1, src, 6);
    CHECK(max_abs(approx - full) / full.norm() <= 1e-8);
}

TEST_CASE("semi-global step: homogeneous case is the plain exponential",
          "[propagator]") {
    std::mt19937_64 rng(31);
    const Eigen::MatrixXcd L = random_antihermitian(9, rng);
    ConstantGenerator gen(L);
    PropagatorConfig cfg;
    cfg.dt = 0.1;
    const Eigen::MatrixXcd X0 = Eigen::MatrixXcd::Identity(9, 9);
    SemiGlobalStepper::StepStats st;
    const Eigen::MatrixXcd out = semi_global_step(gen, 0.0, X0, cfg, &st);
    CHECK(max_abs(out - reference_step_expm(L, 0.1)) < 1e-12);
    CHECK(st.inner_iterations == 1);
}

TEST_CASE("semi-global intermediates agree with reference propagation",
          "[propagator]") {
    Operator V(2, 2), H0(2, 2);
    V << 0, 1, 1, 0;
    H0 << 0.5, 0, 0, -0.5;
    FunctionGenerator gen(4, [&](double t) {
        return commutator_superop(H0 + 0.6 * std::sin(2.0 * t) * V);
    });
    PropagatorConfig cfg;
    cfg.dt = 0.2;
    cfg.cheb_points = 7;
    cfg.krylov_dim = 3;
    SemiGlobalStepper stepper(cfg, 4, 4);
    const Eigen::MatrixXcd X0 = Eigen::MatrixXcd::Identity(4, 4);
    const Eigen::MatrixXcd end = stepper.step(gen, 0.0, X0);
    const Eigen::MatrixXcd end_ref =
        propagate_reference(gen, cfg.dt, cfg.dt, 2000).final_map();
    const double end_err = max_abs(end - end_ref);

    const auto& theta = stepper.sample_times();
    const auto& vals = stepper.last_interior_values();
    for (size_t m = 0; m < theta.size(); ++m) {
        const Eigen::MatrixXcd ref =
            propagate_reference(gen, theta[m], theta[m], 2000).final_map();
        REQUIRE(max_abs(vals[m] - ref) <= 10.0 * std::max(end_err, 1e-12));
    }
}

TEST_CASE("semi-global convergence order on a smooth driven problem",
          "[propagator]") {
    Operator V(2, 2), H0(2, 2);
    V << 0, 1, 1, 0;
    H0 << 0.5, 0, 0, -0.5;
    FunctionGenerator gen(4, [&](double t) {
        return commutator_superop(H0 + 0.8 * std::sin(1.7 * t) * V);
    });
    const double tau = 1.6;
    const Eigen::MatrixXcd fine = propagate_reference(gen, tau, 0.0005).final_map();
    auto sg_err = [&](double dt) {
        PropagatorConfig cfg;
        cfg.dt = dt;
        cfg.cheb_points = 4;
        cfg.krylov_dim = 3;
        cfg.method = StepMethod::semi_global;
        return max_abs(propagate_map(gen, tau, cfg).final_map() - fine);
    };
    const double e1 = sg_err(0.4), e2 = sg_err(0.2), e3 = sg_err(0.1);
    const double order12 = std::log2(e1 / e2);
    const double order23 = std::log2(e2 / e3);
    INFO("errors " << e1 << " " << e2 << " " << e3);
    CHECK(order12 >= 3.0);  // at least dt^(M-1) with M = 4
    CHECK(order23 >= 2.5);  // approaching the reference/floor limit
}

TEST_CASE("semi-global matches the fine reference on a thermal qutrit",
          "[propagator]") {
    const ModelSystem m = build_qubit_ancilla_model(1, 1.0, {}, 2e-4);
    TimeGrid grid{0.1, 101};
    const ControlField f =
        guess_field(m, grid, ShapeEnvelope::for_horizon(grid.horizon()), 0.25);
    BathSpec bath{1e-4, 5.0, SpectralDensity::ohmic, 0.0};
    ThermalGenerator gen(m, f, bath);
    PropagatorConfig cfg;
    cfg.dt = 0.1;
    cfg.cheb_points = 7;
    cfg.krylov_dim = 3;
    cfg.method = StepMethod::semi_global;
    const MapTrajectory sg = propagate_map(gen, grid.horizon(), cfg);
    const MapTrajectory ref = propagate_reference(gen, grid.horizon(), 0.1, 100);
    CHECK(max_abs(sg.final_map() - ref.final_map()) <= 1e-8);

    // CPTP along the trajectory
    for (size_t k = 0; k < sg.maps.size(); k += 25) {
        const CptpReport rep = choi_cptp_check(sg.maps[k]);
        REQUIRE(rep.tp_residual <= 1e-10);
        REQUIRE(rep.choi_min_eig >= -1e-8);
    }
}

TEST_CASE("closed-system fast path equals the semi-global integrator",
          "[propagator]") {
    const ModelSystem m = build_qubit_ancilla_model(1, 1.0, {}, 2e-4);
    TimeGrid grid{0.1, 51};
    const ControlField f =
        guess_field(m, grid, ShapeEnvelope::for_horizon(grid.horizon()), 0.25);
    BathSpec closed{0.0, 1.0, SpectralDensity::ohmic, 0.0};
    ThermalGenerator gen(m, f, closed);
    PropagatorConfig autocfg;  // resolves to unitary_exact
    autocfg.dt = 0.1;
    PropagatorConfig sgcfg = autocfg;
    sgcfg.method = StepMethod::semi_global;
    const auto a = propagate_map(gen, grid.horizon(), autocfg);
    const auto b = propagate_map(gen, grid.horizon(), sgcfg);
    CHECK(max_abs(a.final_map() - b.final_map()) < 1e-10);
}

TEST_CASE("adjoint propagation: norms, dense check, pairing", "[propagator]") {
    const ModelSystem m = build_qubit_ancilla_model(1, 1.0, {}, 2e-4);
    TimeGrid grid{0.1, 101};
    const ControlField f =
        guess_field(m, grid, ShapeEnvelope::for_horizon(grid.horizon()), 0.25);
    const GateTarget tgt = target_superoperator(Gate::hadamard, 3);
    const Eigen::MatrixXcd term = tgt.target.adjoint();
    PropagatorConfig cfg;
    cfg.dt = 0.1;

    SECTION("closed system conserves the Hilbert-Schmidt norm of Y") {
        BathSpec closed{0.0, 1.0, SpectralDensity::ohmic, 0.0};
        ThermalGenerator gen(m, f, closed);
        const MapTrajectory Y =
            propagate_map(gen, grid.horizon(), cfg, Direction::adjoint, &term);
        const double n0 = Y.maps.back().norm();
        for (size_t k = 0; k < Y.maps.size(); k += 10)
            REQUIRE_THAT(Y.maps[k].norm(), WithinAbs(n0, 1e-9));
    }
    SECTION("time-independent generator matches the dense exponential") {
        Operator sm(2, 2);
        sm << 0, 1, 0, 0;
        const SuperOperator L = commutator_superop(0.9 * gellmann_basis(2)[2]) +
                                gkls_superop({{sm, 0.3}});
        ConstantGenerator gen(L);
        Eigen::MatrixXcd O = Eigen::MatrixXcd::Identity(4, 4) * Complex(0.3, 0.1);
        O(1, 2) = 0.7;
        const Eigen::MatrixXcd Odag = O.adjoint();
        const double tau = 2.0;
        PropagatorConfig c2;
        c2.dt = 0.1;
        const MapTrajectory Y = propagate_map(gen, tau, c2, Direction::adjoint, &Odag);
        for (size_t k = 0; k < Y.times.size(); k += 7) {
            const double t = Y.times[k];
            const Eigen::MatrixXcd want = Odag * reference_step_expm(L, tau - t);
            REQUIRE(max_abs(Y.maps[k] - want) < 1e-10);
        }
    }
    SECTION("forward/adjoint pairing is constant in time") {
        BathSpec bath{1e-3, 2.0, SpectralDensity::ohmic, 0.0};
        ThermalGenerator gen(m, f, bath);
        const MapTrajectory lam = propagate_map(gen, grid.horizon(), cfg);
        const MapTrajectory Y =
            propagate_map(gen, grid.horizon(), cfg, Direction::adjoint, &term);
        const double j0 = ((Y.maps[0] * lam.maps[0]).trace()).real();
        for (size_t k = 0; k < lam.maps.size(); k += 10)
            REQUIRE_THAT(((Y.maps[k] * lam.maps[k]).trace()).real(),
                         WithinAbs(j0, 1e-9));
    }
}

TEST_CASE("undriven thermal relaxation reaches the Gibbs state", "[propagator]") {
    const ModelSystem m = build_qubit_ancilla_model(1, 1.0);
    TimeGrid grid{1.0, 2};
    const ControlField z = ControlField::zero(2, grid, ShapeEnvelope::for_horizon(1.0));
    BathSpec bath{0.05, 2.0, SpectralDensity::ohmic, 0.0};
    ThermalGenerator gen(m, z, bath);
    const SuperOperator L = gen.at(0.0);
    const SuperOperator lam = reference_step_expm(L, 800.0);
    const Operator rho_g = gibbs_state(m.drift, bath.temperature);
    for (int j = 0; j < 3; ++j) {
        Operator rho0 = Operator::Zero(3, 3);
        rho0(j, j) = 1.0;
        const Operator out = unvectorize(lam * vectorize(rho0));
        REQUIRE(max_abs(out - rho_g) <= 1e-6);
    }
}

TEST_CASE("non-converging steps raise a step-size error", "[propagator]") {
    Operator V(2, 2), H0(2, 2);
    V << 0, 1, 1, 0;
    H0 << 1.0, 0, 0, -1.0;
    FunctionGenerator gen(4, [&](double t) {
        return commutator_superop(H0 + 12.0 * std::sin(19.0 * t) * V);
    });
    PropagatorConfig cfg;
    cfg.dt = 1.0;
    cfg.cheb_points = 4;
    cfg.max_inner_iters = 3;
    cfg.method = StepMethod::semi_global;
    CHECK_THROWS_MATCHES(propagate_map(gen, 2.0, cfg), NumericalError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("reduce dt")));
}
