// propagator.hpp — Propagation of dynamical maps in Liouville space: a dense
// matrix-exponential midpoint integrator (the brute-force reference) and the
// semi-global integrator that combines Chebyshev interpolation of the
// inhomogeneous source with Krylov evaluation of the exponential-integral
// functions f_m. Both march dX/dt = L(t) X for matrix-valued X.

#pragma once

#include "qoct/generator.hpp"
#include "qoct/operator_core.hpp"
#include "qoct/types.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <sstream>
#include <vector>

namespace qoct {

// --------------------------- configuration ---------------------------------

enum class StepMethod { automatic, semi_global, expm_midpoint, unitary_exact };
enum class Direction { forward, adjoint };

struct PropagatorConfig {
    double dt = 0.1;
    int cheb_points = 7;        // M, interior Chebyshev-Gauss samples per step
    int krylov_dim = 3;         // K, Arnoldi subspace for the f_m application
    double inner_tol = 1e-11;   // fixed-point tolerance of a semi-global step
    int max_inner_iters = 40;
    StepMethod method = StepMethod::automatic;
    int substeps = 1;           // expm-midpoint substeps per grid step

    void validate() const {
        require(dt > 0.0, "propagator.dt must be > 0");
        require(cheb_points >= 2, "propagator.m must be >= 2");
        require(krylov_dim >= 1, "propagator.k must be >= 1");
        require(substeps >= 1, "propagator.substeps must be >= 1");
    }
};

struct MapTrajectory {
    std::vector<double> times;
    std::vector<Eigen::MatrixXcd> maps;
    std::vector<int> inner_iterations;  // per step
    std::vector<double> residuals;      // last fixed-point update per step

    const Eigen::MatrixXcd& final_map() const { return maps.back(); }
};

// --------------------------- dense reference -------------------------------

// exp(L dt) via scaling-and-squaring; the workhorse of the reference path.
inline Eigen::MatrixXcd reference_step_expm(const Eigen::MatrixXcd& L, double dt) {
    require_finite(L, "reference_step_expm");
    const double scale = L.cwiseAbs().maxCoeff() * std::abs(dt);
    if (scale > 1e5) {
        std::ostringstream os;
        os << "reference_step_expm: ||L||*dt = " << scale
           << " too large for a stable exponential";
        throw NumericalError(os.str());
    }
    Eigen::MatrixXcd G = (L * dt).exp();
    require_finite(G, "reference_step_expm (result)");
    return G;
}

// --------------------------- Chebyshev machinery ---------------------------

// Chebyshev-Gauss points of T_M mapped to [0, dt], ascending.
inline std::vector<double> chebyshev_gauss_times(int M, double dt) {
    std::vector<double> t(M);
    for (int m = 0; m < M; ++m) {
        const double x = std::cos(M_PI * (2.0 * m + 1.0) / (2.0 * M));
        t[M - 1 - m] = 0.5 * (x + 1.0) * dt;
    }
    return t;
}

// Precomputed transforms for one (M, dt) pair:
//  - fit:       values at Gauss points -> Chebyshev coefficients b_n
//  - monomial:  values at Gauss points -> scaled monomial coefficients s_n,
//               where s(theta) = sum_n theta^n/n! s_n (exact for deg < M).
struct ChebyshevFit {
    int M = 0;
    double dt = 0.0;
    std::vector<double> theta;   // sample times in (0, dt)
    Eigen::MatrixXd fit;         // M x M, b = fit * y
    Eigen::MatrixXd monomial;    // M x M, s = monomial * y

    ChebyshevFit() = default;
    ChebyshevFit(int M_, double dt_) : M(M_), dt(dt_), theta(chebyshev_gauss_times(M_, dt_)) {
        // T_n at the Gauss abscissas, discrete orthogonality
        Eigen::MatrixXd Tval(M, M);  // (n, m)
        for (int m = 0; m < M; ++m) {
            const double x = 2.0 * theta[m] / dt - 1.0;
            double t0 = 1.0, t1 = x;
            for (int n = 0; n < M; ++n) {
                Tval(n, m) = (n == 0) ? 1.0 : (n == 1 ? x : 0.0);
                if (n >= 2) {
                    const double t2 = 2.0 * x * t1 - t0;
                    Tval(n, m) = t2;
                    t0 = t1;
                    t1 = t2;
                }
            }
        }
        fit.resize(M, M);
        for (int n = 0; n < M; ++n)
            for (int m = 0; m < M; ++m)
                fit(n, m) = ((n == 0) ? 1.0 : 2.0) / M * Tval(n, m);
        // T_n(2 theta/dt - 1) as polynomials in theta
        const double a = 2.0 / dt, b = -1.0;
        std::vector<Eigen::VectorXd> poly(M);  // coefficients of theta^j
        poly[0] = Eigen::VectorXd::Zero(M);
        poly[0](0) = 1.0;
        if (M > 1) {
            poly[1] = Eigen::VectorXd::Zero(M);
            poly[1](0) = b;
            poly[1](1) = a;
        }
        for (int n = 2; n < M; ++n) {
            poly[n] = Eigen::VectorXd::Zero(M);
            for (int j = 0; j < M; ++j) {
                double v = 2.0 * b * poly[n - 1](j) - poly[n - 2](j);
                if (j > 0) v += 2.0 * a * poly[n - 1](j - 1);
                poly[n](j) = v;
            }
        }
        Eigen::MatrixXd cheb_to_mono(M, M);  // (j, n) with j! scaling
        double fact = 1.0;
        for (int j = 0; j < M; ++j) {
            if (j > 0) fact *= j;
            for (int n = 0; n < M; ++n) cheb_to_mono(j, n) = fact * poly[n](j);
        }
        monomial = cheb_to_mono * fit;
    }

    // Chebyshev value at local time theta (any theta; |x|>1 extrapolates).
    static double cheb_eval(const Eigen::VectorXd& b, double x) {
        double t0 = 1.0, t1 = x, acc = b(0);
        for (int n = 1; n < b.size(); ++n) {
            const double tn = (n == 1) ? x : 2.0 * x * t1 - t0;
            if (n >= 2) {
                t0 = t1;
                t1 = tn;
            }
            acc += b(n) * tn;
        }
        return acc;
    }
};

// Scaled monomial coefficients of a sampled source; exact for polynomials of
// degree < M. Samples are taken at chebyshev_gauss_times(M, dt).
inline std::vector<Eigen::VectorXcd> chebyshev_sample_source(
    const std::vector<Eigen::VectorXcd>& samples, double dt) {
    const int M = static_cast<int>(samples.size());
    require(M >= 1, "chebyshev_sample_source: no samples");
    const ChebyshevFit fitter(M, dt);
    std::vector<Eigen::VectorXcd> s(M, Eigen::VectorXcd::Zero(samples[0].size()));
    for (int n = 0; n < M; ++n)
        for (int m = 0; m < M; ++m) s[n] += fitter.monomial(n, m) * samples[m];
    return s;
}

// --------------------------- phi / f functions -----------------------------

// phi_m(z) = sum_j z^j / (j+m)!; phi_0 = exp. Taylor near zero, upward
// recursion elsewhere.
inline Complex phi_scalar(int m, Complex z) {
    if (std::abs(z) < 0.9) {
        Complex term = 1.0;
        double denom = 1.0;
        for (int j = 1; j <= m; ++j) denom *= j;
        term /= denom;  // j = 0 term: 1/m!
        Complex acc = term;
        for (int j = 1; j < 60; ++j) {
            term *= z / double(j + m);
            acc += term;
            if (std::abs(term) < 1e-22 * std::max(1.0, std::abs(acc))) break;
        }
        return acc;
    }
    Complex phi = std::exp(z);
    double fact = 1.0;
    for (int k = 0; k < m; ++k) {
        if (k > 0) fact *= k;
        phi = (phi - 1.0 / fact) / z;
    }
    return phi;
}

// f_m(lambda, theta) = theta^m phi_m(lambda theta)
inline Complex f_scalar(int m, Complex lambda, double theta) {
    return std::pow(theta, m) * phi_scalar(m, lambda * theta);
}

// Small dense f_m(A, theta) b through the augmented-exponential identity
// exp([[A theta, b e1 | J]]) — robust fallback when the Krylov Hessenberg
// matrix resists diagonalization.
inline Eigen::VectorXcd f_m_augmented(const Eigen::MatrixXcd& A,
                                      const Eigen::VectorXcd& b, int m,
                                      double theta) {
    const int k = static_cast<int>(A.rows());
    Eigen::MatrixXcd C = Eigen::MatrixXcd::Zero(k + m, k + m);
    C.topLeftCorner(k, k) = A * theta;
    C.block(0, k, k, 1) = b;
    for (int j = 0; j < m - 1; ++j) C(k + j, k + j + 1) = 1.0;
    const Eigen::MatrixXcd E = C.exp();
    return std::pow(theta, m) * E.block(0, k + m - 1, k, 1);
}

// Arnoldi factorization with happy-breakdown truncation.
struct KrylovSpace {
    Eigen::MatrixXcd Q;  // N x k
    Eigen::MatrixXcd H;  // k x k upper Hessenberg
    double beta = 0.0;
    double h_next = 0.0;  // residual norm past the last column
    int k = 0;
};

inline KrylovSpace arnoldi(const Eigen::MatrixXcd& L, const Eigen::VectorXcd& v,
                           int K) {
    const int N = static_cast<int>(v.size());
    KrylovSpace ks;
    ks.beta = v.norm();
    const int kmax = std::min(K, N);
    if (ks.beta < 1e-300) {
        ks.k = 0;
        return ks;
    }
    Eigen::MatrixXcd Q(N, kmax);
    Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(kmax, kmax);
    Q.col(0) = v / ks.beta;
    int k = kmax;
    for (int j = 0; j < kmax; ++j) {
        Eigen::VectorXcd w = L * Q.col(j);
        for (int i = 0; i <= j; ++i) {  // modified Gram-Schmidt
            const Complex h = Q.col(i).dot(w);
            H(i, j) = h;
            w -= h * Q.col(i);
        }
        const double hnext = w.norm();
        if (hnext < 1e-14 * ks.beta) {  // lucky breakdown: exact subspace
            k = j + 1;
            ks.h_next = 0.0;
            break;
        }
        if (j + 1 < kmax) {
            H(j + 1, j) = hnext;
            Q.col(j + 1) = w / hnext;
        } else {
            ks.h_next = hnext;
        }
    }
    ks.k = k;
    ks.Q = Q.leftCols(k);
    ks.H = H.topLeftCorner(k, k);
    return ks;
}

// Evaluates f_m(L, theta) v for several theta via one Arnoldi space. The
// Hessenberg f_m uses dense eigendecomposition with the augmented-exponential
// fallback near defective spectra. err_est accumulates the standard
// a-posteriori truncation indicator beta h_{K+1,K} |[f_m(H) e1]_K|.
inline std::vector<Eigen::VectorXcd> f_m_krylov(const Eigen::MatrixXcd& L,
                                                const Eigen::VectorXcd& v, int m,
                                                const std::vector<double>& thetas,
                                                int K, double* err_est = nullptr) {
    const int N = static_cast<int>(v.size());
    std::vector<Eigen::VectorXcd> out(thetas.size(), Eigen::VectorXcd::Zero(N));
    const KrylovSpace ks = arnoldi(L, v, K);
    if (ks.k == 0) return out;

    Eigen::VectorXcd e1 = Eigen::VectorXcd::Zero(ks.k);
    e1(0) = ks.beta;

    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(ks.H);
    bool use_eigen = es.info() == Eigen::Success;
    Eigen::MatrixXcd V, Vinv;
    if (use_eigen) {
        V = es.eigenvectors();
        Eigen::FullPivLU<Eigen::MatrixXcd> lu(V);
        if (lu.isInvertible()) {
            Vinv = lu.inverse();
            const double resid =
                (V * es.eigenvalues().asDiagonal() * Vinv - ks.H).cwiseAbs().maxCoeff();
            if (resid > 1e-10 * std::max(1.0, max_abs(ks.H))) use_eigen = false;
        } else {
            use_eigen = false;
        }
    }
    for (size_t it = 0; it < thetas.size(); ++it) {
        const double th = thetas[it];
        Eigen::VectorXcd fe1;
        if (use_eigen) {
            Eigen::VectorXcd w = Vinv * e1;
            for (int i = 0; i < ks.k; ++i) w(i) *= f_scalar(m, es.eigenvalues()(i), th);
            fe1 = V * w;
        } else {
            fe1 = f_m_augmented(ks.H, e1, m, th);
        }
        out[it] = ks.Q * fe1;
        if (err_est)
            *err_est = std::max(*err_est, ks.h_next * std::abs(fe1(ks.k - 1)));
    }
    return out;
}

// Spec surface: sum_n f_{n+1}(L, t) s_n evaluated through the recursion
// v_{n+1} = L v_n + s_n and a single f_M Krylov application.
inline Eigen::VectorXcd fm_apply(const Eigen::MatrixXcd& L, double t,
                                 const std::vector<Eigen::VectorXcd>& s, int K) {
    const int M = static_cast<int>(s.size());
    require(M >= 1, "fm_apply: needs at least one coefficient");
    const int N = static_cast<int>(L.rows());
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(N);
    Eigen::VectorXcd poly = Eigen::VectorXcd::Zero(N);
    double c = 1.0;  // theta^n / n!
    for (int n = 0; n < M; ++n) {
        if (n > 0) c *= t / n;
        poly += c * v;  // v_n term (v_0 = 0 contributes nothing)
        v = (L * v + s[n]).eval();
    }
    return poly + f_m_krylov(L, v, M, {t}, K)[0];
}

// --------------------------- semi-global stepper ---------------------------

// One step of the integral-equation scheme: split L = L0 + Lt around the
// midpoint sample, fit the source s(theta) = Lt(theta) X(theta) on Chebyshev
// points, apply the f functions, and iterate to the fixed point. Keeps the
// previous step's Chebyshev data to extrapolate the next initial guess.
class SemiGlobalStepper {
  public:
    SemiGlobalStepper(PropagatorConfig cfg, int size, int cols)
        : cfg_(cfg), fit_(cfg.cheb_points, cfg.dt), size_(size), cols_(cols) {}

    struct StepStats {
        int inner_iterations = 0;
        double residual = 0.0;
        double truncation_estimate = 0.0;
    };

    Eigen::MatrixXcd step(const GeneratorProvider& gen, double t0,
                          const Eigen::MatrixXcd& X_in, StepStats* stats = nullptr) {
        const int M = cfg_.cheb_points;
        const double dt = cfg_.dt;
        const Eigen::MatrixXcd L0 = gen.at(t0 + 0.5 * dt);
        const double scale = std::max(1.0, max_abs(X_in));

        std::vector<Eigen::MatrixXcd> Lt(M);
        bool homogeneous = true;
        for (int m = 0; m < M; ++m) {
            Lt[m] = gen.at(t0 + fit_.theta[m]) - L0;
            if (max_abs(Lt[m]) > 1e-15) homogeneous = false;
        }

        std::vector<double> eval_times = fit_.theta;
        eval_times.push_back(dt);

        auto guard = [&](double est) {
            // Krylov truncation past the fixed-point's reach: the step would
            // return silently wrong values, so fail with advice instead.
            if (est > 1e-3 * scale) {
                std::ostringstream os;
                os << "semi-global step at t = " << t0
                   << ": Krylov truncation estimate " << est
                   << " too large; reduce dt or increase krylov_dim";
                throw NumericalError(os.str());
            }
        };

        std::vector<Eigen::MatrixXcd> G;  // trajectory guess at theta points
        double est = 0.0;
        if (homogeneous) {
            auto vals = apply_step(L0, X_in, {}, eval_times, &est);
            guard(est);
            store_prev(vals);
            if (stats) *stats = {1, 0.0, est};
            return vals.back();
        }

        G = initial_guess(X_in);
        std::vector<Eigen::MatrixXcd> vals;
        double delta = 0.0;
        int it = 0;
        for (it = 1; it <= cfg_.max_inner_iters; ++it) {
            std::vector<Eigen::MatrixXcd> samples(M);
            for (int m = 0; m < M; ++m) samples[m] = Lt[m] * G[m];
            std::vector<Eigen::MatrixXcd> S(M, Eigen::MatrixXcd::Zero(size_, cols_));
            for (int n = 0; n < M; ++n)
                for (int m = 0; m < M; ++m) S[n] += fit_.monomial(n, m) * samples[m];
            est = 0.0;
            vals = apply_step(L0, X_in, S, eval_times, &est);
            guard(est);
            delta = 0.0;
            for (int m = 0; m < M; ++m)
                delta = std::max(delta, max_abs(vals[m] - G[m]));
            for (int m = 0; m < M; ++m) G[m] = vals[m];
            if (delta <= cfg_.inner_tol) break;
        }
        if (delta > cfg_.inner_tol) {
            std::ostringstream os;
            os << "semi-global step at t = " << t0 << " did not converge ("
               << delta << " > " << cfg_.inner_tol << " after "
               << cfg_.max_inner_iters << " iterations); reduce dt";
            throw NumericalError(os.str());
        }
        store_prev(vals);
        if (stats) *stats = {it, delta, est};
        return vals.back();
    }

    void reset() { have_prev_ = false; }

    // interior Chebyshev-point solutions of the last step, in sample order
    const std::vector<double>& sample_times() const { return fit_.theta; }
    const std::vector<Eigen::MatrixXcd>& last_interior_values() const {
        return last_interior_;
    }

  private:
    // U(theta) = sum_{n<M} theta^n/n! V_n + f_M(L0, theta) V_M with
    // V_0 = X_in, V_{n+1} = L0 V_n + S_n; exact up to the Krylov residual.
    std::vector<Eigen::MatrixXcd> apply_step(const Eigen::MatrixXcd& L0,
                                             const Eigen::MatrixXcd& X_in,
                                             const std::vector<Eigen::MatrixXcd>& S,
                                             const std::vector<double>& thetas,
                                             double* err_est = nullptr) {
        const int M = cfg_.cheb_points;
        std::vector<Eigen::MatrixXcd> V(M + 1);
        V[0] = X_in;
        for (int n = 0; n < M; ++n) {
            V[n + 1] = L0 * V[n];
            if (!S.empty()) V[n + 1] += S[n];
        }
        std::vector<Eigen::MatrixXcd> out(thetas.size(),
                                          Eigen::MatrixXcd::Zero(size_, cols_));
        for (size_t it = 0; it < thetas.size(); ++it) {
            double c = 1.0;
            for (int n = 0; n < M; ++n) {
                if (n > 0) c *= thetas[it] / n;
                out[it] += c * V[n];
            }
        }
        for (int col = 0; col < cols_; ++col) {
            auto tails =
                f_m_krylov(L0, V[M].col(col), M, thetas, cfg_.krylov_dim, err_est);
            for (size_t it = 0; it < thetas.size(); ++it) out[it].col(col) += tails[it];
        }
        return out;
    }

    std::vector<Eigen::MatrixXcd> initial_guess(const Eigen::MatrixXcd& X_in) {
        const int M = cfg_.cheb_points;
        std::vector<Eigen::MatrixXcd> G(M, X_in);
        if (!have_prev_) return G;
        // extrapolate the previous step's Chebyshev interpolant
        const double ref = max_abs(X_in) + 1.0;
        for (int m = 0; m < M; ++m) {
            const double x = 2.0 * (fit_.theta[m] + cfg_.dt) / cfg_.dt - 1.0;
            Eigen::MatrixXcd g = Eigen::MatrixXcd::Zero(size_, cols_);
            double tprev = 1.0, tcur = x;
            for (int n = 0; n < M; ++n) {
                const double Tn = (n == 0) ? 1.0 : tcur;
                if (n >= 1) {
                    const double tnext = 2.0 * x * tcur - tprev;
                    tprev = tcur;
                    tcur = tnext;
                }
                g += Tn * prev_cheb_[n];
            }
            if (!g.allFinite() || max_abs(g) > 8.0 * ref)
                return std::vector<Eigen::MatrixXcd>(static_cast<size_t>(M), X_in);
            G[m] = g;
        }
        return G;
    }

    void store_prev(const std::vector<Eigen::MatrixXcd>& vals) {
        const int M = cfg_.cheb_points;
        prev_cheb_.assign(M, Eigen::MatrixXcd::Zero(size_, cols_));
        for (int n = 0; n < M; ++n)
            for (int m = 0; m < M; ++m) prev_cheb_[n] += fit_.fit(n, m) * vals[m];
        last_interior_.assign(vals.begin(), vals.begin() + M);
        have_prev_ = true;
    }

    PropagatorConfig cfg_;
    ChebyshevFit fit_;
    int size_, cols_;
    bool have_prev_ = false;
    std::vector<Eigen::MatrixXcd> prev_cheb_;  // Chebyshev coefficients
    std::vector<Eigen::MatrixXcd> last_interior_;
};

// One semi-global step as a free function (spec surface).
inline Eigen::MatrixXcd semi_global_step(const GeneratorProvider& gen, double t0,
                                         const Eigen::MatrixXcd& X_in,
                                         const PropagatorConfig& cfg,
                                         SemiGlobalStepper::StepStats* stats = nullptr) {
    SemiGlobalStepper stepper(cfg, static_cast<int>(X_in.rows()),
                              static_cast<int>(X_in.cols()));
    return stepper.step(gen, t0, X_in, stats);
}

// --------------------------- full propagation ------------------------------

namespace detail {

inline StepMethod resolve_method(const PropagatorConfig& cfg,
                                 const GeneratorProvider& gen) {
    if (cfg.method != StepMethod::automatic) return cfg.method;
    return gen.hamiltonian_only() ? StepMethod::unitary_exact
                                  : StepMethod::semi_global;
}

}  // namespace detail

// Marches X through n_steps of width cfg.dt starting from X0 at t=0 under the
// given generator; stores the map at every grid time.
inline MapTrajectory propagate_grid(const GeneratorProvider& gen,
                                    const Eigen::MatrixXcd& X0, int n_steps,
                                    const PropagatorConfig& cfg) {
    cfg.validate();
    MapTrajectory traj;
    traj.times.reserve(n_steps + 1);
    traj.maps.reserve(n_steps + 1);
    traj.times.push_back(0.0);
    traj.maps.push_back(X0);

    const StepMethod method = detail::resolve_method(cfg, gen);
    SemiGlobalStepper stepper(cfg, static_cast<int>(X0.rows()),
                              static_cast<int>(X0.cols()));
    Eigen::MatrixXcd X = X0;
    for (int k = 0; k < n_steps; ++k) {
        const double t0 = k * cfg.dt;
        SemiGlobalStepper::StepStats st;
        try {
            switch (method) {
                case StepMethod::semi_global:
                    X = stepper.step(gen, t0, X, &st);
                    break;
                case StepMethod::unitary_exact: {
                    const Operator u =
                        unitary_step(gen.hamiltonian_at(t0 + 0.5 * cfg.dt), cfg.dt);
                    X = conjugation_superop(u) * X;
                    st = {1, 0.0};
                    break;
                }
                case StepMethod::expm_midpoint: {
                    const double h = cfg.dt / cfg.substeps;
                    for (int ss = 0; ss < cfg.substeps; ++ss) {
                        const double tm = t0 + (ss + 0.5) * h;
                        X = reference_step_expm(gen.at(tm), h) * X;
                    }
                    st = {cfg.substeps, 0.0};
                    break;
                }
                case StepMethod::automatic:
                    break;  // resolved above
            }
        } catch (const NumericalError& e) {
            std::ostringstream os;
            os << "propagation failed in step " << k << " (t = " << t0
               << "): " << e.what();
            throw NumericalError(os.str());
        }
        traj.times.push_back((k + 1) * cfg.dt);
        traj.maps.push_back(X);
        traj.inner_iterations.push_back(st.inner_iterations);
        traj.residuals.push_back(st.residual);
    }
    return traj;
}

// Forward: dLambda/dt = L Lambda from the identity. Adjoint: Y(t) with
// Y(t_final) = terminal, propagated through the reversed conjugate-transposed
// generator; trajectory entry k holds Y(t_k).
inline MapTrajectory propagate_map(const GeneratorProvider& gen, double t_final,
                                   const PropagatorConfig& cfg,
                                   Direction dir = Direction::forward,
                                   const Eigen::MatrixXcd* terminal = nullptr) {
    const int n_steps = static_cast<int>(std::llround(t_final / cfg.dt));
    require(std::abs(n_steps * cfg.dt - t_final) < 1e-9,
            "propagate_map: horizon is not a multiple of dt");
    const int N = gen.size();
    if (dir == Direction::forward) {
        const Eigen::MatrixXcd X0 = terminal
                                        ? *terminal
                                        : Eigen::MatrixXcd::Identity(N, N);
        return propagate_grid(gen, X0, n_steps, cfg);
    }
    require(terminal != nullptr, "propagate_map: adjoint needs a terminal map");
    ReversedAdjointGenerator rgen(gen, t_final);
    MapTrajectory rev = propagate_grid(rgen, terminal->adjoint(), n_steps, cfg);
    MapTrajectory out;
    out.times.resize(rev.times.size());
    out.maps.resize(rev.maps.size());
    for (size_t k = 0; k < rev.maps.size(); ++k) {
        const size_t kk = rev.maps.size() - 1 - k;
        out.times[k] = t_final - rev.times[kk];
        out.maps[k] = rev.maps[kk].adjoint();
    }
    out.inner_iterations = rev.inner_iterations;
    out.residuals = rev.residuals;
    return out;
}

// Brute-force oracle: dense midpoint exponentials on a refined grid. Kept
// free of the Kronecker and Krylov shortcuts on purpose.
inline MapTrajectory propagate_reference(const GeneratorProvider& gen,
                                         double t_final, double dt,
                                         int substeps = 1) {
    PropagatorConfig cfg;
    cfg.dt = dt;
    cfg.substeps = substeps;
    cfg.method = StepMethod::expm_midpoint;
    return propagate_map(gen, t_final, cfg);
}

}  // namespace qoct
