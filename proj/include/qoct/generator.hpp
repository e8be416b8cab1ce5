// generator.hpp — Time-dependent generators of the dynamics, presented to the
// integrators as matrices acting on column-stacked solutions. A generator may
// advertise a pure-Hamiltonian fast path (closed systems, ZOH fields).

#pragma once

#include "qoct/types.hpp"

#include <Eigen/Eigenvalues>

#include <functional>
#include <memory>

namespace qoct {

class GeneratorProvider {
  public:
    virtual ~GeneratorProvider() = default;

    // generator matrix at time t (size x size)
    virtual Eigen::MatrixXcd at(double t) const = 0;
    virtual int size() const = 0;

    // Closed dynamics with piecewise-constant H admits an exact Kronecker
    // step; generators that qualify expose H(t) here.
    virtual bool hamiltonian_only() const { return false; }
    virtual Operator hamiltonian_at(double /*t*/) const {
        throw NumericalError("hamiltonian_at: generator has no Hamiltonian fast path");
    }
};

// Arbitrary callable generator, for tests and analytic driving profiles.
class FunctionGenerator : public GeneratorProvider {
  public:
    FunctionGenerator(int size, std::function<Eigen::MatrixXcd(double)> fn)
        : size_(size), fn_(std::move(fn)) {}
    Eigen::MatrixXcd at(double t) const override { return fn_(t); }
    int size() const override { return size_; }

  private:
    int size_;
    std::function<Eigen::MatrixXcd(double)> fn_;
};

class ConstantGenerator : public GeneratorProvider {
  public:
    explicit ConstantGenerator(Eigen::MatrixXcd L) : L_(std::move(L)) {}
    Eigen::MatrixXcd at(double) const override { return L_; }
    int size() const override { return static_cast<int>(L_.rows()); }

  private:
    Eigen::MatrixXcd L_;
};

// Adjoint propagation runs the conjugate-transposed generator backwards:
// A(s) = L(t_final - s)^dag, so the same forward stepper serves both sweeps.
// For a pure commutator generator the adjoint is the commutator of -H, which
// keeps the Hamiltonian fast path available.
class ReversedAdjointGenerator : public GeneratorProvider {
  public:
    ReversedAdjointGenerator(const GeneratorProvider& base, double t_final)
        : base_(base), t_final_(t_final) {}
    Eigen::MatrixXcd at(double s) const override {
        return base_.at(t_final_ - s).adjoint();
    }
    int size() const override { return base_.size(); }
    bool hamiltonian_only() const override { return base_.hamiltonian_only(); }
    Operator hamiltonian_at(double s) const override {
        return -base_.hamiltonian_at(t_final_ - s);
    }

  private:
    const GeneratorProvider& base_;
    double t_final_;
};

// expm(-i H dt) through the Hermitian eigendecomposition; unitary to roundoff.
inline Operator unitary_step(const Operator& H, double dt) {
    Eigen::SelfAdjointEigenSolver<Operator> es(H);
    const Eigen::VectorXd w = es.eigenvalues();
    Eigen::VectorXcd ph(w.size());
    for (int i = 0; i < w.size(); ++i)
        ph(i) = std::exp(Complex(0.0, -w(i) * dt));
    return es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace qoct
