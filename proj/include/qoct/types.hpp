// types.hpp — Basic Liouville-space currency: operators, operator vectors,
// superoperators, and the small validation helpers shared by every module.

#pragma once

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <string>

namespace qoct {

using Complex = std::complex<double>;
using Operator = Eigen::MatrixXcd;        // d x d, Hilbert-space operator
using OperatorVector = Eigen::VectorXcd;  // length d^2, row-stacked
using SuperOperator = Eigen::MatrixXcd;   // d^2 x d^2, acts on OperatorVector

inline constexpr Complex kImag{0.0, 1.0};

struct ValidationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

inline void require(bool cond, const std::string& what) {
    if (!cond) throw ValidationError(what);
}

inline double hermiticity_residual(const Operator& A) {
    return (A - A.adjoint()).cwiseAbs().maxCoeff();
}

inline bool is_hermitian(const Operator& A, double tol = 1e-10) {
    return A.rows() == A.cols() && hermiticity_residual(A) <= tol;
}

inline void require_finite(const Eigen::MatrixXcd& A, const std::string& who) {
    if (!A.allFinite()) throw NumericalError(who + ": non-finite entries");
}

inline double max_abs(const Eigen::MatrixXcd& A) {
    return A.size() == 0 ? 0.0 : A.cwiseAbs().maxCoeff();
}

}  // namespace qoct
