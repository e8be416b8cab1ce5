// operator_core.hpp — Operator bases, row-stacked vectorization, and the
// superoperator constructors (unitary commutator, GKLS dissipator, phase
// noise) plus the CPTP check used on propagated maps.

#pragma once

#include "qoct/types.hpp"

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/KroneckerProduct>

#include <cmath>
#include <utility>
#include <vector>

namespace qoct {

// --------------------------- operator bases --------------------------------

// Generalized Gell-Mann matrices of su(d), ordered as in the d=3 standard set:
// for k = 1..d-1: sym(j,k), asym(j,k) for j < k, then the k-th diagonal one.
// Traceless, Hermitian, Tr[G_j G_k] = 2 delta_jk.
inline std::vector<Operator> gellmann_basis(int d) {
    require(d >= 2, "gellmann_basis: dimension must be >= 2");
    std::vector<Operator> out;
    out.reserve(static_cast<size_t>(d) * d - 1);
    for (int k = 1; k < d; ++k) {
        for (int j = 0; j < k; ++j) {
            Operator s = Operator::Zero(d, d);
            s(j, k) = 1.0;
            s(k, j) = 1.0;
            out.push_back(s);
            Operator a = Operator::Zero(d, d);
            a(j, k) = Complex(0, -1);
            a(k, j) = Complex(0, 1);
            out.push_back(a);
        }
        Operator diag = Operator::Zero(d, d);
        const double norm = std::sqrt(2.0 / (k * (k + 1.0)));
        for (int m = 0; m < k; ++m) diag(m, m) = norm;
        diag(k, k) = -k * norm;
        out.push_back(diag);
    }
    return out;
}

// Hilbert-Schmidt inner product Tr[A^dag B].
inline Complex hs_inner(const Operator& A, const Operator& B) {
    if (A.rows() != B.rows() || A.cols() != B.cols())
        throw ShapeError("hs_inner: dimension mismatch");
    return (A.adjoint() * B).trace();
}

inline double hs_norm(const Operator& A) {
    return A.norm();  // Frobenius == Hilbert-Schmidt
}

// --------------------------- vectorization ---------------------------------

// Row-stacked: vec(X)[i*d + j] = X(i,j), matching (rho00, rho01, rho10, rho11).
inline OperatorVector vectorize(const Operator& X) {
    const int d = static_cast<int>(X.rows());
    OperatorVector v(static_cast<Eigen::Index>(d) * X.cols());
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < X.cols(); ++j) v(i * X.cols() + j) = X(i, j);
    return v;
}

inline Operator unvectorize(const OperatorVector& v) {
    const int d = static_cast<int>(std::llround(std::sqrt(double(v.size()))));
    if (static_cast<Eigen::Index>(d) * d != v.size())
        throw ShapeError("unvectorize: length is not a perfect square");
    Operator X(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) X(i, j) = v(i * d + j);
    return X;
}

// vec(I_d); <<I| as a row vector is its adjoint.
inline OperatorVector identity_vector(int d) {
    return vectorize(Operator::Identity(d, d));
}

// --------------------------- superoperator constructors --------------------

// Left/right multiplication in the row-stacked convention:
//   vec(A X) = (A (x) I) vec(X),  vec(X B) = (I (x) B^T) vec(X).
inline SuperOperator left_mult_superop(const Operator& A) {
    const int d = static_cast<int>(A.rows());
    return Eigen::kroneckerProduct(A, Operator::Identity(d, d));
}

inline SuperOperator right_mult_superop(const Operator& B) {
    const int d = static_cast<int>(B.rows());
    return Eigen::kroneckerProduct(Operator::Identity(d, d), B.transpose());
}

// [H, .] as a matrix: H (x) I - I (x) H^T. Hermitian for Hermitian H.
inline SuperOperator commutator_kernel(const Operator& H) {
    return left_mult_superop(H) - right_mult_superop(H);
}

// Unitary generator -i(H (x) I - I (x) H^T); anti-Hermitian for Hermitian H.
inline SuperOperator commutator_superop(const Operator& H,
                                        bool allow_non_hermitian = false) {
    if (!allow_non_hermitian)
        require(is_hermitian(H), "commutator_superop: H is not Hermitian");
    return -kImag * commutator_kernel(H);
}

// Conjugation map X -> U X U^dag, i.e. U (x) conj(U).
inline SuperOperator conjugation_superop(const Operator& U) {
    return Eigen::kroneckerProduct(U, U.conjugate());
}

// Sum of GKLS channels Gamma [F . F^dag - 1/2 {F^dag F, .}].
inline SuperOperator gkls_superop(
    const std::vector<std::pair<Operator, double>>& channels, int dim = 0) {
    int d = dim;
    if (d == 0) {
        require(!channels.empty(),
                "gkls_superop: empty channel list needs an explicit dim");
        d = static_cast<int>(channels.front().first.rows());
    }
    SuperOperator L = SuperOperator::Zero(static_cast<Eigen::Index>(d) * d,
                                          static_cast<Eigen::Index>(d) * d);
    const Operator id = Operator::Identity(d, d);
    for (const auto& [F, rate] : channels) {
        require(rate >= 0.0, "gkls_superop: negative rate");
        if (rate == 0.0) continue;
        const Operator FdF = F.adjoint() * F;
        L += rate * (Eigen::kroneckerProduct(F, F.conjugate()) -
                     0.5 * Eigen::kroneckerProduct(FdF, id) -
                     0.5 * Eigen::kroneckerProduct(id, FdF.transpose()))
                        .eval();
    }
    return L;
}

// Controller phase noise -gamma_P [H, [H, .]]; a GKLS channel with jump H.
inline SuperOperator phase_noise_superop(const Operator& H, double gamma_p) {
    require(gamma_p >= 0.0, "phase_noise_superop: negative rate");
    const SuperOperator C = commutator_kernel(H);
    return -gamma_p * (C * C);
}

// --------------------------- CPTP verification -----------------------------

// Choi matrix by reshuffling: C[(k,i),(l,j)] = Lambda[(i,j),(k,l)].
inline Eigen::MatrixXcd choi_matrix(const SuperOperator& L) {
    const int d2 = static_cast<int>(L.rows());
    if (L.cols() != d2) throw ShapeError("choi_matrix: non-square input");
    const int d = static_cast<int>(std::llround(std::sqrt(double(d2))));
    if (d * d != d2) throw ShapeError("choi_matrix: dim^2 mismatch");
    Eigen::MatrixXcd C(d2, d2);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            for (int k = 0; k < d; ++k)
                for (int l = 0; l < d; ++l)
                    C(k * d + i, l * d + j) = L(i * d + j, k * d + l);
    return C;
}

struct CptpReport {
    double tp_residual = 0.0;   // max |tr(Lambda(X)) - tr(X)| over matrix units
    double choi_min_eig = 0.0;  // min eigenvalue of the Hermitized Choi matrix
    bool tp_ok = false;
    bool cp_ok = false;
};

inline CptpReport choi_cptp_check(const SuperOperator& L, double tol_tp = 1e-10,
                                  double tol_cp = -1e-8) {
    const int d2 = static_cast<int>(L.rows());
    if (L.cols() != d2) throw ShapeError("choi_cptp_check: non-square input");
    const int d = static_cast<int>(std::llround(std::sqrt(double(d2))));
    CptpReport rep;
    // trace preservation: <<I| L column-wise against matrix-unit traces
    const OperatorVector idv = identity_vector(d);
    for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l) {
            const Complex out_trace = idv.adjoint() * L.col(k * d + l);
            const double want = (k == l) ? 1.0 : 0.0;
            rep.tp_residual = std::max(rep.tp_residual, std::abs(out_trace - want));
        }
    Eigen::MatrixXcd C = choi_matrix(L);
    C = 0.5 * (C + C.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(C);
    rep.choi_min_eig = es.eigenvalues().minCoeff();
    rep.tp_ok = rep.tp_residual <= tol_tp;
    rep.cp_ok = rep.choi_min_eig >= tol_cp;
    return rep;
}

}  // namespace qoct
