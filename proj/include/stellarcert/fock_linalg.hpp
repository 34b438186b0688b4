#pragma once

// Dense linear algebra on truncated Fock spaces: ladder operators, matrix
// exponentials, Hermitian spectra and Hermite polynomials. Everything here
// is basis-agnostic numerics; the physics lives in the other headers.

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

namespace stellarcert {

using complex = std::complex<double>;
using HermitianMatrix = Eigen::MatrixXcd;
using DiagonalOperator = Eigen::VectorXd;

inline constexpr int kMaxExpDim = 2048;

// Lowering operator a on an N-dimensional truncation: <j|a|j+1> = sqrt(j+1).
inline Eigen::MatrixXcd ladder_matrix(int n_dim) {
    if (n_dim < 2)
        throw std::invalid_argument("ladder_matrix: dimension must be >= 2");
    Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(n_dim, n_dim);
    for (int j = 0; j + 1 < n_dim; ++j)
        a(j, j + 1) = std::sqrt(double(j + 1));
    return a;
}

// Dense exp(M) via scaling-and-squaring with Pade approximants.
// Guard rails: generators here are anti-Hermitian-ish and bounded, so a
// non-finite result always indicates a caller bug, not a tolerable loss.
inline Eigen::MatrixXcd matrix_exp(const Eigen::MatrixXcd& m) {
    if (m.rows() != m.cols())
        throw std::invalid_argument("matrix_exp: matrix must be square");
    if (m.rows() > kMaxExpDim)
        throw std::invalid_argument("matrix_exp: dimension exceeds " +
                                    std::to_string(kMaxExpDim));
    if (!m.allFinite())
        throw std::invalid_argument("matrix_exp: non-finite entries");
    Eigen::MatrixXcd e = m.exp();
    if (!e.allFinite())
        throw std::runtime_error("matrix_exp: overflow in exponential");
    return e;
}

// Real overload: same contract, used where the generator is known real
// (the complex path costs roughly three times as much at equal dimension).
inline Eigen::MatrixXd matrix_exp(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols())
        throw std::invalid_argument("matrix_exp: matrix must be square");
    if (m.rows() > kMaxExpDim)
        throw std::invalid_argument("matrix_exp: dimension exceeds " +
                                    std::to_string(kMaxExpDim));
    if (!m.allFinite())
        throw std::invalid_argument("matrix_exp: non-finite entries");
    Eigen::MatrixXd e = m.exp();
    if (!e.allFinite())
        throw std::runtime_error("matrix_exp: overflow in exponential");
    return e;
}

// Largest eigenvalue of a Hermitian matrix. The input is validated against
// H = H^dagger (tolerance scaled to the matrix magnitude) and symmetrized
// before solving, so callers may pass matrices assembled from sums whose
// round-off broke exact Hermiticity. Exactly diagonal inputs short-circuit
// to the diagonal maximum; witness evaluations at Fock-diagonal points rely
// on that path returning the stored values untouched.
inline double hermitian_max_eig(const Eigen::MatrixXcd& h) {
    if (h.rows() != h.cols())
        throw std::invalid_argument("hermitian_max_eig: matrix must be square");
    if (h.rows() == 0)
        throw std::invalid_argument("hermitian_max_eig: empty matrix");

    const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
    double dev = 0.0;
    bool off_diagonal_zero = true;
    for (int j = 0; j < h.rows(); ++j) {
        for (int k = j; k < h.cols(); ++k) {
            dev = std::max(dev, std::abs(h(j, k) - std::conj(h(k, j))));
            if (j != k && (h(j, k) != complex(0.0) || h(k, j) != complex(0.0)))
                off_diagonal_zero = false;
        }
    }
    if (dev > 1e-10 * scale)
        throw std::invalid_argument("hermitian_max_eig: matrix is not Hermitian");

    if (off_diagonal_zero) {
        double best = h(0, 0).real();
        for (int j = 1; j < h.rows(); ++j) best = std::max(best, h(j, j).real());
        return best;
    }

    Eigen::MatrixXcd sym = 0.5 * (h + h.adjoint().eval());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(sym,
                                                           Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("hermitian_max_eig: eigensolver failed");
    return solver.eigenvalues().maxCoeff();
}

// Physicists' Hermite polynomial H_n at a complex argument, by the
// three-term recurrence H_{p+1}(z) = 2 z H_p(z) - 2 p H_{p-1}(z).
inline complex hermite_poly(int n, complex z) {
    if (n < 0)
        throw std::invalid_argument("hermite_poly: order must be >= 0");
    complex h_prev = 1.0;
    if (n == 0) return h_prev;
    complex h = 2.0 * z;
    for (int p = 1; p < n; ++p) {
        complex h_next = 2.0 * z * h - 2.0 * double(p) * h_prev;
        h_prev = h;
        h = h_next;
    }
    return h;
}

}  // namespace stellarcert
