#pragma once

#include "errors.hpp"
#include "laplacian.hpp"
#include "local_basis.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <random>
#include <utility>

namespace sfmap {

/// Eigenpairs of the reduced problem W_bar phi = lambda A_bar phi.
struct ReducedSpectrum {
    Eigen::MatrixXd A_bar;       // p x p, U^T A U
    Eigen::MatrixXd W_bar;       // p x p, U^T W U
    Eigen::VectorXd eigenvalues; // ascending, size K
    Eigen::MatrixXd coeffs;      // p x K, A_bar-orthonormal
    Eigen::MatrixXd lifted;      // n x K, U * coeffs (may be left empty)

    int sample_count() const { return static_cast<int>(A_bar.rows()); }
    int rank() const { return static_cast<int>(eigenvalues.size()); }
};

/// Eigenpairs of the full problem W psi = lambda A psi.
struct ExactSpectrum {
    Eigen::VectorXd eigenvalues;
    Eigen::MatrixXd vectors; // n x K, A-orthonormal
};

namespace detail {

// Flips each column so that its first entry of non-negligible magnitude is positive.
inline void fix_signs(Eigen::MatrixXd& vectors)
{
    for (Eigen::Index c = 0; c < vectors.cols(); ++c) {
        const double scale = vectors.col(c).cwiseAbs().maxCoeff();
        for (Eigen::Index r = 0; r < vectors.rows(); ++r) {
            if (std::abs(vectors(r, c)) > 1e-10 * scale) {
                if (vectors(r, c) < 0.0) vectors.col(c) *= -1.0;
                break;
            }
        }
    }
}

inline Eigen::VectorXd deterministic_start(Eigen::Index n)
{
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = 1.0 + 0.5 * std::sin(1.0 + 0.7 * static_cast<double>(i));
    return v.normalized();
}

// Extreme eigenvalues of an SPD matrix by power and inverse iteration.
inline std::pair<double, double> spd_extremes(const Eigen::MatrixXd& m, const Eigen::LLT<Eigen::MatrixXd>& llt)
{
    Eigen::VectorXd v = deterministic_start(m.rows());
    double largest = 0.0;
    for (int it = 0; it < 100; ++it) {
        Eigen::VectorXd w = m * v;
        const double next = w.norm();
        v = w / next;
        if (std::abs(next - largest) <= 1e-6 * next) {
            largest = next;
            break;
        }
        largest = next;
    }
    v = deterministic_start(m.rows());
    double inv_largest = 0.0;
    for (int it = 0; it < 100; ++it) {
        Eigen::VectorXd w = llt.solve(v);
        const double next = w.norm();
        v = w / next;
        if (std::abs(next - inv_largest) <= 1e-6 * next) {
            inv_largest = next;
            break;
        }
        inv_largest = next;
    }
    return {1.0 / inv_largest, largest};
}

} // namespace detail

/// Dense reduced operators U^T A U and U^T W U, symmetrized.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> reduce_operators(const LaplacianPair& laplacian, const LocalBasis& basis)
{
    if (laplacian.size() != basis.vertex_count()) throw DimensionError("Laplacian and basis sizes differ");
    const SparseMatrix& U = basis.U;
    const SparseMatrix AU = laplacian.mass.asDiagonal() * U;
    const SparseMatrix WU = laplacian.stiffness * U;
    Eigen::MatrixXd a_bar = Eigen::MatrixXd(SparseMatrix(U.transpose() * AU));
    Eigen::MatrixXd w_bar = Eigen::MatrixXd(SparseMatrix(U.transpose() * WU));
    a_bar = 0.5 * (a_bar + a_bar.transpose()).eval();
    w_bar = 0.5 * (w_bar + w_bar.transpose()).eval();
    return {std::move(a_bar), std::move(w_bar)};
}

/// K smallest eigenpairs of W_bar phi = lambda A_bar phi, via Cholesky of A_bar
/// and a dense symmetric eigensolve. Columns are A_bar-orthonormal with their
/// first significant coefficient positive. `lifted` is left empty.
inline ReducedSpectrum solve_reduced(Eigen::MatrixXd a_bar, Eigen::MatrixXd w_bar, int K)
{
    const auto p = a_bar.rows();
    if (K < 1 || K > p) throw DimensionError("K = " + std::to_string(K) + " outside [1, " + std::to_string(p) + "]");

    Eigen::LLT<Eigen::MatrixXd> llt(a_bar);
    if (llt.info() != Eigen::Success) throw IllConditionedError("reduced mass matrix is not positive definite");
    const auto [smallest, largest] = detail::spd_extremes(a_bar, llt);
    if (smallest < 1e-12 * largest)
        throw IllConditionedError("reduced mass matrix condition " + std::to_string(largest / smallest));

    // C = L^-1 W_bar L^-T
    const Eigen::MatrixXd L = llt.matrixL();
    Eigen::MatrixXd tmp = L.triangularView<Eigen::Lower>().solve(w_bar);
    Eigen::MatrixXd c = L.triangularView<Eigen::Lower>().solve(tmp.transpose());
    c = 0.5 * (c + c.transpose()).eval();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c);
    if (eig.info() != Eigen::Success) throw ConvergenceError("dense eigensolver failed on the reduced problem");

    ReducedSpectrum out;
    out.eigenvalues = eig.eigenvalues().head(K);
    out.coeffs = L.transpose().triangularView<Eigen::Upper>().solve(eig.eigenvectors().leftCols(K));
    detail::fix_signs(out.coeffs);
    out.A_bar = std::move(a_bar);
    out.W_bar = std::move(w_bar);
    return out;
}

/// Lifts reduced coefficient vectors to the dense mesh: Psi_bar = U Phi_bar.
inline Eigen::MatrixXd lift(const LocalBasis& basis, const Eigen::MatrixXd& coeffs)
{
    if (coeffs.rows() != basis.size()) throw DimensionError("coefficient rows must equal the sample count");
    return basis.U * coeffs;
}

/// Reduce, solve and lift in one call.
inline ReducedSpectrum reduced_spectrum(const LaplacianPair& laplacian, const LocalBasis& basis, int K)
{
    auto [a_bar, w_bar] = reduce_operators(laplacian, basis);
    auto out = solve_reduced(std::move(a_bar), std::move(w_bar), K);
    out.lifted = lift(basis, out.coeffs);
    return out;
}

struct ExactSolveOptions {
    double sigma = -1e-8;
    double tolerance = 1e-10;   // residual in the A^-1 norm, relative to max(1, lambda)
    int max_iterations = 500;
    int vertex_guard = 50000;   // refuse larger meshes unless raised
};

/// K smallest eigenpairs of the full problem by block shift-invert subspace
/// iteration around sigma with Rayleigh-Ritz extraction. The block carries
/// extra vectors so degenerate eigenspaces converge as a whole.
inline ExactSpectrum solve_exact(const LaplacianPair& laplacian, int K, const ExactSolveOptions& options = {})
{
    const int n = laplacian.size();
    if (n > options.vertex_guard)
        throw DimensionError("exact eigensolve refused: " + std::to_string(n) + " vertices exceeds the guard of "
                              + std::to_string(options.vertex_guard));
    if (K < 1 || K > n) throw DimensionError("K = " + std::to_string(K) + " outside [1, " + std::to_string(n) + "]");

    const Eigen::VectorXd& mass = laplacian.mass;
    const SparseMatrix& W = laplacian.stiffness;
    const int block = std::min(n, std::max(2 * K, K + 8));

    SparseMatrix shifted = W;
    for (int i = 0; i < n; ++i) shifted.coeffRef(i, i) -= options.sigma * mass(i);
    Eigen::SimplicialLDLT<SparseMatrix> ldlt(shifted);
    if (ldlt.info() != Eigen::Success) throw ConvergenceError("factorization of W - sigma A failed");

    const Eigen::VectorXd sqrt_mass = mass.cwiseSqrt();
    std::mt19937_64 rng(0x5eed);
    std::normal_distribution<double> normal;
    Eigen::MatrixXd X(n, block);
    for (Eigen::Index c = 0; c < X.cols(); ++c)
        for (Eigen::Index r = 0; r < X.rows(); ++r) X(r, c) = normal(rng);

    Eigen::VectorXd lambda;
    Eigen::MatrixXd ritz;
    Eigen::VectorXd residual(K);
    for (int it = 0; it < options.max_iterations; ++it) {
        Eigen::MatrixXd Y = ldlt.solve(mass.asDiagonal() * X);
        // A-orthonormalize through a QR of A^1/2 Y.
        Eigen::MatrixXd Z = sqrt_mass.asDiagonal() * Y;
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(Z);
        Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, block);
        Y = sqrt_mass.cwiseInverse().asDiagonal() * Q;

        Eigen::MatrixXd H = Y.transpose() * (W * Y);
        H = 0.5 * (H + H.transpose()).eval();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(H);
        lambda = eig.eigenvalues();
        X = Y * eig.eigenvectors();

        bool converged = true;
        for (int k = 0; k < K; ++k) {
            const Eigen::VectorXd r = W * X.col(k) - lambda(k) * mass.cwiseProduct(X.col(k));
            residual(k) = std::sqrt(r.cwiseAbs2().cwiseQuotient(mass).sum());
            if (residual(k) > options.tolerance * std::max(1.0, std::abs(lambda(k)))) converged = false;
        }
        if (converged) {
            ExactSpectrum out;
            out.eigenvalues = lambda.head(K);
            out.vectors = X.leftCols(K);
            detail::fix_signs(out.vectors);
            return out;
        }
    }
    throw ConvergenceError("subspace iteration did not converge; worst residual " + std::to_string(residual.maxCoeff()));
}

} // namespace sfmap
