#pragma once

#include <eqf/errors.hpp>
#include <eqf/lie.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <optional>
#include <string>
#include <type_traits>

namespace eqf {

/// Default central-difference step for a base point x0.
template <int K>
double default_fd_step(const Vec<K>& x0) {
    return 1e-6 * std::max(1.0, x0.norm());
}

/**
 * Central-difference Jacobian of f: R^K -> R^J at x0.
 *
 * The output dimension is taken from f's fixed-size Eigen return type. Throws
 * NonFiniteEvaluation if any evaluation is not finite.
 */
template <int K, class F>
auto numeric_jacobian(F&& f, const Vec<K>& x0, std::optional<double> step = std::nullopt) {
    using Out = std::decay_t<std::invoke_result_t<F&, const Vec<K>&>>;
    constexpr int J = Out::RowsAtCompileTime;
    static_assert(J != Eigen::Dynamic, "numeric_jacobian expects a fixed-size result");

    const double h = step.value_or(default_fd_step(x0));
    Mat<J, K> jac;
    for (int k = 0; k < K; ++k) {
        Vec<K> xp = x0;
        Vec<K> xm = x0;
        xp[k] += h;
        xm[k] -= h;
        const Vec<J> fp = f(xp);
        const Vec<J> fm = f(xm);
        if (!fp.allFinite() || !fm.allFinite()) {
            throw Error(ErrorKind::NonFiniteEvaluation, "non-finite value along coordinate " + std::to_string(k));
        }
        jac.col(k) = (fp - fm) / (2.0 * h);
    }
    return jac;
}

/// Moore-Penrose pseudoinverse of a fixed-size matrix.
template <int R, int C>
Mat<C, R> pseudo_inverse(const Mat<R, C>& m) {
    Eigen::CompleteOrthogonalDecomposition<Mat<R, C>> cod(m);
    return cod.pseudoInverse();
}

/// Inverse of a symmetric positive-definite matrix via Cholesky, refusing
/// matrices whose condition number exceeds `condition_limit`.
template <int K>
Mat<K, K> guarded_spd_inverse(const Mat<K, K>& m, double condition_limit, ErrorKind kind) {
    const Mat<K, K> sym = 0.5 * (m + m.transpose());
    Eigen::LLT<Mat<K, K>> llt(sym);
    if (!sym.allFinite() || llt.info() != Eigen::Success) {
        throw Error(kind, "Cholesky factorization failed");
    }
    Eigen::SelfAdjointEigenSolver<Mat<K, K>> eig(sym, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (!(lo > 0.0) || hi / lo > condition_limit) {
        throw Error(kind, "condition number " + std::to_string(hi / lo) + " exceeds limit");
    }
    return llt.solve(Mat<K, K>::Identity());
}

}  // namespace eqf
