/**
 * @file eqf.hpp
 * @brief Equivariant Filter over any EquivariantSystem.
 *
 * The observer state X̂ lives on the symmetry group; the Riccati term Sigma
 * lives in chart coordinates about the fixed origin xi°. Every step computes
 *
 *   A°  = Dchart Dphi_{xi°} DLambda(., u°) Dchart^{-1}       (state matrix)
 *   B   = Dchart Dphi_{xi°} Ad_X̂ D_u Lambda(xi_hat, u)      (input matrix)
 *   C   = Dh Dphi_X̂ Dchart^{-1}                              (standard output matrix)
 *   C*  = 1/2 (Drho_y + Drho_yhat) Ad_{X̂^{-1}} wedge          (equivariant output matrix)
 *   Delta = Dphi^dagger Dchart^{-1} Sigma C^T N^{-1} (y - yhat)
 *
 * and advances
 *
 *   X̂     <- project(X̂ + dt (X̂ Lambda^ + Delta^ X̂))
 *   Sigma <- Sigma + dt (A Sigma + Sigma A^T + M - Sigma C^T N^{-1} C Sigma)
 *
 * Derivatives are central differences through the system's own maps unless
 * the system supplies closed forms.
 */
#pragma once

#include <eqf/errors.hpp>
#include <eqf/lie.hpp>
#include <eqf/numeric.hpp>
#include <eqf/system.hpp>

#include <optional>
#include <string>

namespace eqf {

enum class OutputMode { Standard, EquivariantStar };

enum class LinearizationSource {
    Auto,     // closed forms when the system provides them
    Numeric,  // always finite differences through the system maps
};

struct EqfOptions {
    OutputMode mode = OutputMode::EquivariantStar;
    LinearizationSource linearization = LinearizationSource::Auto;
    double n_condition_limit = 1e12;
};

template <EquivariantSystem S>
struct EqFState {
    ElementOf<S> Xhat = GroupOf<S>::identity();
    SymPosDef<S::state_dim> Sigma;
    double t = 0.0;

    static EqFState initial(const SymPosDef<S::state_dim>& sigma0) { return {GroupOf<S>::identity(), sigma0, 0.0}; }
};

// M_eps and N_eps only need to be symmetric PSD; the composed gains are checked PD.
template <int M, int N, int L>
struct GainSchedule {
    SymPosDef<M> Sigma0;
    Mat<M, M> M_eps = Mat<M, M>::Zero();
    Mat<N, N> N_eps = Mat<N, N>::Zero();
    Mat<L, L> M_input = Mat<L, L>::Zero();
    Mat<N, N> N_meas = Mat<N, N>::Identity();

    SymPosDef<M> state_gain(const Mat<M, L>& B) const {
        return make_gain<M>(M_eps + B * M_input * B.transpose(), "state gain M_t");
    }

    SymPosDef<N> output_gain() const { return make_gain<N>(N_eps + N_meas, "output gain N_t"); }

private:
    template <int K>
    static SymPosDef<K> make_gain(const Mat<K, K>& m, const char* what) {
        try {
            return SymPosDef<K>::make(m);
        } catch (const Error& e) {
            throw Error(ErrorKind::NotPositiveDefinite, std::string(what) + " is not positive definite");
        }
    }
};

template <class S>
using GainScheduleOf = GainSchedule<S::state_dim, S::output_dim, S::input_dim>;

/// Dchart|_{xi°} * D_E|_id phi_{xi°}(E), an m x g matrix.
template <EquivariantSystem S>
Mat<S::state_dim, S::Group::dim> origin_differential(const S& sys) {
    using G = GroupOf<S>;
    const auto origin = sys.origin();
    return numeric_jacobian<G::dim>(
        [&](const AlgebraOf<S>& v) -> ChartVecOf<S> { return sys.chart(sys.phi(G::exp(v), origin)); },
        AlgebraOf<S>::Zero());
}

/// Wedge map R^m -> algebra as a g x m matrix. Throws NotNormalChart without one.
template <EquivariantSystem S>
Mat<S::Group::dim, S::state_dim> wedge_matrix(const S& sys) {
    if constexpr (HasNormalChart<S>) {
        Mat<S::Group::dim, S::state_dim> w;
        for (int j = 0; j < S::state_dim; ++j) {
            w.col(j) = sys.wedge(ChartVecOf<S>::Unit(j));
        }
        return w;
    } else {
        throw Error(ErrorKind::NotNormalChart, "system chart has no wedge map");
    }
}

/// State matrix through the origin velocity u° = psi(X̂^{-1}, u). Throws MissingPsi
/// for systems without an input action.
template <EquivariantSystem S>
Mat<S::state_dim, S::state_dim> state_matrix_origin(const S& sys, const ElementOf<S>& Xhat, const InputOf<S>& u) {
    if constexpr (HasInputAction<S>) {
        using G = GroupOf<S>;
        const InputOf<S> u_origin = sys.psi(G::inverse(Xhat), u);
        const auto dlift = numeric_jacobian<S::state_dim>(
            [&](const ChartVecOf<S>& eps) -> AlgebraOf<S> { return sys.lift(sys.chart_inverse(eps), u_origin); },
            ChartVecOf<S>::Zero());
        return origin_differential(sys) * dlift;
    } else {
        throw Error(ErrorKind::MissingPsi, "system has no input action");
    }
}

/// State matrix from the measured input only, without the input action:
///   A° = Dchart Dphi_{X̂^{-1}}|xi_hat Dphi_{xi_hat}|id DLambda(., u)|xi_hat Dphi_X̂|xi° Dchart^{-1}
template <EquivariantSystem S>
Mat<S::state_dim, S::state_dim> state_matrix_measured(const S& sys, const ElementOf<S>& Xhat, const InputOf<S>& u) {
    using G = GroupOf<S>;
    const auto xi_hat = sys.phi(Xhat, sys.origin());
    const auto Xinv = G::inverse(Xhat);
    const auto left = numeric_jacobian<G::dim>(
        [&](const AlgebraOf<S>& v) -> ChartVecOf<S> {
            return sys.chart(sys.phi(Xinv, sys.phi(G::exp(v), xi_hat)));
        },
        AlgebraOf<S>::Zero());
    const auto right = numeric_jacobian<S::state_dim>(
        [&](const ChartVecOf<S>& eps) -> AlgebraOf<S> { return sys.lift(sys.phi(Xhat, sys.chart_inverse(eps)), u); },
        ChartVecOf<S>::Zero());
    return left * right;
}

/// Uses the input action when the system has one, otherwise the measured-input chain.
template <EquivariantSystem S>
Mat<S::state_dim, S::state_dim> state_matrix(const S& sys, const ElementOf<S>& Xhat, const InputOf<S>& u) {
    if constexpr (HasInputAction<S>) {
        return state_matrix_origin(sys, Xhat, u);
    } else {
        return state_matrix_measured(sys, Xhat, u);
    }
}

template <EquivariantSystem S>
Mat<S::state_dim, S::input_dim> input_matrix(const S& sys, const ElementOf<S>& Xhat, const InputOf<S>& u_measured) {
    using G = GroupOf<S>;
    const auto xi_hat = sys.phi(Xhat, sys.origin());
    const auto dlift = numeric_jacobian<S::input_dim>(
        [&](const InputOf<S>& w) -> AlgebraOf<S> { return sys.lift(xi_hat, w); }, u_measured);
    return origin_differential(sys) * G::adjoint_matrix(Xhat) * dlift;
}

/// Jacobian of eps -> h(phi(X̂, chart^{-1}(eps))) at 0.
template <EquivariantSystem S>
Mat<S::output_dim, S::state_dim> output_matrix_standard(const S& sys, const ElementOf<S>& Xhat) {
    return numeric_jacobian<S::state_dim>(
        [&](const ChartVecOf<S>& eps) -> OutputOf<S> { return sys.output(sys.phi(Xhat, sys.chart_inverse(eps))); },
        ChartVecOf<S>::Zero());
}

/// Averaged output-action differential. Requires rho (MissingRho) and a normal
/// chart (NotNormalChart); the residual y~ - C* eps is third order in eps.
template <EquivariantSystem S>
Mat<S::output_dim, S::state_dim> output_matrix_equivariant(const S& sys, const ElementOf<S>& Xhat,
                                                           const OutputOf<S>& y, const OutputOf<S>& yhat) {
    if constexpr (!HasOutputAction<S>) {
        throw Error(ErrorKind::MissingRho, "system has no output action");
    } else if constexpr (!HasNormalChart<S>) {
        throw Error(ErrorKind::NotNormalChart, "equivariant output matrix needs normal coordinates");
    } else {
        using G = GroupOf<S>;
        auto drho = [&](const OutputOf<S>& at) {
            return numeric_jacobian<G::dim>(
                [&](const AlgebraOf<S>& v) -> OutputOf<S> { return sys.rho(G::exp(v), at); }, AlgebraOf<S>::Zero());
        };
        const Mat<S::output_dim, G::dim> avg = 0.5 * (drho(y) + drho(yhat));
        return avg * G::adjoint_matrix(G::inverse(Xhat)) * wedge_matrix(sys);
    }
}

/// Dphi_{xi°}^dagger * Dchart^{-1}|0 as a g x m matrix: the system's closed form
/// when it has one, else the pseudoinverse of the numeric origin differential.
template <EquivariantSystem S>
Mat<S::Group::dim, S::state_dim> correction_map(const S& sys) {
    if constexpr (HasCorrectionMap<S>) {
        return sys.correction_map();
    } else {
        return pseudo_inverse<S::state_dim, S::Group::dim>(origin_differential(sys));
    }
}

template <EquivariantSystem S>
AlgebraOf<S> correction(const S& sys, const EqFState<S>& state, const Mat<S::output_dim, S::state_dim>& C,
                        const Mat<S::output_dim, S::output_dim>& N, const OutputOf<S>& residual,
                        double n_condition_limit = 1e12) {
    const auto n_inv = guarded_spd_inverse<S::output_dim>(N, n_condition_limit, ErrorKind::SingularN);
    const ChartVecOf<S> gain_term = state.Sigma.matrix() * C.transpose() * n_inv * residual;
    return correction_map(sys) * gain_term;
}

/// One Euler step of the Riccati equation, symmetrized. Throws LostPositivity
/// if the result fails Cholesky.
template <int M, int N>
SymPosDef<M> riccati_step(const SymPosDef<M>& sigma, const Mat<M, M>& A, const Mat<N, M>& C, const Mat<M, M>& Mgain,
                          const Mat<N, N>& Ngain, double dt, double n_condition_limit = 1e12) {
    if (!(dt > 0.0)) {
        throw Error(ErrorKind::InvalidConfig, "riccati_step needs dt > 0");
    }
    const Mat<M, M>& S = sigma.matrix();
    Mat<M, M> rate = A * S + S * A.transpose() + Mgain;
    if (!C.isZero(0.0)) {
        const auto n_inv = guarded_spd_inverse<N>(Ngain, n_condition_limit, ErrorKind::SingularN);
        rate -= S * C.transpose() * n_inv * C * S;
    }
    Mat<M, M> next = S + dt * rate;
    next = 0.5 * (next + next.transpose());
    if (!SymPosDef<M>::is_positive_definite(next)) {
        throw Error(ErrorKind::LostPositivity, "Sigma lost positive definiteness (dt = " + std::to_string(dt) + ")");
    }
    return SymPosDef<M>::make(next);
}

/// Every linearization used by one filter step.
template <EquivariantSystem S>
LinearizationOf<S> linearize(const S& sys, const ElementOf<S>& Xhat, const InputOf<S>& u, const OutputOf<S>& y,
                             const OutputOf<S>& yhat, const EqfOptions& opts) {
    if constexpr (HasClosedFormMatrices<S>) {
        if (opts.linearization == LinearizationSource::Auto) {
            return sys.closed_form_matrices(Xhat, u, y, yhat);
        }
    }
    LinearizationOf<S> lin;
    lin.A = state_matrix(sys, Xhat, u);
    lin.B = input_matrix(sys, Xhat, u);
    lin.C = output_matrix_standard(sys, Xhat);
    if constexpr (HasOutputAction<S> && HasNormalChart<S>) {
        lin.C_star = output_matrix_equivariant(sys, Xhat, y, yhat);
    } else {
        lin.C_star = lin.C;
    }
    return lin;
}

/**
 * Advance the filter by dt with measured input u and output y.
 *
 * With y = nullopt the correction is withheld (Delta = 0) and the Riccati
 * equation runs without its information term.
 */
template <EquivariantSystem S>
EqFState<S> eqf_step(const S& sys, const EqFState<S>& state, const InputOf<S>& u, const std::optional<OutputOf<S>>& y,
                     const GainScheduleOf<S>& gains, const EqfOptions& opts, double dt) {
    using G = GroupOf<S>;
    constexpr int m = S::state_dim;
    constexpr int n = S::output_dim;

    if (!(dt > 0.0)) {
        throw Error(ErrorKind::InvalidConfig, "eqf_step needs dt > 0");
    }
    if (opts.mode == OutputMode::EquivariantStar && !(HasOutputAction<S> && HasNormalChart<S>)) {
        if constexpr (!HasOutputAction<S>) {
            throw Error(ErrorKind::MissingRho, "EquivariantStar mode needs an output action");
        } else {
            throw Error(ErrorKind::NotNormalChart, "EquivariantStar mode needs a normal chart");
        }
    }
    if (y && !y->allFinite()) {
        throw Error(ErrorKind::NonFiniteEvaluation, "measured output is not finite");
    }

    const auto xi_hat = sys.phi(state.Xhat, sys.origin());
    const OutputOf<S> yhat = sys.output(xi_hat);
    const auto lin = linearize(sys, state.Xhat, u, y.value_or(yhat), yhat, opts);

    const Mat<n, m> C = y ? (opts.mode == OutputMode::EquivariantStar ? lin.C_star : lin.C) : Mat<n, m>::Zero();
    const auto Mgain = gains.state_gain(lin.B);
    const Mat<n, n> Ngain = y ? gains.output_gain().matrix() : Mat<n, n>::Identity();

    AlgebraOf<S> delta = AlgebraOf<S>::Zero();
    if (y) {
        delta = correction(sys, state, C, Ngain, OutputOf<S>(*y - yhat), opts.n_condition_limit);
    }

    const auto X = G::matrix(state.Xhat);
    const auto lambda = sys.lift(xi_hat, u);
    const typename G::Matrix Xdot = X * G::hat(lambda) + G::hat(delta) * X;

    EqFState<S> next;
    next.Xhat = G::project(X + dt * Xdot);
    next.Sigma = riccati_step<m, n>(state.Sigma, lin.A, C, Mgain.matrix(), Ngain, dt, opts.n_condition_limit);
    next.t = state.t + dt;
    return next;
}

template <EquivariantSystem S>
typename S::State state_estimate(const S& sys, const ElementOf<S>& Xhat) {
    return sys.phi(Xhat, sys.origin());
}

/// Chart coordinates of the global error phi(X̂^{-1}, xi); needs the true state.
template <EquivariantSystem S>
ChartVecOf<S> state_error(const S& sys, const ElementOf<S>& Xhat, const typename S::State& xi_true) {
    return sys.chart(sys.phi(GroupOf<S>::inverse(Xhat), xi_true));
}

/// eps^T Sigma^{-1} eps via a Cholesky solve.
template <int M>
double lyapunov_value(const Vec<M>& eps, const SymPosDef<M>& sigma) {
    const Vec<M> solved = sigma.matrix().llt().solve(eps);
    return std::max(0.0, eps.dot(solved));
}

}  // namespace eqf
