/**
 * @file system.hpp
 * @brief Compile-time description of an equivariant kinematic system.
 *
 * A system type S bundles a matrix Lie group, a state space it acts on
 * transitively from the right, and the maps the filter needs:
 *
 *   S::Group                 group traits (see SO3 in lie.hpp)
 *   S::State                 point of the homogeneous space
 *   S::state_dim             m, dimension of the state space (and the chart)
 *   S::output_dim            n
 *   S::input_dim             l
 *   phi(X, xi)               right action of the group on states
 *   lift(xi, u)              algebra coordinates of an equivariant lift
 *   output(xi)               configuration output, R^n
 *   origin()                 the fixed origin xi°
 *   chart(xi), chart_inverse(eps)   local coordinates about the origin
 *
 * Optional capabilities, detected by the concepts below:
 *
 *   psi(X, u)                input action (enables the origin-velocity path for A°)
 *   rho(X, y)                output action (enables the equivariant output matrix)
 *   wedge(eps)               R^m -> algebra, marks the chart as a normal chart
 *   correction_map()         closed form of Dphi^dagger * Dchart^{-1}|0, g x m
 *   closed_form_matrices(X, u, y, yhat)   closed-form A°, B, C, C*
 */
#pragma once

#include <eqf/lie.hpp>

#include <concepts>

namespace eqf {

template <class G>
concept MatrixLieGroup = requires(const typename G::Element& a, const typename G::Algebra& w,
                                  const typename G::Matrix& m) {
    { G::dim } -> std::convertible_to<int>;
    { G::identity() } -> std::same_as<typename G::Element>;
    { G::compose(a, a) } -> std::same_as<typename G::Element>;
    { G::inverse(a) } -> std::same_as<typename G::Element>;
    { G::exp(w) } -> std::same_as<typename G::Element>;
    { G::adjoint_matrix(a) } -> std::convertible_to<Mat<G::dim, G::dim>>;
    { G::hat(w) } -> std::convertible_to<typename G::Matrix>;
    { G::matrix(a) } -> std::convertible_to<typename G::Matrix>;
    { G::project(m) } -> std::same_as<typename G::Element>;
};

template <class S>
using GroupOf = typename S::Group;
template <class S>
using ElementOf = typename S::Group::Element;
template <class S>
using AlgebraOf = Vec<S::Group::dim>;
template <class S>
using ChartVecOf = Vec<S::state_dim>;
template <class S>
using InputOf = Vec<S::input_dim>;
template <class S>
using OutputOf = Vec<S::output_dim>;

template <class S>
concept EquivariantSystem =
    MatrixLieGroup<typename S::Group> &&
    requires(const S& sys, const ElementOf<S>& X, const typename S::State& xi, const InputOf<S>& u,
             const ChartVecOf<S>& eps) {
        { S::state_dim } -> std::convertible_to<int>;
        { S::output_dim } -> std::convertible_to<int>;
        { S::input_dim } -> std::convertible_to<int>;
        { sys.phi(X, xi) } -> std::same_as<typename S::State>;
        { sys.lift(xi, u) } -> std::convertible_to<AlgebraOf<S>>;
        { sys.output(xi) } -> std::convertible_to<OutputOf<S>>;
        { sys.origin() } -> std::same_as<typename S::State>;
        { sys.chart(xi) } -> std::convertible_to<ChartVecOf<S>>;
        { sys.chart_inverse(eps) } -> std::same_as<typename S::State>;
    };

template <class S>
concept HasInputAction = EquivariantSystem<S> && requires(const S& sys, const ElementOf<S>& X, const InputOf<S>& u) {
    { sys.psi(X, u) } -> std::convertible_to<InputOf<S>>;
};

template <class S>
concept HasOutputAction =
    EquivariantSystem<S> && requires(const S& sys, const ElementOf<S>& X, const OutputOf<S>& y) {
        { sys.rho(X, y) } -> std::convertible_to<OutputOf<S>>;
    };

template <class S>
concept HasNormalChart = EquivariantSystem<S> && requires(const S& sys, const ChartVecOf<S>& eps) {
    { sys.wedge(eps) } -> std::convertible_to<AlgebraOf<S>>;
};

template <class S>
concept HasCorrectionMap = EquivariantSystem<S> && requires(const S& sys) {
    { sys.correction_map() } -> std::convertible_to<Mat<S::Group::dim, S::state_dim>>;
};

template <int M, int N, int L>
struct LinearizationMatrices {
    Mat<M, M> A;
    Mat<M, L> B;
    Mat<N, M> C;
    Mat<N, M> C_star;
};

template <class S>
using LinearizationOf = LinearizationMatrices<S::state_dim, S::output_dim, S::input_dim>;

template <class S>
concept HasClosedFormMatrices =
    EquivariantSystem<S> &&
    requires(const S& sys, const ElementOf<S>& X, const InputOf<S>& u, const OutputOf<S>& y) {
        { sys.closed_form_matrices(X, u, y, y) } -> std::convertible_to<LinearizationOf<S>>;
    };

/// Systems posed on the torsor of their own (group-affine) symmetry group, with
/// right translation as the action. Used by the invariant-filter exactness check.
template <class S>
concept GroupAffineTorsorSystem =
    EquivariantSystem<S> && std::same_as<typename S::State, ElementOf<S>> &&
    requires(const S& sys, const ElementOf<S>& P, const InputOf<S>& u) {
        { S::is_group_affine_torsor } -> std::convertible_to<bool>;
        { sys.vector_field(P, u) } -> std::convertible_to<typename S::Group::Matrix>;
    } && S::is_group_affine_torsor;

}  // namespace eqf
