/**
 * @file ekf.hpp
 * @brief Embedded-coordinates EKF for the bearing problem.
 *
 * The estimate eta_hat lives in R^3 (not constrained to the sphere between
 * updates). Dynamics eta_dot = -Omega^x eta are linear time-varying in the
 * embedding; the unit-norm constraint |eta|^2 = 1 is fed back as a scalar
 * pseudo-measurement with a virtual variance.
 */
#pragma once

#include <eqf/bearing_system.hpp>
#include <eqf/errors.hpp>
#include <eqf/lie.hpp>

#include <cmath>
#include <string>

namespace eqf::ekf {

struct EkfState {
    Vec3 eta_hat = Vec3::UnitX();
    SymPosDef<3> P;
    double t = 0.0;
};

namespace detail {

inline void require_nonzero(const Vec3& eta_hat) {
    if (!(eta_hat.norm() > 1e-6)) {
        throw Error(ErrorKind::SingularInput, "|eta_hat| = " + std::to_string(eta_hat.norm()));
    }
}

inline SymPosDef<3> checked_covariance(const Mat3& P) {
    const Mat3 sym = 0.5 * (P + P.transpose());
    if (!SymPosDef<3>::is_positive_definite(sym)) {
        throw Error(ErrorKind::LostPositivity, "EKF covariance lost positive definiteness");
    }
    return SymPosDef<3>::make(sym);
}

}  // namespace detail

/// Output Jacobian c_m (I - eta eta^T / eta^T eta).
inline Mat3 magnetometer_jacobian(const Vec3& eta_hat, const bearing::BearingConfig& cfg) {
    return cfg.c_m * (Mat3::Identity() - eta_hat * eta_hat.transpose() / eta_hat.squaredNorm());
}

inline Vec3 predicted_output(const Vec3& eta_hat, const bearing::BearingConfig& cfg) {
    return cfg.c_m * eta_hat / eta_hat.norm();
}

/// Jacobian row of g(eta) = |eta|^2.
inline Eigen::RowVector3d constraint_jacobian(const Vec3& eta_hat) { return 2.0 * eta_hat.transpose(); }

inline EkfState ekf_predict(const EkfState& state, const Vec3& omega_measured, const Mat3& Q, double dt) {
    if (!(dt > 0.0)) {
        throw Error(ErrorKind::InvalidConfig, "ekf_predict needs dt > 0");
    }
    const Mat3 F = -hat3(omega_measured);
    const Mat3& P = state.P.matrix();
    EkfState next;
    next.eta_hat = state.eta_hat + dt * (F * state.eta_hat);
    next.P = detail::checked_covariance(P + dt * (F * P + P * F.transpose() + Q));
    next.t = state.t + dt;
    return next;
}

/// Magnetometer update with a Joseph-form covariance update.
inline EkfState ekf_update_magnetometer(const EkfState& state, const Vec3& y_measured, const Mat3& R_meas,
                                        const bearing::BearingConfig& cfg) {
    detail::require_nonzero(state.eta_hat);
    const Mat3 H = magnetometer_jacobian(state.eta_hat, cfg);
    const Mat3& P = state.P.matrix();
    const Vec3 residual = y_measured - predicted_output(state.eta_hat, cfg);

    const Mat3 S = H * P * H.transpose() + R_meas;
    Eigen::LLT<Mat3> llt(0.5 * (S + S.transpose()));
    if (llt.info() != Eigen::Success) {
        throw Error(ErrorKind::SingularInnovationCovariance, "innovation covariance not positive definite");
    }
    const Mat3 K = llt.solve(H * P).transpose();  // P H^T S^{-1}, S symmetric

    EkfState next = state;
    next.eta_hat = state.eta_hat + K * residual;
    const Mat3 IKH = Mat3::Identity() - K * H;
    next.P = detail::checked_covariance(IKH * P * IKH.transpose() + K * R_meas * K.transpose());
    return next;
}

/// Pseudo-measurement z = 1 of g(eta) = |eta|^2 with variance r_virtual.
inline EkfState ekf_update_constraint(const EkfState& state, double r_virtual) {
    detail::require_nonzero(state.eta_hat);
    if (!(r_virtual > 0.0)) {
        throw Error(ErrorKind::InvalidConfig, "virtual constraint variance must be positive");
    }
    const Eigen::RowVector3d G = constraint_jacobian(state.eta_hat);
    const Mat3& P = state.P.matrix();
    const double residual = 1.0 - state.eta_hat.squaredNorm();
    const double S = (G * P * G.transpose())(0, 0) + r_virtual;
    const Vec3 K = P * G.transpose() / S;

    EkfState next = state;
    next.eta_hat = state.eta_hat + K * residual;
    const Mat3 IKG = Mat3::Identity() - K * G;
    next.P = detail::checked_covariance(IKG * P * IKG.transpose() + r_virtual * K * K.transpose());
    return next;
}

}  // namespace eqf::ekf
