/**
 * @file bearing_system.hpp
 * @brief Single-bearing estimation on S^2 under SO(3).
 *
 * State eta in S^2 (a body-frame direction), input Omega in R^3 (gyroscope),
 * output y = c_m eta (magnetometer). The symmetry is
 *
 *   phi(R, eta) = R^T eta,  psi(R, Omega) = R^T Omega,  rho(R, y) = R^T y,
 *
 * with lift Lambda(eta, Omega) = Omega^x, origin e1, and normal coordinates
 * about e1 through the subspace m = {(0, v2, v3)^x}.
 */
#pragma once

#include <eqf/errors.hpp>
#include <eqf/lie.hpp>
#include <eqf/system.hpp>

#include <cmath>
#include <numbers>
#include <string>

namespace eqf::bearing {

using ChartVector = Vec2;

struct BearingConfig {
    double c_m = 1.0;

    void validate() const {
        if (!(c_m > 0.0) || !std::isfinite(c_m)) {
            throw Error(ErrorKind::InvalidConfig, "c_m must be positive");
        }
    }
};

/// Angle from e1 beyond which the chart refuses the point.
inline constexpr double kChartGuard = std::numbers::pi - 1e-6;

// eta_dot = -Omega^x eta
inline Vec3 dynamics(const UnitVector& eta, const Vec3& omega) { return -omega.cross(eta.vec()); }

inline Vec3 output(const UnitVector& eta, const BearingConfig& cfg) { return cfg.c_m * eta.vec(); }

inline UnitVector phi(const Rotation& R, const UnitVector& eta) {
    return UnitVector::normalized(R.matrix().transpose() * eta.vec());
}

inline Vec3 psi(const Rotation& R, const Vec3& omega) { return R.matrix().transpose() * omega; }

inline Vec3 lift(const UnitVector& /*eta*/, const Vec3& omega) { return omega; }

inline Vec3 rho(const Rotation& R, const Vec3& y) { return R.matrix().transpose() * y; }

inline Vec3 wedge2(const Vec2& v) { return {0.0, v.x(), v.y()}; }

/// Normal coordinates about e1. Exactly zero at e1; throws AntipodeOutOfChart
/// within 1e-6 rad of -e1.
inline ChartVector chart(const UnitVector& e) {
    const Vec3 cross = Vec3::UnitX().cross(e.vec());
    const double s = cross.norm();
    const double angle = std::atan2(s, e[0]);
    if (angle > kChartGuard) {
        throw Error(ErrorKind::AntipodeOutOfChart, "angle from e1 = " + std::to_string(angle));
    }
    if (s == 0.0) {
        return ChartVector::Zero();
    }
    return -angle * cross.tail<2>() / s;
}

inline UnitVector chart_inverse(const ChartVector& eps) {
    return UnitVector::normalized(exp_so3(wedge2(eps)).matrix().transpose() * Vec3::UnitX());
}

/// Right inverse of D_E|id phi_{e1}: tangent (0, u2, u3) at e1 -> (u3, -u2) in m.
/// Throws NotTangent if u1 is not zero to 1e-9.
inline Vec2 dphi_origin_pinv(const Vec3& u) {
    if (!(std::abs(u.x()) <= 1e-9)) {
        throw Error(ErrorKind::NotTangent, "first component " + std::to_string(u.x()) + " at e1");
    }
    return {u.z(), -u.y()};
}

/// D_E|id phi_{e1}(E)[w^x] = e1^x w.
inline Vec3 dphi_origin(const Vec3& w) { return Vec3::UnitX().cross(w); }

/// Dchart^{-1}|0 in embedded coordinates: eps -> (0, -eps2, eps1).
inline Mat<3, 2> chart_inverse_differential() {
    Mat<3, 2> d;
    d << 0.0, 0.0,
         0.0, -1.0,
         1.0, 0.0;
    return d;
}

/// The 3x2 matrix [0_{1x2}; I_2].
inline Mat<3, 2> chart_injection() {
    Mat<3, 2> j = Mat<3, 2>::Zero();
    j.bottomRows<2>().setIdentity();
    return j;
}

struct ClosedFormMatrices {
    Mat2 A;
    Mat<2, 3> B;
    Mat<3, 2> C;
    Mat<3, 2> C_star;
};

/**
 * A° = 0,  B = [0 I2] R̂,  C = yhat^x R̂^T [0; I2],  C* = 1/2 (y^x + yhat^x) R̂^T [0; I2].
 */
inline ClosedFormMatrices closed_form_matrices(const Rotation& Xhat, const Vec3& y, const Vec3& yhat) {
    ClosedFormMatrices out;
    const Mat3& R = Xhat.matrix();
    out.A = Mat2::Zero();
    out.B = chart_injection().transpose() * R;
    out.C = hat3(yhat) * R.transpose() * chart_injection();
    out.C_star = 0.5 * (hat3(y) + hat3(yhat)) * R.transpose() * chart_injection();
    return out;
}

/// The bearing problem packaged for the generic filter.
struct BearingSystem {
    using Group = SO3;
    using State = UnitVector;
    static constexpr int state_dim = 2;
    static constexpr int output_dim = 3;
    static constexpr int input_dim = 3;

    BearingConfig cfg;

    State phi(const Rotation& R, const State& eta) const { return bearing::phi(R, eta); }
    Vec3 psi(const Rotation& R, const Vec3& omega) const { return bearing::psi(R, omega); }
    Vec3 lift(const State& eta, const Vec3& omega) const { return bearing::lift(eta, omega); }
    Vec3 output(const State& eta) const { return bearing::output(eta, cfg); }
    Vec3 rho(const Rotation& R, const Vec3& y) const { return bearing::rho(R, y); }
    State origin() const { return UnitVector::e1(); }
    Vec2 chart(const State& e) const { return bearing::chart(e); }
    State chart_inverse(const Vec2& eps) const { return bearing::chart_inverse(eps); }
    Vec3 wedge(const Vec2& v) const { return wedge2(v); }

    Mat<3, 2> correction_map() const {
        Mat<3, 2> out;
        const Mat<3, 2> dinv = chart_inverse_differential();
        for (int j = 0; j < 2; ++j) {
            out.col(j) = wedge2(dphi_origin_pinv(dinv.col(j)));
        }
        return out;
    }

    LinearizationMatrices<2, 3, 3> closed_form_matrices(const Rotation& Xhat, const Vec3& /*u*/, const Vec3& y,
                                                        const Vec3& yhat) const {
        const auto cf = bearing::closed_form_matrices(Xhat, y, yhat);
        return {cf.A, cf.B, cf.C, cf.C_star};
    }
};

static_assert(EquivariantSystem<BearingSystem>);
static_assert(HasInputAction<BearingSystem>);
static_assert(HasOutputAction<BearingSystem>);
static_assert(HasNormalChart<BearingSystem>);
static_assert(HasCorrectionMap<BearingSystem>);
static_assert(HasClosedFormMatrices<BearingSystem>);

}  // namespace eqf::bearing
