#pragma once

#include <eqf/lie.hpp>
#include <eqf/system.hpp>

namespace eqf::attitude {

/**
 * Attitude P in SO(3) driven by a body-frame rate Omega and an inertial-frame
 * rate w (e.g. Earth rotation):
 *
 *   P_dot = P Omega^x + w^x P
 *
 * This is group affine on the torsor of SO(3). Input u = (Omega, w), action
 * phi(X, P) = P X, lift Lambda(P, u) = P^{-1} f_u(P) = (Omega + P^T w)^x,
 * input action psi(X, u) = (X^T Omega, w), output h(P) = P^T r for a fixed
 * reference direction r, with rho(X, y) = X^T y.
 */
struct AttitudeTorsorSystem {
    using Group = SO3;
    using State = Rotation;
    static constexpr int state_dim = 3;
    static constexpr int output_dim = 3;
    static constexpr int input_dim = 6;
    static constexpr bool is_group_affine_torsor = true;

    Vec3 reference = Vec3::UnitZ();

    static Vec3 body_rate(const Vec<6>& u) { return u.head<3>(); }
    static Vec3 inertial_rate(const Vec<6>& u) { return u.tail<3>(); }

    Mat3 vector_field(const Rotation& P, const Vec<6>& u) const {
        return P.matrix() * hat3(body_rate(u)) + hat3(inertial_rate(u)) * P.matrix();
    }

    State phi(const Rotation& X, const State& P) const { return P * X; }

    Vec<6> psi(const Rotation& X, const Vec<6>& u) const {
        Vec<6> out;
        out << X.matrix().transpose() * body_rate(u), inertial_rate(u);
        return out;
    }

    Vec3 lift(const State& P, const Vec<6>& u) const {
        return body_rate(u) + P.matrix().transpose() * inertial_rate(u);
    }

    Vec3 output(const State& P) const { return P.matrix().transpose() * reference; }
    Vec3 rho(const Rotation& X, const Vec3& y) const { return X.matrix().transpose() * y; }

    State origin() const { return Rotation::identity(); }
    Vec3 chart(const State& P) const { return log_so3(P); }
    State chart_inverse(const Vec3& eps) const { return exp_so3(eps); }
    Vec3 wedge(const Vec3& eps) const { return eps; }
};

static_assert(GroupAffineTorsorSystem<AttitudeTorsorSystem>);
static_assert(HasInputAction<AttitudeTorsorSystem>);

}  // namespace eqf::attitude
