/**
 * @file lie.hpp
 * @brief SO(3), so(3) and S^2 primitives on fixed-size Eigen storage.
 *
 * Conventions:
 *   hat3(v) w = v x w
 *   exp_so3 is the Rodrigues formula, log_so3 the principal logarithm (|w| <= pi)
 *   Ad_R w = R w
 */
#pragma once

#include <eqf/errors.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace eqf {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

template <int Rows, int Cols>
using Mat = Eigen::Matrix<double, Rows, Cols>;
template <int Rows>
using Vec = Eigen::Matrix<double, Rows, 1>;

namespace tol {
inline constexpr double kSmallAngle = 1e-6;
inline constexpr double kNearPi = 1e-6;
inline constexpr double kRotation = 1e-9;
inline constexpr double kUnit = 1e-9;
inline constexpr double kSkew = 1e-8;
inline constexpr double kSymmetric = 1e-9;
inline constexpr double kSingularDet = 1e-12;
}  // namespace tol

inline Mat3 hat3(const Vec3& v) {
    Mat3 s;
    s << 0.0, -v.z(), v.y(),
         v.z(), 0.0, -v.x(),
         -v.y(), v.x(), 0.0;
    return s;
}

/// Reads the three off-diagonal entries below the diagonal; throws NonSkewInput
/// if S is not skew to 1e-8 in Frobenius norm.
inline Vec3 vee3(const Mat3& s) {
    const double asym = (s + s.transpose()).norm();
    if (!(asym <= tol::kSkew)) {
        throw Error(ErrorKind::NonSkewInput, "|S + S^T|_F = " + std::to_string(asym));
    }
    return {s(2, 1), s(0, 2), s(1, 0)};
}

// Element of SO(3). Construction through from_matrix() is checked; the group
// operations below preserve the invariant up to rounding.
class Rotation {
public:
    Rotation() : mat_(Mat3::Identity()) {}

    static Rotation identity() { return {}; }

    static Rotation from_matrix(const Mat3& m, double tolerance = tol::kRotation) {
        const double orth = (m.transpose() * m - Mat3::Identity()).norm();
        const double det = m.determinant();
        if (!(orth <= tolerance) || !(std::abs(det - 1.0) <= tolerance)) {
            throw Error(ErrorKind::NotARotation,
                        "|R^T R - I|_F = " + std::to_string(orth) + ", det = " + std::to_string(det));
        }
        return Rotation(m);
    }

    // Skips validation; for results of operations that are rotations by construction.
    static Rotation trusted(const Mat3& m) { return Rotation(m); }

    const Mat3& matrix() const { return mat_; }
    Rotation inverse() const { return Rotation(mat_.transpose()); }
    Rotation transpose() const { return inverse(); }

    Rotation operator*(const Rotation& other) const { return Rotation(mat_ * other.mat_); }
    Vec3 operator*(const Vec3& v) const { return mat_ * v; }

private:
    explicit Rotation(const Mat3& m) : mat_(m) {}
    Mat3 mat_;
};

class UnitVector {
public:
    UnitVector() : v_(Vec3::UnitX()) {}

    /// Scales v onto the sphere. Throws SingularInput for a (near-)zero vector.
    static UnitVector normalized(const Vec3& v) {
        const double n = v.norm();
        if (!(n > 1e-12) || !std::isfinite(n)) {
            throw Error(ErrorKind::SingularInput, "cannot normalize vector of norm " + std::to_string(n));
        }
        return UnitVector(v / n);
    }

    static UnitVector from_unit(const Vec3& v, double tolerance = tol::kUnit) {
        if (!(std::abs(v.norm() - 1.0) <= tolerance)) {
            throw Error(ErrorKind::NotUnitVector, "|v| = " + std::to_string(v.norm()));
        }
        return UnitVector(v);
    }

    static UnitVector e1() { return UnitVector(Vec3::UnitX()); }
    static UnitVector e2() { return UnitVector(Vec3::UnitY()); }
    static UnitVector e3() { return UnitVector(Vec3::UnitZ()); }

    const Vec3& vec() const { return v_; }
    double operator[](int i) const { return v_[i]; }

private:
    explicit UnitVector(const Vec3& v) : v_(v) {}
    Vec3 v_;
};

// Symmetric positive-definite k x k matrix, validated by a successful Cholesky.
template <int K>
class SymPosDef {
public:
    using Matrix = Mat<K, K>;

    SymPosDef() : m_(Matrix::Identity()) {}

    static SymPosDef make(const Matrix& m) {
        const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
        const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
        if (!(asym <= tol::kSymmetric * scale)) {
            throw Error(ErrorKind::NotPositiveDefinite, "matrix not symmetric (max asym " + std::to_string(asym) + ")");
        }
        Matrix sym = 0.5 * (m + m.transpose());
        if (!is_positive_definite(sym)) {
            throw Error(ErrorKind::NotPositiveDefinite, "Cholesky factorization failed");
        }
        return SymPosDef(sym);
    }

    static SymPosDef scaled_identity(double s) { return make(s * Matrix::Identity()); }

    static bool is_positive_definite(const Matrix& m) {
        if (!m.allFinite()) return false;
        Eigen::LLT<Matrix> llt(m);
        return llt.info() == Eigen::Success;
    }

    const Matrix& matrix() const { return m_; }
    operator const Matrix&() const { return m_; }

    Matrix inverse() const { return m_.llt().solve(Matrix::Identity()); }

private:
    explicit SymPosDef(const Matrix& m) : m_(m) {}
    Matrix m_;
};

/// Rodrigues formula, with a second-order series below 1e-6 rad.
inline Rotation exp_so3(const Vec3& w) {
    const double theta = w.norm();
    const Mat3 W = hat3(w);
    if (theta < tol::kSmallAngle) {
        return Rotation::trusted(Mat3::Identity() + W + 0.5 * W * W);
    }
    const double a = std::sin(theta) / theta;
    const double b = (1.0 - std::cos(theta)) / (theta * theta);
    return Rotation::trusted(Mat3::Identity() + a * W + b * W * W);
}

/// Principal logarithm. The angle comes from atan2 of the skew and trace parts,
/// which stays well conditioned at both ends of [0, pi].
inline Vec3 log_so3(const Rotation& rot) {
    const Mat3& R = rot.matrix();
    const Vec3 skew{0.5 * (R(2, 1) - R(1, 2)), 0.5 * (R(0, 2) - R(2, 0)), 0.5 * (R(1, 0) - R(0, 1))};
    const double sin_theta = skew.norm();
    const double cos_theta = std::clamp(0.5 * (R.trace() - 1.0), -1.0, 1.0);
    const double theta = std::atan2(sin_theta, cos_theta);

    if (theta < tol::kSmallAngle) {
        return skew;
    }
    if (std::numbers::pi - theta > tol::kNearPi) {
        return (theta / sin_theta) * skew;
    }

    // Near pi: (R + R^T)/2 = cos(theta) I + (1 - cos(theta)) a a^T. Take the
    // column with the largest diagonal entry for the axis.
    const Mat3 aat = (0.5 * (R + R.transpose()) - cos_theta * Mat3::Identity()) / (1.0 - cos_theta);
    int k = 0;
    aat.diagonal().maxCoeff(&k);
    Vec3 axis = aat.col(k) / std::sqrt(std::max(aat(k, k), 1e-300));
    axis.normalize();
    if (axis.dot(skew) < 0.0) {
        axis = -axis;
    }
    return theta * axis;
}

inline Vec3 adjoint(const Rotation& R, const Vec3& w) { return R * w; }

/// Frobenius-nearest rotation (polar factor). Throws SingularInput if det(M) <= 1e-12.
inline Rotation project_so3(const Mat3& m) {
    const double det = m.determinant();
    if (!(det > tol::kSingularDet)) {
        throw Error(ErrorKind::SingularInput, "det = " + std::to_string(det));
    }
    Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Mat3 U = svd.matrixU();
    const Mat3 V = svd.matrixV();
    Mat3 D = Mat3::Identity();
    D(2, 2) = (U * V.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
    return Rotation::trusted(U * D * V.transpose());
}

/// Group traits used by the filter framework for SO(3).
struct SO3 {
    using Element = Rotation;
    static constexpr int dim = 3;
    using Algebra = Vec3;
    using Matrix = Mat3;

    static Element identity() { return Rotation::identity(); }
    static Element compose(const Element& a, const Element& b) { return a * b; }
    static Element inverse(const Element& a) { return a.inverse(); }
    static Element exp(const Algebra& w) { return exp_so3(w); }
    static Algebra log(const Element& a) { return log_so3(a); }
    static Mat3 adjoint_matrix(const Element& a) { return a.matrix(); }
    static Matrix hat(const Algebra& w) { return hat3(w); }
    static const Matrix& matrix(const Element& a) { return a.matrix(); }
    static Element project(const Matrix& m) { return project_so3(m); }
};

}  // namespace eqf
