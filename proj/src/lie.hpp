#pragma once

// Matrix Lie group primitives for SO(3) and the SE(3)-structured state group
// used by the filter. Conventions:
//   wedge(v) * x == v x x          (cross-product matrix)
//   group product (A,a)*(B,b) == (A*B, A*b + a)
//   inverse (Q,q)^-1 == (Q^T, -Q^T q)
// The translational slot of the group carries a rad/s quantity, not meters;
// the algebra is the usual se(3) pair (skew matrix, 3-vector).

#include <Eigen/Dense>

#include "errors.hpp"
#include "rng.hpp"

namespace releqf {

using Eigen::Matrix3d;
using Eigen::Vector3d;
using Matrix6d = Eigen::Matrix<double, 6, 6>;
using Vector6d = Eigen::Matrix<double, 6, 1>;

// Angle below which exp/log switch to their Taylor forms.
inline constexpr double kSmallAngle = 1e-6;
// Orthonormality tolerance enforced on checked Rotation construction.
inline constexpr double kOrthoTol = 1e-9;

Matrix3d wedge(const Vector3d& v);

// Inverse of wedge. Throws NonSkewInput if ||S + S^T||_F exceeds tol.
Vector3d vee(const Matrix3d& S, double tol = 1e-9);

// Rodrigues exponential, Taylor series below kSmallAngle.
Matrix3d so3_exp(const Vector3d& v);

// Principal logarithm, angle in [0, pi). Throws NearPiSingularity for angles
// at or beyond pi - kSmallAngle where the axis is numerically undefined.
Vector3d so3_log(const Matrix3d& R);

// Left Jacobian of SO(3): J_l(v) = integral of exp(s*wedge(v)) over s in
// [0,1]; Taylor form below kSmallAngle.
Matrix3d so3_left_jacobian(const Vector3d& v);

// Frobenius-nearest rotation (orthogonal polar factor, det corrected to +1).
Matrix3d nearest_rotation(const Matrix3d& M);

// SO(3) element whose checked constructors enforce ||R^T R - I||_F <= kOrthoTol
// and det > 0. Values are immutable; products of valid rotations are trusted
// (unit round-off growth over 1e5 products stays far below the tolerance).
class Rotation {
 public:
  Rotation() : m_(Matrix3d::Identity()) {}

  static Rotation identity() { return Rotation(); }

  // Validating constructor; throws std::invalid_argument on a non-rotation.
  static Rotation from_matrix(const Matrix3d& m);

  // Projecting constructor: accepts any matrix, returns the nearest rotation.
  static Rotation project(const Matrix3d& m) {
    return Rotation(nearest_rotation(m), Trusted{});
  }

  static Rotation exp(const Vector3d& v) {
    return Rotation(so3_exp(v), Trusted{});
  }

  Vector3d log() const { return so3_log(m_); }

  const Matrix3d& matrix() const { return m_; }

  Rotation operator*(const Rotation& o) const {
    return Rotation(m_ * o.m_, Trusted{});
  }

  Vector3d operator*(const Vector3d& v) const { return m_ * v; }

  Rotation transposed() const { return Rotation(m_.transpose(), Trusted{}); }

  // Explicit re-orthonormalization (polar projection); never applied
  // automatically.
  Rotation reorthonormalized() const { return project(m_); }

  double orthonormality_error() const {
    return (m_.transpose() * m_ - Matrix3d::Identity()).norm();
  }

 private:
  struct Trusted {};
  Rotation(const Matrix3d& m, Trusted) : m_(m) {}
  Matrix3d m_;
};

// Element of the symmetry group: rotation part Q and a rad/s vector part q.
struct GroupElement {
  Rotation Q;
  Vector3d q = Vector3d::Zero();

  static GroupElement identity() { return GroupElement{}; }
};

GroupElement se3_mul(const GroupElement& a, const GroupElement& b);
GroupElement se3_inv(const GroupElement& g);

// Algebra element: skew matrix S paired with a 3-vector s. Checked
// construction from a matrix enforces ||S + S^T||_F <= 1e-12.
struct AlgebraElement {
  Matrix3d S = Matrix3d::Zero();
  Vector3d s = Vector3d::Zero();

  static AlgebraElement from_vectors(const Vector3d& w, const Vector3d& v) {
    return AlgebraElement{wedge(w), v};
  }

  static AlgebraElement from_matrix(const Matrix3d& S, const Vector3d& s);

  // Coordinates (vee(S), s).
  Vector6d vec() const {
    Vector6d out;
    out << vee(S, 1e-12), s;
    return out;
  }

  double norm() const { return std::sqrt(S.squaredNorm() + s.squaredNorm()); }
};

// Adjoint action Ad_g(S, s) = (Q S Q^T, -Q S Q^T q + Q s).
AlgebraElement se3_adjoint(const GroupElement& g, const AlgebraElement& x);

// Haar-uniform random rotation (normalized Gaussian quaternion).
Rotation random_rotation(Rng& rng);

// Isotropic random unit vector (normalized Gaussian triple).
Vector3d random_unit_vector(Rng& rng);

}  // namespace releqf
