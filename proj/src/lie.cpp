#include "lie.hpp"

#include <algorithm>
#include <cmath>

namespace releqf {

Matrix3d wedge(const Vector3d& v) {
  Matrix3d S;
  // clang-format off
  S <<     0, -v.z(),  v.y(),
       v.z(),      0, -v.x(),
      -v.y(),  v.x(),      0;
  // clang-format on
  return S;
}

Vector3d vee(const Matrix3d& S, double tol) {
  if ((S + S.transpose()).norm() > tol) {
    throw NonSkewInput("vee: symmetric part exceeds tolerance");
  }
  return Vector3d(S(2, 1), S(0, 2), S(1, 0));
}

Matrix3d so3_exp(const Vector3d& v) {
  const double th2 = v.squaredNorm();
  const double th = std::sqrt(th2);
  double a;  // sin(th)/th
  double b;  // (1 - cos(th))/th^2
  if (th < kSmallAngle) {
    a = 1.0 - th2 / 6.0;
    b = 0.5 - th2 / 24.0;
  } else {
    a = std::sin(th) / th;
    b = (1.0 - std::cos(th)) / th2;
  }
  const Matrix3d W = wedge(v);
  return Matrix3d::Identity() + a * W + b * (W * W);
}

Matrix3d so3_left_jacobian(const Vector3d& v) {
  const double th2 = v.squaredNorm();
  const double th = std::sqrt(th2);
  double a;  // (1 - cos(th))/th^2
  double b;  // (th - sin(th))/th^3
  if (th < kSmallAngle) {
    a = 0.5 - th2 / 24.0;
    b = 1.0 / 6.0 - th2 / 120.0;
  } else {
    a = (1.0 - std::cos(th)) / th2;
    b = (th - std::sin(th)) / (th2 * th);
  }
  const Matrix3d W = wedge(v);
  return Matrix3d::Identity() + a * W + b * (W * W);
}

Vector3d so3_log(const Matrix3d& R) {
  // s = sin(th) * axis from the antisymmetric part; c = cos(th) from the trace.
  const Vector3d s(0.5 * (R(2, 1) - R(1, 2)), 0.5 * (R(0, 2) - R(2, 0)),
                   0.5 * (R(1, 0) - R(0, 1)));
  const double c = std::clamp(0.5 * (R.trace() - 1.0), -1.0, 1.0);
  const double sn = s.norm();
  const double th = std::atan2(sn, c);
  if (th >= M_PI - kSmallAngle) {
    throw NearPiSingularity("so3_log: angle within 1e-6 of pi");
  }
  if (th < kSmallAngle) {
    // log = th/sin(th) * s with th/sin(th) ~ 1 + th^2/6.
    return s * (1.0 + th * th / 6.0);
  }
  return s * (th / sn);
}

Matrix3d nearest_rotation(const Matrix3d& M) {
  Eigen::JacobiSVD<Matrix3d> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Matrix3d U = svd.matrixU();
  const Matrix3d V = svd.matrixV();
  if ((U * V.transpose()).determinant() < 0.0) {
    U.col(2) = -U.col(2);
  }
  return U * V.transpose();
}

Rotation Rotation::from_matrix(const Matrix3d& m) {
  const double err = (m.transpose() * m - Matrix3d::Identity()).norm();
  if (err > kOrthoTol || m.determinant() < 0.0) {
    throw std::invalid_argument("Rotation: matrix is not orthonormal");
  }
  return Rotation(m, Trusted{});
}

GroupElement se3_mul(const GroupElement& a, const GroupElement& b) {
  return GroupElement{a.Q * b.Q, a.Q * b.q + a.q};
}

GroupElement se3_inv(const GroupElement& g) {
  const Rotation Qt = g.Q.transposed();
  return GroupElement{Qt, -(Qt * g.q)};
}

AlgebraElement AlgebraElement::from_matrix(const Matrix3d& S,
                                           const Vector3d& s) {
  if ((S + S.transpose()).norm() > 1e-12) {
    throw NonSkewInput("AlgebraElement: matrix part is not skew");
  }
  return AlgebraElement{S, s};
}

AlgebraElement se3_adjoint(const GroupElement& g, const AlgebraElement& x) {
  const Matrix3d& Q = g.Q.matrix();
  const Matrix3d QSQt = Q * x.S * Q.transpose();
  return AlgebraElement{QSQt, -QSQt * g.q + Q * x.s};
}

Rotation random_rotation(Rng& rng) {
  // A normalized 4-Gaussian quaternion is Haar-uniform on SO(3).
  double w = rng.normal();
  double x = rng.normal();
  double y = rng.normal();
  double z = rng.normal();
  const double n = std::sqrt(w * w + x * x + y * y + z * z);
  w /= n;
  x /= n;
  y /= n;
  z /= n;
  Matrix3d R;
  // clang-format off
  R << 1 - 2*(y*y + z*z),     2*(x*y - w*z),     2*(x*z + w*y),
           2*(x*y + w*z), 1 - 2*(x*x + z*z),     2*(y*z - w*x),
           2*(x*z - w*y),     2*(y*z + w*x), 1 - 2*(x*x + y*y);
  // clang-format on
  return Rotation::from_matrix(R);
}

Vector3d random_unit_vector(Rng& rng) {
  Vector3d v(rng.normal(), rng.normal(), rng.normal());
  return v.normalized();
}

}  // namespace releqf
