#include "ekf.hpp"

#include <stdexcept>

namespace releqf {

Vector9d vect(const Matrix3d& m) {
  return Eigen::Map<const Vector9d>(m.data());
}

Matrix3d unvect(const Vector9d& v) {
  return Eigen::Map<const Matrix3d>(v.data());
}

EkfState EkfState::initial(const Matrix12d& P0) {
  EkfState s;
  s.x.head<9>() = vect(Matrix3d::Identity());
  s.P = P0;
  return s;
}

ManifoldState EkfState::estimate() const {
  ManifoldState out;
  out.R = Rotation::project(R_block());
  out.omega = omega();
  return out;
}

Matrix12d ekf_transition_jacobian(const EkfState& s, const Vector3d& u) {
  const Matrix3d R = s.R_block();
  const Matrix3d B = wedge(u - s.omega());
  Matrix12d F = Matrix12d::Zero();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      // (B^T (x) I_3) block: coefficient of R.col(j) in d/dt R.col(i).
      F.block<3, 3>(3 * i, 3 * j) = B(j, i) * Matrix3d::Identity();
    }
  }
  for (int j = 0; j < 3; ++j) {
    F.block<9, 1>(0, 9 + j) = vect(-R * wedge(Vector3d::Unit(j)));
  }
  F.block<3, 3>(9, 9) = -wedge(u);
  return F;
}

Matrix6x12d ekf_measurement_jacobian(const ReferenceDirections& refs) {
  Matrix6x12d H = Matrix6x12d::Zero();
  for (int k = 0; k < 3; ++k) {
    H.block<1, 3>(k, 3 * k) = refs.d1().transpose();
    H.block<1, 3>(3 + k, 3 * k) = refs.d2().transpose();
  }
  return H;
}

EkfState ekf_predict(const EkfState& s, const Vector3d& u, const Matrix12d& M,
                     double dt) {
  EkfState next = s;
  const Matrix3d R = s.R_block();
  const Vector3d omega = s.omega();
  next.x.head<9>() += dt * vect(R * wedge(u - omega));
  next.x.tail<3>() += dt * omega.cross(u);
  const Matrix12d F_d =
      Matrix12d::Identity() + dt * ekf_transition_jacobian(s, u);
  next.P = F_d * s.P * F_d.transpose() + dt * M;
  next.P = 0.5 * (next.P + next.P.transpose()).eval();
  next.t = s.t + dt;
  return next;
}

EkfState ekf_update(const EkfState& s, const Measurement& y,
                    const ReferenceDirections& refs, const Matrix6d& N_d) {
  const Matrix6x12d H = ekf_measurement_jacobian(refs);
  Vector6d innovation;
  innovation << y.d1, y.d2;
  innovation -= H * s.x;

  const Matrix6d S = H * s.P * H.transpose() + N_d;
  Eigen::LLT<Matrix6d> llt(S);
  if (llt.info() != Eigen::Success) {
    throw LostPositivity("ekf_update: innovation covariance not SPD");
  }
  const Eigen::Matrix<double, 12, 6> K =
      s.P * H.transpose() * llt.solve(Matrix6d::Identity());

  EkfState next = s;
  next.x += K * innovation;
  const Matrix12d IKH = Matrix12d::Identity() - K * H;
  next.P = IKH * s.P * IKH.transpose() + K * N_d * K.transpose();
  next.P = 0.5 * (next.P + next.P.transpose()).eval();
  return project_so3(next);
}

EkfState project_so3(const EkfState& s) {
  EkfState next = s;
  next.x.head<9>() = vect(nearest_rotation(s.R_block()));
  return next;
}

void EkfConfig::validate() const {
  // LLT only reads one triangle, so symmetry needs its own check.
  if ((P0 - P0.transpose()).norm() > 1e-9 ||
      Eigen::LLT<Matrix12d>(P0).info() != Eigen::Success) {
    throw std::invalid_argument("P0 must be symmetric positive definite");
  }
  if ((M - M.transpose()).norm() > 1e-9 ||
      Eigen::LLT<Matrix12d>(M).info() != Eigen::Success) {
    throw std::invalid_argument("M must be symmetric positive definite");
  }
  if ((N - N.transpose()).norm() > 1e-9 ||
      Eigen::LLT<Matrix6d>(N).info() != Eigen::Success) {
    throw std::invalid_argument("N must be symmetric positive definite");
  }
}

Ekf::Ekf(const EkfConfig& config, const ReferenceDirections& refs)
    : config_(config), refs_(refs) {
  config_.validate();
  st_ = EkfState::initial(config_.P0);
}

void Ekf::predict(const Vector3d& u, double dt) {
  st_ = ekf_predict(st_, u, config_.M, dt);
}

void Ekf::update(const Measurement& y, double gap) {
  if (gap <= 0.0) {
    throw std::invalid_argument("update: gap must be positive");
  }
  st_ = ekf_update(st_, y, refs_, config_.N / gap);
}

}  // namespace releqf
