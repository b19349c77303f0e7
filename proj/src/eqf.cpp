#include "eqf.hpp"

#include <stdexcept>
#include <string>

namespace releqf {

namespace {

void check_spd(const Matrix6d& M, const char* name) {
  // LLT only reads one triangle, so symmetry needs its own check.
  Eigen::LLT<Matrix6d> llt(M);
  if ((M - M.transpose()).norm() > 1e-9 || llt.info() != Eigen::Success) {
    throw std::invalid_argument(std::string(name) +
                                " must be symmetric positive definite");
  }
}

Matrix6d spd_inverse_or_throw(const Matrix6d& M, const char* what) {
  Eigen::LLT<Matrix6d> llt(M);
  if (llt.info() != Eigen::Success) {
    throw LostPositivity(what);
  }
  return llt.solve(Matrix6d::Identity());
}

}  // namespace

GainConfig GainConfig::with_scalar_gains(double sigma0_scale, double m_scale,
                                         double k_n) {
  GainConfig g;
  g.sigma0 = sigma0_scale * Matrix6d::Identity();
  g.M = m_scale * Matrix6d::Identity();
  g.N = (1.0 / k_n) * Matrix6d::Identity();
  return g;
}

void GainConfig::validate() const {
  check_spd(sigma0, "sigma0");
  check_spd(M, "M");
  check_spd(N, "N");
}

Matrix6d compute_A(const Vector3d& q_hat) {
  Matrix6d A = Matrix6d::Zero();
  A.block<3, 3>(0, 3) = -Matrix3d::Identity();
  A.block<3, 3>(3, 3) = wedge(q_hat);
  return A;
}

Matrix6d compute_C(const Rotation& Q_hat, const ReferenceDirections& refs) {
  Matrix6d C = Matrix6d::Zero();
  const Matrix3d Qt = Q_hat.matrix().transpose();
  C.block<3, 3>(0, 0) = Qt * wedge(refs.d1());
  C.block<3, 3>(3, 0) = Qt * wedge(refs.d2());
  return C;
}

Matrix6d compute_C_star(const Rotation& Q_hat, const ReferenceDirections& refs,
                        const Measurement& y) {
  Matrix6d C = Matrix6d::Zero();
  const Matrix3d Qt = Q_hat.matrix().transpose();
  const Vector3d d1_hat = Qt * refs.d1();
  const Vector3d d2_hat = Qt * refs.d2();
  C.block<3, 3>(0, 0) = 0.5 * wedge(y.d1 + d1_hat) * Qt;
  C.block<3, 3>(3, 0) = 0.5 * wedge(y.d2 + d2_hat) * Qt;
  return C;
}

Matrix6d riccati_step(const Matrix6d& Sigma, const Matrix6d& A,
                      const Matrix6d& C, const Matrix6d& M, const Matrix6d& N,
                      double dt) {
  const Matrix6d n_inv = N.llt().solve(Matrix6d::Identity());
  const Matrix6d dot = A * Sigma + Sigma * A.transpose() + M -
                       Sigma * C.transpose() * n_inv * C * Sigma;
  Matrix6d next = Sigma + dt * dot;
  next = 0.5 * (next + next.transpose()).eval();
  Eigen::LLT<Matrix6d> llt(next);
  if (llt.info() != Eigen::Success) {
    throw LostPositivity("riccati_step: dt too large for current gains");
  }
  return next;
}

Matrix6d riccati_predict(const Matrix6d& Sigma, const Vector3d& q_hat,
                         const Matrix6d& M, double dt) {
  Matrix6d Phi = Matrix6d::Zero();
  Phi.block<3, 3>(0, 0) = Matrix3d::Identity();
  Phi.block<3, 3>(0, 3) = -dt * so3_left_jacobian(dt * q_hat);
  Phi.block<3, 3>(3, 3) = so3_exp(dt * q_hat);
  Matrix6d next = Phi * Sigma * Phi.transpose() + dt * M;
  next = 0.5 * (next + next.transpose()).eval();
  Eigen::LLT<Matrix6d> llt(next);
  if (llt.info() != Eigen::Success) {
    throw LostPositivity("riccati_predict: covariance not positive definite");
  }
  return next;
}

Correction correction(const Matrix6d& Sigma, const Matrix6d& C,
                      const Matrix6d& N, const Vector6d& innovation) {
  const Vector6d gamma =
      Sigma * C.transpose() * N.ldlt().solve(innovation);
  return Correction{gamma.head<3>(), -gamma.tail<3>()};
}

Correction correction_closed_form(const Matrix6d& Sigma, double k_n,
                                  const Rotation& Q_hat,
                                  const ReferenceDirections& refs,
                                  const Measurement& y) {
  const Vector3d m =
      (Q_hat * y.d1).cross(refs.d1()) + (Q_hat * y.d2).cross(refs.d2());
  return Correction{k_n * (Sigma.block<3, 3>(0, 0) * m),
                    -k_n * (Sigma.block<3, 3>(0, 3).transpose() * m)};
}

Eqf::Eqf(const GainConfig& gains, const ReferenceDirections& refs)
    : gains_(gains), refs_(refs) {
  gains_.validate();
  st_.X = GroupElement::identity();
  st_.Sigma = gains_.sigma0;
  st_.t = 0.0;
  n_inv_ = gains_.N.llt().solve(Matrix6d::Identity());
}

void Eqf::predict(const Vector3d& u, double dt) {
  st_.X.Q = Rotation::exp(dt * st_.X.q) * st_.X.Q * Rotation::exp(dt * u);
  st_.Sigma = riccati_predict(st_.Sigma, st_.X.q, gains_.M, dt);
  st_.t += dt;
}

void Eqf::update(const Measurement& y, double gap, int iterations) {
  if (iterations < 1) {
    throw std::invalid_argument("update: iterations must be >= 1");
  }
  if (!(gap >= 0.0)) {
    throw std::invalid_argument("update: gap must be non-negative");
  }
  const double dt_u = gap / iterations;
  const double dt_damp = gains_.scale_update_damping ? dt_u : gap;
  for (int i = 0; i < iterations; ++i) {
    const Measurement y_hat = measure(state_estimate(), refs_);
    Vector6d innovation;
    innovation << y.d1 - y_hat.d1, y.d2 - y_hat.d2;
    const Matrix6d Cs = compute_C_star(st_.X.Q, refs_, y);
    const Correction corr = correction(st_.Sigma, Cs, gains_.N, innovation);

    // State correction.
    st_.X.Q = Rotation::exp(dt_u * corr.delta_Q) * st_.X.Q;
    st_.X.q += dt_u * (corr.delta_Q.cross(st_.X.q) + corr.delta_q);

    // Covariance contraction (exact damping flow, stays SPD).
    const Matrix6d info = spd_inverse_or_throw(
        st_.Sigma, "update: covariance lost positivity");
    Matrix6d next_info =
        info + dt_damp * Cs.transpose() * n_inv_ * Cs;
    Matrix6d next = spd_inverse_or_throw(
        next_info, "update: information matrix lost positivity");
    st_.Sigma = 0.5 * (next + next.transpose()).eval();

    last_correction_ = corr;
  }
}

ManifoldState Eqf::state_estimate() const { return releqf::state_estimate(st_.X); }

double Eqf::lyapunov_value(const GroupElement& truth) const {
  const Vector6d eps = local_error(truth, st_.X).vec();
  return eps.dot(st_.Sigma.ldlt().solve(eps));
}

ManifoldState state_estimate(const GroupElement& X_hat) {
  ManifoldState x;
  x.R = X_hat.Q;
  x.omega = -(X_hat.Q.transposed() * X_hat.q);
  return x;
}

}  // namespace releqf
