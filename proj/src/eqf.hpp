#pragma once

// Equivariant filter for relative attitude and target angular velocity.
// The estimate is a group element (Q^, q^); the manifold read-out is
// (R^, omega^) = (Q^, -Q^^T q^). A 6x6 Riccati covariance in the local error
// coordinates at the origin drives the output corrections.

#include "model.hpp"
#include "symmetry.hpp"

namespace releqf {

struct GainConfig {
  Matrix6d sigma0 = Matrix6d::Identity();   // initial Riccati state
  Matrix6d M = Matrix6d::Identity();        // state-gain (process) matrix
  Matrix6d N = 0.1 * Matrix6d::Identity();  // output-gain matrix
  // When iterating an update, scale the Riccati damping by the reduced
  // period (gap/iterations); when false, damp with the full gap every
  // iteration.
  bool scale_update_damping = true;

  // Scalar output gain N = (1/k_n) * I.
  static GainConfig with_scalar_gains(double sigma0_scale, double m_scale,
                                      double k_n);

  void validate() const;  // throws std::invalid_argument unless all SPD
};

struct FilterState {
  GroupElement X;                            // (Q^, q^)
  Matrix6d Sigma = Matrix6d::Identity();     // SPD
  double t = 0.0;                            // [s]
};

// State matrix of the linearized error dynamics, [[0, -I], [0, wedge(q^)]].
Matrix6d compute_A(const Vector3d& q_hat);

// First-order output matrix, rows [Q^^T wedge(d°_i) | 0].
Matrix6d compute_C(const Rotation& Q_hat, const ReferenceDirections& refs);

// Equivariant output matrix, rows [1/2 wedge(d_i + d^_i) Q^^T | 0]; its
// output residual is third order in the local error (one order better than
// compute_C), and both produce identical corrections.
Matrix6d compute_C_star(const Rotation& Q_hat, const ReferenceDirections& refs,
                        const Measurement& y);

// One explicit Euler step of
//   Sigmadot = A Sigma + Sigma A^T + M - Sigma C^T N^-1 C Sigma,
// symmetrized; throws LostPositivity if the result is not positive definite
// (dt too large for the current gains).
Matrix6d riccati_step(const Matrix6d& Sigma, const Matrix6d& A,
                      const Matrix6d& C, const Matrix6d& M, const Matrix6d& N,
                      double dt);

// Prediction-phase covariance propagation by the exact transition matrix of
// the damping-free flow: Sigma <- Phi Sigma Phi^T + dt M with
//   Phi = exp(dt A) = [[I, -dt J_l(dt q^)], [0, exp(dt q^^)]].
// Agrees with riccati_step (C = 0) to O(dt^2) and stays SPD for any dt and
// q_hat: the congruence preserves positivity and ||Phi|| <= 1 + dt.
Matrix6d riccati_predict(const Matrix6d& Sigma, const Vector3d& q_hat,
                         const Matrix6d& M, double dt);

// Output correction terms. delta_Q is the vee of the attitude correction
// generator; delta_q the velocity correction [rad/s].
struct Correction {
  Vector3d delta_Q = Vector3d::Zero();
  Vector3d delta_q = Vector3d::Zero();
};

// Matrix path: gamma = Sigma C^T N^-1 (y - y^), (delta_Q, delta_q) =
// (gamma_head, -gamma_tail). Works with either compute_C or compute_C_star.
Correction correction(const Matrix6d& Sigma, const Matrix6d& C,
                      const Matrix6d& N, const Vector6d& innovation);

// Scalar-gain closed form of the same correction: with N = (1/k_n) I and
// m = (Q^ d_1) x d°_1 + (Q^ d_2) x d°_2,
//   delta_Q = k_n * Sigma_R m,  delta_q = -k_n * Sigma_{R,omega}^T m.
Correction correction_closed_form(const Matrix6d& Sigma, double k_n,
                                  const Rotation& Q_hat,
                                  const ReferenceDirections& refs,
                                  const Measurement& y);

class Eqf {
 public:
  Eqf(const GainConfig& gains, const ReferenceDirections& refs);

  // Advances the estimate with the gyro sample held over [t, t+dt]. The
  // group state propagates exactly (q^ is constant between updates, so
  // exp(dt q^^) Q^ exp(dt u^) solves the filter ODE); the covariance takes
  // one riccati_predict transition step of the growth terms.
  void predict(const Vector3d& u, double dt);

  // Iterated measurement update: `iterations` sub-steps of period
  // gap/iterations, each recomputing the predicted output, applying
  //   Q^ <- exp(dt_u * delta_Q^) Q^,  q^ <- q^ + dt_u (delta_Q^ q^ + delta_q),
  // and contracting the covariance with the information-form step
  //   Sigma <- (Sigma^-1 + dt_damp C*^T N^-1 C*)^-1,
  // the exact solution of the damping flow over dt_damp (Euler + O(dt^2),
  // positive definite by construction).
  void update(const Measurement& y, double gap, int iterations);

  const FilterState& state() const { return st_; }
  const ReferenceDirections& refs() const { return refs_; }

  // Warm start; covariance and clock untouched.
  void set_state(const GroupElement& X) { st_.X = X; }

  // (R^, omega^) = (Q^, -Q^^T q^).
  ManifoldState state_estimate() const;

  // Correction terms applied by the last update iteration (zero before any
  // update); rate-like quantities, not yet scaled by the sub-step period.
  const Correction& last_correction() const { return last_correction_; }

  // V = eps^T Sigma^-1 eps against a lifted truth state.
  double lyapunov_value(const GroupElement& truth) const;

 private:
  FilterState st_;
  GainConfig gains_;
  ReferenceDirections refs_;
  Matrix6d n_inv_;
  Correction last_correction_;
};

ManifoldState state_estimate(const GroupElement& X_hat);

}  // namespace releqf
