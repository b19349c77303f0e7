#pragma once

// Baseline extended Kalman filter on the flat 12-dimensional state
// [vect(R); omega] (column-major vectorization). The mean is Euler-integrated
// in R^12, so the attitude block leaves SO(3) between corrections; after each
// measurement update the block is projected back with the polar factor.

#include "eqf.hpp"
#include "model.hpp"

namespace releqf {

using Matrix12d = Eigen::Matrix<double, 12, 12>;
using Vector12d = Eigen::Matrix<double, 12, 1>;
using Vector9d = Eigen::Matrix<double, 9, 1>;
using Matrix6x12d = Eigen::Matrix<double, 6, 12>;

// Column-major vectorization of a 3x3 matrix and its inverse.
Vector9d vect(const Matrix3d& m);
Matrix3d unvect(const Vector9d& v);

struct EkfState {
  Vector12d x = Vector12d::Zero();       // [vect(R); omega]
  Matrix12d P = Matrix12d::Identity();   // SPD
  double t = 0.0;                        // [s]

  // Identity attitude, zero rate.
  static EkfState initial(const Matrix12d& P0);

  Matrix3d R_block() const { return unvect(x.head<9>()); }
  Vector3d omega() const { return x.tail<3>(); }

  // Estimate with the attitude block projected to the nearest rotation.
  ManifoldState estimate() const;
};

// Jacobian of the vectorized mean dynamics
//   d/dt vect(R) = vect(R wedge(u - omega)),  d/dt omega = omega x u
// at the given state:
//   F = [ B^T (x) I_3   D ]   with B = wedge(u - omega),
//       [ 0            -wedge(u) ]  D.col(j) = vect(-R wedge(e_j)).
Matrix12d ekf_transition_jacobian(const EkfState& s, const Vector3d& u);

// Jacobian of the stacked output [R^T dr1; R^T dr2]; exactly linear in x,
// rows [I_3 (x) dri^T | 0].
Matrix6x12d ekf_measurement_jacobian(const ReferenceDirections& refs);

// Euler mean step; P <- F_d P F_d^T + dt M with F_d = I + dt F.
EkfState ekf_predict(const EkfState& s, const Vector3d& u, const Matrix12d& M,
                     double dt);

// Kalman update with measurement covariance N_d (caller discretizes),
// Joseph-form covariance, then projection of the attitude block.
// Throws LostPositivity if the innovation covariance is not SPD.
EkfState ekf_update(const EkfState& s, const Measurement& y,
                    const ReferenceDirections& refs, const Matrix6d& N_d);

// Replace the attitude block by its Frobenius-nearest rotation.
EkfState project_so3(const EkfState& s);

// Gains mirroring GainConfig on the flat state: P0 = M = I_12 and the same
// output matrix N, discretized per update as N / gap.
struct EkfConfig {
  Matrix12d P0 = Matrix12d::Identity();
  Matrix12d M = Matrix12d::Identity();
  Matrix6d N = 0.1 * Matrix6d::Identity();

  void validate() const;  // throws std::invalid_argument unless all SPD
};

// Stateful driver with the same call shape as Eqf, for paired runs.
class Ekf {
 public:
  Ekf(const EkfConfig& config, const ReferenceDirections& refs);

  void predict(const Vector3d& u, double dt);

  // Single Kalman update; gap [s] sets N_d = N / gap.
  void update(const Measurement& y, double gap);

  const EkfState& state() const { return st_; }
  const ReferenceDirections& refs() const { return refs_; }

  void set_state(const EkfState& s) { st_ = s; }

  ManifoldState state_estimate() const { return st_.estimate(); }

 private:
  EkfState st_;
  EkfConfig config_;
  ReferenceDirections refs_;
};

}  // namespace releqf
