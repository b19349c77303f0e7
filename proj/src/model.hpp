#pragma once

// Relative-attitude system model. The state couples the chaser-to-target
// rotation R with the target angular velocity omega expressed in the chaser
// frame:
//   Rdot     = R * wedge(u - omega + v)
//   omegadot = (omega + w) x u + a
// where u is the chaser angular velocity (gyro), a the target angular
// acceleration, and v, w virtual inputs (zero in the nominal regime).
// Measurements are two known target-frame directions seen in the chaser
// frame: d_i = R^T d°_i.

#include <Eigen/Dense>

#include "lie.hpp"

namespace releqf {

struct ManifoldState {
  Rotation R;
  Vector3d omega = Vector3d::Zero();
};

struct SystemInput {
  Vector3d u = Vector3d::Zero();  // chaser angular velocity [rad/s]
  Vector3d a = Vector3d::Zero();  // target angular acceleration [rad/s^2]
  Vector3d v = Vector3d::Zero();  // virtual attitude-rate input [rad/s]
  Vector3d w = Vector3d::Zero();  // virtual velocity-offset input [rad/s]
};

// Pair of unit, non-collinear reference directions in the target frame.
class ReferenceDirections {
 public:
  // Normalizes the inputs; throws DegenerateDirections if the normalized
  // pair is collinear (cross-product norm <= 1e-6).
  ReferenceDirections(const Vector3d& d1, const Vector3d& d2);

  const Vector3d& d1() const { return d1_; }
  const Vector3d& d2() const { return d2_; }

  // Unit normal of the reference plane, d°1 x d°2 normalized.
  Vector3d plane_normal() const { return d1_.cross(d2_).normalized(); }

 private:
  Vector3d d1_;
  Vector3d d2_;
};

struct Measurement {
  Vector3d d1 = Vector3d::Zero();
  Vector3d d2 = Vector3d::Zero();
  double t = 0.0;  // [s]
};

struct StateDerivative {
  Matrix3d R_dot;
  Vector3d omega_dot;
};

StateDerivative state_derivative(const ManifoldState& x, const SystemInput& in);

// One integration step with zero-order-held inputs. The rotation advances by
// the group exponential; omega advances by the rotation-form step
//   omega+ = exp(-dt*wedge(u)) (omega + w) - w + dt*a,
// which matches the Euler step to O(dt^2) and conserves ||omega|| exactly
// when a = w = 0 (the continuous model has omegadot . omega = 0 there).
ManifoldState integrate_truth(const ManifoldState& x, const SystemInput& in,
                              double dt);

// Exact flow for constant u with a = v = w = 0. The target angular velocity
// in the target frame, omega_T = R0 * omega0, is a constant of motion:
//   R(t) = exp(-t*wedge(omega_T)) R0 exp(t*wedge(u)),  omega(t) = R(t)^T omega_T.
ManifoldState flow_constant_inputs(const ManifoldState& x0, const Vector3d& u,
                                   double t);

Measurement measure(const ManifoldState& x, const ReferenceDirections& refs,
                    double t = 0.0);

// Perturbs each measured direction by a rotation of angle theta ~ N(0,
// sigma_theta^2) about an isotropic random axis, independently per vector.
Measurement apply_noise(const Measurement& y, double sigma_theta, Rng& rng);

// --------------------------------------------------------------------------
// Observability diagnostic
// --------------------------------------------------------------------------

// Differential observability of the vectorized system x = [vect(R); omega]
// (vect is column-major, 12 states): ranks the stacked gradients of the
// output Lie derivatives up to order n_lie. Without the expanded output set
// the rank is deficient; `expanded` appends the rows of the fictitious
// outputs R R^T e_j (j = 1..3), whose flow derivatives vanish identically,
// restoring full rank.
struct Observability {
  int rank = 0;
  int state_dim = 12;
  Eigen::VectorXd singular_values;
  Eigen::MatrixXd null_space;  // 12 x k orthonormal basis, k = 12 - rank
  // Canonical unobserved direction [vect(n° (R^T n°)^T); 0] with
  // n° = d°1 x d°2: scaling R along the reference-plane normal is invisible
  // to every output derivative. R^T n° is its chaser-frame signature.
  Eigen::Matrix<double, 12, 1> reference_direction;
  double reference_residual = 0.0;   // ||dO * dir|| / (sigma_max ||dir||)
  double reference_angle = 0.0;      // principal angle to the null space [rad]
};

// Requires n_lie >= 2 (gradients are analytic through order 2; higher orders
// use central differences with step 1e-5 on analytically-valued derivatives).
Observability observability_rank(const ManifoldState& x, const SystemInput& in,
                                 const ReferenceDirections& refs, bool expanded,
                                 int n_lie = 2);

}  // namespace releqf
