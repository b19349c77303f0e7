#pragma once

// Symmetry of the relative-attitude system under the rotation+velocity group:
// actions on state, input, and output, the equivariant lift into the group
// algebra, and the local error coordinates the filter linearizes in.

#include "lie.hpp"
#include "model.hpp"

namespace releqf {

// Local error coordinates (attitude part from the principal log, so its norm
// is < pi by construction; velocity part in rad/s).
struct LocalError {
  Vector3d eps_R = Vector3d::Zero();
  Vector3d eps_omega = Vector3d::Zero();

  Vector6d vec() const {
    Vector6d v;
    v << eps_R, eps_omega;
    return v;
  }
};

// State action: phi((Q,q), (R,omega)) = (R Q, Q^T (omega - q)). Right action.
ManifoldState phi(const GroupElement& g, const ManifoldState& x);

// Input action: psi((Q,q), (u,a,v,w)) = (Q^T u, Q^T a, Q^T(v-q), Q^T(w+q)).
SystemInput psi(const GroupElement& g, const SystemInput& in);

// Output action: rho((Q,q), (d1,d2)) = (Q^T d1, Q^T d2).
Measurement rho(const GroupElement& g, const Measurement& y);

// Equivariant lift: Lambda(x, in) = ((u - omega + v)^, -a + u x w + omega x v).
AlgebraElement lift(const ManifoldState& x, const SystemInput& in);

// Residual of the lift's compatibility with the actions,
// || Ad_{g^-1} Lambda(x,in) - Lambda(phi_g(x), psi_g(in)) ||; zero for a
// correct lift (up to round-off).
double check_lift_condition2(const GroupElement& g, const ManifoldState& x,
                             const SystemInput& in);

// The fixed origin the filter linearizes about.
inline ManifoldState origin_state() { return ManifoldState{}; }

// Local chart around the origin and its inverse:
// theta(e) = (log(e_R)v, e_omega), theta_inv(eps) = (exp(eps_R^), eps_omega).
LocalError theta(const ManifoldState& e);
ManifoldState theta_inv(const LocalError& eps);

// Group error E = truth * estimate^-1 = (Q Q^^T, -Q Q^^T q^ + q).
GroupElement group_error(const GroupElement& truth,
                         const GroupElement& estimate);

// Group element that reproduces a manifold state from the origin:
// phi(embed_state(x), origin) == x, with embed_state(x) = (R, -R omega).
GroupElement embed_state(const ManifoldState& x);

// Convenience: local error coordinates of truth w.r.t. an estimate,
// theta(phi(group_error(truth, estimate), origin)).
LocalError local_error(const GroupElement& truth, const GroupElement& estimate);

}  // namespace releqf
