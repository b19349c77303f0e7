#include "symmetry.hpp"

namespace releqf {

ManifoldState phi(const GroupElement& g, const ManifoldState& x) {
  ManifoldState out;
  out.R = x.R * g.Q;
  out.omega = g.Q.transposed() * (x.omega - g.q);
  return out;
}

SystemInput psi(const GroupElement& g, const SystemInput& in) {
  const Rotation Qt = g.Q.transposed();
  SystemInput out;
  out.u = Qt * in.u;
  out.a = Qt * in.a;
  out.v = Qt * (in.v - g.q);
  out.w = Qt * (in.w + g.q);
  return out;
}

Measurement rho(const GroupElement& g, const Measurement& y) {
  const Rotation Qt = g.Q.transposed();
  return Measurement{Qt * y.d1, Qt * y.d2, y.t};
}

AlgebraElement lift(const ManifoldState& x, const SystemInput& in) {
  return AlgebraElement{
      wedge(in.u - x.omega + in.v),
      -in.a + in.u.cross(in.w) + x.omega.cross(in.v)};
}

double check_lift_condition2(const GroupElement& g, const ManifoldState& x,
                             const SystemInput& in) {
  const AlgebraElement lhs = se3_adjoint(se3_inv(g), lift(x, in));
  const AlgebraElement rhs = lift(phi(g, x), psi(g, in));
  return std::sqrt((lhs.S - rhs.S).squaredNorm() +
                   (lhs.s - rhs.s).squaredNorm());
}

LocalError theta(const ManifoldState& e) {
  return LocalError{e.R.log(), e.omega};
}

ManifoldState theta_inv(const LocalError& eps) {
  return ManifoldState{Rotation::exp(eps.eps_R), eps.eps_omega};
}

GroupElement group_error(const GroupElement& truth,
                         const GroupElement& estimate) {
  return se3_mul(truth, se3_inv(estimate));
}

GroupElement embed_state(const ManifoldState& x) {
  return GroupElement{x.R, -(x.R * x.omega)};
}

LocalError local_error(const GroupElement& truth,
                       const GroupElement& estimate) {
  return theta(phi(group_error(truth, estimate), origin_state()));
}

}  // namespace releqf
