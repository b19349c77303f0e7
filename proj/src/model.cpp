#include "model.hpp"

#include <algorithm>
#include <limits>
#include <vector>

namespace releqf {

namespace {

using Vector9d = Eigen::Matrix<double, 9, 1>;
using Vector12d = Eigen::Matrix<double, 12, 1>;
using RowBlock = Eigen::Matrix<double, 3, 12>;

Vector9d vect(const Matrix3d& M) {
  // Eigen stores column-major, so this is the column-stacking convention.
  return Eigen::Map<const Vector9d>(M.data());
}

// d(R^T d°)/d vect(R) = I3 (x) d°^T  (3 x 9).
Eigen::Matrix<double, 3, 9> direction_gradient(const Vector3d& dref) {
  Eigen::Matrix<double, 3, 9> G = Eigen::Matrix<double, 3, 9>::Zero();
  for (int i = 0; i < 3; ++i) {
    G.block<1, 3>(i, 3 * i) = dref.transpose();
  }
  return G;
}

// Time-derivative coefficients of v = R^T d° along the flow, to any order.
// The closed subsystem is v' = v x b, b' = -omdot, omdot' = omdot x u with
// b = u - omega + v_in; Leibniz on the cross product gives the recursion.
std::vector<Vector3d> lie_values(const Matrix3d& R, const Vector3d& omega,
                                 const SystemInput& in, const Vector3d& dref,
                                 int order) {
  std::vector<Vector3d> v(order + 1), b(order + 1), omdot(order + 1);
  v[0] = R.transpose() * dref;
  b[0] = in.u - omega + in.v;
  omdot[0] = (omega + in.w).cross(in.u) + in.a;
  std::vector<double> binom(order + 1, 0.0);
  binom[0] = 1.0;
  for (int k = 0; k < order; ++k) {
    Vector3d acc = Vector3d::Zero();
    for (int j = 0; j <= k; ++j) {
      acc += binom[j] * v[j].cross(b[k - j]);
    }
    v[k + 1] = acc;
    b[k + 1] = -omdot[k];
    omdot[k + 1] = omdot[k].cross(in.u);
    // advance binomial row C(k+1, j)
    for (int j = k + 1; j > 0; --j) binom[j] += binom[j - 1];
  }
  return v;
}

// Gradient of the order-n Lie derivative of R^T d° at (R, omega).
RowBlock lie_gradient(const Matrix3d& R, const Vector3d& omega,
                      const SystemInput& in, const Vector3d& dref, int n) {
  RowBlock row = RowBlock::Zero();
  const Eigen::Matrix<double, 3, 9> G = direction_gradient(dref);
  const Vector3d vi = R.transpose() * dref;
  const Vector3d b = in.u - omega + in.v;
  const Vector3d omdot = (omega + in.w).cross(in.u) + in.a;
  switch (n) {
    case 0:
      row.block<3, 9>(0, 0) = G;
      break;
    case 1:
      row.block<3, 9>(0, 0) = -wedge(b) * G;
      row.block<3, 3>(0, 9) = -wedge(vi);
      break;
    case 2:
      row.block<3, 9>(0, 0) = (wedge(b) * wedge(b) + wedge(omdot)) * G;
      row.block<3, 3>(0, 9) = wedge(b) * wedge(vi) - wedge(vi.cross(b)) +
                              wedge(vi) * wedge(in.u);
      break;
    default: {
      // Central differences of the analytically-valued derivative.
      const double h = 1e-5;
      for (int c = 0; c < 12; ++c) {
        Matrix3d Rp = R, Rm = R;
        Vector3d op = omega, om = omega;
        if (c < 9) {
          Rp(c % 3, c / 3) += h;
          Rm(c % 3, c / 3) -= h;
        } else {
          op(c - 9) += h;
          om(c - 9) -= h;
        }
        const Vector3d fp = lie_values(Rp, op, in, dref, n)[n];
        const Vector3d fm = lie_values(Rm, om, in, dref, n)[n];
        row.col(c) = (fp - fm) / (2.0 * h);
      }
      break;
    }
  }
  return row;
}

}  // namespace

ReferenceDirections::ReferenceDirections(const Vector3d& d1,
                                         const Vector3d& d2) {
  if (d1.norm() < 1e-12 || d2.norm() < 1e-12) {
    throw DegenerateDirections("reference direction has zero norm");
  }
  d1_ = d1.normalized();
  d2_ = d2.normalized();
  if (d1_.cross(d2_).norm() <= 1e-6) {
    throw DegenerateDirections("reference directions are collinear");
  }
}

StateDerivative state_derivative(const ManifoldState& x,
                                 const SystemInput& in) {
  StateDerivative d;
  d.R_dot = x.R.matrix() * wedge(in.u - x.omega + in.v);
  d.omega_dot = (x.omega + in.w).cross(in.u) + in.a;
  return d;
}

ManifoldState integrate_truth(const ManifoldState& x, const SystemInput& in,
                              double dt) {
  ManifoldState out;
  out.R = x.R * Rotation::exp(dt * (in.u - x.omega + in.v));
  out.omega = so3_exp(-dt * in.u) * (x.omega + in.w) - in.w + dt * in.a;
  return out;
}

ManifoldState flow_constant_inputs(const ManifoldState& x0, const Vector3d& u,
                                   double t) {
  const Vector3d omega_T = x0.R * x0.omega;
  ManifoldState out;
  out.R = Rotation::exp(-t * omega_T) * x0.R * Rotation::exp(t * u);
  out.omega = out.R.transposed() * omega_T;
  return out;
}

Measurement measure(const ManifoldState& x, const ReferenceDirections& refs,
                    double t) {
  const Matrix3d Rt = x.R.matrix().transpose();
  return Measurement{Rt * refs.d1(), Rt * refs.d2(), t};
}

Measurement apply_noise(const Measurement& y, double sigma_theta, Rng& rng) {
  Measurement out = y;
  for (Vector3d* d : {&out.d1, &out.d2}) {
    const double theta = rng.normal(0.0, sigma_theta);
    const Vector3d axis = random_unit_vector(rng);
    *d = so3_exp(theta * axis) * (*d);
  }
  return out;
}

Observability observability_rank(const ManifoldState& x, const SystemInput& in,
                                 const ReferenceDirections& refs, bool expanded,
                                 int n_lie) {
  if (n_lie < 2) {
    throw std::invalid_argument("observability_rank: n_lie must be >= 2");
  }
  const Matrix3d& R = x.R.matrix();
  const int rows = 6 * (n_lie + 1) + (expanded ? 9 : 0);
  Eigen::MatrixXd O(rows, 12);
  int r = 0;
  for (int n = 0; n <= n_lie; ++n) {
    O.block<3, 12>(r, 0) = lie_gradient(R, x.omega, in, refs.d1(), n);
    O.block<3, 12>(r + 3, 0) = lie_gradient(R, x.omega, in, refs.d2(), n);
    r += 6;
  }
  if (expanded) {
    // Fictitious outputs R R^T e_j. Their gradient w.r.t. R_{cd} is
    // R(j,d) e_c + delta(c,j) R.col(d); all flow derivatives vanish since
    // d/dt (R R^T) = R(B + B^T)R^T = 0 for skew B, so only order 0 appears.
    for (int j = 0; j < 3; ++j) {
      RowBlock row = RowBlock::Zero();
      for (int d = 0; d < 3; ++d) {
        for (int c = 0; c < 3; ++c) {
          Vector3d col = R(j, d) * Vector3d::Unit(c);
          if (c == j) col += R.col(d);
          row.col(3 * d + c).head<3>() = col;
        }
      }
      O.block<3, 12>(r, 0) = row;
      r += 3;
    }
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(O, Eigen::ComputeFullV);
  Observability result;
  result.singular_values = svd.singularValues();
  const double smax = result.singular_values(0);
  const double thresh = 1e-8 * smax;
  int rank = 0;
  for (int i = 0; i < result.singular_values.size(); ++i) {
    if (result.singular_values(i) > thresh) ++rank;
  }
  result.rank = rank;
  result.null_space = svd.matrixV().rightCols(12 - rank);

  const Vector3d nref = refs.plane_normal();
  const Matrix3d Cref = nref * (R.transpose() * nref).transpose();
  result.reference_direction.setZero();
  result.reference_direction.head<9>() = vect(Cref);
  const Vector12d dir = result.reference_direction.normalized();
  result.reference_residual = (O * dir).norm() / smax;
  if (rank < 12) {
    const double c = (result.null_space.transpose() * dir).norm();
    result.reference_angle = std::acos(std::clamp(c, 0.0, 1.0));
  } else {
    result.reference_angle = std::numeric_limits<double>::quiet_NaN();
  }
  return result;
}

}  // namespace releqf
