// System model against independent oracles: the constant-input closed-form
// flow for the integrator, quadrature for the noise model's mean deflection,
// and finite differences of a locally reimplemented output stack for the
// observability decomposition.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "errors.hpp"
#include "model.hpp"
#include "support/numdiff.hpp"

using namespace releqf;
using testsupport::random_state;
using testsupport::random_vec;

TEST_CASE("reference directions normalize and reject degenerate pairs") {
  const ReferenceDirections refs(Vector3d(2, 0, 0), Vector3d(0, 0.5, 0));
  CHECK((refs.d1() - Vector3d::UnitX()).norm() == 0.0);
  CHECK((refs.d2() - Vector3d::UnitY()).norm() == 0.0);
  CHECK((refs.plane_normal() - Vector3d::UnitZ()).norm() < 1e-15);
  CHECK_THROWS_AS(ReferenceDirections(Vector3d(1, 0, 0), Vector3d(-2, 0, 0)),
                  DegenerateDirections);
  CHECK_THROWS_AS(ReferenceDirections(Vector3d::Zero(), Vector3d(0, 1, 0)),
                  DegenerateDirections);
  CHECK_THROWS_AS(
      ReferenceDirections(Vector3d(1, 0, 0), Vector3d(1 + 1e-9, 1e-9, 0)),
      DegenerateDirections);
}

TEST_CASE("state derivative matches the differentiated closed-form flow") {
  Rng rng(21);
  for (int i = 0; i < 20; ++i) {
    const ManifoldState x = random_state(rng);
    SystemInput in;
    in.u = random_vec(rng, 1.5);
    const StateDerivative d = state_derivative(x, in);

    const double h = 1e-6;
    const ManifoldState xp = flow_constant_inputs(x, in.u, h);
    const ManifoldState xm = flow_constant_inputs(x, in.u, -h);
    const Matrix3d r_dot_fd = (xp.R.matrix() - xm.R.matrix()) / (2.0 * h);
    const Vector3d w_dot_fd = (xp.omega - xm.omega) / (2.0 * h);
    CHECK((d.R_dot - r_dot_fd).norm() < 1e-8);
    CHECK((d.omega_dot - w_dot_fd).norm() < 1e-8);
  }
}

TEST_CASE("closed-form flow solves the dynamics and composes in time") {
  Rng rng(22);
  for (int i = 0; i < 20; ++i) {
    const ManifoldState x0 = random_state(rng);
    const Vector3d u = random_vec(rng, 1.5);
    const double t = rng.uniform(0.1, 3.0);
    const double s = rng.uniform(0.1, 3.0);

    const ManifoldState at_once = flow_constant_inputs(x0, u, t + s);
    const ManifoldState stepped =
        flow_constant_inputs(flow_constant_inputs(x0, u, t), u, s);
    CHECK((at_once.R.matrix() - stepped.R.matrix()).norm() < 1e-12);
    CHECK((at_once.omega - stepped.omega).norm() < 1e-12);

    // The relative rate seen in the chaser frame keeps the target-frame
    // rate's magnitude.
    CHECK(at_once.omega.norm() ==
          doctest::Approx(x0.omega.norm()).epsilon(1e-12));
    CHECK((flow_constant_inputs(x0, u, 0.0).R.matrix() - x0.R.matrix())
              .norm() == 0.0);
  }
}

TEST_CASE("one-step integrator converges at first order to the flow") {
  Rng rng(23);
  const ManifoldState x0 = random_state(rng);
  SystemInput in;
  in.u = random_vec(rng, 1.5);
  const double T = 0.5;
  const ManifoldState exact = flow_constant_inputs(x0, in.u, T);

  const auto global_error = [&](int steps) {
    ManifoldState x = x0;
    const double dt = T / steps;
    for (int k = 0; k < steps; ++k) x = integrate_truth(x, in, dt);
    return (x.R.matrix() - exact.R.matrix()).norm() +
           (x.omega - exact.omega).norm();
  };
  const double e1 = global_error(256);
  const double e2 = global_error(512);
  CHECK(e1 / e2 == doctest::Approx(2.0).epsilon(0.08));
}

TEST_CASE("integrator conserves the rate norm without acceleration") {
  Rng rng(24);
  ManifoldState x = random_state(rng);
  SystemInput in;
  in.u = random_vec(rng, 1.5);
  const double n0 = x.omega.norm();
  for (int k = 0; k < 2000; ++k) {
    x = integrate_truth(x, in, 0.01);
    CHECK(x.R.orthonormality_error() < 1e-9);
  }
  CHECK(x.omega.norm() == doctest::Approx(n0).epsilon(1e-13));
}

TEST_CASE("measurements are the references seen from the chaser") {
  const ReferenceDirections refs(Vector3d::UnitX(), Vector3d::UnitY());
  ManifoldState x;
  x.R = Rotation::exp(Vector3d(0, 0, M_PI / 2));  // quarter turn about z
  const Measurement y = measure(x, refs, 3.5);
  CHECK((y.d1 - Vector3d(0, -1, 0)).norm() < 1e-15);
  CHECK((y.d2 - Vector3d(1, 0, 0)).norm() < 1e-15);
  CHECK(y.t == 3.5);

  Rng rng(25);
  for (int i = 0; i < 20; ++i) {
    const ManifoldState s = random_state(rng);
    const Measurement m = measure(s, refs);
    CHECK(m.d1.norm() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(m.d1.dot(m.d2) ==
          doctest::Approx(refs.d1().dot(refs.d2())).epsilon(1e-12));
  }
}

TEST_CASE("direction noise preserves norms and vanishes at zero sigma") {
  Rng rng(26);
  const ReferenceDirections refs(Vector3d::UnitX(), Vector3d::UnitY());
  const Measurement y = measure(random_state(rng), refs, 1.25);

  Rng noise_rng(27);
  const Measurement clean = apply_noise(y, 0.0, noise_rng);
  CHECK((clean.d1 - y.d1).norm() == 0.0);
  CHECK((clean.d2 - y.d2).norm() == 0.0);

  for (int i = 0; i < 100; ++i) {
    const Measurement noisy = apply_noise(y, 0.3, noise_rng);
    CHECK(noisy.d1.norm() == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(noisy.d2.norm() == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(noisy.t == y.t);
  }
}

TEST_CASE("mean angular deflection of the noise matches quadrature") {
  // A rotation by angle t about a random axis deflects a unit vector by
  // 2 asin(sin(p) |sin(t/2)|), p the axis-to-vector angle. Averaging over
  // t ~ N(0, sigma^2) and the isotropic axis density sin(p)/2 gives the
  // expected deflection; the sample mean must agree to ~4 standard errors.
  const double sigma = 0.1;

  const auto mean_deflection = [&](double p) {
    const double lo = -6.0 * sigma, hi = 6.0 * sigma;
    const int n = 400;
    const double h = (hi - lo) / n;
    double acc = 0.0;
    for (int k = 0; k <= n; ++k) {
      const double t = lo + k * h;
      const double weight =
          std::exp(-0.5 * t * t / (sigma * sigma)) /
          (sigma * std::sqrt(2.0 * M_PI));
      const double f =
          2.0 * std::asin(std::sin(p) * std::abs(std::sin(0.5 * t)));
      const double w = (k == 0 || k == n) ? 1.0 : (k % 2 ? 4.0 : 2.0);
      acc += w * weight * f;
    }
    return acc * h / 3.0;
  };
  // Outer quadrature over the axis angle.
  const int np = 400;
  const double hp = M_PI / np;
  double expected = 0.0;
  for (int k = 0; k <= np; ++k) {
    const double p = k * hp;
    const double w = (k == 0 || k == np) ? 1.0 : (k % 2 ? 4.0 : 2.0);
    expected += w * 0.5 * std::sin(p) * mean_deflection(p);
  }
  expected *= hp / 3.0;

  Rng rng(28);
  const ReferenceDirections refs(Vector3d::UnitX(), Vector3d::UnitY());
  const Measurement y = measure(random_state(rng), refs);
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const Measurement noisy = apply_noise(y, sigma, rng);
    sum += std::acos(std::min(1.0, std::max(-1.0, y.d1.dot(noisy.d1))));
    sum += std::acos(std::min(1.0, std::max(-1.0, y.d2.dot(noisy.d2))));
  }
  const double got = sum / (2.0 * n);
  CHECK(got == doctest::Approx(expected).epsilon(0.01));
  CHECK(std::abs(got - expected) < 4e-4);
}

namespace {

// Independent reimplementation of the first three output time derivatives of
// v = R^T d° along the flow: v' = v x b, b = u - omega + v_in, with
// b' = -omega_dot and omega_dot = (omega + w) x u + a.
Eigen::Matrix<double, 9, 1> output_stack(const ManifoldState& x,
                                         const SystemInput& in,
                                         const Vector3d& dref) {
  const Vector3d v0 = x.R.matrix().transpose() * dref;
  const Vector3d b = in.u - x.omega + in.v;
  const Vector3d omega_dot = (x.omega + in.w).cross(in.u) + in.a;
  const Vector3d v1 = v0.cross(b);
  const Vector3d v2 = v1.cross(b) + v0.cross(-omega_dot);
  Eigen::Matrix<double, 9, 1> out;
  out << v0, v1, v2;
  return out;
}

// Same stack for both references, evaluated on flattened coordinates
// [vect(R); omega] without projecting back to the group: the rank analysis
// linearizes over arbitrary 12-space perturbations.
Eigen::Matrix<double, 18, 1> full_stack(const Eigen::Matrix<double, 12, 1>& z,
                                        const SystemInput& in,
                                        const ReferenceDirections& refs) {
  Matrix3d R;
  for (int c = 0; c < 3; ++c) {
    for (int r = 0; r < 3; ++r) R(r, c) = z(3 * c + r);
  }
  const Vector3d omega = z.tail<3>();
  const Vector3d v0_1 = R.transpose() * refs.d1();
  const Vector3d v0_2 = R.transpose() * refs.d2();
  const Vector3d b = in.u - omega + in.v;
  const Vector3d omega_dot = (omega + in.w).cross(in.u) + in.a;
  Eigen::Matrix<double, 18, 1> out;
  out.segment<3>(0) = v0_1;
  out.segment<3>(3) = v0_1.cross(b);
  out.segment<3>(6) = v0_1.cross(b).cross(b) + v0_1.cross(-omega_dot);
  out.segment<3>(9) = v0_2;
  out.segment<3>(12) = v0_2.cross(b);
  out.segment<3>(15) = v0_2.cross(b).cross(b) + v0_2.cross(-omega_dot);
  return out;
}

Eigen::Matrix<double, 12, 1> flatten(const ManifoldState& x) {
  Eigen::Matrix<double, 12, 1> z;
  const Matrix3d& R = x.R.matrix();
  for (int c = 0; c < 3; ++c) {
    for (int r = 0; r < 3; ++r) z(3 * c + r) = R(r, c);
  }
  z.tail<3>() = x.omega;
  return z;
}

}  // namespace

TEST_CASE("observability rank is 9 plain and 12 with expanded outputs") {
  Rng rng(29);
  const ReferenceDirections refs(Vector3d::UnitX(), Vector3d::UnitY());
  for (int i = 0; i < 20; ++i) {
    const ManifoldState x = random_state(rng);
    SystemInput in;
    in.u = random_vec(rng, 1.5);

    const Observability plain = observability_rank(x, in, refs, false);
    CHECK(plain.rank == 9);
    CHECK(plain.state_dim == 12);
    CHECK(plain.null_space.cols() == 3);
    CHECK(plain.reference_residual < 1e-8);
    CHECK(plain.reference_angle < 1e-6);
    CHECK(std::abs(plain.reference_direction.norm() - 1.0) < 1e-12);

    const Observability full = observability_rank(x, in, refs, true);
    CHECK(full.rank == 12);
    CHECK(full.null_space.cols() == 0);
    CHECK(full.reference_residual > 0.1);
    CHECK(std::isnan(full.reference_angle));

    for (int k = 1; k < plain.singular_values.size(); ++k) {
      CHECK(plain.singular_values[k] <= plain.singular_values[k - 1]);
    }
  }
}

TEST_CASE("null-space directions are flat to finite differences") {
  Rng rng(30);
  const ReferenceDirections refs(Vector3d::UnitX(), Vector3d::UnitY());
  for (int i = 0; i < 10; ++i) {
    const ManifoldState x = random_state(rng);
    SystemInput in;
    in.u = random_vec(rng, 1.5);
    const Observability plain = observability_rank(x, in, refs, false);
    REQUIRE(plain.rank == 9);

    const Eigen::Matrix<double, 12, 1> z0 = flatten(x);
    const double h = 1e-6;
    for (int k = 0; k < plain.null_space.cols(); ++k) {
      const Eigen::Matrix<double, 12, 1> dir = plain.null_space.col(k);
      const auto fp = full_stack(z0 + h * dir, in, refs);
      const auto fm = full_stack(z0 - h * dir, in, refs);
      CHECK(((fp - fm) / (2.0 * h)).norm() < 1e-5);
    }
    // A generic direction is far from flat.
    const Eigen::Matrix<double, 12, 1> gen =
        Eigen::Matrix<double, 12, 1>::Ones().normalized();
    const auto fp = full_stack(z0 + h * gen, in, refs);
    const auto fm = full_stack(z0 - h * gen, in, refs);
    CHECK(((fp - fm) / (2.0 * h)).norm() > 1e-2);
  }
}

TEST_CASE("higher derivative orders keep the rank but need n_lie >= 2") {
  Rng rng(31);
  const ReferenceDirections refs(Vector3d::UnitX(), Vector3d::UnitY());
  const ManifoldState x = random_state(rng);
  SystemInput in;
  in.u = random_vec(rng, 1.5);
  CHECK_THROWS_AS(observability_rank(x, in, refs, false, 1),
                  std::invalid_argument);
  for (int n_lie = 2; n_lie <= 4; ++n_lie) {
    CHECK(observability_rank(x, in, refs, false, n_lie).rank == 9);
    CHECK(observability_rank(x, in, refs, true, n_lie).rank == 12);
  }
}

TEST_CASE("independent output stack agrees with the flow derivatives") {
  // The recursion the rank analysis is built on must reproduce actual time
  // derivatives of the measured output along the integrated trajectory.
  Rng rng(32);
  for (int i = 0; i < 10; ++i) {
    const ManifoldState x = random_state(rng);
    SystemInput in;
    in.u = random_vec(rng, 1.5);
    const Vector3d dref = random_unit_vector(rng);
    const auto stack = output_stack(x, in, dref);

    const double h = 1e-4;
    const auto value_at = [&](double t) -> Vector3d {
      const ManifoldState xt = flow_constant_inputs(x, in.u, t);
      return xt.R.matrix().transpose() * dref;
    };
    const Vector3d d1_fd = (value_at(h) - value_at(-h)) / (2.0 * h);
    const Vector3d d2_fd =
        (value_at(h) - 2.0 * value_at(0.0) + value_at(-h)) / (h * h);
    CHECK((stack.segment<3>(3) - d1_fd).norm() < 1e-6);
    CHECK((stack.segment<3>(6) - d2_fd).norm() < 1e-4);
  }
}
