#include "pushsum/penalty.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

using namespace pushsum;

namespace {

// Reference values below were computed with 30-digit arithmetic.
constexpr double kLogCosh1 = 0.43378083048302718703;
constexpr double kLogCoshHalf = 0.12011450695827752463;
constexpr double kLogCosh20 = 19.306852819440054695;
constexpr double kLogCosh1000 = 999.30685281944005469;
constexpr double kTanh1 = 0.76159415595576488812;
constexpr double kTanhHalf = 0.4621171572600097585;

LocalProblem halfplane_problem() {
  LocalProblem p;
  p.dim = 2;
  p.objective_value = [](const Vector& z) { return z.squaredNorm(); };
  p.objective_grad = [](const Vector& z) -> Vector { return 2.0 * z; };
  Vector a(2);
  a << 1.0, 1.0;
  p.constraints.push_back(affine_constraint(a, -1.0, "x + y <= 1"));
  return p;
}

}  // namespace

TEST_CASE("log-cosh penalty matches high-precision values") {
  CHECK(penalty_g(1.0) == doctest::Approx(kLogCosh1).epsilon(1e-15));
  CHECK(penalty_g(0.5) == doctest::Approx(kLogCoshHalf).epsilon(1e-15));
  CHECK(penalty_g(20.0) == doctest::Approx(kLogCosh20).epsilon(1e-15));
  CHECK(penalty_g(1000.0) == doctest::Approx(kLogCosh1000).epsilon(1e-15));
  CHECK(penalty_g(1e-8) == doctest::Approx(5e-17).epsilon(1e-12));
  CHECK(penalty_g_prime(1.0) == doctest::Approx(kTanh1).epsilon(1e-15));
  CHECK(penalty_g_prime(0.5) == doctest::Approx(kTanhHalf).epsilon(1e-15));
}

TEST_CASE("penalty vanishes on the feasible side") {
  for (double u : {0.0, -1e-12, -1.0, -1e6}) {
    CHECK(penalty_g(u) == 0.0);
    CHECK(penalty_g_prime(u) == 0.0);
  }
}

TEST_CASE("penalty stays finite where the naive formula overflows") {
  CHECK(std::isfinite(penalty_g(1e6)));
  CHECK(penalty_g(1e6) == doctest::Approx(1e6 - std::log(2.0)));
  CHECK(penalty_g_prime(1e6) == 1.0);
  CHECK_THROWS_AS(penalty_g(std::numeric_limits<double>::quiet_NaN()), std::domain_error);
  CHECK_THROWS_AS(penalty_g_prime(std::numeric_limits<double>::infinity()), std::domain_error);
}

TEST_CASE("penalty derivative agrees with a finite difference and is bounded by one") {
  for (double u = 0.01; u < 40.0; u *= 1.7) {
    const double h = 1e-6 * std::max(1.0, u);
    const double fd = (penalty_g(u + h) - penalty_g(u - h)) / (2 * h);
    CHECK(penalty_g_prime(u) == doctest::Approx(fd).epsilon(1e-6));
    CHECK(penalty_g_prime(u) <= 1.0);
  }
}

TEST_CASE("penalty is convex and nondecreasing on a sample grid") {
  double prev = penalty_g(-2.0);
  for (double u = -2.0; u <= 5.0; u += 0.01) {
    CHECK(penalty_g(u) >= prev);
    CHECK(penalty_g(u) <= 0.5 * (penalty_g(u - 0.05) + penalty_g(u + 0.05)) + 1e-15);
    prev = penalty_g(u);
  }
}

TEST_CASE("penalized gradient adds r times the constraint penalty gradient") {
  const PenalizedProblem p(halfplane_problem());
  Vector z(2);
  z << 1.0, 1.0;  // violation u = 1
  const Vector g = penalized_gradient(p, z, 10.0);
  CHECK(g[0] == doctest::Approx(2.0 + 10.0 * kTanh1));
  CHECK(g[1] == doctest::Approx(2.0 + 10.0 * kTanh1));
  CHECK(penalty_value(p, z) == doctest::Approx(kLogCosh1));
  CHECK(max_constraint(p, z) == doctest::Approx(1.0));

  Vector inside(2);
  inside << 0.1, 0.2;
  CHECK(penalty_value(p, inside) == 0.0);
  CHECK((penalized_gradient(p, inside, 1e6) - 2.0 * inside).norm() == 0.0);
}

TEST_CASE("penalized gradient rejects r below one and mismatched dimensions") {
  const PenalizedProblem p(halfplane_problem());
  CHECK_THROWS_AS(penalized_gradient(p, Vector::Zero(2), 0.5), std::invalid_argument);
  CHECK_THROWS_AS(penalty_value(p, Vector::Zero(3)), std::invalid_argument);
}

TEST_CASE("problem construction validates declared constants") {
  LocalProblem bad = halfplane_problem();
  bad.constraints.front().grad_bound = 0.0;
  CHECK_THROWS(PenalizedProblem(bad));
  LocalProblem empty = halfplane_problem();
  empty.dim = 0;
  CHECK_THROWS(PenalizedProblem(empty));
}

TEST_CASE("equality pair penalizes both directions") {
  Vector a(1);
  a << 1.0;
  const auto pair = equality_as_inequalities(affine_constraint(a, -2.0, "z = 2"));
  REQUIRE(pair.size() == 2);
  Vector lo(1), hi(1), at(1);
  lo << 1.0;
  hi << 3.0;
  at << 2.0;
  CHECK(pair[0].value(hi) == doctest::Approx(1.0));
  CHECK(pair[1].value(lo) == doctest::Approx(1.0));
  CHECK(pair[0].value(at) == 0.0);
  CHECK(pair[1].value(at) == 0.0);
}

TEST_CASE("sampled bound check accepts honest bounds and flags understated ones") {
  std::mt19937_64 rng(7);
  const SampleBox box{Vector::Constant(2, -5.0), Vector::Constant(2, 5.0)};
  LocalProblem p = halfplane_problem();
  CHECK(verify_declared_bounds(p, box, 100, rng).ok);
  p.constraints.front().grad_bound = 0.5;  // true norm is sqrt(2)
  const auto check = verify_declared_bounds(p, box, 100, rng);
  CHECK_FALSE(check.ok);
  CHECK(check.worst_gradient_ratio == doctest::Approx(std::sqrt(2.0) / 0.5));
  CHECK(objective_gradient_mismatch(halfplane_problem(), box, 20, rng) < 1e-6);
}

TEST_CASE("penalty adds over constraints and follows the chain rule") {
  LocalProblem p;
  p.dim = 2;
  p.objective_value = [](const Vector&) { return 0.0; };
  p.objective_grad = [](const Vector&) -> Vector { return Vector::Zero(2); };
  Vector e1(2), scaled(2);
  e1 << 1.0, 0.0;
  scaled << 2.0, 0.0;
  p.constraints.push_back(affine_constraint(e1, 0.0, "x <= 0"));
  p.constraints.push_back(affine_constraint(e1, 0.0, "x <= 0 again"));
  const PenalizedProblem twice(p);
  Vector z(2);
  z << 1.0, 5.0;
  CHECK(penalty_value(twice, z) == doctest::Approx(2 * kLogCosh1));

  LocalProblem q = p;
  q.constraints = {affine_constraint(scaled, -1.0, "2x - 1 <= 0")};
  const PenalizedProblem steep(q);  // c(z) = 1 at z, gradient (2, 0)
  const Vector g = penalty_grad(steep, z);
  CHECK(g[0] == doctest::Approx(2 * kTanh1));
  CHECK(g[1] == 0.0);
}

TEST_CASE("penalty gradient agrees with finite differences of the penalty value") {
  const PenalizedProblem p(halfplane_problem());
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  const double h = 1e-6;
  for (int i = 0; i < 100; ++i) {
    Vector z(2);
    z << u(rng), u(rng);
    if (std::abs(max_constraint(p, z)) < 1e-3) continue;  // the seam has no second derivative
    const Vector g = penalty_grad(p, z);
    for (int k = 0; k < 2; ++k) {
      Vector a = z, b = z;
      a[k] += h;
      b[k] -= h;
      const double fd = (penalty_value(p, a) - penalty_value(p, b)) / (2 * h);
      CHECK(g[k] == doctest::Approx(fd).epsilon(1e-5).scale(1e-8));
    }
  }
}

TEST_CASE("penalized gradient is affine in r") {
  const PenalizedProblem p(halfplane_problem());
  Vector z(2);
  z << 2.0, 0.5;
  const Vector one = penalized_gradient(p, z, 1.0);
  CHECK((one - (2.0 * z + penalty_grad(p, z))).norm() < 1e-15);
  const Vector r3 = penalized_gradient(p, z, 3.0), r6 = penalized_gradient(p, z, 6.0);
  CHECK((r6 - r3 - 3.0 * penalty_grad(p, z)).norm() < 1e-12);
}
