#include "pushsum/penalty.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <utility>

namespace pushsum {

namespace {

void require_finite(double u, const char* what) {
  if (!std::isfinite(u)) {
    throw std::domain_error(fmt::format("{}: argument must be finite, got {}", what, u));
  }
}

void require_dim(const PenalizedProblem& p, const Vector& z) {
  if (z.size() != p.dim()) {
    throw std::invalid_argument(fmt::format("problem '{}' has dimension {}, point has {}",
                                            p.base().name, p.dim(), z.size()));
  }
}

}  // namespace

PenalizedProblem::PenalizedProblem(LocalProblem base) : base_(std::move(base)) {
  if (base_.dim <= 0) {
    throw std::invalid_argument("local problem dimension must be positive");
  }
  if (!base_.objective_value || !base_.objective_grad) {
    throw std::invalid_argument(fmt::format("problem '{}' is missing its objective", base_.name));
  }
  for (const auto& c : base_.constraints) {
    if (!c.value || !c.grad) {
      throw std::invalid_argument(fmt::format("constraint '{}' is missing value or gradient", c.name));
    }
    if (!(c.grad_bound > 0.0) || !(c.lipschitz_bound >= 0.0)) {
      throw std::invalid_argument(
          fmt::format("constraint '{}' needs grad_bound > 0 and lipschitz_bound >= 0", c.name));
    }
  }
}

double penalty_g(double u) {
  require_finite(u, "penalty_g");
  if (u <= 0.0) return 0.0;
  // log cosh u = log1p(2 sinh^2(u/2)) keeps precision for small u; the
  // second form never overflows.
  if (u < 1.0) {
    const double s = std::sinh(0.5 * u);
    return std::log1p(2.0 * s * s);
  }
  return u - std::numbers::ln2 + std::log1p(std::exp(-2.0 * u));
}

double penalty_g_prime(double u) {
  require_finite(u, "penalty_g_prime");
  return u > 0.0 ? std::tanh(u) : 0.0;
}

double penalty_value(const PenalizedProblem& p, const Vector& z) {
  require_dim(p, z);
  double total = 0.0;
  for (const auto& c : p.base().constraints) total += penalty_g(c.value(z));
  return total;
}

Vector penalty_grad(const PenalizedProblem& p, const Vector& z) {
  require_dim(p, z);
  Vector g = Vector::Zero(p.dim());
  for (const auto& c : p.base().constraints) {
    const double slope = penalty_g_prime(c.value(z));
    if (slope != 0.0) g += slope * c.grad(z);
  }
  return g;
}

Vector penalized_gradient(const PenalizedProblem& p, const Vector& z, double r) {
  if (!(r >= 1.0)) {
    throw std::invalid_argument(
        fmt::format("penalty parameter r = {} violates r_t >= 1", r));
  }
  require_dim(p, z);
  return p.base().objective_grad(z) + r * penalty_grad(p, z);
}

double max_constraint(const PenalizedProblem& p, const Vector& z) {
  require_dim(p, z);
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& c : p.base().constraints) worst = std::max(worst, c.value(z));
  return worst;
}

ConstraintFn affine_constraint(Vector coeffs, double offset, std::string name) {
  const double norm = coeffs.norm();
  ConstraintFn c;
  c.value = [coeffs, offset](const Vector& z) { return coeffs.dot(z) + offset; };
  c.grad = [coeffs](const Vector&) { return coeffs; };
  c.grad_bound = norm > 0.0 ? norm : 1.0;
  c.lipschitz_bound = 0.0;
  c.name = std::move(name);
  return c;
}

std::vector<ConstraintFn> equality_as_inequalities(const ConstraintFn& c) {
  ConstraintFn neg = c;
  neg.value = [v = c.value](const Vector& z) { return -v(z); };
  neg.grad = [g = c.grad](const Vector& z) -> Vector { return -g(z); };
  neg.name = c.name.empty() ? std::string{} : "-" + c.name;
  return {c, neg};
}

Vector SampleBox::sample(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vector z(lower.size());
  for (Eigen::Index k = 0; k < z.size(); ++k) {
    z[k] = lower[k] + unit(rng) * (upper[k] - lower[k]);
  }
  return z;
}

BoundCheck verify_declared_bounds(const LocalProblem& p, const SampleBox& box, int samples,
                                  std::mt19937_64& rng) {
  BoundCheck out;
  for (int s = 0; s < samples; ++s) {
    const Vector z1 = box.sample(rng);
    const Vector z2 = box.sample(rng);
    for (const auto& c : p.constraints) {
      const Vector g1 = c.grad(z1);
      const double ratio = g1.norm() / c.grad_bound;
      out.worst_gradient_ratio = std::max(out.worst_gradient_ratio, ratio);
      if (ratio > 1.0 + 1e-12) {
        out.ok = false;
        out.message = fmt::format("constraint '{}': sampled gradient norm {} exceeds bound {}",
                                  c.name, g1.norm(), c.grad_bound);
      }
      const double dist = (z1 - z2).norm();
      if (dist == 0.0) continue;
      const double quotient = (g1 - c.grad(z2)).norm() / dist;
      const double lip_ratio =
          c.lipschitz_bound > 0.0 ? quotient / c.lipschitz_bound : (quotient > 1e-12 ? INFINITY : 0.0);
      out.worst_lipschitz_ratio = std::max(out.worst_lipschitz_ratio, lip_ratio);
      if (lip_ratio > 1.0 + 1e-9) {
        out.ok = false;
        out.message = fmt::format("constraint '{}': sampled Lipschitz quotient {} exceeds bound {}",
                                  c.name, quotient, c.lipschitz_bound);
      }
    }
  }
  return out;
}

double objective_gradient_mismatch(const LocalProblem& p, const SampleBox& box, int samples,
                                   std::mt19937_64& rng, double step) {
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    Vector z = box.sample(rng);
    const Vector g = p.objective_grad(z);
    Vector fd(z.size());
    for (Eigen::Index k = 0; k < z.size(); ++k) {
      const double h = step * std::max(1.0, std::abs(z[k]));
      Vector zp = z, zm = z;
      zp[k] += h;
      zm[k] -= h;
      fd[k] = (p.objective_value(zp) - p.objective_value(zm)) / (2.0 * h);
    }
    worst = std::max(worst, (fd - g).norm() / std::max(1.0, g.norm()));
  }
  return worst;
}

}  // namespace pushsum
