#pragma once

#include <Eigen/Core>

#include <functional>
#include <random>
#include <string>
#include <vector>

namespace pushsum {

using Vector = Eigen::VectorXd;
using ScalarField = std::function<double(const Vector&)>;
using VectorField = std::function<Vector(const Vector&)>;

/// One inequality constraint c(z) <= 0 together with its gradient.
///
/// The bounds are declared by whoever builds the constraint. They are the
/// global sup of the gradient norm and the gradient's Lipschitz constant;
/// the code can only spot-check them (see verify_declared_bounds).
struct ConstraintFn {
  ScalarField value;
  VectorField grad;
  double grad_bound = 0.0;
  double lipschitz_bound = 0.0;
  std::string name;
};

/// One agent's smooth convex objective plus its local constraint list.
struct LocalProblem {
  ScalarField objective_value;
  VectorField objective_grad;
  std::vector<ConstraintFn> constraints;
  int dim = 0;
  std::string name;
};

/// A LocalProblem whose constraints are folded in through the log-cosh penalty.
class PenalizedProblem {
 public:
  explicit PenalizedProblem(LocalProblem base);

  const LocalProblem& base() const { return base_; }
  int dim() const { return base_.dim; }

 private:
  LocalProblem base_;
};

/// g(u) = log((e^u + e^-u)/2) for u > 0 and 0 otherwise. Finite for every finite u.
double penalty_g(double u);
/// g'(u) = tanh(u) for u > 0 and 0 otherwise.
double penalty_g_prime(double u);

double penalty_value(const PenalizedProblem& p, const Vector& z);
Vector penalty_grad(const PenalizedProblem& p, const Vector& z);
/// f(z) + r * psi(z). Requires r >= 1.
Vector penalized_gradient(const PenalizedProblem& p, const Vector& z, double r);

/// Largest constraint value; <= 0 means z is feasible for this agent.
double max_constraint(const PenalizedProblem& p, const Vector& z);

// Constraint builders --------------------------------------------------------

/// c(z) = <coeffs, z> + offset.
ConstraintFn affine_constraint(Vector coeffs, double offset, std::string name = {});

/// The pair {c <= 0, -c <= 0} that encodes the equality c(z) = 0.
std::vector<ConstraintFn> equality_as_inequalities(const ConstraintFn& c);

// Sampled checks of the declared constants ----------------------------------

/// Axis-aligned box used to sample test points.
struct SampleBox {
  Vector lower;
  Vector upper;

  Vector sample(std::mt19937_64& rng) const;
};

struct BoundCheck {
  bool ok = true;
  double worst_gradient_ratio = 0.0;   // max sampled ||grad c|| / grad_bound
  double worst_lipschitz_ratio = 0.0;  // max sampled difference quotient / lipschitz_bound
  std::string message;
};

/// Samples `samples` points (and pairs) in `box` and compares them against the
/// declared grad_bound and lipschitz_bound of every constraint.
BoundCheck verify_declared_bounds(const LocalProblem& p, const SampleBox& box, int samples,
                                  std::mt19937_64& rng);

/// Largest relative disagreement between objective_grad and a central finite
/// difference of objective_value over `samples` random points of `box`.
double objective_gradient_mismatch(const LocalProblem& p, const SampleBox& box, int samples,
                                   std::mt19937_64& rng, double step = 1e-6);

}  // namespace pushsum
