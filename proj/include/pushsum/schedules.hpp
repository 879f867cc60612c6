#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

namespace pushsum {

using Round = std::uint64_t;

/// Scale factors of the power-law family: a_t = step_scale / (t+1)^(0.5+b),
/// r_t = max(1, penalty_scale * (t+1)^(0.25 b)). Positive constant factors do
/// not change any of the summability or growth conditions on (a_t, r_t).
struct PowerLawScales {
  double step_scale = 1.0;
  double penalty_scale = 1.0;
};

/// Step-size and penalty-parameter sequences (a_t, r_t).
class ParamSchedule {
 public:
  enum class Family { PowerLaw, Custom };

  ParamSchedule(std::function<double(Round)> step, std::function<double(Round)> penalty,
                Family family, double exponent_b = 0.0, PowerLawScales scales = {});

  double step(Round t) const { return step_(t); }
  double penalty(Round t) const { return penalty_(t); }

  Family family() const { return family_; }
  /// The b of a PowerLaw schedule; meaningless for Custom.
  double exponent_b() const { return b_; }
  const PowerLawScales& scales() const { return scales_; }
  std::string describe() const;

 private:
  std::function<double(Round)> step_;
  std::function<double(Round)> penalty_;
  Family family_;
  double b_;
  PowerLawScales scales_;
};

/// Exact verdicts on the step/penalty conditions for the power-law pair with exponent b.
struct AnalyticVerdict {
  bool monotone = true;           // (i)   a_t nonincreasing
  bool step_sum_diverges = true;  // (ii)  sum a_t = infinity      iff 0.5 + b <= 1
  bool tail_summable = true;      // (iii) sum a_t^2 r_t^3 < inf   iff 1.25 b > 0
  bool increment_small = true;    // (iv)  r_{t+1} - r_t = o(a_t)  iff b < 0.4
  bool penalty_unbounded = true;  //       r_t -> infinity         iff b > 0

  bool all() const {
    return monotone && step_sum_diverges && tail_summable && increment_small && penalty_unbounded;
  }
  /// Human-readable list of failing clauses, empty when all hold.
  std::string failures() const;
};

AnalyticVerdict analytic_power_law_verdict(double b);

/// Power-law schedule a_t = (t+1)^-(0.5+b), r_t = max(1, (t+1)^(0.25 b)).
/// Throws ValidationError unless 0 < b < 0.4, naming the failing clause.
ParamSchedule power_law_schedule(double b, PowerLawScales scales = {});

/// a_t = step_scale (t+1)^-step_exponent, r_t = max(1, penalty_scale (t+1)^penalty_exponent).
/// No validation beyond finiteness: use certify_schedule to judge it.
ParamSchedule custom_power_schedule(double step_scale, double step_exponent, double penalty_scale,
                                    double penalty_exponent);

struct CertOptions {
  /// Clause (ii): the sum of a_t over the last decade must be at least this
  /// fraction of the sum over the decade before it.
  double divergence_floor = 0.5;
  /// Clause (iv): max over the last decade of (r_{t+1} - r_t) / a_t.
  double increment_tolerance = 0.05;
};

struct ClauseResult {
  bool pass = false;
  std::string detail;
};

struct CertReport {
  Round horizon = 0;
  ClauseResult monotone;         // (i)
  ClauseResult divergence;       // (ii)
  ClauseResult summability;      // (iii)
  ClauseResult increment;        // (iv)
  ClauseResult penalty_floor;    // r_t >= 1 on every sampled round
  std::optional<AnalyticVerdict> analytic;

  /// For PowerLaw the analytic verdict decides; otherwise the numeric clauses do.
  bool accepted() const;
  bool numeric_pass() const;
  nlohmann::json to_json() const;
};

/// Finite-horizon certification of a schedule. Requires horizon >= 1000.
CertReport certify_schedule(const ParamSchedule& s, Round horizon, const CertOptions& opts = {});

}  // namespace pushsum
