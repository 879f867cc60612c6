#include "pushsum/schedules.hpp"

#include "pushsum/errors.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

namespace pushsum {

ParamSchedule::ParamSchedule(std::function<double(Round)> step, std::function<double(Round)> penalty,
                             Family family, double exponent_b, PowerLawScales scales)
    : step_(std::move(step)),
      penalty_(std::move(penalty)),
      family_(family),
      b_(exponent_b),
      scales_(scales) {}

std::string ParamSchedule::describe() const {
  if (family_ == Family::PowerLaw) {
    return fmt::format("power-law(b={}, step_scale={}, penalty_scale={})", b_, scales_.step_scale,
                       scales_.penalty_scale);
  }
  return "custom";
}

std::string AnalyticVerdict::failures() const {
  std::vector<std::string> out;
  if (!monotone) out.emplace_back("(i) a_t nonincreasing");
  if (!step_sum_diverges) out.emplace_back("(ii) sum of a_t diverges");
  if (!penalty_unbounded) out.emplace_back("r_t -> infinity");
  if (!tail_summable) out.emplace_back("(iii) sum of a_t^2 r_t^3 finite");
  if (!increment_small) out.emplace_back("(iv) r_{t+1} - r_t = o(a_t)");
  return fmt::format("{}", fmt::join(out, "; "));
}

AnalyticVerdict analytic_power_law_verdict(double b) {
  AnalyticVerdict v;
  // a_t ~ t^-(0.5+b), r_t ~ t^(0.25b), a_t^2 r_t^3 ~ t^-(1+1.25b),
  // (r_{t+1}-r_t)/a_t ~ t^(1.25b-0.5).
  v.monotone = 0.5 + b >= 0.0;
  v.step_sum_diverges = 0.5 + b <= 1.0;
  v.penalty_unbounded = b > 0.0;
  v.tail_summable = 1.25 * b > 0.0;
  v.increment_small = 1.25 * b - 0.5 < 0.0;
  return v;
}

ParamSchedule power_law_schedule(double b, PowerLawScales scales) {
  if (!std::isfinite(b)) throw ValidationError("power-law exponent b must be finite");
  if (!(b > 0.0 && b < 0.4)) {
    const auto verdict = analytic_power_law_verdict(b);
    throw ValidationError(fmt::format(
        "power-law exponent b = {} is outside (0, 0.4); the step-size conditions fail on clause {}", b,
        verdict.all() ? std::string("bounds of the family") : verdict.failures()));
  }
  if (!(scales.step_scale > 0.0) || !(scales.penalty_scale > 0.0) ||
      !std::isfinite(scales.step_scale) || !std::isfinite(scales.penalty_scale)) {
    throw ValidationError("power-law step_scale and penalty_scale must be positive and finite");
  }
  const double step_exp = 0.5 + b;
  const double pen_exp = 0.25 * b;
  return ParamSchedule(
      [step_exp, s = scales.step_scale](Round t) {
        return s * std::pow(static_cast<double>(t) + 1.0, -step_exp);
      },
      [pen_exp, s = scales.penalty_scale](Round t) {
        return std::max(1.0, s * std::pow(static_cast<double>(t) + 1.0, pen_exp));
      },
      ParamSchedule::Family::PowerLaw, b, scales);
}

ParamSchedule custom_power_schedule(double step_scale, double step_exponent, double penalty_scale,
                                    double penalty_exponent) {
  for (double v : {step_scale, step_exponent, penalty_scale, penalty_exponent}) {
    if (!std::isfinite(v)) throw ValidationError("custom schedule parameters must be finite");
  }
  if (step_scale < 0.0) throw ValidationError("custom schedule step_scale must be >= 0");
  return ParamSchedule(
      [step_scale, step_exponent](Round t) {
        return step_scale * std::pow(static_cast<double>(t) + 1.0, -step_exponent);
      },
      [penalty_scale, penalty_exponent](Round t) {
        return std::max(1.0, penalty_scale * std::pow(static_cast<double>(t) + 1.0, penalty_exponent));
      },
      ParamSchedule::Family::Custom);
}

bool CertReport::numeric_pass() const {
  return monotone.pass && divergence.pass && summability.pass && increment.pass && penalty_floor.pass;
}

bool CertReport::accepted() const {
  if (analytic) return analytic->all();
  return numeric_pass();
}

nlohmann::json CertReport::to_json() const {
  auto clause = [](const ClauseResult& c) {
    return nlohmann::json{{"pass", c.pass}, {"detail", c.detail}};
  };
  nlohmann::json j{{"horizon", horizon},
                   {"accepted", accepted()},
                   {"numeric",
                    {{"i_monotone", clause(monotone)},
                     {"ii_divergence", clause(divergence)},
                     {"iii_summability", clause(summability)},
                     {"iv_increment", clause(increment)},
                     {"penalty_at_least_one", clause(penalty_floor)}}}};
  if (analytic) {
    j["analytic"] = {{"i_monotone", analytic->monotone},
                     {"ii_divergence", analytic->step_sum_diverges},
                     {"iii_summability", analytic->tail_summable},
                     {"iv_increment", analytic->increment_small},
                     {"penalty_unbounded", analytic->penalty_unbounded},
                     {"failures", analytic->failures()}};
  } else {
    j["analytic"] = nullptr;
  }
  return j;
}

CertReport certify_schedule(const ParamSchedule& s, Round horizon, const CertOptions& opts) {
  if (horizon < 1000) {
    throw std::invalid_argument(fmt::format("certify_schedule needs horizon >= 1000, got {}", horizon));
  }
  CertReport rep;
  rep.horizon = horizon;

  const Round decade_start = horizon / 10;
  const Round prev_decade_start = horizon / 100;

  // (i) and the r_t >= 1 floor over the whole horizon; sums for (ii) on the fly.
  rep.monotone.pass = true;
  rep.penalty_floor.pass = true;
  double last_decade = 0.0;
  double prev_decade = 0.0;
  double prev_step = s.step(0);
  for (Round t = 0; t < horizon; ++t) {
    const double a = t == 0 ? prev_step : s.step(t);
    if (t > 0 && a > prev_step && rep.monotone.pass) {
      rep.monotone.pass = false;
      rep.monotone.detail = fmt::format("a_{} = {} > a_{} = {}", t, a, t - 1, prev_step);
    }
    if (!(a >= 0.0) && rep.monotone.pass) {
      rep.monotone.pass = false;
      rep.monotone.detail = fmt::format("a_{} = {} is negative", t, a);
    }
    prev_step = a;
    const double r = s.penalty(t);
    if (!(r >= 1.0) && rep.penalty_floor.pass) {
      rep.penalty_floor.pass = false;
      rep.penalty_floor.detail = fmt::format("r_{} = {} < 1", t, r);
    }
    if (t >= decade_start) {
      last_decade += a;
    } else if (t >= prev_decade_start) {
      prev_decade += a;
    }
  }
  if (rep.monotone.pass) rep.monotone.detail = "a_t nonincreasing on [0, horizon)";
  if (rep.penalty_floor.pass) rep.penalty_floor.detail = "r_t >= 1 on [0, horizon)";

  // (ii) a divergent power law keeps adding at least as much per decade.
  rep.divergence.pass = last_decade > 0.0 && last_decade >= opts.divergence_floor * prev_decade;
  rep.divergence.detail = fmt::format("last-decade sum {} vs previous-decade sum {} (floor ratio {})",
                                      last_decade, prev_decade, opts.divergence_floor);

  // (iii) local decay exponent of a_t^2 r_t^3 over the last decade.
  auto term = [&](Round t) {
    const double a = s.step(t);
    const double r = s.penalty(t);
    return a * a * r * r * r;
  };
  const Round t1 = decade_start;
  const Round t2 = horizon - 1;
  const double s1 = term(t1);
  const double s2 = term(t2);
  if (s1 == 0.0 && s2 == 0.0) {
    rep.summability.pass = true;
    rep.summability.detail = "a_t^2 r_t^3 vanishes on the last decade";
  } else if (s2 <= 0.0 || s1 <= 0.0) {
    rep.summability.pass = false;
    rep.summability.detail = "a_t^2 r_t^3 not positive on the last decade";
  } else {
    const double p = std::log(s1 / s2) / std::log((static_cast<double>(t2) + 1.0) / (static_cast<double>(t1) + 1.0));
    rep.summability.pass = p > 1.0;
    rep.summability.detail = fmt::format("estimated decay exponent {} (needs > 1)", p);
  }

  // (iv) (r_{t+1} - r_t) / a_t over the last decade.
  double worst = 0.0;
  for (Round t = decade_start; t + 1 < horizon; ++t) {
    const double dr = s.penalty(t + 1) - s.penalty(t);
    const double a = s.step(t);
    double ratio = 0.0;
    if (a > 0.0) {
      ratio = dr / a;
    } else if (dr != 0.0) {
      ratio = std::numeric_limits<double>::infinity();
    }
    worst = std::max(worst, ratio);
  }
  rep.increment.pass = worst < opts.increment_tolerance;
  rep.increment.detail = fmt::format("max last-decade (r_(t+1)-r_t)/a_t = {} (tolerance {})", worst,
                                     opts.increment_tolerance);

  if (s.family() == ParamSchedule::Family::PowerLaw) {
    rep.analytic = analytic_power_law_verdict(s.exponent_b());
  }
  return rep;
}

}  // namespace pushsum
