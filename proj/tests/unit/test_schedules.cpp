#include "pushsum/errors.hpp"
#include "pushsum/schedules.hpp"

#include <doctest.h>

#include <string>

using namespace pushsum;

TEST_CASE("power-law values match high-precision references") {
  const auto s = power_law_schedule(0.2);
  CHECK(s.step(0) == 1.0);
  CHECK(s.penalty(0) == 1.0);
  CHECK(s.step(99) == doctest::Approx(0.039810717055349733219).epsilon(1e-14));
  CHECK(s.penalty(99) == doctest::Approx(1.2589254117941672265).epsilon(1e-14));

  const auto scaled = power_law_schedule(0.1, {5.0, 15.0});
  CHECK(scaled.step(0) == 5.0);
  CHECK(scaled.step(999) == doctest::Approx(0.079244659623055686415).epsilon(1e-14));
  CHECK(scaled.penalty(999) == doctest::Approx(17.827533411555276737).epsilon(1e-14));
}

TEST_CASE("penalty never drops below one") {
  const auto s = power_law_schedule(0.1, {1.0, 0.01});
  for (Round t : {Round{0}, Round{10}, Round{1000000}}) CHECK(s.penalty(t) >= 1.0);
}

TEST_CASE("analytic verdict follows the exponent conditions") {
  CHECK(analytic_power_law_verdict(0.2).all());
  CHECK(analytic_power_law_verdict(0.39).all());
  const auto at_edge = analytic_power_law_verdict(0.4);
  CHECK_FALSE(at_edge.increment_small);
  CHECK(at_edge.step_sum_diverges);
  const auto past = analytic_power_law_verdict(0.6);
  CHECK_FALSE(past.step_sum_diverges);
  CHECK_FALSE(past.increment_small);
  CHECK_FALSE(analytic_power_law_verdict(0.0).penalty_unbounded);
}

TEST_CASE("power-law construction rejects exponents outside the admissible range") {
  for (double b : {0.0, 0.4, 0.5, -0.1}) {
    CHECK_THROWS_AS(power_law_schedule(b), ValidationError);
  }
  try {
    power_law_schedule(0.5);
    FAIL("expected rejection");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("(iv)") != std::string::npos);
  }
  CHECK_THROWS_AS(power_law_schedule(0.2, {0.0, 1.0}), ValidationError);
}

TEST_CASE("certification accepts admissible exponents") {
  for (double b : {0.1, 0.2, 0.39}) {
    const auto rep = certify_schedule(power_law_schedule(b), 100000);
    CHECK(rep.accepted());
    CHECK(rep.monotone.pass);
    CHECK(rep.divergence.pass);
    CHECK(rep.penalty_floor.pass);
  }
}

TEST_CASE("numeric certification rejects a custom schedule whose penalty outgrows the step") {
  // a_t = (t+1)^-0.9, r_t = (t+1)^0.5: increments ~ 0.5 t^-0.5 dwarf a_t.
  const auto rep = certify_schedule(custom_power_schedule(1.0, 0.9, 1.0, 0.5), 100000);
  CHECK_FALSE(rep.accepted());
  CHECK_FALSE(rep.increment.pass);
}

TEST_CASE("numeric certification flags a summable step sequence") {
  const auto rep = certify_schedule(custom_power_schedule(1.0, 2.0, 1.0, 0.1), 100000);
  CHECK_FALSE(rep.divergence.pass);
  CHECK_FALSE(rep.accepted());
}

TEST_CASE("zero step size fails the divergence clause") {
  const auto rep = certify_schedule(custom_power_schedule(0.0, 0.0, 1.0, 0.0), 1000);
  CHECK_FALSE(rep.divergence.pass);
}

TEST_CASE("certification report serializes every clause") {
  const auto j = certify_schedule(power_law_schedule(0.2), 1000).to_json();
  CHECK(j.at("accepted").get<bool>());
  CHECK(j.at("numeric").contains("iv_increment"));
  CHECK(j.at("analytic").at("iv_increment").get<bool>());
  CHECK_THROWS(certify_schedule(power_law_schedule(0.2), 10));
}

TEST_CASE("power-law shaped custom schedule with b = 0.5 fails the increment clause") {
  const auto rep = certify_schedule(custom_power_schedule(1.0, 1.0, 1.0, 0.125), 1000000);
  CHECK_FALSE(rep.increment.pass);
  CHECK_FALSE(rep.accepted());
}

TEST_CASE("steps are nonincreasing and penalties at least one on sampled rounds") {
  const auto s = power_law_schedule(0.3, {2.0, 0.5});
  for (Round t = 0; t < 5000; ++t) {
    CHECK(s.step(t + 1) <= s.step(t));
    CHECK(s.penalty(t) >= 1.0);
  }
}
