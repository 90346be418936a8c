#include <doctest.h>

#include <cmath>
#include <limits>

#include "oracles.hpp"
#include "stefan/coeff.hpp"

using namespace stefan;
using oracle::pi;

namespace {

ProblemSpec base_spec() {
  ProblemSpec s;
  s.field = CoefficientField::constant(1.0, 0.5, 1.0);
  s.h0 = 1.0;
  s.u0 = cosine_profile(1.0);
  return s;
}

CoefficientField field_of(const char* alpha, const char* gamma, const char* beta, double T) {
  return CoefficientField::from_expressions(expr::parse(alpha), expr::parse(gamma), expr::parse(beta), T);
}

}  // namespace

TEST_CASE("constant field with cosine profile is valid") {
  const ValidationReport rep = validate(base_spec());
  CHECK(rep.ok());
  CHECK_NOTHROW(require_valid(base_spec()));
  CHECK(rep.r_checked >= 4.0);
}

TEST_CASE("profile not vanishing at h0") {
  ProblemSpec s = base_spec();
  s.u0 = [](double) { return 1.0; };
  CHECK(validate(s).has(ViolationKind::BoundaryMismatch));
  CHECK_THROWS_AS(require_valid(s), Error);
}

TEST_CASE("profile shape checks") {
  ProblemSpec s = base_spec();
  s.u0 = [](double r) { return r * (1.0 - r); };  // zero at origin, slope 1
  const ValidationReport rep = validate(s);
  CHECK(rep.has(ViolationKind::InitialNotPositive));
  CHECK(rep.has(ViolationKind::InitialSlopeNonzero));
}

TEST_CASE("declared period disagrees with the expression") {
  ProblemSpec s = base_spec();
  s.field = field_of("1 + sin(2*pi*t/0.7)", "0.5", "1", 1.0);
  const ValidationReport rep = validate(s);
  CHECK(rep.has(ViolationKind::PeriodicityViolation));
  try {
    require_valid(s);
    FAIL("accepted a non-periodic field");
  } catch (const Error& e) {
    CHECK(exit_code_for(e.code()) == 2);
  }
}

TEST_CASE("periodicity verdict does not depend on the lattice phase") {
  for (const char* alpha : {"1 + sin(2*pi*t/0.7)", "1 + 0.5*sin(2*pi*t)", "1.5 + cos(4*pi*t)*exp(-r)"}) {
    ProblemSpec s = base_spec();
    s.field = field_of(alpha, "0.2", "1", 1.0);
    ValidationOptions shifted;
    shifted.phase_offset = 1.0 / 7.0;
    const bool a = validate(s).has(ViolationKind::PeriodicityViolation);
    const bool b = validate(s, shifted).has(ViolationKind::PeriodicityViolation);
    const bool c = validate(s).has(ViolationKind::PeriodicityViolation);
    CHECK(a == b);
    CHECK(a == c);
  }
}

TEST_CASE("non-finite coefficient") {
  ProblemSpec s = base_spec();
  s.field = CoefficientField(
      [](double, double r) { return r > 2.0 ? std::numeric_limits<double>::quiet_NaN() : 1.0; },
      [](double, double) { return 0.5; }, [](double, double) { return 1.0; }, 1.0);
  CHECK(validate(s).has(ViolationKind::NonFiniteCoefficient));
  try {
    require_valid(s);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFiniteCoefficient);
  }
}

TEST_CASE("declared envelope that does not enclose the coefficient") {
  ProblemSpec s = base_spec();
  EnvelopeSet env;
  env.alpha = {[](double) { return 0.5; }, [](double) { return 0.9; }};
  env.gamma = {[](double) { return 0.5; }, [](double) { return 0.5; }};
  env.beta = {[](double) { return 1.0; }, [](double) { return 1.0; }};
  s.field = s.field.with_envelopes(env);
  const ValidationReport rep = validate(s);
  REQUIRE(rep.has(ViolationKind::EnvelopeViolation));
  try {
    require_valid(s);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EnvelopeViolation);
  }
}

TEST_CASE("non-positive birth rate or crowding is rejected, zero death rate is allowed") {
  ProblemSpec s = base_spec();
  s.field = CoefficientField::constant(1.0, 0.0, 1.0);
  CHECK(validate(s).ok());
  s.field = CoefficientField::constant(1.0, 0.5, 0.0);
  CHECK(validate(s).has(ViolationKind::NonPositiveEnvelope));
  s.field = CoefficientField::constant(0.0, 0.5, 1.0);
  CHECK(validate(s).has(ViolationKind::NonPositiveEnvelope));
}

TEST_CASE("parameter checks") {
  ProblemSpec s = base_spec();
  s.d = -1.0;
  CHECK(validate(s).has(ViolationKind::InvalidParameter));
  s = base_spec();
  s.N = 1;
  CHECK(validate(s).has(ViolationKind::InvalidParameter));
  s = base_spec();
  s.mu = 0.0;
  CHECK(validate(s).has(ViolationKind::InvalidParameter));
}

TEST_CASE("habitat classification of uniform-sign fields") {
  const HabitatReport fav = classify_habitat(CoefficientField::constant(1.5, 0.5, 1.0), 5.0, 32);
  CHECK(fav.favorable_fraction == 1.0);
  CHECK(fav.unfavorable_fraction == 0.0);
  CHECK(fav.classification == HabitatClass::Favorable);

  const HabitatReport unf = classify_habitat(CoefficientField::constant(0.5, 1.5, 1.0), 5.0, 32);
  CHECK(unf.unfavorable_fraction == 1.0);
  CHECK(unf.classification == HabitatClass::Unfavorable);
}

TEST_CASE("zero time mean is neutral") {
  const CoefficientField f = field_of("1 + sin(2*pi*t)", "1", "1", 1.0);
  CHECK(std::fabs(site_time_integral(f, 0.3)) < 1e-8);
  const HabitatReport rep = classify_habitat(f, 5.0, 32);
  CHECK(rep.favorable_fraction == 0.0);
  CHECK(rep.unfavorable_fraction == 0.0);
  CHECK(rep.classification == HabitatClass::Neutral);
}

TEST_CASE("habitat classification is invariant under a common shift of birth and death") {
  const CoefficientField f = field_of("1 + 0.8*cos(r) + 0.3*sin(2*pi*t)", "1", "1", 1.0);
  const CoefficientField g = field_of("1.7 + 0.8*cos(r) + 0.3*sin(2*pi*t)", "1.7", "1", 1.0);
  for (int N : {2, 3}) {
    const HabitatReport a = classify_habitat(f, 6.0, 41, N);
    const HabitatReport b = classify_habitat(g, 6.0, 41, N);
    CHECK(a.favorable_fraction == doctest::Approx(b.favorable_fraction).epsilon(1e-12));
    CHECK(a.unfavorable_fraction == doctest::Approx(b.unfavorable_fraction).epsilon(1e-12));
    CHECK(a.classification == b.classification);
  }
}

TEST_CASE("volume-weighted mean of a constant is that constant") {
  for (int N : {2, 3, 5}) {
    const HabitatReport rep = classify_habitat(CoefficientField::constant(1.3, 0.4, 1.0), 3.0, 17, N);
    CHECK(std::fabs(rep.mean_birth - 1.3) < 1e-10);
    CHECK(std::fabs(rep.mean_death - 0.4) < 1e-10);
  }
}

TEST_CASE("tabulated coefficients wrap in t and clamp in r") {
  // v(t, r) = t + 10 r on nodes t in {0, 0.5}, r in {0, 1}
  TabulatedFunction f({0.0, 0.5}, {0.0, 1.0}, {0.0, 10.0, 0.5, 10.5}, 1.0);
  CHECK(f(0.25, 0.5) == doctest::Approx(0.25 + 5.0));
  CHECK(f(1.25, 0.5) == doctest::Approx(f(0.25, 0.5)));
  CHECK(f(0.25, 7.0) == doctest::Approx(f(0.25, 1.0)));
  // between the last node and the period the table interpolates back to t = 0
  CHECK(f(0.75, 0.0) == doctest::Approx(0.25));
}

TEST_CASE("horizon rounding and default profile") {
  CHECK(round_horizon(10.2, 1.0) == 10.0);
  CHECK(round_horizon(0.1, 1.0) == 1.0);
  CHECK(round_horizon(7.0, 2.0) == doctest::Approx(8.0));
  const ProfileFn u = cosine_profile(2.0, 3.0);
  CHECK(u(0.0) == doctest::Approx(3.0));
  CHECK(std::fabs(u(2.0)) < 1e-15);
}

TEST_CASE("growth shift") {
  const CoefficientField f = field_of("1 + r", "0.5", "1", 1.0).shifted_growth(0.3);
  CHECK(f.growth(0.2, 1.0) == doctest::Approx(1.8));
}
