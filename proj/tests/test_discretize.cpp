// Copyright 2026 The ssmprune Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"

using namespace ssmprune;
using fixtures::cd;

namespace {

CtLayerd ct1(cd lambda, double delta) {
  CtLayerd ct;
  ct.lambda = CVector<double>::Constant(1, lambda);
  ct.b = CMatrix<double>::Constant(1, 1, 1.0);
  ct.c_fwd = CMatrix<double>::Constant(1, 1, 1.0);
  ct.d = RMatrix<double>::Zero(1, 1);
  ct.delta = RVector<double>::Constant(1, delta);
  return ct;
}

// (e^z - 1)/lambda from the full Taylor series, summed until terms vanish.
cd reference_gain(cd lambda, double delta) {
  const cd z = lambda * delta;
  cd term = delta, sum = 0;
  for (int k = 1; k < 60; ++k) {
    sum += term;
    term *= z / double(k + 1);
  }
  return sum;
}

}  // namespace

TEST_CASE("zoh of lambda = -1 with delta = ln 2") {
  const auto dt = zoh_discretize(ct1(-1.0, std::log(2.0)));
  CHECK(std::abs(dt.lambda_bar(0) - cd(0.5, 0)) < 1e-15);
  CHECK(std::abs(dt.b_bar(0, 0) - cd(0.5, 0)) < 1e-15);
}

TEST_CASE("discrete pole modulus depends only on the real part") {
  const auto dt = zoh_discretize(ct1({-0.5, 3.0}, 0.1));
  CHECK(std::abs(dt.lambda_bar(0)) == doctest::Approx(0.951229424500714).epsilon(1e-14));
  CHECK(std::abs(dt.lambda_bar(0)) == doctest::Approx(std::exp(-0.05)).epsilon(1e-15));
}

TEST_CASE("near-zero pole uses the series and stays accurate") {
  const auto dt = zoh_discretize(ct1(-1e-12, 0.01));
  CHECK(fixtures::rel_err(dt.b_bar(0, 0).real(), 0.01) < 1e-12);
  CHECK(std::abs(dt.b_bar(0, 0) - reference_gain(-1e-12, 0.01)) < 1e-18);

  // Either side of the switch the two formulas agree.
  for (double mag : {5e-7, 2e-6, 1e-4}) {
    const cd lambda(-mag * 0.6, mag * 0.8);
    const cd g = zoh_input_gain(lambda, 1.0);
    CHECK(std::abs(g - reference_gain(lambda, 1.0)) < 1e-10);
  }
}

TEST_CASE("zoh copies C and D and keeps conjugate symmetry") {
  SyntheticSpec spec{1, 6, 2, 3, 1.0, Activation::kRelu};
  const auto ct = synthetic_ct_layers(spec).front();
  const auto dt = zoh_discretize(ct);
  CHECK(dt.c_fwd == ct.c_fwd);
  CHECK(dt.d == ct.d);
  for (const auto& [i, j] : *dt.conj_pairs) {
    CHECK(std::abs(dt.lambda_bar(i) - std::conj(dt.lambda_bar(j))) < 1e-15);
    CHECK((dt.b_bar.row(i) - dt.b_bar.row(j).conjugate()).norm() < 1e-14);
  }
  for (Index i = 0; i < ct.state_dim(); ++i)
    CHECK(std::abs(std::abs(dt.lambda_bar(i)) - std::exp(ct.lambda(i).real() * ct.delta(i))) <= 2.3e-16);
}

TEST_CASE("zoh rejects non-Hurwitz poles") {
  try {
    zoh_discretize(ct1({0.1, 0}, 0.1));
    FAIL("expected NonHurwitz");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNonHurwitz);
    CHECK(e.index() == 0);
  }
}

TEST_CASE("stability margins") {
  auto m = check_dt_stability(fixtures::siso1(0.5, 1, 1));
  CHECK(m.margin(0) == doctest::Approx(0.5));
  CHECK(m.stable());

  auto two = fixtures::diag_layer({0.999, 0.2}, CMatrix<double>::Ones(2, 1), CMatrix<double>::Ones(1, 2));
  m = check_dt_stability(two);
  CHECK(m.margin(0) == doctest::Approx(0.001).epsilon(1e-12));
  CHECK(m.margin(1) == doctest::Approx(0.8));
  CHECK(m.stable());

  m = check_dt_stability(fixtures::siso1(1.0, 1, 1));
  CHECK(m.margin(0) == 0.0);
  CHECK_FALSE(m.stable());
}

TEST_CASE("rescaling timescales") {
  CtLayerd ct = ct1(-1.0, 0.01);
  CHECK(rescale_timescales(ct, 2.0).delta(0) == doctest::Approx(0.02));

  const auto same = rescale_timescales(ct, 1.0);
  CHECK(same.delta == ct.delta);
  CHECK(same.lambda == ct.lambda);
  CHECK(same.b == ct.b);

  CHECK(rescale_timescales(rescale_timescales(ct, 0.5), 2.0).delta(0) == doctest::Approx(0.01).epsilon(1e-15));
  CHECK(rescale_timescales(rescale_timescales(ct, 3.0), 0.7).delta(0) ==
        doctest::Approx(rescale_timescales(ct, 2.1).delta(0)).epsilon(1e-15));

  CHECK_THROWS_AS(rescale_timescales(ct, 0.0), Error);
  try {
    rescale_timescales(ct, -1.0);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNonPositiveRatio);
  }
}

TEST_CASE("random Hurwitz poles stay inside the unit disk") {
  Rng rng(5);
  for (int k = 0; k < 2000; ++k) {
    const cd lambda(-std::exp(rng.uniform(-12.0, 3.0)), rng.uniform(-100.0, 100.0));
    const double delta = std::exp(rng.uniform(-10.0, 1.0));
    const auto dt = zoh_discretize(ct1(lambda, delta));
    REQUIRE(std::abs(dt.lambda_bar(0)) < 1.0);
  }
}
