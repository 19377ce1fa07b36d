// Copyright 2026 The ssmprune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Zero-order-hold discretization and timescale handling.

#ifndef SSMPRUNE_DISCRETIZE_HPP
#define SSMPRUNE_DISCRETIZE_HPP

#include <cmath>
#include <complex>

#include "ssmprune/core.hpp"
#include "ssmprune/types.hpp"

namespace ssmprune {

/// Below this |lambda * delta| the input gain uses a Taylor series.
inline constexpr double kSeriesThreshold = 1e-6;

/// (e^{z} - 1) / lambda with z = lambda * delta, stable for z -> 0.
template <typename Scalar>
std::complex<Scalar> zoh_input_gain(const std::complex<Scalar>& lambda, Scalar delta) {
  const std::complex<Scalar> z = lambda * delta;
  if (std::abs(z) < Scalar(kSeriesThreshold)) {
    // 1 + z/2 + z^2/6 + z^3/24
    const std::complex<Scalar> series =
        Scalar(1) + z * (Scalar(1) / 2 + z * (Scalar(1) / 6 + z * (Scalar(1) / 24)));
    return series * delta;
  }
  return (std::exp(z) - Scalar(1)) / lambda;
}

template <typename Scalar>
DtLayer<Scalar> zoh_discretize(const CtLayer<Scalar>& ct) {
  const auto report = validate_layer(ct);
  for (const auto& v : report)
    if (v.field == "lambda") throw Error(ErrorCode::kNonHurwitz, v.message, v.index);
  if (!report.empty()) throw Error(ErrorCode::kValidationFailed, describe(report));

  const Index n = ct.state_dim();
  DtLayer<Scalar> dt;
  dt.lambda_bar.resize(n);
  dt.b_bar.resize(n, ct.b.cols());
  for (Index i = 0; i < n; ++i) {
    dt.lambda_bar(i) = std::exp(ct.lambda(i) * ct.delta(i));
    dt.b_bar.row(i) = zoh_input_gain(ct.lambda(i), ct.delta(i)) * ct.b.row(i);
  }
  dt.c_fwd = ct.c_fwd;
  dt.c_bwd = ct.c_bwd;
  dt.d = ct.d;
  dt.b_fixed = ct.b_fixed;
  dt.arch = ct.arch;
  dt.conj_pairs = ct.conj_pairs;
  dt.original_index = ct.original_index;
  return dt;
}

template <typename Scalar>
struct StabilityMargins {
  RVector<Scalar> margin;  // 1 - |lambda_bar[i]|

  Scalar min_margin() const { return margin.size() ? margin.minCoeff() : Scalar(1); }
  bool stable() const { return min_margin() > 0; }
};

template <typename Scalar>
StabilityMargins<Scalar> check_dt_stability(const DtLayer<Scalar>& dt) {
  StabilityMargins<Scalar> out;
  out.margin = (Scalar(1) - dt.lambda_bar.array().abs()).matrix();
  return out;
}

/// Adapts timescales to a new sampling rate; rate_ratio = f_train / f_new.
template <typename Scalar>
CtLayer<Scalar> rescale_timescales(const CtLayer<Scalar>& ct, Scalar rate_ratio) {
  if (!(rate_ratio > 0) || !std::isfinite(rate_ratio))
    throw Error(ErrorCode::kNonPositiveRatio, "rate ratio must be positive");
  CtLayer<Scalar> out = ct;
  out.delta *= rate_ratio;
  return out;
}

}  // namespace ssmprune

#endif  // SSMPRUNE_DISCRETIZE_HPP
