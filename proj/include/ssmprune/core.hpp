// Copyright 2026 The ssmprune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Layer validation, conjugate-pair bookkeeping and multi-SISO assembly.

#ifndef SSMPRUNE_CORE_HPP
#define SSMPRUNE_CORE_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "ssmprune/types.hpp"

namespace ssmprune {

/// Default relative tolerance used to decide whether two poles are conjugates.
inline constexpr double kPairingTolerance = 1e-9;

struct Violation {
  std::string field;
  Index index = -1;
  std::string observed;
  std::string message;
};

using ValidationReport = std::vector<Violation>;

namespace detail {

template <typename T>
std::string to_text(const T& v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

template <typename Scalar>
bool conj_close(const std::complex<Scalar>& a, const std::complex<Scalar>& b, Scalar tol) {
  const Scalar diff = std::abs(a - std::conj(b));
  const Scalar scale = std::max(std::abs(a), std::abs(b));
  return diff <= tol * scale;
}

template <typename Derived>
bool conj_rows_close(const Eigen::MatrixBase<Derived>& a, const Eigen::MatrixBase<Derived>& b,
                     typename Derived::RealScalar tol) {
  const auto diff = (a - b.conjugate()).norm();
  const auto scale = std::max(a.norm(), b.norm());
  return diff <= tol * scale;
}

template <typename Scalar, typename Layer>
void check_dimensions(const Layer& layer, const CMatrix<Scalar>& b, ValidationReport& report) {
  const Index n = layer.state_dim();
  const Index h = layer.channels();
  auto bad = [&](const std::string& field, const std::string& got) {
    report.push_back({field, -1, got, field + " has inconsistent shape " + got});
  };
  auto shape = [](Index r, Index c) { return std::to_string(r) + "x" + std::to_string(c); };
  if (b.rows() != n) bad("b", shape(b.rows(), b.cols()));
  if (b.cols() != h) bad("b", shape(b.rows(), b.cols()));
  if (layer.c_fwd.cols() != n) bad("c_fwd", shape(layer.c_fwd.rows(), layer.c_fwd.cols()));
  if (layer.c_bwd && (layer.c_bwd->rows() != h || layer.c_bwd->cols() != n))
    bad("c_bwd", shape(layer.c_bwd->rows(), layer.c_bwd->cols()));
  if (layer.d.rows() != h || layer.d.cols() != h) bad("d", shape(layer.d.rows(), layer.d.cols()));
  if (layer.arch.kind == Architecture::Kind::kMultiSiso &&
      layer.arch.siso_order * layer.arch.channels != n)
    bad("arch", "MultiSISO(" + std::to_string(layer.arch.siso_order) + "," +
                    std::to_string(layer.arch.channels) + ")");
}

template <typename Scalar, typename Layer>
void check_pairs(const Layer& layer, const CVector<Scalar>& poles, const CMatrix<Scalar>& b,
                 Scalar tol, ValidationReport& report) {
  if (!layer.conj_pairs) return;
  const Index n = layer.state_dim();
  std::vector<int> seen(static_cast<size_t>(n), 0);
  for (const auto& [i, j] : *layer.conj_pairs) {
    if (i < 0 || j < 0 || i >= n || j >= n || i == j) {
      report.push_back({"conj_pairs", i, to_text(j), "pair index out of range"});
      continue;
    }
    ++seen[static_cast<size_t>(i)];
    ++seen[static_cast<size_t>(j)];
    if (!conj_close(poles(i), poles(j), tol))
      report.push_back({"conj_pairs", i, to_text(poles(i)),
                        "pole " + std::to_string(i) + " is not conjugate to pole " + std::to_string(j)});
    if (b.rows() == n && !conj_rows_close(b.row(i), b.row(j), tol))
      report.push_back({"conj_pairs", i, "b",
                        "rows of b are not conjugate for pair (" + std::to_string(i) + ", " + std::to_string(j) + ")"});
    if (layer.c_fwd.cols() == n && !conj_rows_close(layer.c_fwd.col(i), layer.c_fwd.col(j), tol))
      report.push_back({"conj_pairs", i, "c_fwd",
                        "columns of c_fwd are not conjugate for pair (" + std::to_string(i) + ", " + std::to_string(j) + ")"});
    if (layer.c_bwd && layer.c_bwd->cols() == n &&
        !conj_rows_close(layer.c_bwd->col(i), layer.c_bwd->col(j), tol))
      report.push_back({"conj_pairs", i, "c_bwd",
                        "columns of c_bwd are not conjugate for pair (" + std::to_string(i) + ", " + std::to_string(j) + ")"});
  }
  for (Index i = 0; i < n; ++i)
    if (seen[static_cast<size_t>(i)] > 1)
      report.push_back({"conj_pairs", i, std::to_string(seen[static_cast<size_t>(i)]),
                        "state appears in more than one pair"});
}

}  // namespace detail

/// Checks every invariant of a continuous-time layer. Empty report means valid.
template <typename Scalar>
ValidationReport validate_layer(const CtLayer<Scalar>& layer, Scalar tol = Scalar(kPairingTolerance)) {
  ValidationReport report;
  detail::check_dimensions<Scalar>(layer, layer.b, report);
  if (layer.delta.size() != layer.state_dim())
    report.push_back({"delta", -1, std::to_string(layer.delta.size()), "delta length differs from state dimension"});
  for (Index i = 0; i < layer.state_dim(); ++i) {
    const auto re = layer.lambda(i).real();
    if (!std::isfinite(re) || !std::isfinite(layer.lambda(i).imag()))
      report.push_back({"lambda", i, detail::to_text(layer.lambda(i)), "lambda[" + std::to_string(i) + "] is not finite"});
    else if (!(re < 0))
      report.push_back({"lambda", i, detail::to_text(layer.lambda(i)), "Re(lambda[" + std::to_string(i) + "]) >= 0"});
  }
  for (Index i = 0; i < layer.delta.size(); ++i)
    if (!(layer.delta(i) > 0) || !std::isfinite(layer.delta(i)))
      report.push_back({"delta", i, detail::to_text(layer.delta(i)), "delta[" + std::to_string(i) + "] <= 0"});
  detail::check_pairs<Scalar>(layer, layer.lambda, layer.b, tol, report);
  if (layer.conj_pairs && layer.delta.size() == layer.state_dim()) {
    for (const auto& [i, j] : *layer.conj_pairs) {
      if (i < 0 || j < 0 || i >= layer.state_dim() || j >= layer.state_dim()) continue;
      if (layer.delta(i) != layer.delta(j))
        report.push_back({"delta", i, detail::to_text(layer.delta(j)),
                          "conjugate pair (" + std::to_string(i) + "," + std::to_string(j) + ") does not share delta"});
    }
  }
  return report;
}

/// Checks every invariant of a discrete-time layer. Empty report means valid.
template <typename Scalar>
ValidationReport validate_layer(const DtLayer<Scalar>& layer, Scalar tol = Scalar(kPairingTolerance)) {
  ValidationReport report;
  detail::check_dimensions<Scalar>(layer, layer.b_bar, report);
  for (Index i = 0; i < layer.state_dim(); ++i) {
    const auto mag = std::abs(layer.lambda_bar(i));
    if (!std::isfinite(mag))
      report.push_back({"lambda_bar", i, detail::to_text(layer.lambda_bar(i)),
                        "lambda_bar[" + std::to_string(i) + "] is not finite"});
    else if (!(mag < 1))
      report.push_back({"lambda_bar", i, detail::to_text(layer.lambda_bar(i)),
                        "|lambda_bar[" + std::to_string(i) + "]| >= 1"});
  }
  detail::check_pairs<Scalar>(layer, layer.lambda_bar, layer.b_bar, tol, report);
  return report;
}

inline std::string describe(const ValidationReport& report) {
  std::string out;
  for (const auto& v : report) {
    if (!out.empty()) out += "; ";
    out += v.message + " (observed " + v.observed + ")";
  }
  return out;
}

struct PairingResult {
  std::vector<IndexPair> pairs;
  std::vector<std::string> warnings;
};

/// Perfect matching of poles to their conjugates. Pairs are ordered by their
/// first index; ties between equidistant candidates go to the lower index.
template <typename Scalar>
PairingResult pair_conjugates(const CVector<Scalar>& poles, Scalar tol = Scalar(kPairingTolerance)) {
  const Index n = poles.size();
  PairingResult result;
  std::vector<bool> matched(static_cast<size_t>(n), false);
  for (Index i = 0; i < n; ++i) {
    if (matched[static_cast<size_t>(i)]) continue;
    Index best = -1;
    Scalar best_dist = std::numeric_limits<Scalar>::infinity();
    bool tie = false;
    for (Index j = 0; j < n; ++j) {
      if (j == i || matched[static_cast<size_t>(j)]) continue;
      if (!detail::conj_close(poles(i), poles(j), tol)) continue;
      const Scalar dist = std::abs(poles(i) - std::conj(poles(j)));
      if (dist < best_dist) {
        best = j;
        best_dist = dist;
        tie = false;
      } else if (dist == best_dist) {
        tie = true;
      }
    }
    if (best < 0)
      throw Error(ErrorCode::kUnpairedState, "state " + std::to_string(i) + " has no conjugate partner", i);
    if (tie)
      result.warnings.push_back("AmbiguousPairing: state " + std::to_string(i) +
                                " has equidistant partners; chose " + std::to_string(best));
    matched[static_cast<size_t>(i)] = true;
    matched[static_cast<size_t>(best)] = true;
    result.pairs.emplace_back(i, best);
  }
  return result;
}

template <typename Scalar>
PairingResult pair_conjugates(const DtLayer<Scalar>& layer, Scalar tol = Scalar(kPairingTolerance)) {
  return pair_conjugates<Scalar>(layer.lambda_bar, tol);
}

/// Pruning units of a layer: conjugate pairs when pairing metadata is present,
/// singleton states otherwise. Units are ordered by their lowest state index.
template <typename Layer>
std::vector<StateSet> state_units(const Layer& layer) {
  const Index n = layer.state_dim();
  std::vector<StateSet> units;
  if (!layer.conj_pairs) {
    for (Index i = 0; i < n; ++i) units.push_back({i});
    return units;
  }
  std::vector<bool> covered(static_cast<size_t>(n), false);
  std::vector<std::pair<Index, StateSet>> keyed;
  for (auto [i, j] : *layer.conj_pairs) {
    if (i > j) std::swap(i, j);
    keyed.push_back({i, {i, j}});
    covered[static_cast<size_t>(i)] = covered[static_cast<size_t>(j)] = true;
  }
  for (Index i = 0; i < n; ++i)
    if (!covered[static_cast<size_t>(i)]) keyed.push_back({i, {i}});
  std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  for (auto& k : keyed) units.push_back(std::move(k.second));
  return units;
}

/// Embeds h single-channel systems as one block-diagonal multi-channel layer.
/// System k drives only channel k.
template <typename Scalar>
DtLayer<Scalar> siso_block_to_mimo(std::span<const DtLayer<Scalar>> systems) {
  if (systems.empty()) throw Error(ErrorCode::kDimensionMismatch, "no SISO systems given");
  const Index h = static_cast<Index>(systems.size());
  const Index ns = systems.front().state_dim();
  const bool bidir = systems.front().bidirectional();
  for (Index k = 0; k < h; ++k) {
    const auto& s = systems[static_cast<size_t>(k)];
    if (s.channels() != 1 || s.b_bar.cols() != 1 || s.d.rows() != 1 || s.d.cols() != 1)
      throw Error(ErrorCode::kDimensionMismatch, "system " + std::to_string(k) + " is not single-channel", k);
    if (s.state_dim() != ns || s.b_bar.rows() != ns || s.c_fwd.cols() != ns)
      throw Error(ErrorCode::kDimensionMismatch, "system " + std::to_string(k) + " has a different order", k);
    if (s.bidirectional() != bidir)
      throw Error(ErrorCode::kDimensionMismatch, "mixed bidirectional and causal systems", k);
    for (Index i = 0; i < ns; ++i)
      if (!(std::abs(s.lambda_bar(i)) < 1))
        throw Error(ErrorCode::kUnstableState, "system " + std::to_string(k) + " is unstable", i);
  }
  const Index n = ns * h;
  DtLayer<Scalar> out;
  out.lambda_bar.resize(n);
  out.b_bar = CMatrix<Scalar>::Zero(n, h);
  out.c_fwd = CMatrix<Scalar>::Zero(h, n);
  if (bidir) out.c_bwd = CMatrix<Scalar>::Zero(h, n);
  out.d = RMatrix<Scalar>::Zero(h, h);
  out.b_fixed = systems.front().b_fixed;
  out.arch = Architecture::multi_siso(ns, h);
  bool all_paired = true;
  std::vector<IndexPair> pairs;
  for (Index k = 0; k < h; ++k) {
    const auto& s = systems[static_cast<size_t>(k)];
    const Index off = k * ns;
    out.lambda_bar.segment(off, ns) = s.lambda_bar;
    out.b_bar.block(off, k, ns, 1) = s.b_bar;
    out.c_fwd.block(k, off, 1, ns) = s.c_fwd;
    if (bidir) out.c_bwd->block(k, off, 1, ns) = *s.c_bwd;
    out.d(k, k) = s.d(0, 0);
    if (s.conj_pairs) {
      for (const auto& [i, j] : *s.conj_pairs) pairs.emplace_back(i + off, j + off);
    } else {
      all_paired = false;
    }
  }
  if (all_paired) out.conj_pairs = std::move(pairs);
  return out;
}

/// Inverse of siso_block_to_mimo for a single channel.
template <typename Scalar>
DtLayer<Scalar> extract_channel(const DtLayer<Scalar>& mimo, Index k) {
  if (mimo.arch.kind != Architecture::Kind::kMultiSiso)
    throw Error(ErrorCode::kDimensionMismatch, "layer is not a multi-SISO block");
  const Index ns = mimo.arch.siso_order;
  if (k < 0 || k >= mimo.arch.channels)
    throw Error(ErrorCode::kDimensionMismatch, "channel out of range", k);
  const Index off = k * ns;
  DtLayer<Scalar> s;
  s.lambda_bar = mimo.lambda_bar.segment(off, ns);
  s.b_bar = mimo.b_bar.block(off, k, ns, 1);
  s.c_fwd = mimo.c_fwd.block(k, off, 1, ns);
  if (mimo.c_bwd) s.c_bwd = mimo.c_bwd->block(k, off, 1, ns);
  s.d = mimo.d.block(k, k, 1, 1);
  s.b_fixed = mimo.b_fixed;
  s.arch = Architecture::multi_siso(ns, 1);
  if (mimo.conj_pairs) {
    std::vector<IndexPair> pairs;
    for (const auto& [i, j] : *mimo.conj_pairs)
      if (i >= off && i < off + ns) pairs.emplace_back(i - off, j - off);
    s.conj_pairs = std::move(pairs);
  }
  return s;
}

}  // namespace ssmprune

#endif  // SSMPRUNE_CORE_HPP
