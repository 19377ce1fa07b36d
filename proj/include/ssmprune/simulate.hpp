// Copyright 2026 The ssmprune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Time-domain recursion, layer/model forward passes and transfer functions.

#ifndef SSMPRUNE_SIMULATE_HPP
#define SSMPRUNE_SIMULATE_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

#include "ssmprune/types.hpp"

namespace ssmprune {

template <typename Scalar>
Scalar activation_apply(Activation act, Scalar x) {
  switch (act) {
    case Activation::kGelu:
      return x * Scalar(0.5) * (Scalar(1) + std::erf(x / std::numbers::sqrt2_v<Scalar>));
    case Activation::kRelu:
      return x > 0 ? x : Scalar(0);
    case Activation::kIdentity:
      return x;
  }
  return x;
}

/// Output of the linear pass plus the information needed to account for the
/// free response beyond the simulated horizon.
template <typename Scalar>
struct LinearTrace {
  Signal<Scalar> y;
  CVector<Scalar> final_fwd;  // x_T of the causal pass, full state indexing
  CVector<Scalar> final_bwd;  // x_T of the reversed pass; empty if causal
  Scalar max_imag_ratio = 0;  // max |Im(Cx)| relative to max |Cx|
};

namespace detail {

template <typename Scalar>
std::vector<Index> active_states(Index n, const KeepMask* keep) {
  std::vector<Index> idx;
  idx.reserve(static_cast<size_t>(n));
  for (Index i = 0; i < n; ++i)
    if (!keep || (*keep)(i)) idx.push_back(i);
  return idx;
}

// One causal pass with the given output matrix; accumulates into y.
template <typename Scalar>
void causal_pass(const CVector<Scalar>& lam, const CMatrix<Scalar>& bbar, const CMatrix<Scalar>& c,
                 const Signal<Scalar>& u, bool reversed, Signal<Scalar>& y, CVector<Scalar>& x,
                 Scalar& max_imag, Scalar& max_abs) {
  const Index T = u.rows();
  const Index n = lam.size();
  x = CVector<Scalar>::Zero(n);
  CVector<Scalar> uk(u.cols());
  CVector<Scalar> out(c.rows());
  for (Index t = 0; t < T; ++t) {
    const Index k = reversed ? T - 1 - t : t;
    if (n > 0) {
      out.noalias() = c * x;
      for (Index ch = 0; ch < out.size(); ++ch) {
        y(k, ch) += out(ch).real();
        max_imag = std::max(max_imag, std::abs(out(ch).imag()));
        max_abs = std::max(max_abs, std::abs(out(ch)));
      }
      uk = u.row(k).transpose().template cast<std::complex<Scalar>>();
      x = lam.cwiseProduct(x) + bbar * uk;
    }
  }
}

}  // namespace detail

template <typename Scalar>
LinearTrace<Scalar> simulate_linear(const DtLayer<Scalar>& dt, const Signal<Scalar>& u,
                                    const KeepMask* keep = nullptr) {
  const Index h = dt.channels();
  const Index n = dt.state_dim();
  if (u.cols() != h)
    throw Error(ErrorCode::kChannelMismatch,
                "signal has " + std::to_string(u.cols()) + " channels, layer expects " + std::to_string(h));
  if (keep && keep->size() != n) throw Error(ErrorCode::kDimensionMismatch, "keep mask length differs from state dimension");
  if (!u.allFinite()) throw Error(ErrorCode::kInvalidArgument, "signal has non-finite entries");

  const auto idx = detail::active_states<Scalar>(n, keep);
  const Index m = static_cast<Index>(idx.size());
  CVector<Scalar> lam(m);
  CMatrix<Scalar> bbar(m, h);
  CMatrix<Scalar> cf(h, m);
  CMatrix<Scalar> cb;
  if (dt.c_bwd) cb.resize(h, m);
  for (Index a = 0; a < m; ++a) {
    const Index i = idx[static_cast<size_t>(a)];
    lam(a) = dt.lambda_bar(i);
    bbar.row(a) = dt.b_bar.row(i);
    cf.col(a) = dt.c_fwd.col(i);
    if (dt.c_bwd) cb.col(a) = dt.c_bwd->col(i);
  }

  LinearTrace<Scalar> trace;
  trace.y = u * dt.d.transpose();
  Scalar max_imag = 0, max_abs = 0;
  CVector<Scalar> xf, xb;
  detail::causal_pass(lam, bbar, cf, u, false, trace.y, xf, max_imag, max_abs);
  if (dt.c_bwd) detail::causal_pass(lam, bbar, cb, u, true, trace.y, xb, max_imag, max_abs);

  trace.final_fwd = CVector<Scalar>::Zero(n);
  if (dt.c_bwd) trace.final_bwd = CVector<Scalar>::Zero(n);
  for (Index a = 0; a < m; ++a) {
    trace.final_fwd(idx[static_cast<size_t>(a)]) = xf(a);
    if (dt.c_bwd) trace.final_bwd(idx[static_cast<size_t>(a)]) = xb(a);
  }
  trace.max_imag_ratio = max_abs > 0 ? max_imag / max_abs : Scalar(0);
  return trace;
}

/// Linear pass of the layer from zero initial state; pruned states contribute nothing.
template <typename Scalar>
Signal<Scalar> run_recursion(const DtLayer<Scalar>& dt, const Signal<Scalar>& u) {
  return simulate_linear(dt, u).y;
}

template <typename Scalar>
Signal<Scalar> run_recursion(const DtLayer<Scalar>& dt, const Signal<Scalar>& u, const KeepMask& keep) {
  return simulate_linear(dt, u, &keep).y;
}

template <typename Scalar>
Signal<Scalar> apply_activation(Activation act, Signal<Scalar> s) {
  if (act == Activation::kIdentity) return s;
  s = s.unaryExpr([act](Scalar v) { return activation_apply(act, v); });
  return s;
}

template <typename Scalar>
Signal<Scalar> layer_forward(const DtLayer<Scalar>& dt, Activation act, const Signal<Scalar>& u) {
  return apply_activation(act, run_recursion(dt, u));
}

template <typename Scalar>
Signal<Scalar> layer_forward(const DtLayer<Scalar>& dt, Activation act, const Signal<Scalar>& u,
                             const KeepMask& keep) {
  return apply_activation(act, run_recursion(dt, u, keep));
}

/// Composes layer_forward over the stack. `keeps` is empty or holds one mask per layer.
template <typename Scalar>
Signal<Scalar> model_forward(const Model<Scalar>& model, const Signal<Scalar>& u,
                             std::span<const KeepMask> keeps = {}) {
  if (!keeps.empty() && static_cast<Index>(keeps.size()) != model.depth())
    throw Error(ErrorCode::kDimensionMismatch, "one keep mask per layer expected");
  Signal<Scalar> x = u;
  for (Index l = 0; l < model.depth(); ++l) {
    const auto& layer = model.layers[static_cast<size_t>(l)];
    x = keeps.empty() ? layer_forward(layer, model.activation, x)
                      : layer_forward(layer, model.activation, x, keeps[static_cast<size_t>(l)]);
  }
  return x;
}

/// Energy of Re(C x_k), k >= 0, for the free response x_k = diag(lambda)^k x0,
/// restricted to `subset` (all states when empty). Exact, closed form.
template <typename Scalar>
Scalar free_response_energy(const CVector<Scalar>& lambda_bar, const CMatrix<Scalar>& c,
                            const CVector<Scalar>& x0, const StateSet& subset = {}) {
  StateSet idx = subset;
  if (idx.empty())
    for (Index i = 0; i < lambda_bar.size(); ++i) idx.push_back(i);
  std::complex<Scalar> herm = 0, plain = 0;
  for (Index i : idx) {
    for (Index j : idx) {
      const auto li = lambda_bar(i), lj = lambda_bar(j);
      herm += std::conj(x0(i)) * x0(j) * c.col(i).dot(c.col(j)) / (Scalar(1) - std::conj(li) * lj);
      plain += x0(i) * x0(j) * (c.col(i).transpose() * c.col(j))(0, 0) / (Scalar(1) - li * lj);
    }
  }
  return (herm.real() + plain.real()) / 2;
}

/// Free-response energy beyond the horizon of a simulated trace, both passes.
template <typename Scalar>
Scalar tail_energy(const DtLayer<Scalar>& dt, const LinearTrace<Scalar>& trace, const StateSet& subset = {}) {
  Scalar e = free_response_energy(dt.lambda_bar, dt.c_fwd, trace.final_fwd, subset);
  if (dt.c_bwd) e += free_response_energy(dt.lambda_bar, *dt.c_bwd, trace.final_bwd, subset);
  return e;
}

/// Zero-padding length after which every mode has decayed below `level`.
template <typename Scalar>
Index decay_padding(Scalar max_abs_pole, Index cap, Scalar level = Scalar(1e-12)) {
  if (max_abs_pole <= 0) return 1;
  if (max_abs_pole >= 1) return cap;
  const Scalar steps = std::ceil(std::log(level) / std::log(max_abs_pole));
  if (!std::isfinite(steps) || steps > static_cast<Scalar>(cap)) return cap;
  return std::max<Index>(1, static_cast<Index>(steps));
}

template <typename Scalar>
Scalar max_pole_modulus(const DtLayer<Scalar>& dt) {
  return dt.state_dim() ? dt.lambda_bar.array().abs().maxCoeff() : Scalar(0);
}

template <typename Scalar>
Scalar max_pole_modulus(const Model<Scalar>& model) {
  Scalar m = 0;
  for (const auto& l : model.layers) m = std::max(m, max_pole_modulus(l));
  return m;
}

template <typename Scalar>
Signal<Scalar> zero_pad(const Signal<Scalar>& u, Index extra) {
  Signal<Scalar> out = Signal<Scalar>::Zero(u.rows() + extra, u.cols());
  out.topRows(u.rows()) = u;
  return out;
}

template <typename Scalar>
struct FreqGrid {
  std::vector<Scalar> thetas;

  /// N points 2*pi*m/N, m = 0..N-1.
  static FreqGrid uniform(Index n) {
    FreqGrid g;
    g.thetas.resize(static_cast<size_t>(n));
    for (Index m = 0; m < n; ++m)
      g.thetas[static_cast<size_t>(m)] = Scalar(2) * std::numbers::pi_v<Scalar> * Scalar(m) / Scalar(n);
    return g;
  }

  bool valid() const {
    if (thetas.empty() || thetas.front() != 0) return false;
    if (thetas.back() > Scalar(2) * std::numbers::pi_v<Scalar>) return false;
    return std::is_sorted(thetas.begin(), thetas.end());
  }
};

/// G(e^{j theta}) restricted to `subset`: sum over states of C_i B_i / (z - lambda_i).
/// Bidirectional layers add the reversed pass evaluated at 1/z.
template <typename Scalar>
CMatrix<Scalar> transfer_at(const DtLayer<Scalar>& dt, const StateSet& subset, Scalar theta,
                            bool include_feedthrough = false) {
  const Index h = dt.channels();
  const std::complex<Scalar> z = std::polar(Scalar(1), theta);
  const std::complex<Scalar> zinv = std::conj(z);
  CMatrix<Scalar> g = CMatrix<Scalar>::Zero(h, h);
  for (Index i : subset) {
    g.noalias() += (dt.c_fwd.col(i) / (z - dt.lambda_bar(i))) * dt.b_bar.row(i);
    if (dt.c_bwd) g.noalias() += (dt.c_bwd->col(i) / (zinv - dt.lambda_bar(i))) * dt.b_bar.row(i);
  }
  if (include_feedthrough) g += dt.d.template cast<std::complex<Scalar>>();
  return g;
}

template <typename Scalar>
StateSet all_states(const DtLayer<Scalar>& dt) {
  StateSet s(static_cast<size_t>(dt.state_dim()));
  for (Index i = 0; i < dt.state_dim(); ++i) s[static_cast<size_t>(i)] = i;
  return s;
}

template <typename Scalar>
std::vector<CMatrix<Scalar>> frequency_response(const DtLayer<Scalar>& dt, const StateSet& subset,
                                                const FreqGrid<Scalar>& grid, bool include_feedthrough = false) {
  std::vector<CMatrix<Scalar>> out;
  out.reserve(grid.thetas.size());
  for (Scalar theta : grid.thetas) out.push_back(transfer_at(dt, subset, theta, include_feedthrough));
  return out;
}

}  // namespace ssmprune

#endif  // SSMPRUNE_SIMULATE_HPP
