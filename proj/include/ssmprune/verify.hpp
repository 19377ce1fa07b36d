// Copyright 2026 The ssmprune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Empirical checks of the energy-loss bounds on synthetic models, and the
// comparison experiments between pruning criteria.

#ifndef SSMPRUNE_VERIFY_HPP
#define SSMPRUNE_VERIFY_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/SVD>

#include "ssmprune/core.hpp"
#include "ssmprune/discretize.hpp"
#include "ssmprune/norms.hpp"
#include "ssmprune/pruning.hpp"
#include "ssmprune/random.hpp"
#include "ssmprune/simulate.hpp"
#include "ssmprune/types.hpp"

namespace ssmprune {

/// Runs fn(0..count-1) on a thread pool; results stay in index order.
template <typename T>
std::vector<T> parallel_map(Index count, const std::function<T(Index)>& fn, unsigned threads = 0) {
  std::vector<T> out(static_cast<size_t>(count));
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<Index>(threads, std::max<Index>(count, 1)));
  if (threads <= 1) {
    for (Index i = 0; i < count; ++i) out[static_cast<size_t>(i)] = fn(i);
    return out;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (Index i = t; i < count; i += threads) out[static_cast<size_t>(i)] = fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic models

struct SyntheticSpec {
  Index layers = 2;
  Index state_dim = 8;  // even; states come in conjugate pairs
  Index channels = 4;
  std::uint64_t seed = 0;
  double scale_gap = 1.0;  // C of the weak (trailing) layers is divided by this
  Activation activation = Activation::kRelu;
};

/// Layers whose C is scaled down by the scale gap: the trailing floor(L/2).
inline bool is_weak_layer(const SyntheticSpec& spec, Index l) {
  return spec.scale_gap != 1.0 && l >= spec.layers - spec.layers / 2;
}

/// Continuous-time layers with conjugate-paired poles
/// lambda = -e^a +/- i e^b, a ~ U(ln 1e-3, 0), b ~ U(ln 0.1, ln 10),
/// complex standard normal B and C, log-uniform delta in [1e-3, 0.1], D = 0.
inline std::vector<CtLayerd> synthetic_ct_layers(const SyntheticSpec& spec) {
  if (spec.state_dim <= 0 || spec.state_dim % 2 != 0)
    throw Error(ErrorCode::kInvalidArgument, "state dimension must be positive and even");
  if (spec.layers <= 0 || spec.channels <= 0)
    throw Error(ErrorCode::kInvalidArgument, "layers and channels must be positive");
  if (!(spec.scale_gap > 0)) throw Error(ErrorCode::kInvalidArgument, "scale gap must be positive");
  Rng rng(spec.seed, 0x51a7);
  const Index n = spec.state_dim, h = spec.channels;
  auto cnormal = [&] { return std::complex<double>(rng.normal(), rng.normal()) / std::sqrt(2.0); };
  std::vector<CtLayerd> layers;
  for (Index l = 0; l < spec.layers; ++l) {
    CtLayerd ct;
    ct.lambda.resize(n);
    ct.b.resize(n, h);
    ct.c_fwd.resize(h, n);
    ct.d = RMatrix<double>::Zero(h, h);
    ct.delta.resize(n);
    std::vector<IndexPair> pairs;
    for (Index p = 0; p < n / 2; ++p) {
      const Index i = 2 * p, j = 2 * p + 1;
      const double a = rng.uniform(std::log(1e-3), 0.0);
      const double b = rng.uniform(std::log(0.1), std::log(10.0));
      ct.lambda(i) = {-std::exp(a), std::exp(b)};
      ct.lambda(j) = std::conj(ct.lambda(i));
      const double delta = std::exp(rng.uniform(std::log(1e-3), std::log(0.1)));
      ct.delta(i) = ct.delta(j) = delta;
      for (Index ch = 0; ch < h; ++ch) {
        ct.b(i, ch) = cnormal();
        ct.b(j, ch) = std::conj(ct.b(i, ch));
      }
      for (Index ch = 0; ch < h; ++ch) {
        ct.c_fwd(ch, i) = cnormal();
        ct.c_fwd(ch, j) = std::conj(ct.c_fwd(ch, i));
      }
      pairs.emplace_back(i, j);
    }
    if (is_weak_layer(spec, l)) ct.c_fwd /= spec.scale_gap;
    ct.conj_pairs = std::move(pairs);
    layers.push_back(std::move(ct));
  }
  return layers;
}

inline Modeld synthetic_model(const SyntheticSpec& spec) {
  Modeld model;
  model.activation = spec.activation;
  for (const auto& ct : synthetic_ct_layers(spec)) model.layers.push_back(zoh_discretize(ct));
  model.meta["generator"] = "synthetic";
  model.meta["seed"] = std::to_string(spec.seed);
  return model;
}

// ---------------------------------------------------------------------------
// Probe inputs

inline Signald white_noise(Rng& rng, Index T, Index h) {
  Signald u(T, h);
  for (Index k = 0; k < T; ++k)
    for (Index ch = 0; ch < h; ++ch) u(k, ch) = rng.normal();
  return u;
}

inline Signald impulse(Index T, Index h, Index channel = 0) {
  Signald u = Signald::Zero(T, h);
  u(0, channel) = 1.0;
  return u;
}

/// Real sinusoid Re(v e^{j theta k}) along the input direction of largest gain of g.
inline Signald peak_sinusoid(const CMatrix<double>& g, double theta, Index T) {
  const Index h = g.cols();
  Eigen::JacobiSVD<CMatrix<double>> svd(g, Eigen::ComputeFullV);
  CVector<double> v = svd.matrixV().col(0);
  // Rotate so the real part carries as much energy as possible.
  double best = -1, best_phase = 0;
  for (int s = 0; s < 64; ++s) {
    const double ph = std::numbers::pi * s / 64;
    const double e = (v * std::polar(1.0, ph)).real().squaredNorm();
    if (e > best) best = e, best_phase = ph;
  }
  v *= std::polar(1.0, best_phase);
  Signald u(T, h);
  for (Index k = 0; k < T; ++k) {
    const auto rot = std::polar(1.0, theta * static_cast<double>(k));
    for (Index ch = 0; ch < h; ++ch) u(k, ch) = (v(ch) * rot).real();
  }
  return u;
}

/// White noise, one impulse and one sinusoid at the peak-gain frequency of
/// `subset` of `dt` (feedthrough included when asked).
inline std::vector<Signald> probe_inputs(Rng& rng, const DtLayerd& dt, const StateSet& subset, Index noise_count,
                                         Index noise_len, Index sine_len, bool include_feedthrough = false) {
  const Index h = dt.channels();
  std::vector<Signald> inputs;
  for (Index i = 0; i < noise_count; ++i) inputs.push_back(white_noise(rng, noise_len, h));
  inputs.push_back(impulse(noise_len, h));
  SweepOptions opt;
  opt.seed_pole_angles = true;
  opt.include_feedthrough = include_feedthrough;
  const auto peak = hinf_bruteforce(dt, subset, opt);
  inputs.push_back(peak_sinusoid(transfer_at(dt, subset, peak.theta, include_feedthrough), peak.theta, sine_len));
  return inputs;
}

/// Upper bound on the slope of the exact GELU, attained at x = sqrt(2).
inline constexpr double kGeluLipschitz = 1.128905;

struct BoundOptions {
  Index pad_cap = 8192;        // longest zero tail appended for transients
  double slack = 1e-8;         // relative tolerance on violations
  double lipschitz = 1.0;      // activation Lipschitz factor applied to the bound
  SweepOptions sweep{.seed_pole_angles = true};
};

// ---------------------------------------------------------------------------
// Layer level

struct LayerInputRow {
  Index input_id = 0;
  double input_energy = 0;
  double energy_full = 0;
  double energy_pruned = 0;
  double distortion = 0;        // over the padded horizon
  double distortion_upper = 0;  // plus the exact linear tail beyond it
  double bound = 0;
  double ratio = 0;             // distortion_upper / bound
};

struct LayerBoundReport {
  std::vector<LayerInputRow> rows;
  double measured = 0;  // max distortion_upper over inputs
  double bound = 0;     // bound of the input with the largest ratio
  double max_ratio = 0;
  Index violations = 0;
};

/// Distortion of pruning `pruned` from one layer against
/// sum_{i in pruned} ||G_i||^2 ||u||^2, for every input.
inline LayerBoundReport layer_bound_report(const DtLayerd& dt, const StateSet& pruned,
                                           const std::vector<Signald>& inputs, Activation act,
                                           const BoundOptions& opt = {}) {
  for (Index i = 0; i < dt.state_dim(); ++i)
    if (!(std::abs(dt.lambda_bar(i)) < 1)) throw Error(ErrorCode::kUnstableLayer, "layer is not stable", i);
  KeepMask keep = KeepMask::Constant(dt.state_dim(), true);
  for (Index i : pruned) keep(i) = false;
  double gain_sq = 0;
  for (Index i : pruned) gain_sq += std::pow(subsystem_hinf(dt, i), 2);
  const Index pad = decay_padding(max_pole_modulus(dt), opt.pad_cap);

  LayerBoundReport rep;
  for (size_t id = 0; id < inputs.size(); ++id) {
    const Signald u = zero_pad(inputs[id], pad);
    const auto full = simulate_linear(dt, u);
    const auto cut = simulate_linear(dt, u, &keep);
    const Signald yf = apply_activation(act, full.y);
    const Signald yp = apply_activation(act, cut.y);
    LayerInputRow row;
    row.input_id = static_cast<Index>(id);
    row.input_energy = signal_energy(u);
    row.energy_full = signal_energy(yf);
    row.energy_pruned = signal_energy(yp);
    row.distortion = (yf - yp).squaredNorm();
    row.distortion_upper = row.distortion + (pruned.empty() ? 0.0 : tail_energy(dt, full, pruned));
    row.bound = opt.lipschitz * opt.lipschitz * gain_sq * row.input_energy;
    row.ratio = row.bound > 0 ? row.distortion_upper / row.bound : 0.0;
    if (row.distortion_upper > row.bound * (1 + opt.slack) + 1e-300) ++rep.violations;
    if (row.ratio >= rep.max_ratio) {
      rep.max_ratio = row.ratio;
      rep.bound = row.bound;
    }
    rep.measured = std::max(rep.measured, row.distortion_upper);
    rep.rows.push_back(row);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Model level

struct ModelStepRow {
  Index layer = 0;
  Index state = 0;
  double measured = 0;  // max over inputs
  double bound = 0;     // bound for the input achieving the max ratio
  double max_ratio = 0;
  Index violations = 0;
};

struct ModelBoundReport {
  std::vector<ModelStepRow> steps;
  double measured_total = 0;   // max over inputs of the full-mask distortion
  double summed_bound = 0;     // sum of the per-step bounds for that input
  double rigorous_bound = 0;   // telescoped operator-norm bound for that input
  double total_ratio = 0;      // max over inputs of measured / summed_bound
  Index total_violations = 0;
  Index step_violations = 0;
};

namespace detail {

inline double layer_norm(const DtLayerd& dt, const KeepMask& keep, const SweepOptions& sweep, bool with_d) {
  StateSet s;
  for (Index i = 0; i < dt.state_dim(); ++i)
    if (keep(i)) s.push_back(i);
  SweepOptions o = sweep;
  o.include_feedthrough = with_d;
  return hinf_bruteforce(dt, s, o).gain;
}

inline double subset_norm(const DtLayerd& dt, const StateSet& s, const SweepOptions& sweep) {
  SweepOptions o = sweep;
  o.include_feedthrough = false;
  return hinf_bruteforce(dt, s, o).gain;
}

}  // namespace detail

/// Squared operator-norm bound on ||f(u) - f_pruned(u)|| / ||u||, obtained by
/// swapping one layer at a time from full to pruned:
/// (sum_l ||G^(l)_{P_l}|| prod_{k<l} ||G^(k)_pruned + D|| prod_{k>l} ||G^(k) + D||)^2.
inline double telescoped_gain_sq(const Modeld& model, const std::vector<KeepMask>& keeps, const SweepOptions& sweep) {
  const Index L = model.depth();
  if (static_cast<Index>(keeps.size()) != L) throw Error(ErrorCode::kDimensionMismatch, "one keep mask per layer expected");
  std::vector<double> full_norm, pruned_norm, cut_norm;
  for (Index l = 0; l < L; ++l) {
    const auto& dt = model.layers[static_cast<size_t>(l)];
    const auto& keep = keeps[static_cast<size_t>(l)];
    if (keep.size() != dt.state_dim()) throw Error(ErrorCode::kDimensionMismatch, "keep mask length differs", l);
    full_norm.push_back(detail::layer_norm(dt, KeepMask::Constant(dt.state_dim(), true), sweep, true));
    pruned_norm.push_back(detail::layer_norm(dt, keep, sweep, true));
    StateSet cut;
    for (Index i = 0; i < dt.state_dim(); ++i)
      if (!keep(i)) cut.push_back(i);
    cut_norm.push_back(detail::subset_norm(dt, cut, sweep));
  }
  double total = 0;
  for (Index l = 0; l < L; ++l) {
    double term = cut_norm[static_cast<size_t>(l)];
    for (Index k = 0; k < l; ++k) term *= pruned_norm[static_cast<size_t>(k)];
    for (Index k = l + 1; k < L; ++k) term *= full_norm[static_cast<size_t>(k)];
    total += term;
  }
  return total * total;
}

/// Prunes the masked-out states one at a time (layer order, then index) and
/// compares every step's model-level distortion with
/// ||G_i||^2 / ||G_{S_t}||^2 * prod_k ||G_{S_t}^{(k)}||^2 * ||u||^2,
/// then the full mask's distortion with the sum of the step bounds.
/// Layer norms include the feedthrough D, which does not cancel across layers.
inline ModelBoundReport model_bound_report(const Modeld& model, const std::vector<KeepMask>& keeps,
                                           const std::vector<Signald>& inputs, const BoundOptions& opt = {}) {
  const Index L = model.depth();
  if (static_cast<Index>(keeps.size()) != L) throw Error(ErrorCode::kDimensionMismatch, "one keep mask per layer expected");
  const double lip2 = std::pow(opt.lipschitz, 2 * static_cast<double>(L));
  const Index pad = decay_padding(max_pole_modulus(model), opt.pad_cap);
  std::vector<Signald> padded;
  std::vector<double> in_energy;
  for (const auto& u : inputs) {
    padded.push_back(zero_pad(u, pad));
    in_energy.push_back(signal_energy(padded.back()));
  }

  std::vector<KeepMask> current;
  std::vector<double> norms;
  for (Index l = 0; l < L; ++l) {
    current.push_back(KeepMask::Constant(model.layers[static_cast<size_t>(l)].state_dim(), true));
    norms.push_back(detail::layer_norm(model.layers[static_cast<size_t>(l)], current.back(), opt.sweep, true));
  }

  ModelBoundReport rep;
  std::vector<double> summed(inputs.size(), 0.0);
  std::vector<Signald> y_prev;
  for (const auto& u : padded) y_prev.push_back(model_forward(model, u, std::span<const KeepMask>(current)));

  for (Index l = 0; l < L; ++l) {
    const auto& dt = model.layers[static_cast<size_t>(l)];
    for (Index i = 0; i < dt.state_dim(); ++i) {
      if (keeps[static_cast<size_t>(l)](i)) continue;
      double others = 1;
      for (Index k = 0; k < L; ++k)
        if (k != l) others *= norms[static_cast<size_t>(k)] * norms[static_cast<size_t>(k)];
      const double gi = subsystem_hinf(dt, i);
      current[static_cast<size_t>(l)](i) = false;
      ModelStepRow step;
      step.layer = l;
      step.state = i;
      for (size_t id = 0; id < padded.size(); ++id) {
        Signald y = model_forward(model, padded[id], std::span<const KeepMask>(current));
        const double measured = (y - y_prev[id]).squaredNorm();
        const double bound = lip2 * gi * gi * others * in_energy[id];
        summed[id] += bound;
        const double ratio = bound > 0 ? measured / bound : 0.0;
        if (measured > bound * (1 + opt.slack) + 1e-300) ++step.violations;
        if (ratio >= step.max_ratio) {
          step.max_ratio = ratio;
          step.bound = bound;
        }
        step.measured = std::max(step.measured, measured);
        y_prev[id] = std::move(y);
      }
      rep.step_violations += step.violations;
      rep.steps.push_back(step);
      norms[static_cast<size_t>(l)] = detail::layer_norm(dt, current[static_cast<size_t>(l)], opt.sweep, true);
    }
  }

  const double telescoped = telescoped_gain_sq(model, keeps, opt.sweep) * lip2;

  for (size_t id = 0; id < padded.size(); ++id) {
    const Signald yf = model_forward(model, padded[id]);
    const double measured = (yf - y_prev[id]).squaredNorm();
    const double ratio = summed[id] > 0 ? measured / summed[id] : 0.0;
    if (measured > summed[id] * (1 + opt.slack) + 1e-300) ++rep.total_violations;
    if (ratio >= rep.total_ratio) {
      rep.total_ratio = ratio;
      rep.summed_bound = summed[id];
      rep.rigorous_bound = telescoped * in_energy[id];
    }
    rep.measured_total = std::max(rep.measured_total, measured);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Distortion helpers

struct Distortion {
  double absolute = 0;  // mean ||y_full - y_pruned||^2
  double relative = 0;  // mean of ||y_full - y_pruned||^2 / ||y_full||^2
};

inline Distortion model_distortion(const Modeld& model, const PruneMask& mask, const std::vector<Signald>& inputs,
                                   Index pad_cap = 8192) {
  const Index pad = decay_padding(max_pole_modulus(model), pad_cap);
  Distortion d;
  for (const auto& raw : inputs) {
    const Signald u = zero_pad(raw, pad);
    const Signald yf = model_forward(model, u);
    const Signald yp = model_forward(model, u, mask);
    const double e = (yf - yp).squaredNorm();
    d.absolute += e;
    d.relative += e / std::max(yf.squaredNorm(), kRelativeEpsilon);
  }
  if (!inputs.empty()) {
    d.absolute /= static_cast<double>(inputs.size());
    d.relative /= static_cast<double>(inputs.size());
  }
  return d;
}

inline std::vector<Signald> noise_inputs(std::uint64_t seed, Index count, Index T, Index h) {
  Rng rng(seed, 0x1a9u);
  std::vector<Signald> out;
  for (Index i = 0; i < count; ++i) out.push_back(white_noise(rng, T, h));
  return out;
}

// ---------------------------------------------------------------------------
// Energy normalization ablation

struct AblationOptions {
  Index layers = 2;
  Index state_dim = 16;
  Index channels = 4;
  Index inputs = 8;
  Index input_len = 256;
  Activation activation = Activation::kRelu;
  Index pad_cap = 8192;
};

struct AblationRow {
  Criterion method;
  Distortion distortion;
  std::vector<Index> remaining;  // per layer
  std::vector<bool> at_floor;    // per layer
};

struct AblationResult {
  std::uint64_t seed = 0;
  std::vector<AblationRow> rows;  // UniformHinf, GlobalHinf, LAST
  std::vector<bool> weak;         // per layer
};

/// Distortion and remaining dimensions of UniformHinf, GlobalHinf and LAST on `model`.
inline AblationResult ablation_on_model(const Modeld& model, std::uint64_t seed, double ratio,
                                        const AblationOptions& opt = {}) {
  const auto inputs = noise_inputs(seed, opt.inputs, opt.input_len, model.channels());
  AblationResult res;
  res.seed = seed;
  res.weak.assign(model.layers.size(), false);
  for (Criterion c : {Criterion::kUniformHinf, Criterion::kGlobalHinf, Criterion::kLast}) {
    const PruneMask mask = make_mask(model, PrunePlan{c, ratio, std::nullopt});
    AblationRow row{c, model_distortion(model, mask, inputs, opt.pad_cap), mask.remaining_dims(), {}};
    for (size_t l = 0; l < model.layers.size(); ++l) {
      const Index floor = static_cast<Index>(state_units(model.layers[l]).front().size());
      row.at_floor.push_back(row.remaining[l] <= floor);
    }
    res.rows.push_back(std::move(row));
  }
  return res;
}

/// Synthetic model whose trailing layers have C scaled down by `scale_gap`.
inline AblationResult ablation_scale_mismatch(std::uint64_t seed, double scale_gap, double ratio,
                                              const AblationOptions& opt = {}) {
  SyntheticSpec spec{opt.layers, opt.state_dim, opt.channels, seed, scale_gap, opt.activation};
  AblationResult res = ablation_on_model(synthetic_model(spec), seed, ratio, opt);
  for (Index l = 0; l < opt.layers; ++l) res.weak[static_cast<size_t>(l)] = is_weak_layer(spec, l);
  return res;
}

// ---------------------------------------------------------------------------
// Criterion comparisons

struct PairedDistortion {
  double first = 0;
  double second = 0;
};

/// Random structured vs unstructured pruning at the same parameter budget.
inline PairedDistortion random_structure_comparison(std::uint64_t seed, double ratio, const AblationOptions& opt = {}) {
  SyntheticSpec spec{opt.layers, opt.state_dim, opt.channels, seed, 1.0, opt.activation};
  const Modeld model = synthetic_model(spec);
  const auto inputs = noise_inputs(seed, opt.inputs, opt.input_len, opt.channels);
  const auto structured = select_random(model, ratio, seed, true);
  const auto unstructured = select_random(model, ratio, seed, false);
  return {model_distortion(model, structured, inputs, opt.pad_cap).relative,
          model_distortion(model, unstructured, inputs, opt.pad_cap).relative};
}

/// Discrete-time model where low-magnitude states carry large gains: a quarter
/// of the conjugate pairs are either nearly undamped with a small C or nearly
/// memoryless with a large B C product. Remaining pairs have unit-norm B rows
/// and C columns and |lambda_bar| in [0.5, 0.95].
inline Modeld criterion_separation_model(std::uint64_t seed, const AblationOptions& opt = {}) {
  Rng rng(seed, 0xc0de);
  const Index n = opt.state_dim, h = opt.channels;
  auto unit_vec = [&](Index len) {
    CVector<double> v(len);
    for (Index k = 0; k < len; ++k) v(k) = {rng.normal(), rng.normal()};
    return CVector<double>(v.normalized());
  };
  Modeld model;
  model.activation = opt.activation;
  const Index pairs = n / 2;
  const Index decoys = std::max<Index>(2, pairs / 4);
  for (Index l = 0; l < opt.layers; ++l) {
    DtLayerd dt;
    dt.lambda_bar.resize(n);
    dt.b_bar.resize(n, h);
    dt.c_fwd.resize(h, n);
    dt.d = RMatrix<double>::Zero(h, h);
    std::vector<IndexPair> pp;
    std::vector<Index> slots(static_cast<size_t>(pairs));
    for (Index p = 0; p < pairs; ++p) slots[static_cast<size_t>(p)] = p;
    rng.shuffle(slots);
    for (Index p = 0; p < pairs; ++p) {
      const Index i = 2 * p, j = 2 * p + 1;
      const Index role = slots[static_cast<size_t>(p)];  // < decoys: decoy
      double mag, bscale = 1, cscale = 1;
      if (role < decoys && role % 2 == 0) {
        mag = 0.995;  // slow mode, small C
        cscale = 0.2;
      } else if (role < decoys) {
        mag = 0.05;  // fast mode, large gain
        bscale = cscale = std::sqrt(3.0);
      } else {
        mag = rng.uniform(0.5, 0.95);
      }
      const double angle = rng.uniform(0.05, 3.0);
      dt.lambda_bar(i) = std::polar(mag, angle);
      dt.lambda_bar(j) = std::conj(dt.lambda_bar(i));
      dt.b_bar.row(i) = bscale * unit_vec(h).transpose();
      dt.b_bar.row(j) = dt.b_bar.row(i).conjugate();
      dt.c_fwd.col(i) = cscale * unit_vec(h);
      dt.c_fwd.col(j) = dt.c_fwd.col(i).conjugate();
      pp.emplace_back(i, j);
    }
    dt.conj_pairs = std::move(pp);
    model.layers.push_back(std::move(dt));
  }
  return model;
}

/// Uniform H-infinity pruning vs uniform magnitude pruning at the same ratio.
inline PairedDistortion criterion_separation(std::uint64_t seed, double ratio, const AblationOptions& opt = {}) {
  const Modeld model = criterion_separation_model(seed, opt);
  const auto inputs = noise_inputs(seed, opt.inputs, opt.input_len, opt.channels);
  const auto hinf = make_mask(model, PrunePlan{Criterion::kUniformHinf, ratio, std::nullopt});
  const auto mag = make_mask(model, PrunePlan{Criterion::kUniformMagnitude, ratio, std::nullopt});
  return {model_distortion(model, hinf, inputs, opt.pad_cap).relative,
          model_distortion(model, mag, inputs, opt.pad_cap).relative};
}

struct ScaleInvarianceResult {
  Index scaled_layer = 0;
  bool last_unchanged = false;
  bool global_hinf_changed = false;
};

/// Multiplies one layer's C by `factor` and compares the masks before and after.
inline ScaleInvarianceResult scale_invariance(std::uint64_t seed, double factor, double ratio,
                                              const AblationOptions& opt = {}) {
  SyntheticSpec spec{opt.layers, opt.state_dim, opt.channels, seed, 1.0, opt.activation};
  const Modeld model = synthetic_model(spec);
  Rng rng(seed, 0x5ca1e);
  ScaleInvarianceResult r;
  r.scaled_layer = static_cast<Index>(rng.index(static_cast<std::uint64_t>(opt.layers)));
  Modeld scaled = model;
  scaled.layers[static_cast<size_t>(r.scaled_layer)].c_fwd *= factor;
  auto same = [](const PruneMask& a, const PruneMask& b) {
    for (size_t l = 0; l < a.keep.size(); ++l)
      if ((a.keep[l] != b.keep[l]).any()) return false;
    return true;
  };
  const auto last_a = make_mask(model, PrunePlan{Criterion::kLast, ratio, std::nullopt});
  const auto last_b = make_mask(scaled, PrunePlan{Criterion::kLast, ratio, std::nullopt});
  const auto glob_a = make_mask(model, PrunePlan{Criterion::kGlobalHinf, ratio, std::nullopt});
  const auto glob_b = make_mask(scaled, PrunePlan{Criterion::kGlobalHinf, ratio, std::nullopt});
  r.last_unchanged = same(last_a, last_b);
  r.global_hinf_changed = !same(glob_a, glob_b);
  return r;
}

// ---------------------------------------------------------------------------
// Randomized suites

struct SuiteOptions {
  Index trials = 100;
  std::uint64_t seed = 7;
  Index state_dim = 8;
  Index channels = 4;
  Index inputs_per_trial = 50;  // noise inputs + impulse + sinusoid
  Index noise_len = 256;
  Index sine_len = 1024;
  Activation activation = Activation::kRelu;
  BoundOptions bound;
  unsigned threads = 0;
};

struct LayerTrial {
  Index trial = 0;
  Index layer = 0;
  StateSet pruned;
  LayerBoundReport report;
};

inline std::uint64_t trial_seed(std::uint64_t seed, Index t) {
  return seed * 1000003u + static_cast<std::uint64_t>(t);
}

/// Prunes the lowest-scoring unit of `dt` and probes it with noise, an impulse
/// and a sinusoid at the pruned part's peak frequency.
inline LayerTrial layer_trial(const DtLayerd& dt, Index t, std::uint64_t seed, Activation act,
                              const SuiteOptions& opt) {
  Modeld single;
  single.layers.push_back(dt);
  const auto table = score_model(single, ScoreKind::kHinf);
  const auto& ls = table.layers.front();
  StateSet pruned = ls.units[static_cast<size_t>(detail::ascending_units(ls).front())];
  Rng rng(seed, 0x1a7e);
  const auto inputs =
      probe_inputs(rng, dt, pruned, std::max<Index>(0, opt.inputs_per_trial - 2), opt.noise_len, opt.sine_len);
  BoundOptions bound = opt.bound;
  if (act == Activation::kGelu) bound.lipschitz = std::max(bound.lipschitz, kGeluLipschitz);
  return LayerTrial{t, 0, pruned, layer_bound_report(dt, pruned, inputs, act, bound)};
}

/// Random order-n layers, or the layers of `model` in turn when given.
inline std::vector<LayerTrial> layer_bound_suite(const SuiteOptions& opt, const Modeld* model = nullptr) {
  if (model && model->layers.empty()) throw Error(ErrorCode::kInvalidArgument, "model has no layers");
  return parallel_map<LayerTrial>(
      opt.trials,
      [&](Index t) {
        const std::uint64_t seed = trial_seed(opt.seed, t);
        if (model) {
          const Index l = t % model->depth();
          LayerTrial r = layer_trial(model->layers[static_cast<size_t>(l)], t, seed, model->activation, opt);
          r.layer = l;
          return r;
        }
        SyntheticSpec spec{1, opt.state_dim, opt.channels, seed, 1.0, opt.activation};
        return layer_trial(synthetic_model(spec).layers.front(), t, seed, opt.activation, opt);
      },
      opt.threads);
}

struct EnergyTrial {
  Index trial = 0;
  Index input_id = 0;
  EnergyGainCheck<double> check;
};

/// (layer, input) pairs for the energy-gain property; inputs cycle through
/// noise, impulse and the layer's peak sinusoid.
inline std::vector<EnergyTrial> energy_gain_suite(const SuiteOptions& opt) {
  const Index per = std::max<Index>(3, opt.inputs_per_trial);
  auto nested = parallel_map<std::vector<EnergyTrial>>(
      opt.trials,
      [&](Index t) {
        SyntheticSpec spec{1, opt.state_dim, opt.channels, trial_seed(opt.seed, t), 1.0, Activation::kIdentity};
        auto ct = synthetic_ct_layers(spec).front();
        Rng rng(spec.seed, 0xe2e);
        for (Index r = 0; r < ct.d.rows(); ++r)
          for (Index c = 0; c < ct.d.cols(); ++c) ct.d(r, c) = 0.1 * rng.normal();
        const DtLayerd dt = zoh_discretize(ct);
        const auto inputs = probe_inputs(rng, dt, all_states(dt), per - 2, opt.noise_len, opt.sine_len, true);
        const Index pad = decay_padding(max_pole_modulus(dt), opt.bound.pad_cap);
        std::vector<EnergyTrial> rows;
        for (size_t id = 0; id < inputs.size(); ++id)
          rows.push_back({t, static_cast<Index>(id), energy_gain_check(dt, zero_pad(inputs[id], pad), opt.bound.sweep)});
        return rows;
      },
      opt.threads);
  std::vector<EnergyTrial> out;
  for (auto& v : nested)
    for (auto& r : v) out.push_back(std::move(r));
  return out;
}

struct ModelTrial {
  Index trial = 0;
  std::string mask_kind;  // "single" or "multi"
  ModelBoundReport report;
};

/// One single-state mask (random layer and state) and one multi-state LAST
/// mask, probed with noise, an impulse and the first layer's peak sinusoid.
inline std::vector<ModelTrial> model_trial(const Modeld& model, Index t, std::uint64_t seed, const SuiteOptions& opt,
                                           double multi_ratio) {
  Rng rng(seed, 0x30de);
  const auto inputs = probe_inputs(rng, model.layers.front(), all_states(model.layers.front()),
                                   std::max<Index>(0, opt.inputs_per_trial - 2), opt.noise_len, opt.sine_len);
  std::vector<KeepMask> single;
  for (const auto& l : model.layers) single.push_back(KeepMask::Constant(l.state_dim(), true));
  const Index pl = static_cast<Index>(rng.index(static_cast<std::uint64_t>(model.depth())));
  const Index ps = static_cast<Index>(rng.index(static_cast<std::uint64_t>(model.layers[static_cast<size_t>(pl)].state_dim())));
  single[static_cast<size_t>(pl)](ps) = false;
  const auto multi = make_mask(model, PrunePlan{Criterion::kLast, multi_ratio, std::nullopt});
  BoundOptions bound = opt.bound;
  if (model.activation == Activation::kGelu) bound.lipschitz = std::max(bound.lipschitz, kGeluLipschitz);
  return {{t, "single", model_bound_report(model, single, inputs, bound)},
          {t, "multi", model_bound_report(model, multi.keep, inputs, bound)}};
}

/// Random `layers`-deep models, or `model` itself for every trial when given
/// (trials then differ in their inputs and single-state mask).
inline std::vector<ModelTrial> model_bound_suite(const SuiteOptions& opt, Index layers = 3, double multi_ratio = 0.25,
                                                 const Modeld* model = nullptr) {
  if (model && model->layers.empty()) throw Error(ErrorCode::kInvalidArgument, "model has no layers");
  auto nested = parallel_map<std::vector<ModelTrial>>(
      opt.trials,
      [&](Index t) {
        const std::uint64_t seed = trial_seed(opt.seed, t);
        if (model) return model_trial(*model, t, seed, opt, multi_ratio);
        SyntheticSpec spec{layers, opt.state_dim, opt.channels, seed, 1.0, opt.activation};
        return model_trial(synthetic_model(spec), t, seed, opt, multi_ratio);
      },
      opt.threads);
  std::vector<ModelTrial> out;
  for (auto& v : nested)
    for (auto& r : v) out.push_back(std::move(r));
  return out;
}

}  // namespace ssmprune

#endif  // SSMPRUNE_VERIFY_HPP
