// Copyright 2026 The ssmprune Authors
// SPDX-License-Identifier: Apache-2.0
//
// State importance scores and prune-mask selection.
//
// Every selector works on pruning units: a conjugate pair when the layer
// carries pairing metadata, a single state otherwise. Paired states therefore
// always share a score and a keep bit, and each layer keeps at least one unit.

#ifndef SSMPRUNE_PRUNING_HPP
#define SSMPRUNE_PRUNING_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "ssmprune/core.hpp"
#include "ssmprune/norms.hpp"
#include "ssmprune/random.hpp"
#include "ssmprune/simulate.hpp"
#include "ssmprune/types.hpp"

namespace ssmprune {

enum class Criterion {
  kUniformHinf,
  kGlobalHinf,
  kLast,
  kUniformMagnitude,
  kGlobalMagnitude,
  kLamp,
  kRandomStructured,
  kRandomUnstructured,
};

enum class ScoreKind { kHinf, kLast, kMagnitude, kLamp };

enum class MaskMode { kMasked, kCompacted };

inline const char* to_string(Criterion c) {
  switch (c) {
    case Criterion::kUniformHinf: return "uniform-hinf";
    case Criterion::kGlobalHinf: return "global-hinf";
    case Criterion::kLast: return "last";
    case Criterion::kUniformMagnitude: return "uniform-magnitude";
    case Criterion::kGlobalMagnitude: return "global-magnitude";
    case Criterion::kLamp: return "lamp";
    case Criterion::kRandomStructured: return "random-structured";
    case Criterion::kRandomUnstructured: return "random-unstructured";
  }
  return "unknown";
}

inline Criterion criterion_from_string(const std::string& s) {
  for (auto c : {Criterion::kUniformHinf, Criterion::kGlobalHinf, Criterion::kLast, Criterion::kUniformMagnitude,
                 Criterion::kGlobalMagnitude, Criterion::kLamp, Criterion::kRandomStructured,
                 Criterion::kRandomUnstructured})
    if (s == to_string(c)) return c;
  throw Error(ErrorCode::kInvalidArgument, "unknown criterion '" + s + "'");
}

inline const char* to_string(ScoreKind k) {
  switch (k) {
    case ScoreKind::kHinf: return "hinf";
    case ScoreKind::kLast: return "last";
    case ScoreKind::kMagnitude: return "magnitude";
    case ScoreKind::kLamp: return "lamp";
  }
  return "unknown";
}

inline ScoreKind score_kind_from_string(const std::string& s) {
  for (auto k : {ScoreKind::kHinf, ScoreKind::kLast, ScoreKind::kMagnitude, ScoreKind::kLamp})
    if (s == to_string(k)) return k;
  throw Error(ErrorCode::kInvalidArgument, "unknown score kind '" + s + "'");
}

inline ScoreKind score_kind_of(Criterion c) {
  switch (c) {
    case Criterion::kUniformHinf:
    case Criterion::kGlobalHinf: return ScoreKind::kHinf;
    case Criterion::kLast: return ScoreKind::kLast;
    case Criterion::kUniformMagnitude:
    case Criterion::kGlobalMagnitude: return ScoreKind::kMagnitude;
    case Criterion::kLamp: return ScoreKind::kLamp;
    default: return ScoreKind::kHinf;
  }
}

namespace detail {

// Paired states receive the score computed for the first member.
template <typename Scalar, typename F>
RVector<Scalar> per_state_scores(const DtLayer<Scalar>& dt, F&& score_of) {
  RVector<Scalar> s(dt.state_dim());
  for (const auto& unit : state_units(dt)) {
    const Scalar v = score_of(unit.front());
    for (Index i : unit) s(i) = v;
  }
  return s;
}

}  // namespace detail

/// Squared subsystem H-infinity norms ||C_i||^2 ||B_i||^2 / (1 - |lambda_i|)^2.
template <typename Scalar>
RVector<Scalar> hinf_scores(const DtLayer<Scalar>& dt) {
  return detail::per_state_scores(dt, [&](Index i) {
    const Scalar mag = std::abs(dt.lambda_bar(i));
    if (!(mag < 1)) throw Error(ErrorCode::kUnstableState, "state " + std::to_string(i) + " is not stable", i);
    const Scalar den = (Scalar(1) - mag) * (Scalar(1) - mag);
    return detail::c_norm_sq(dt, i) * detail::b_norm_sq(dt, i) / den;
  });
}

/// |lambda_i| ||B_i|| ||C_i||.
template <typename Scalar>
RVector<Scalar> magnitude_scores(const DtLayer<Scalar>& dt) {
  return detail::per_state_scores(dt, [&](Index i) {
    return std::abs(dt.lambda_bar(i)) * dt.b_bar.row(i).norm() * std::sqrt(detail::c_norm_sq(dt, i));
  });
}

template <typename Scalar>
struct LayerScores {
  RVector<Scalar> hinf_sq;
  RVector<Scalar> last;
  RVector<Scalar> score;         // the value used for selection
  std::vector<Index> order;      // states by descending sort key, order[r] = state
  std::vector<StateSet> units;
  bool degenerate = false;       // all sort keys zero; not compressible

  Index size() const { return hinf_sq.size(); }

  /// Position of each state in `order`.
  std::vector<Index> rank_of() const {
    std::vector<Index> r(order.size());
    for (size_t k = 0; k < order.size(); ++k) r[static_cast<size_t>(order[k])] = static_cast<Index>(k);
    return r;
  }
};

template <typename Scalar>
struct ScoreTable {
  ScoreKind kind = ScoreKind::kHinf;
  std::vector<LayerScores<Scalar>> layers;
  std::vector<std::string> warnings;
};

namespace detail {

struct PrefixResult {
  std::vector<Index> unit_order;  // units by descending key
  bool degenerate = false;
};

// Sort units by descending key (stable, lower first index first) and divide
// each key by the running prefix sum. Degenerate layers get 1 for the top
// unit and 0 elsewhere, i.e. index order after the survival floor.
template <typename Scalar>
PrefixResult normalized_prefix(const RVector<Scalar>& key, const std::vector<StateSet>& units,
                               RVector<Scalar>& normalized) {
  PrefixResult r;
  r.unit_order.resize(units.size());
  for (size_t u = 0; u < units.size(); ++u) r.unit_order[u] = static_cast<Index>(u);
  std::stable_sort(r.unit_order.begin(), r.unit_order.end(), [&](Index a, Index b) {
    return key(units[static_cast<size_t>(a)].front()) > key(units[static_cast<size_t>(b)].front());
  });
  normalized.resize(key.size());
  Scalar prefix = 0;
  bool all_zero = true;
  for (const auto& u : units)
    if (key(u.front()) != 0) all_zero = false;
  r.degenerate = all_zero && !units.empty();
  for (size_t k = 0; k < r.unit_order.size(); ++k) {
    const auto& unit = units[static_cast<size_t>(r.unit_order[k])];
    const Scalar v = key(unit.front());
    prefix += v;
    Scalar s;
    if (r.degenerate)
      s = k == 0 ? Scalar(1) : Scalar(0);
    else
      s = prefix > 0 ? v / prefix : Scalar(0);
    for (Index i : unit) normalized(i) = s;
  }
  return r;
}

template <typename Scalar>
std::vector<Index> expand_order(const std::vector<Index>& unit_order, const std::vector<StateSet>& units) {
  std::vector<Index> order;
  for (Index u : unit_order)
    for (Index i : units[static_cast<size_t>(u)]) order.push_back(i);
  return order;
}

}  // namespace detail

/// Score table for a model. The H-infinity score and the LAST score are always
/// filled; `score` and `order` follow the requested kind.
template <typename Scalar>
ScoreTable<Scalar> score_model(const Model<Scalar>& model, ScoreKind kind) {
  ScoreTable<Scalar> table;
  table.kind = kind;
  for (Index l = 0; l < model.depth(); ++l) {
    const auto& dt = model.layers[static_cast<size_t>(l)];
    LayerScores<Scalar> ls;
    ls.units = state_units(dt);
    ls.hinf_sq = hinf_scores(dt);
    const auto hinf_prefix = detail::normalized_prefix(ls.hinf_sq, ls.units, ls.last);

    detail::PrefixResult used = hinf_prefix;
    switch (kind) {
      case ScoreKind::kHinf:
        ls.score = ls.hinf_sq;
        break;
      case ScoreKind::kLast:
        ls.score = ls.last;
        break;
      case ScoreKind::kMagnitude: {
        ls.score = magnitude_scores(dt);
        RVector<Scalar> unused;
        used = detail::normalized_prefix(ls.score, ls.units, unused);
        break;
      }
      case ScoreKind::kLamp: {
        const RVector<Scalar> mag_sq = magnitude_scores(dt).array().square().matrix();
        used = detail::normalized_prefix(mag_sq, ls.units, ls.score);
        break;
      }
    }
    ls.order = detail::expand_order<Scalar>(used.unit_order, ls.units);
    ls.degenerate = used.degenerate;
    if (used.degenerate)
      table.warnings.push_back("DegenerateLayer: layer " + std::to_string(l) +
                               " has all-zero scores; pruned by index order and marked non-compressible");
    table.layers.push_back(std::move(ls));
  }
  return table;
}

/// LAST scores: H-infinity scores normalized by the prefix sum of the layer's
/// descending-sorted scores. The top unit of every layer scores exactly 1.
template <typename Scalar>
ScoreTable<Scalar> last_scores(const Model<Scalar>& model) {
  return score_model(model, ScoreKind::kLast);
}

/// LAMP adaptation: squared magnitude scores over descending prefix sums.
template <typename Scalar>
ScoreTable<Scalar> lamp_scores(const Model<Scalar>& model) {
  return score_model(model, ScoreKind::kLamp);
}

struct PrunePlan {
  Criterion criterion = Criterion::kLast;
  double ratio = 0.0;
  std::optional<std::uint64_t> seed;
};

/// Element-level keep flags for unstructured pruning (true = keep).
struct ElementMask {
  Eigen::Array<bool, Eigen::Dynamic, 1> lambda;
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> b;  // n x h
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> c;  // h x n

  Index zeroed() const {
    return (lambda == false).count() + (b == false).count() + (c == false).count();
  }
};

struct PruneMask {
  std::vector<KeepMask> keep;
  PrunePlan plan;
  std::vector<ElementMask> elements;  // unstructured pruning only

  Index total_states() const {
    Index n = 0;
    for (const auto& k : keep) n += k.size();
    return n;
  }
  Index pruned_states() const {
    Index n = 0;
    for (const auto& k : keep) n += (k == false).count();
    return n;
  }
  double realized_ratio() const {
    const Index n = total_states();
    return n ? static_cast<double>(pruned_states()) / static_cast<double>(n) : 0.0;
  }
  /// Average of the per-layer pruning ratios.
  double mean_layer_ratio() const {
    if (keep.empty()) return 0.0;
    double acc = 0;
    for (const auto& k : keep)
      acc += k.size() ? static_cast<double>((k == false).count()) / static_cast<double>(k.size()) : 0.0;
    return acc / static_cast<double>(keep.size());
  }
  std::vector<Index> remaining_dims() const {
    std::vector<Index> d;
    for (const auto& k : keep) d.push_back(k.count());
    return d;
  }
};

namespace detail {

inline void check_ratio(double ratio) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "ratio must lie in [0, 1]");
}

inline Index round_count(double ratio, Index n) { return static_cast<Index>(std::round(ratio * static_cast<double>(n))); }

// Units by ascending score; ties keep the lower first index first.
template <typename Scalar>
std::vector<Index> ascending_units(const LayerScores<Scalar>& ls) {
  std::vector<Index> order(ls.units.size());
  for (size_t u = 0; u < order.size(); ++u) order[u] = static_cast<Index>(u);
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    return ls.score(ls.units[static_cast<size_t>(a)].front()) < ls.score(ls.units[static_cast<size_t>(b)].front());
  });
  return order;
}

// Prune units in the given order until `budget` states are gone, never
// exceeding the budget and never removing the last unit.
inline KeepMask prune_units_in_order(Index n, const std::vector<StateSet>& units, const std::vector<Index>& order,
                                     Index budget) {
  KeepMask keep = KeepMask::Constant(n, true);
  Index pruned = 0;
  Index remaining_units = static_cast<Index>(units.size());
  for (Index u : order) {
    if (remaining_units <= 1) break;
    const auto& unit = units[static_cast<size_t>(u)];
    const Index size = static_cast<Index>(unit.size());
    if (pruned + size > budget) continue;
    for (Index i : unit) keep(i) = false;
    pruned += size;
    --remaining_units;
    if (pruned == budget) break;
  }
  return keep;
}

}  // namespace detail

/// Same ratio in every layer: the round(ratio * n_l) lowest-scoring states,
/// rounded down to whole units, at least one unit kept.
template <typename Scalar>
PruneMask select_uniform(const ScoreTable<Scalar>& table, double ratio) {
  detail::check_ratio(ratio);
  PruneMask mask;
  mask.plan.ratio = ratio;
  mask.plan.criterion = table.kind == ScoreKind::kMagnitude ? Criterion::kUniformMagnitude : Criterion::kUniformHinf;
  for (const auto& ls : table.layers) {
    const Index n = ls.size();
    mask.keep.push_back(detail::prune_units_in_order(n, ls.units, detail::ascending_units(ls),
                                                     detail::round_count(ratio, n)));
  }
  return mask;
}

/// Pools every unit of every layer and prunes the lowest scores first
/// (ties: lower layer, then lower state index). When a layer's floor binds
/// the budget moves on to the next-lowest unit.
template <typename Scalar>
PruneMask select_global(const ScoreTable<Scalar>& table, double ratio) {
  detail::check_ratio(ratio);
  PruneMask mask;
  mask.plan.ratio = ratio;
  switch (table.kind) {
    case ScoreKind::kHinf: mask.plan.criterion = Criterion::kGlobalHinf; break;
    case ScoreKind::kLast: mask.plan.criterion = Criterion::kLast; break;
    case ScoreKind::kMagnitude: mask.plan.criterion = Criterion::kGlobalMagnitude; break;
    case ScoreKind::kLamp: mask.plan.criterion = Criterion::kLamp; break;
  }
  struct Entry {
    Scalar score;
    Index layer;
    Index first;
    Index unit;
  };
  std::vector<Entry> pool;
  Index total = 0;
  for (size_t l = 0; l < table.layers.size(); ++l) {
    const auto& ls = table.layers[l];
    total += ls.size();
    mask.keep.push_back(KeepMask::Constant(ls.size(), true));
    for (size_t u = 0; u < ls.units.size(); ++u)
      pool.push_back({ls.score(ls.units[u].front()), static_cast<Index>(l), ls.units[u].front(), static_cast<Index>(u)});
  }
  std::stable_sort(pool.begin(), pool.end(), [](const Entry& a, const Entry& b) {
    return std::tie(a.score, a.layer, a.first) < std::tie(b.score, b.layer, b.first);
  });
  const Index budget = detail::round_count(ratio, total);
  std::vector<Index> units_left;
  for (const auto& ls : table.layers) units_left.push_back(static_cast<Index>(ls.units.size()));
  Index pruned = 0;
  for (const auto& e : pool) {
    if (pruned == budget) break;
    auto& left = units_left[static_cast<size_t>(e.layer)];
    if (left <= 1) continue;
    const auto& unit = table.layers[static_cast<size_t>(e.layer)].units[static_cast<size_t>(e.unit)];
    const Index size = static_cast<Index>(unit.size());
    if (pruned + size > budget) continue;
    for (Index i : unit) mask.keep[static_cast<size_t>(e.layer)](i) = false;
    pruned += size;
    --left;
  }
  return mask;
}

/// Random baselines. Structured pruning removes uniformly random units at the
/// per-layer ratio; unstructured pruning zeroes the same number of parameters
/// (1 + 2h per state) as random individual elements of lambda, B and C.
template <typename Scalar>
PruneMask select_random(const Model<Scalar>& model, double ratio, std::uint64_t seed, bool structured) {
  detail::check_ratio(ratio);
  PruneMask mask;
  mask.plan = {structured ? Criterion::kRandomStructured : Criterion::kRandomUnstructured, ratio, seed};
  Rng rng(seed, 0x5eed);
  for (const auto& dt : model.layers) {
    const Index n = dt.state_dim();
    const Index h = dt.channels();
    const auto units = state_units(dt);
    std::vector<Index> order(units.size());
    for (size_t u = 0; u < order.size(); ++u) order[u] = static_cast<Index>(u);
    rng.shuffle(order);
    KeepMask structured_keep = detail::prune_units_in_order(n, units, order, detail::round_count(ratio, n));
    if (structured) {
      mask.keep.push_back(std::move(structured_keep));
      continue;
    }
    const Index budget = (structured_keep == false).count() * (1 + 2 * h);
    ElementMask em;
    em.lambda = Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(n, true);
    em.b = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(n, h, true);
    em.c = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(h, n, true);
    // (kind, row, col) groups; a conjugate partner's matching element goes with it.
    struct Element {
      int kind;
      Index a;
      Index b;
    };
    std::vector<std::vector<Element>> groups;
    for (const auto& unit : units) {
      std::vector<Element> g;
      for (Index i : unit) g.push_back({0, i, 0});
      groups.push_back(g);
      for (Index ch = 0; ch < h; ++ch) {
        g.clear();
        for (Index i : unit) g.push_back({1, i, ch});
        groups.push_back(g);
        g.clear();
        for (Index i : unit) g.push_back({2, ch, i});
        groups.push_back(g);
      }
    }
    rng.shuffle(groups);
    Index zeroed = 0;
    for (const auto& g : groups) {
      if (zeroed + static_cast<Index>(g.size()) > budget) continue;
      for (const auto& e : g) {
        if (e.kind == 0) em.lambda(e.a) = false;
        if (e.kind == 1) em.b(e.a, e.b) = false;
        if (e.kind == 2) em.c(e.a, e.b) = false;
      }
      zeroed += static_cast<Index>(g.size());
      if (zeroed == budget) break;
    }
    mask.keep.push_back(KeepMask::Constant(n, true));
    mask.elements.push_back(std::move(em));
  }
  return mask;
}

/// Builds the mask a plan describes.
template <typename Scalar>
PruneMask make_mask(const Model<Scalar>& model, const PrunePlan& plan) {
  PruneMask mask;
  switch (plan.criterion) {
    case Criterion::kUniformHinf:
    case Criterion::kUniformMagnitude:
      mask = select_uniform(score_model(model, score_kind_of(plan.criterion)), plan.ratio);
      break;
    case Criterion::kGlobalHinf:
    case Criterion::kGlobalMagnitude:
    case Criterion::kLast:
    case Criterion::kLamp:
      mask = select_global(score_model(model, score_kind_of(plan.criterion)), plan.ratio);
      break;
    case Criterion::kRandomStructured:
    case Criterion::kRandomUnstructured:
      mask = select_random(model, plan.ratio, plan.seed.value_or(0),
                           plan.criterion == Criterion::kRandomStructured);
      break;
  }
  mask.plan = plan;
  return mask;
}

namespace detail {

template <typename Scalar>
CVector<Scalar>& poles(CtLayer<Scalar>& l) { return l.lambda; }
template <typename Scalar>
CVector<Scalar>& poles(DtLayer<Scalar>& l) { return l.lambda_bar; }
template <typename Scalar>
CMatrix<Scalar>& input(CtLayer<Scalar>& l) { return l.b; }
template <typename Scalar>
CMatrix<Scalar>& input(DtLayer<Scalar>& l) { return l.b_bar; }
template <typename Scalar>
const CVector<Scalar>& poles(const CtLayer<Scalar>& l) { return l.lambda; }
template <typename Scalar>
const CVector<Scalar>& poles(const DtLayer<Scalar>& l) { return l.lambda_bar; }
template <typename Scalar>
const CMatrix<Scalar>& input(const CtLayer<Scalar>& l) { return l.b; }
template <typename Scalar>
const CMatrix<Scalar>& input(const DtLayer<Scalar>& l) { return l.b_bar; }

}  // namespace detail

/// Removes the states whose keep bit is false. Masked mode zeroes their B rows
/// and C columns in place; compacted mode drops them and records the surviving
/// original indices. D is never touched.
template <typename Layer>
Layer apply_mask(const Layer& layer, const KeepMask& keep, MaskMode mode) {
  const Index n = layer.state_dim();
  if (keep.size() != n) throw Error(ErrorCode::kDimensionMismatch, "keep mask length differs from state dimension");
  if (n > 0 && keep.count() == 0) throw Error(ErrorCode::kEmptyLayer, "mask removes every state");
  if (keep.count() == n) return layer;

  Layer out = layer;
  if (mode == MaskMode::kMasked) {
    for (Index i = 0; i < n; ++i) {
      if (keep(i)) continue;
      detail::input(out).row(i).setZero();
      out.c_fwd.col(i).setZero();
      if (out.c_bwd) out.c_bwd->col(i).setZero();
    }
    return out;
  }

  std::vector<Index> kept, new_index(static_cast<size_t>(n), -1);
  for (Index i = 0; i < n; ++i)
    if (keep(i)) {
      new_index[static_cast<size_t>(i)] = static_cast<Index>(kept.size());
      kept.push_back(i);
    }
  const Index m = static_cast<Index>(kept.size());
  const Layer& src = layer;
  detail::poles(out).resize(m);
  detail::input(out).resize(m, detail::input(src).cols());
  out.c_fwd.resize(layer.c_fwd.rows(), m);
  if (out.c_bwd) out.c_bwd->resize(layer.c_bwd->rows(), m);
  for (Index a = 0; a < m; ++a) {
    const Index i = kept[static_cast<size_t>(a)];
    detail::poles(out)(a) = detail::poles(src)(i);
    detail::input(out).row(a) = detail::input(src).row(i);
    out.c_fwd.col(a) = layer.c_fwd.col(i);
    if (out.c_bwd) out.c_bwd->col(a) = layer.c_bwd->col(i);
  }
  if constexpr (requires { layer.delta; }) {
    out.delta.resize(m);
    for (Index a = 0; a < m; ++a) out.delta(a) = layer.delta(kept[static_cast<size_t>(a)]);
  }
  if (layer.conj_pairs) {
    std::vector<IndexPair> pairs;
    for (const auto& [i, j] : *layer.conj_pairs)
      if (keep(i) && keep(j)) pairs.emplace_back(new_index[static_cast<size_t>(i)], new_index[static_cast<size_t>(j)]);
    out.conj_pairs = std::move(pairs);
  }
  out.original_index.resize(static_cast<size_t>(m));
  for (Index a = 0; a < m; ++a) {
    const Index i = kept[static_cast<size_t>(a)];
    out.original_index[static_cast<size_t>(a)] = layer.original_index.empty() ? i : layer.original_index[static_cast<size_t>(i)];
  }
  if (out.arch.kind == Architecture::Kind::kMultiSiso) out.arch = Architecture::mimo();
  return out;
}

/// Zeroes the masked-out elements of lambda, B and C (both output matrices).
template <typename Layer>
Layer apply_element_mask(const Layer& layer, const ElementMask& em) {
  Layer out = layer;
  for (Index i = 0; i < out.state_dim(); ++i)
    if (!em.lambda(i)) detail::poles(out)(i) = 0;
  auto& b = detail::input(out);
  for (Index i = 0; i < b.rows(); ++i)
    for (Index j = 0; j < b.cols(); ++j)
      if (!em.b(i, j)) b(i, j) = 0;
  for (Index i = 0; i < out.c_fwd.rows(); ++i)
    for (Index j = 0; j < out.c_fwd.cols(); ++j)
      if (!em.c(i, j)) {
        out.c_fwd(i, j) = 0;
        if (out.c_bwd) (*out.c_bwd)(i, j) = 0;
      }
  return out;
}

template <typename Scalar>
Model<Scalar> apply_mask(const Model<Scalar>& model, const PruneMask& mask, MaskMode mode) {
  if (static_cast<Index>(mask.keep.size()) != model.depth())
    throw Error(ErrorCode::kDimensionMismatch, "mask has a different number of layers than the model");
  Model<Scalar> out = model;
  for (size_t l = 0; l < model.layers.size(); ++l) {
    auto layer = mask.elements.empty() ? model.layers[l] : apply_element_mask(model.layers[l], mask.elements[l]);
    out.layers[l] = apply_mask(layer, mask.keep[l], mode);
  }
  return out;
}

/// Forward pass of a pruned model without materializing it.
template <typename Scalar>
Signal<Scalar> model_forward(const Model<Scalar>& model, const Signal<Scalar>& u, const PruneMask& mask) {
  if (mask.elements.empty()) return model_forward(model, u, std::span<const KeepMask>(mask.keep));
  return model_forward(apply_mask(model, mask, MaskMode::kMasked), u);
}

struct TraceStep {
  Index layer;
  Index state;
  friend bool operator==(const TraceStep&, const TraceStep&) = default;
};

/// Greedy pruning: LAST scores are recomputed on the surviving units before
/// every step and the global minimum is removed. R counts states.
template <typename Scalar>
std::vector<TraceStep> greedy_last_trace(const Model<Scalar>& model, Index budget) {
  struct LayerState {
    RVector<Scalar> hinf;
    std::vector<StateSet> units;
    std::vector<bool> alive;
    Index left;
  };
  std::vector<LayerState> layers;
  Index prunable = 0;
  for (const auto& dt : model.layers) {
    LayerState s{hinf_scores(dt), state_units(dt), {}, 0};
    s.alive.assign(s.units.size(), true);
    s.left = static_cast<Index>(s.units.size());
    prunable += dt.state_dim() - (s.units.empty() ? 0 : static_cast<Index>(s.units.front().size()));
    layers.push_back(std::move(s));
  }
  if (budget > prunable)
    throw Error(ErrorCode::kBudgetTooLarge, "budget exceeds the prunable states after per-layer floors");

  std::vector<TraceStep> trace;
  Index pruned = 0;
  while (pruned < budget) {
    bool found = false;
    Scalar best_score = 0;
    Index best_layer = 0, best_unit = 0, best_first = 0;
    for (size_t l = 0; l < layers.size(); ++l) {
      auto& s = layers[l];
      if (s.left <= 1) continue;
      std::vector<Index> alive_units;
      for (size_t u = 0; u < s.units.size(); ++u)
        if (s.alive[u]) alive_units.push_back(static_cast<Index>(u));
      std::stable_sort(alive_units.begin(), alive_units.end(), [&](Index a, Index b) {
        return s.hinf(s.units[static_cast<size_t>(a)].front()) > s.hinf(s.units[static_cast<size_t>(b)].front());
      });
      Scalar prefix = 0;
      for (Index u : alive_units) {
        const auto& unit = s.units[static_cast<size_t>(u)];
        const Scalar v = s.hinf(unit.front());
        prefix += v;
        const Scalar score = prefix > 0 ? v / prefix : Scalar(0);
        if (pruned + static_cast<Index>(unit.size()) > budget) continue;
        const auto key = std::make_tuple(score, static_cast<Index>(l), unit.front());
        if (!found || key < std::make_tuple(best_score, best_layer, best_first)) {
          found = true;
          best_score = score;
          best_layer = static_cast<Index>(l);
          best_unit = u;
          best_first = unit.front();
        }
      }
    }
    if (!found) break;
    auto& s = layers[static_cast<size_t>(best_layer)];
    s.alive[static_cast<size_t>(best_unit)] = false;
    --s.left;
    for (Index i : s.units[static_cast<size_t>(best_unit)]) {
      trace.push_back({best_layer, i});
      ++pruned;
    }
  }
  return trace;
}

}  // namespace ssmprune

#endif  // SSMPRUNE_PRUNING_HPP
