// Copyright 2026 The ssmprune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Every command is a pure function of its flags and
// input files. Failures print a JSON object on stderr and exit nonzero.

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ssmprune/ssmprune.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ssmprune;

namespace {

constexpr int kExitError = 1;
constexpr int kExitUsage = 2;

void emit_error(const std::string& code, const std::string& message, std::optional<Index> index = std::nullopt) {
  json j{{"error", code}, {"message", message}};
  if (index) j["index"] = *index;
  std::cerr << j.dump() << '\n';
}

std::string csv_join(const std::vector<std::string>& cells) {
  std::string out;
  for (size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ',';
    out += cells[i];
  }
  return out + '\n';
}

std::string num(double v) { return format_double(v); }
std::string num(Index v) { return std::to_string(v); }

void write_output(const std::string& out, const std::string& text) {
  if (out.empty() || out == "-")
    std::cout << text;
  else
    write_text(out, text);
}

// ---------------------------------------------------------------------------

int cmd_inspect(const std::string& path, const std::string& out) {
  const Checkpoint ckpt = load_checkpoint(path);
  const Modeld& model = ckpt.model;
  json j;
  j["domain"] = ckpt.domain == Domain::kContinuous ? "continuous" : "discrete";
  j["activation"] = to_string(model.activation);
  j["depth"] = model.depth();
  j["channels"] = model.channels();
  j["total_states"] = model.total_states();
  json layers = json::array();
  SweepOptions sweep;
  sweep.seed_pole_angles = true;
  for (size_t l = 0; l < model.layers.size(); ++l) {
    const auto& dt = model.layers[l];
    const auto margins = check_dt_stability(dt);
    std::vector<double> h;
    for (Index i = 0; i < dt.state_dim(); ++i) h.push_back(subsystem_hinf(dt, i));
    std::vector<double> sorted = h;
    std::sort(sorted.begin(), sorted.end());
    json lj;
    lj["state_dim"] = dt.state_dim();
    lj["bidirectional"] = dt.bidirectional();
    lj["b_fixed"] = dt.b_fixed;
    lj["architecture"] = dt.arch.kind == Architecture::Kind::kMimo ? "MIMO" : "MultiSISO";
    lj["conj_pairs"] = dt.conj_pairs ? static_cast<Index>(dt.conj_pairs->size()) : Index(0);
    lj["max_pole_modulus"] = max_pole_modulus(dt);
    lj["min_stability_margin"] = margins.min_margin();
    if (!sorted.empty()) {
      lj["state_hinf"] = {{"min", sorted.front()}, {"median", sorted[sorted.size() / 2]}, {"max", sorted.back()}};
    }
    lj["layer_hinf"] = hinf_bruteforce(dt, all_states(dt), sweep).gain;
    SweepOptions with_d = sweep;
    with_d.include_feedthrough = true;
    lj["layer_hinf_with_feedthrough"] = hinf_bruteforce(dt, all_states(dt), with_d).gain;
    layers.push_back(std::move(lj));
  }
  j["layers"] = std::move(layers);
  if (ckpt.pruning) {
    j["pruning"] = {{"criterion", ckpt.pruning->criterion},
                    {"ratio", ckpt.pruning->ratio},
                    {"mode", ckpt.pruning->mode},
                    {"realized_ratio", ckpt.pruning->realized_ratio},
                    {"mean_layer_ratio", ckpt.pruning->mean_layer_ratio}};
  }
  write_output(out, j.dump(1) + "\n");
  return 0;
}

int cmd_score(const std::string& path, const std::string& criterion, const std::string& out) {
  const Modeld model = load_model(path);
  const auto table = score_model(model, score_kind_from_string(criterion));
  for (const auto& w : table.warnings) emit_error("Warning", w);
  write_output(out, score_csv(table));
  return 0;
}

std::string mask_json(const PruningRecord& r) {
  json j;
  j["criterion"] = r.criterion;
  j["ratio"] = r.ratio;
  j["seed"] = r.seed ? json(*r.seed) : json(nullptr);
  j["mode"] = r.mode;
  j["realized_ratio"] = r.realized_ratio;
  j["mean_layer_ratio"] = r.mean_layer_ratio;
  json keep = json::array();
  for (const auto& k : r.keep) {
    json row = json::array();
    for (Index i = 0; i < k.size(); ++i) row.push_back(k(i) ? 1 : 0);
    keep.push_back(std::move(row));
  }
  j["keep"] = std::move(keep);
  j["original_indices"] = r.original_index;
  return j.dump(1) + "\n";
}

int cmd_prune(const std::string& path, const std::string& criterion_name, double ratio, const std::string& mode_name,
              std::optional<std::uint64_t> seed, const std::string& out, std::string mask_out) {
  Checkpoint ckpt = load_checkpoint(path);
  const Criterion criterion = criterion_from_string(criterion_name);
  MaskMode mode;
  if (mode_name == "masked")
    mode = MaskMode::kMasked;
  else if (mode_name == "compacted")
    mode = MaskMode::kCompacted;
  else
    throw Error(ErrorCode::kInvalidArgument, "mode must be masked or compacted");
  const bool is_random = criterion == Criterion::kRandomStructured || criterion == Criterion::kRandomUnstructured;
  if (is_random && !seed) throw Error(ErrorCode::kInvalidArgument, "random criteria require --seed");

  const PruneMask mask = make_mask(ckpt.model, PrunePlan{criterion, ratio, seed});

  Checkpoint result;
  result.model.activation = ckpt.model.activation;
  result.model.meta = ckpt.model.meta;
  // Zeroed poles are not Hurwitz, so element-level pruning is emitted in discrete time.
  if (ckpt.domain == Domain::kContinuous && mask.elements.empty()) {
    result.domain = Domain::kContinuous;
    for (size_t l = 0; l < ckpt.ct.size(); ++l) result.ct.push_back(apply_mask(ckpt.ct[l], mask.keep[l], mode));
    for (const auto& ct : result.ct) result.model.layers.push_back(zoh_discretize(ct));
  } else {
    result.domain = Domain::kDiscrete;
    result.model = apply_mask(ckpt.model, mask, mode);
  }

  PruningRecord rec;
  rec.criterion = to_string(criterion);
  rec.ratio = ratio;
  rec.seed = seed;
  rec.mode = mode_name;
  rec.realized_ratio = mask.realized_ratio();
  rec.mean_layer_ratio = mask.mean_layer_ratio();
  rec.keep = mask.keep;
  for (const auto& k : mask.keep) {
    std::vector<Index> idx;
    for (Index i = 0; i < k.size(); ++i)
      if (k(i)) idx.push_back(i);
    rec.original_index.push_back(std::move(idx));
  }
  result.pruning = rec;
  save_checkpoint(result, out);
  if (mask_out.empty()) mask_out = fs::path(out).replace_extension(".mask.json").string();
  write_text(mask_out, mask_json(rec));

  const bool layer_adaptive = criterion == Criterion::kGlobalHinf || criterion == Criterion::kGlobalMagnitude ||
                              criterion == Criterion::kLast || criterion == Criterion::kLamp;
  json summary{{"criterion", rec.criterion},
               {"requested_ratio", ratio},
               {"realized_ratio", rec.realized_ratio},
               {"mean_layer_ratio", rec.mean_layer_ratio},
               {"reported_ratio", layer_adaptive ? rec.mean_layer_ratio : rec.realized_ratio},
               {"remaining_dims", mask.remaining_dims()},
               {"zeroed_elements", [&] {
                  Index z = 0;
                  for (const auto& e : mask.elements) z += e.zeroed();
                  return z;
                }()}};
  std::cout << summary.dump() << '\n';
  return 0;
}

int cmd_eval(const std::string& full_path, const std::string& pruned_path, const std::string& signals,
             Index pad_cap, const std::string& out) {
  const Modeld full = load_model(full_path);
  const Checkpoint pruned = load_checkpoint(pruned_path);
  if (pruned.model.channels() != full.channels() || pruned.model.depth() != full.depth())
    throw Error(ErrorCode::kDimensionMismatch, "models differ in depth or channel count");
  const auto inputs = load_signals(signals, full.channels());

  // A rigorous bound needs the keep masks against this parent model.
  std::optional<double> gain_sq;
  if (pruned.pruning && pruned.pruning->criterion != to_string(Criterion::kRandomUnstructured) &&
      static_cast<Index>(pruned.pruning->keep.size()) == full.depth()) {
    bool fits = true;
    for (size_t l = 0; l < full.layers.size(); ++l)
      fits = fits && pruned.pruning->keep[l].size() == full.layers[l].state_dim();
    if (fits) {
      SweepOptions sweep;
      sweep.seed_pole_angles = true;
      double lip2 = 1;
      if (full.activation == Activation::kGelu) lip2 = std::pow(kGeluLipschitz, 2.0 * static_cast<double>(full.depth()));
      gain_sq = telescoped_gain_sq(full, pruned.pruning->keep, sweep) * lip2;
    }
  }

  const Index pad = decay_padding(std::max(max_pole_modulus(full), max_pole_modulus(pruned.model)), pad_cap);
  std::vector<DistortionRow> rows;
  for (size_t id = 0; id < inputs.size(); ++id) {
    const Signald u = zero_pad(inputs[id], pad);
    const Signald yf = model_forward(full, u);
    const Signald yp = model_forward(pruned.model, u);
    DistortionRow r;
    r.input_id = static_cast<Index>(id);
    r.energy_full = signal_energy(yf);
    r.energy_pruned = signal_energy(yp);
    r.distortion = (yf - yp).squaredNorm();
    r.bound = gain_sq ? *gain_sq * signal_energy(u) : std::numeric_limits<double>::quiet_NaN();
    r.ratio = gain_sq && r.bound > 0 ? r.distortion / r.bound : std::numeric_limits<double>::quiet_NaN();
    rows.push_back(r);
  }
  write_output(out, distortion_csv(rows));
  return 0;
}

int cmd_verify(const std::string& model_path, const std::string& suite, Index trials, std::uint64_t seed,
               double scale_gap, double ratio, Index pad_cap, unsigned threads, const std::string& out) {
  std::optional<Modeld> model;
  if (!model_path.empty()) model = load_model(model_path);
  if (trials <= 0) throw Error(ErrorCode::kInvalidArgument, "trials must be positive");
  SuiteOptions opt;
  opt.trials = trials;
  opt.seed = seed;
  opt.threads = threads;
  opt.bound.pad_cap = pad_cap;
  const Modeld* m = model ? &*model : nullptr;
  std::string csv;
  if (suite == "layer") {
    csv = "trial,layer,pruned_states,input_id,input_energy,energy_full,energy_pruned,distortion,distortion_upper,"
          "bound,ratio,violation\n";
    for (const auto& t : layer_bound_suite(opt, m)) {
      std::string states;
      for (size_t k = 0; k < t.pruned.size(); ++k) states += (k ? " " : "") + std::to_string(t.pruned[k]);
      for (const auto& r : t.report.rows) {
        const bool v = r.distortion_upper > r.bound * (1 + opt.bound.slack) + 1e-300;
        csv += csv_join({num(t.trial), num(t.layer), states, num(r.input_id), num(r.input_energy), num(r.energy_full),
                         num(r.energy_pruned), num(r.distortion), num(r.distortion_upper), num(r.bound), num(r.ratio),
                         v ? "1" : "0"});
      }
    }
  } else if (suite == "model") {
    csv = "trial,mask,step,layer,state,measured,bound,rigorous_bound,ratio,violations\n";
    for (const auto& t : model_bound_suite(opt, 3, 0.25, m)) {
      Index step = 0;
      for (const auto& s : t.report.steps)
        csv += csv_join({num(t.trial), t.mask_kind, num(step++), num(s.layer), num(s.state), num(s.measured),
                         num(s.bound), "", num(s.max_ratio), num(s.violations)});
      const auto& r = t.report;
      csv += csv_join({num(t.trial), t.mask_kind, "total", "", "", num(r.measured_total), num(r.summed_bound),
                       num(r.rigorous_bound), num(r.total_ratio), num(r.total_violations)});
    }
  } else if (suite == "ablation") {
    csv = "seed,method,distortion,relative_distortion,layer,weak,remaining_dims,at_floor\n";
    AblationOptions ao;
    ao.pad_cap = pad_cap;
    auto results = parallel_map<AblationResult>(
        trials,
        [&](Index t) {
          const std::uint64_t s = seed + static_cast<std::uint64_t>(t);
          return m ? ablation_on_model(*m, s, ratio, ao) : ablation_scale_mismatch(s, scale_gap, ratio, ao);
        },
        threads);
    for (const auto& res : results)
      for (const auto& row : res.rows)
        for (size_t l = 0; l < row.remaining.size(); ++l)
          csv += csv_join({std::to_string(res.seed), to_string(row.method), num(row.distortion.absolute),
                           num(row.distortion.relative), num(static_cast<Index>(l)), res.weak[l] ? "1" : "0",
                           num(row.remaining[l]), row.at_floor[l] ? "1" : "0"});
  } else {
    throw Error(ErrorCode::kInvalidArgument, "suite must be layer, model or ablation");
  }
  write_output(out, csv);
  return 0;
}

int cmd_freqresp(const std::string& path, Index layer, Index grid, const std::string& out) {
  const Modeld model = load_model(path);
  if (layer < 0 || layer >= model.depth())
    throw Error(ErrorCode::kInvalidArgument, "layer " + std::to_string(layer) + " out of range", layer);
  if (grid <= 0) throw Error(ErrorCode::kInvalidArgument, "grid must be positive");
  const auto& dt = model.layers[static_cast<size_t>(layer)];
  const auto g = FreqGrid<double>::uniform(grid);
  const auto states = all_states(dt);
  std::string csv = "theta,sigma_max,sigma_max_with_feedthrough\n";
  for (double theta : g.thetas)
    csv += csv_join({num(theta), num(max_singular_value(transfer_at(dt, states, theta, false))),
                     num(max_singular_value(transfer_at(dt, states, theta, true)))});
  write_output(out, csv);
  return 0;
}

int cmd_gen(Index layers, Index state_dim, Index channels, std::uint64_t seed, double scale_gap,
            const std::string& activation, const std::string& out) {
  SyntheticSpec spec{layers, state_dim, channels, seed, scale_gap, activation_from_string(activation)};
  std::map<std::string, std::string> meta{{"generator", "synthetic"},
                                          {"seed", std::to_string(seed)},
                                          {"scale_gap", format_double(scale_gap)}};
  save_checkpoint(make_continuous_checkpoint(synthetic_ct_layers(spec), spec.activation, meta), out);
  return 0;
}

int cmd_rescale(const std::string& path, double rate_ratio, const std::string& out) {
  const Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.domain != Domain::kContinuous)
    throw Error(ErrorCode::kInvalidArgument, "rescale needs a continuous-time checkpoint");
  std::vector<CtLayerd> layers;
  for (const auto& ct : ckpt.ct) layers.push_back(rescale_timescales(ct, rate_ratio));
  auto meta = ckpt.model.meta;
  meta["rate_ratio"] = format_double(rate_ratio);
  save_checkpoint(make_continuous_checkpoint(std::move(layers), ckpt.model.activation, meta), out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Model order reduction for diagonal state space models"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  std::string model, model2, out, criterion, mode = "compacted", signals, suite, activation = "relu", mask_out;
  double ratio = 0, rate_ratio = 1.0, gen_gap = 1.0, verify_gap = 1000.0, verify_ratio = 0.5;
  std::optional<std::uint64_t> seed;
  std::uint64_t seed_value = 0;
  Index trials = 100, layer = 0, grid = 4096, layers = 2, state_dim = 8, channels = 4, pad_cap = 8192;
  unsigned threads = 0;

  auto* inspect = app.add_subcommand("inspect", "Dimensions, stability margins and H-infinity summary");
  inspect->add_option("model", model, "Checkpoint")->required();
  inspect->add_option("--out", out, "Output JSON (default stdout)");

  auto* score = app.add_subcommand("score", "Per-state scores as CSV");
  score->add_option("model", model, "Checkpoint")->required();
  score->add_option("--criterion", criterion, "hinf, last, magnitude or lamp")
      ->required()
      ->check(CLI::IsMember({"hinf", "last", "magnitude", "lamp"}));
  score->add_option("--out", out, "Output CSV (default stdout)");

  auto* prune = app.add_subcommand("prune", "Prune states and write the reduced model");
  prune->add_option("model", model, "Checkpoint")->required();
  prune->add_option("--criterion", criterion,
                    "uniform-hinf, global-hinf, last, uniform-magnitude, global-magnitude, lamp, "
                    "random-structured or random-unstructured")
      ->required();
  prune->add_option("--ratio", ratio, "Fraction of states to remove")->required();
  prune->add_option("--mode", mode, "masked or compacted")->check(CLI::IsMember({"masked", "compacted"}));
  prune->add_option("--seed", seed, "Seed for random criteria");
  prune->add_option("--out", out, "Output checkpoint")->required();
  prune->add_option("--mask-out", mask_out, "Mask JSON (default: output path with extension .mask.json)");

  auto* eval = app.add_subcommand("eval-distortion", "Output distortion between two models");
  eval->add_option("full", model, "Full checkpoint")->required();
  eval->add_option("pruned", model2, "Pruned checkpoint")->required();
  eval->add_option("--signals", signals, "Directory of signals or gen:<noise|impulse>[:count=,len=,seed=]")
      ->required();
  eval->add_option("--pad-cap", pad_cap, "Longest zero tail appended to each input");
  eval->add_option("--out", out, "Output CSV (default stdout)");

  auto* verify = app.add_subcommand("verify-bounds", "Randomized checks of the energy-loss bounds");
  verify->add_option("model", model, "Checkpoint (synthetic models when omitted)");
  verify->add_option("--suite", suite, "layer, model or ablation")
      ->required()
      ->check(CLI::IsMember({"layer", "model", "ablation"}));
  verify->add_option("--trials", trials, "Number of trials");
  verify->add_option("--seed", seed_value, "Seed");
  verify->add_option("--scale-gap", verify_gap, "Ablation: C scale of the weak layers is 1/gap");
  verify->add_option("--ratio", verify_ratio, "Ablation: prune ratio");
  verify->add_option("--pad-cap", pad_cap, "Longest zero tail appended to each input");
  verify->add_option("--threads", threads, "Worker threads (0 = hardware)");
  verify->add_option("--out", out, "Output CSV (default stdout)");

  auto* freq = app.add_subcommand("freqresp", "Largest singular value of a layer's frequency response");
  freq->add_option("model", model, "Checkpoint")->required();
  freq->add_option("--layer", layer, "Layer index");
  freq->add_option("--grid", grid, "Number of uniform frequencies");
  freq->add_option("--out", out, "Output CSV (default stdout)");

  auto* gen = app.add_subcommand("gen-synthetic", "Random continuous-time model");
  gen->add_option("--layers", layers, "Number of layers")->required();
  gen->add_option("--state-dim", state_dim, "States per layer (even)")->required();
  gen->add_option("--channels", channels, "Channels")->required();
  gen->add_option("--seed", seed_value, "Seed")->required();
  gen->add_option("--scale-gap", gen_gap, "C of the trailing half of the layers is divided by this");
  gen->add_option("--activation", activation, "relu, gelu or identity")
      ->check(CLI::IsMember({"relu", "gelu", "identity"}));
  gen->add_option("--out", out, "Output checkpoint")->required();

  auto* rescale = app.add_subcommand("rescale", "Multiply every timescale by a sampling-rate ratio");
  rescale->add_option("model", model, "Continuous-time checkpoint")->required();
  rescale->add_option("--rate-ratio", rate_ratio, "Ratio applied to delta")->required();
  rescale->add_option("--out", out, "Output checkpoint")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    emit_error("Usage", e.what());
    return kExitUsage;
  }

  try {
    if (*inspect) return cmd_inspect(model, out);
    if (*score) return cmd_score(model, criterion, out);
    if (*prune) return cmd_prune(model, criterion, ratio, mode, seed, out, mask_out);
    if (*eval) return cmd_eval(model, model2, signals, pad_cap, out);
    if (*verify) return cmd_verify(model, suite, trials, seed_value, verify_gap, verify_ratio, pad_cap, threads, out);
    if (*freq) return cmd_freqresp(model, layer, grid, out);
    if (*gen) return cmd_gen(layers, state_dim, channels, seed_value, gen_gap, activation, out);
    if (*rescale) return cmd_rescale(model, rate_ratio, out);
  } catch (const Error& e) {
    emit_error(to_string(e.code()), e.what(), e.index());
    return kExitError;
  } catch (const std::exception& e) {
    emit_error("Internal", e.what());
    return kExitError;
  }
  return kExitUsage;
}
