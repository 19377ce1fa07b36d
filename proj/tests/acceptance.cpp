// Copyright 2026 The ssmprune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Expected values come from independent references (closed forms,
// direct simulation, bitwise file comparison), never from the code under test.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include "ssmprune/io.hpp"
#include "ssmprune/ssmprune.hpp"

using namespace ssmprune;
namespace fs = std::filesystem;
using cd = std::complex<double>;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os.precision(digits);
  os << v;
  return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path work_dir() {
  const fs::path p = fs::current_path() / "acceptance_work";
  fs::create_directories(p);
  return p;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + SSMPRUNE_CLI_PATH + "\" " + args + " > /dev/null 2>&1";
  return std::system(cmd.c_str());
}

bool same_bytes(const fs::path& a, const fs::path& b) {
  return fs::exists(a) && fs::exists(b) && read_text(a) == read_text(b);
}

double rel_max_diff(const Signald& a, const Signald& b) {
  const double scale = std::max(b.cwiseAbs().maxCoeff(), 1e-300);
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

// ---------------------------------------------------------------------------

Outcome oracle_equivalence() {
  Rng rng(2026, 1);
  SweepOptions sweep;  // grid 4096, 60 golden-section iterations, no pole seeding
  sweep.grid_size = 4096;
  sweep.refine_iters = 60;
  sweep.seed_pole_angles = false;
  double worst = 0;
  int failures = 0, above = 0;
  const auto t0 = std::chrono::steady_clock::now();
  for (int k = 0; k < 1000; ++k) {
    const Index h = 1 + static_cast<Index>(rng.index(8));
    DtLayerd dt;
    dt.lambda_bar = CVector<double>::Constant(1, std::polar(rng.uniform(0.0, 0.999), rng.uniform(-M_PI, M_PI)));
    dt.b_bar.resize(1, h);
    dt.c_fwd.resize(h, 1);
    for (Index j = 0; j < h; ++j) {
      dt.b_bar(0, j) = {rng.normal(), rng.normal()};
      dt.c_fwd(j, 0) = {rng.normal(), rng.normal()};
    }
    dt.d = RMatrix<double>::Zero(h, h);
    const double exact = subsystem_hinf(dt, 0);
    const double swept = hinf_bruteforce(dt, {0}, sweep).gain;
    const double err = std::abs(swept - exact) / exact;
    worst = std::max(worst, err);
    if (err >= 1e-6) ++failures;
    if (swept > exact * (1 + 1e-12)) ++above;
  }
  const double secs = seconds_since(t0);
  return {failures == 0 && above == 0 && secs < 60.0,
          "1000 subsystems, max rel err " + fmt(worst) + ", sweep above closed form " + std::to_string(above) +
              ", " + fmt(secs, 3) + " s single-threaded"};
}

Outcome energy_gain() {
  SuiteOptions opt;
  opt.trials = 50;
  opt.inputs_per_trial = 10;
  opt.seed = 11;
  opt.threads = 1;
  const auto rows = energy_gain_suite(opt);
  int violations = 0;
  double max_ratio = 0;
  for (const auto& r : rows) {
    if (r.check.violated(1e-8)) ++violations;
    if (r.check.bound > 0) max_ratio = std::max(max_ratio, r.check.output_energy / r.check.bound);
  }
  return {violations == 0 && rows.size() == 500,
          std::to_string(rows.size()) + " (layer, input) pairs, " + std::to_string(violations) +
              " violations, max output/bound " + fmt(max_ratio, 6)};
}

Outcome layer_bound() {
  SuiteOptions opt;
  opt.trials = 100;
  opt.inputs_per_trial = 50;
  opt.state_dim = 8;
  opt.seed = 7;
  opt.activation = Activation::kRelu;
  const auto trials = layer_bound_suite(opt);
  Index violations = 0, inputs = 0;
  double max_ratio = 0;
  for (const auto& t : trials) {
    violations += t.report.violations;
    inputs += static_cast<Index>(t.report.rows.size());
    max_ratio = std::max(max_ratio, t.report.max_ratio);
  }
  return {violations == 0 && inputs == 5000,
          "100 order-8 layers x 50 inputs, ReLU, " + std::to_string(violations) + " violations, max ratio " +
              fmt(max_ratio)};
}

Outcome model_bound() {
  SuiteOptions opt;
  opt.trials = 100;
  opt.inputs_per_trial = 6;
  opt.seed = 7;
  opt.activation = Activation::kRelu;
  const auto trials = model_bound_suite(opt, 3, 0.25);
  Index step_v = 0, total_v = 0, steps = 0, rigorous_v = 0;
  double max_step = 0, max_total = 0;
  for (const auto& t : trials) {
    step_v += t.report.step_violations;
    total_v += t.report.total_violations;
    steps += static_cast<Index>(t.report.steps.size());
    for (const auto& s : t.report.steps) max_step = std::max(max_step, s.max_ratio);
    max_total = std::max(max_total, t.report.total_ratio);
    if (t.report.measured_total > t.report.rigorous_bound * (1 + 1e-8)) ++rigorous_v;
  }
  return {step_v + total_v + rigorous_v == 0 && trials.size() == 200,
          "100 three-layer models, single and multi masks, " + std::to_string(steps) + " steps, violations: step " +
              std::to_string(step_v) + ", summed " + std::to_string(total_v) + ", telescoped " +
              std::to_string(rigorous_v) + ", max ratios " + fmt(max_step) + " / " + fmt(max_total)};
}

Outcome parseval() {
  Rng rng(3, 7);
  double worst = 0;
  for (int k = 0; k < 100; ++k) worst = std::max(worst, parseval_check(white_noise(rng, 1024, 1 + k % 4)));
  return {worst < 1e-10, "100 signals of length 1024, max rel err " + fmt(worst)};
}

Outcome stability() {
  Rng rng(4, 2);
  int unstable = 0;
  double worst_ulps = 0;
  for (int k = 0; k < 10000; ++k) {
    CtLayerd ct;
    ct.lambda = CVector<double>::Constant(1, cd(-std::exp(rng.uniform(-10.0, 4.0)), rng.uniform(-1e3, 1e3)));
    ct.delta = RVector<double>::Constant(1, std::exp(rng.uniform(-8.0, 2.0)));
    ct.b = CMatrix<double>::Ones(1, 1);
    ct.c_fwd = CMatrix<double>::Ones(1, 1);
    ct.d = RMatrix<double>::Zero(1, 1);
    const auto dt = zoh_discretize(ct);
    const double mod = std::abs(dt.lambda_bar(0));
    const double expect = std::exp(ct.lambda(0).real() * ct.delta(0));
    if (!(mod < 1.0)) ++unstable;
    const double ulp = std::nextafter(expect, 2.0) - expect;
    worst_ulps = std::max(worst_ulps, std::abs(mod - expect) / ulp);
  }
  return {unstable == 0 && worst_ulps <= 4,
          "10000 Hurwitz poles, " + std::to_string(unstable) + " with |lambda_bar| >= 1, modulus within " +
              fmt(worst_ulps, 2) + " ulp of exp(Re(lambda delta))"};
}

Outcome scale_invariance_check() {
  int last_changed = 0, global_unchanged = 0, cases = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Modeld m = synthetic_model({3, 16, 4, seed, 1.0, Activation::kRelu});
    const auto last = make_mask(m, PrunePlan{Criterion::kLast, 0.5, {}});
    const auto glob = make_mask(m, PrunePlan{Criterion::kGlobalHinf, 0.5, {}});
    bool any_global_change = false;
    for (size_t l = 0; l < m.layers.size(); ++l) {
      Modeld scaled = m;
      scaled.layers[l].c_fwd *= 1e3;
      ++cases;
      const auto last2 = make_mask(scaled, PrunePlan{Criterion::kLast, 0.5, {}});
      const auto glob2 = make_mask(scaled, PrunePlan{Criterion::kGlobalHinf, 0.5, {}});
      for (size_t k = 0; k < m.layers.size(); ++k) {
        if ((last.keep[k] != last2.keep[k]).any()) {
          ++last_changed;
          break;
        }
      }
      for (size_t k = 0; k < m.layers.size(); ++k)
        if ((glob.keep[k] != glob2.keep[k]).any()) any_global_change = true;
    }
    if (!any_global_change) ++global_unchanged;
  }
  return {last_changed == 0 && global_unchanged == 0,
          "20 seeds x 3 layers with C scaled by 1e3: LAST mask changed in " + std::to_string(last_changed) + "/" +
              std::to_string(cases) + ", Global-Hinf mask unchanged for " + std::to_string(global_unchanged) +
              "/20 seeds"};
}

Outcome ablation() {
  const fs::path hist_path = work_dir() / "ablation_histograms.csv";
  std::ofstream hist(hist_path);
  hist << "seed,method,layer,weak,remaining_dims,at_floor\n";
  double mean_last = 0, mean_global = 0;
  int global_weak_not_floor = 0, last_floor = 0;
  std::map<std::string, std::map<Index, int>> counts;  // method/weak-or-strong -> remaining -> seeds
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto res = ablation_scale_mismatch(seed, 1e3, 0.5);
    const auto& global = res.rows[1];
    const auto& last = res.rows[2];
    mean_global += global.distortion.relative / 20;
    mean_last += last.distortion.relative / 20;
    for (const auto& row : res.rows) {
      for (size_t l = 0; l < res.weak.size(); ++l) {
        hist << seed << ',' << to_string(row.method) << ',' << l << ',' << (res.weak[l] ? 1 : 0) << ','
             << row.remaining[l] << ',' << (row.at_floor[l] ? 1 : 0) << '\n';
        counts[std::string(to_string(row.method)) + (res.weak[l] ? "/weak" : "/strong")][row.remaining[l]]++;
      }
    }
    for (size_t l = 0; l < res.weak.size(); ++l) {
      if (res.weak[l] && !global.at_floor[l]) ++global_weak_not_floor;
      if (last.at_floor[l]) ++last_floor;
    }
  }
  std::string summary;
  for (const auto& [key, h] : counts) {
    summary += " " + key + "{";
    bool first = true;
    for (const auto& [dims, n] : h) {
      summary += (first ? "" : ",") + std::to_string(dims) + ":" + std::to_string(n);
      first = false;
    }
    summary += "}";
  }
  return {mean_last <= mean_global && global_weak_not_floor == 0 && last_floor == 0,
          "gap 1e3, ratio 0.5, 20 seeds: mean rel distortion LAST " + fmt(mean_last) + " vs Global-Hinf " +
              fmt(mean_global) + "; Global weak layers off the floor " + std::to_string(global_weak_not_floor) +
              ", LAST layers at the floor " + std::to_string(last_floor) + "; remaining dims" + summary +
              "; histograms in " + hist_path.string()};
}

Outcome random_structure() {
  AblationOptions opt;
  opt.inputs = 20;
  double s = 0, u = 0;
  int unstructured_worse = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto d = random_structure_comparison(seed, 0.33, opt);
    s += d.first / 20;
    u += d.second / 20;
    if (d.second > d.first) ++unstructured_worse;
  }
  return {u > s, "33% budget, 20 models x 20 inputs: mean rel distortion unstructured " + fmt(u) + " vs structured " +
                     fmt(s) + " (unstructured worse on " + std::to_string(unstructured_worse) + "/20)"};
}

Outcome criterion_separation_check() {
  double mh = 0, mm = 0;
  int hinf_lower = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto d = criterion_separation(seed, 0.25);
    mh += d.first / 20;
    mm += d.second / 20;
    if (d.first < d.second) ++hinf_lower;
  }
  return {hinf_lower == 20, "ratio 0.25, 20 seeds: H-infinity lower on " + std::to_string(hinf_lower) +
                                "/20, mean rel distortion " + fmt(mh) + " vs magnitude " + fmt(mm)};
}

Outcome masked_compacted() {
  double worst = 0;
  int runs = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Activation act = seed % 3 == 0 ? Activation::kRelu : seed % 3 == 1 ? Activation::kGelu : Activation::kIdentity;
    Modeld m = synthetic_model({3, 8, 3, seed, 1.0, act});
    if (seed % 4 == 1) m.layers[1].c_bwd = m.layers[1].c_fwd * 0.5;
    const auto inputs = noise_inputs(seed, 3, 128, 3);
    for (Criterion c : {Criterion::kUniformHinf, Criterion::kGlobalHinf, Criterion::kLast,
                        Criterion::kUniformMagnitude, Criterion::kGlobalMagnitude, Criterion::kLamp,
                        Criterion::kRandomStructured, Criterion::kRandomUnstructured}) {
      for (double ratio : {0.25, 0.5, 1.0}) {
        const auto mask = make_mask(m, PrunePlan{c, ratio, seed});
        const Modeld masked = apply_mask(m, mask, MaskMode::kMasked);
        const Modeld compact = apply_mask(m, mask, MaskMode::kCompacted);
        for (const auto& u : inputs) {
          const Signald yc = model_forward(compact, u);
          worst = std::max(worst, rel_max_diff(model_forward(masked, u), yc));
          worst = std::max(worst, rel_max_diff(model_forward(m, u, mask), yc));
          ++runs;
        }
      }
    }
  }

  // prune --ratio 0 through the CLI on a discrete checkpoint.
  const fs::path dir = work_dir();
  Modeld m = synthetic_model({2, 8, 3, 99, 1.0, Activation::kGelu});
  save_model(m, dir / "ident_in.json");
  bool identity = true;
  for (const char* crit : {"last", "uniform-hinf", "global-magnitude"}) {
    const fs::path out = dir / (std::string("ident_") + crit + ".json");
    if (run_cli("prune \"" + (dir / "ident_in.json").string() + "\" --criterion " + crit +
                " --ratio 0 --mode compacted --out \"" + out.string() + "\"") != 0) {
      identity = false;
      continue;
    }
    const Modeld back = load_model(out);
    for (size_t l = 0; l < m.layers.size(); ++l) {
      const auto& a = m.layers[l];
      const auto& b = back.layers[l];
      identity = identity && a.lambda_bar == b.lambda_bar && a.b_bar == b.b_bar && a.c_fwd == b.c_fwd && a.d == b.d;
    }
  }
  return {worst <= 1e-12 && identity, std::to_string(runs) + " masked/compacted/on-the-fly runs, max rel diff " +
                                          fmt(worst) + "; prune --ratio 0 identity " + (identity ? "yes" : "no")};
}

Outcome determinism() {
  const fs::path dir = work_dir();
  auto q = [](const fs::path& p) { return "\"" + p.string() + "\""; };
  const std::vector<std::pair<std::string, std::string>> jobs = {
      {"gen-synthetic --layers 3 --state-dim 8 --channels 3 --seed 12 --activation gelu --out ", "gen.json"},
      {"verify-bounds --suite layer --trials 100 --seed 7 --out ", "layer.csv"},
      {"verify-bounds --suite model --trials 4 --seed 7 --out ", "model.csv"},
      {"verify-bounds --suite ablation --trials 5 --seed 3 --out ", "ablation.csv"},
  };
  int mismatches = 0, failures = 0;
  std::vector<std::string> names;
  for (const auto& [args, name] : jobs) {
    for (const char* run : {"a_", "b_"})
      if (run_cli(args + q(dir / (run + name))) != 0) ++failures;
    if (!same_bytes(dir / ("a_" + name), dir / ("b_" + name))) ++mismatches;
    names.push_back(name);
  }
  const fs::path model = dir / "a_gen.json";
  const std::vector<std::pair<std::string, std::string>> on_model = {
      {"score " + q(model) + " --criterion last --out ", "score.csv"},
      {"prune " + q(model) + " --criterion random-unstructured --ratio 0.33 --seed 5 --out ", "rnd.json"},
      {"prune " + q(model) + " --criterion lamp --ratio 0.5 --mode masked --out ", "lamp.json"},
      {"freqresp " + q(model) + " --layer 2 --grid 256 --out ", "freq.csv"},
      {"eval-distortion " + q(model) + " " + q(dir / "a_lamp.json") + " --signals gen:noise:count=4,seed=2 --out ",
       "eval.csv"},
  };
  for (const auto& [args, name] : on_model) {
    for (const char* run : {"a_", "b_"})
      if (run_cli(args + q(dir / (run + name))) != 0) ++failures;
    if (!same_bytes(dir / ("a_" + name), dir / ("b_" + name))) ++mismatches;
  }
  const bool masks_same = same_bytes(dir / "a_rnd.mask.json", dir / "b_rnd.mask.json");
  const std::size_t total = jobs.size() + on_model.size();
  return {failures == 0 && mismatches == 0 && masks_same,
          std::to_string(total) + " CLI invocations run twice: " + std::to_string(mismatches) + " byte mismatches, " +
              std::to_string(failures) + " nonzero exits, mask files " + (masks_same ? "identical" : "differ")};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"oracle-equivalence", oracle_equivalence},
      {"energy-gain", energy_gain},
      {"layer-bound", layer_bound},
      {"model-bound", model_bound},
      {"parseval", parseval},
      {"stability-preservation", stability},
      {"last-scale-invariance", scale_invariance_check},
      {"ablation-scale-gap", ablation},
      {"structured-vs-unstructured", random_structure},
      {"criterion-separation", criterion_separation_check},
      {"masked-compacted", masked_compacted},
      {"determinism", determinism},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << " [" << fmt(seconds_since(t0), 3)
              << " s]" << std::endl;
  }
  std::cout << (failed ? "FAILED " : "ALL PASSED ") << criteria.size() - static_cast<size_t>(failed) << "/"
            << criteria.size() << std::endl;
  return failed ? 1 : 0;
}
