// Copyright 2026 The ssmprune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint files, signal files and report CSVs.

#ifndef SSMPRUNE_IO_HPP
#define SSMPRUNE_IO_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ssmprune/pruning.hpp"
#include "ssmprune/types.hpp"

namespace ssmprune {

inline constexpr const char* kCheckpointSchema = "ssmprune.checkpoint/1";

enum class Domain { kContinuous, kDiscrete };

/// Mask and selection details stored alongside a pruned model.
struct PruningRecord {
  std::string criterion;
  double ratio = 0;
  std::optional<std::uint64_t> seed;
  std::string mode;  // "masked" or "compacted"
  double realized_ratio = 0;
  double mean_layer_ratio = 0;
  std::vector<KeepMask> keep;                   // against the parent model
  std::vector<std::vector<Index>> original_index;  // surviving states per layer
};

/// In-memory checkpoint. `ct` is filled only for continuous-time files;
/// `model` always holds the discretized layers.
struct Checkpoint {
  Domain domain = Domain::kDiscrete;
  std::vector<CtLayerd> ct;
  Modeld model;
  std::optional<PruningRecord> pruning;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

/// Discretized model of any checkpoint.
Modeld load_model(const std::filesystem::path& path);
void save_model(const Modeld& model, const std::filesystem::path& path);

std::string checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const std::string& text);

Checkpoint make_continuous_checkpoint(std::vector<CtLayerd> layers, Activation act,
                                      std::map<std::string, std::string> meta = {});

// Signals. Binary layout: 8-byte magic "SSMSIG01", uint64 T, uint64 h,
// uint32 dtype tag (1 = float64), uint32 reserved, then T*h little-endian
// float64 values in row-major order. CSV: one sample per line, no header.

inline constexpr std::uint32_t kDtypeF64 = 1;

Signald read_signal(const std::filesystem::path& path);
void write_signal_binary(const Signald& u, const std::filesystem::path& path);
void write_signal_csv(const Signald& u, const std::filesystem::path& path);

/// Signals named by `dir` (every *.bin and *.csv, sorted by file name) or by a
/// generator spec `gen:<kind>[:key=value,...]` with kind noise|impulse and keys
/// count, len, seed.
std::vector<Signald> load_signals(const std::string& source, Index channels);

// Reports

struct DistortionRow {
  Index input_id = 0;
  double energy_full = 0;
  double energy_pruned = 0;
  double distortion = 0;
  double bound = 0;
  double ratio = 0;
};

std::string score_csv(const ScoreTable<double>& table);
std::string distortion_csv(const std::vector<DistortionRow>& rows);

/// Shortest text that parses back to the same double.
std::string format_double(double v);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace ssmprune

#endif  // SSMPRUNE_IO_HPP
