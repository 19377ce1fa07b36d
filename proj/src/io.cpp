// Copyright 2026 The ssmprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "ssmprune/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ssmprune/core.hpp"
#include "ssmprune/discretize.hpp"
#include "ssmprune/random.hpp"
#include "ssmprune/verify.hpp"

namespace ssmprune {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

[[noreturn]] void malformed(const std::string& what) { throw Error(ErrorCode::kMalformedFile, what); }

json complex_to_json(const std::complex<double>& z) { return json::array({z.real(), z.imag()}); }

std::complex<double> complex_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    malformed("complex numbers must be [re, im] pairs");
  return {j[0].get<double>(), j[1].get<double>()};
}

json cvector_to_json(const CVector<double>& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(complex_to_json(v(i)));
  return out;
}

CVector<double> cvector_from_json(const json& j, const char* name) {
  if (!j.is_array()) malformed(std::string(name) + " must be an array");
  CVector<double> v(static_cast<Index>(j.size()));
  for (size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = complex_from_json(j[i]);
  return v;
}

json rvector_to_json(const RVector<double>& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

RVector<double> rvector_from_json(const json& j, const char* name) {
  if (!j.is_array()) malformed(std::string(name) + " must be an array");
  RVector<double> v(static_cast<Index>(j.size()));
  for (size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) malformed(std::string(name) + " must hold numbers");
    v(static_cast<Index>(i)) = j[i].get<double>();
  }
  return v;
}

json cmatrix_to_json(const CMatrix<double>& m) {
  json out = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(complex_to_json(m(r, c)));
    out.push_back(std::move(row));
  }
  return out;
}

CMatrix<double> cmatrix_from_json(const json& j, Index rows, Index cols, const char* name) {
  if (!j.is_array() || static_cast<Index>(j.size()) != rows)
    malformed(std::string(name) + " must have " + std::to_string(rows) + " rows");
  CMatrix<double> m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    const json& row = j[static_cast<size_t>(r)];
    if (!row.is_array() || static_cast<Index>(row.size()) != cols)
      malformed(std::string(name) + " must have " + std::to_string(cols) + " columns");
    for (Index c = 0; c < cols; ++c) m(r, c) = complex_from_json(row[static_cast<size_t>(c)]);
  }
  return m;
}

json rmatrix_to_json(const RMatrix<double>& m) {
  json out = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

RMatrix<double> rmatrix_from_json(const json& j, const char* name) {
  if (!j.is_array()) malformed(std::string(name) + " must be an array of rows");
  const Index rows = static_cast<Index>(j.size());
  RMatrix<double> m(rows, rows);
  for (Index r = 0; r < rows; ++r) {
    const json& row = j[static_cast<size_t>(r)];
    if (!row.is_array() || static_cast<Index>(row.size()) != rows) malformed(std::string(name) + " must be square");
    for (Index c = 0; c < rows; ++c) {
      if (!row[static_cast<size_t>(c)].is_number()) malformed(std::string(name) + " must hold numbers");
      m(r, c) = row[static_cast<size_t>(c)].get<double>();
    }
  }
  return m;
}

json arch_to_json(const Architecture& a) {
  if (a.kind == Architecture::Kind::kMimo) return json{{"kind", "MIMO"}};
  return json{{"kind", "MultiSISO"}, {"siso_order", a.siso_order}, {"channels", a.channels}};
}

Architecture arch_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "MIMO") return Architecture::mimo();
  if (kind == "MultiSISO") return Architecture::multi_siso(j.at("siso_order").get<Index>(), j.at("channels").get<Index>());
  malformed("unknown architecture '" + kind + "'");
}

template <typename Layer>
void common_to_json(const Layer& l, json& j) {
  j["C"] = cmatrix_to_json(l.c_fwd);
  if (l.c_bwd) j["C_bwd"] = cmatrix_to_json(*l.c_bwd);
  j["D"] = rmatrix_to_json(l.d);
  j["b_fixed"] = l.b_fixed;
  j["architecture"] = arch_to_json(l.arch);
  if (l.conj_pairs) {
    json pairs = json::array();
    for (const auto& [a, b] : *l.conj_pairs) pairs.push_back(json::array({a, b}));
    j["conj_pairs"] = std::move(pairs);
  }
  if (!l.original_index.empty()) j["original_indices"] = l.original_index;
}

template <typename Layer>
void common_from_json(const json& j, Index n, Layer& l) {
  l.d = rmatrix_from_json(j.at("D"), "D");
  const Index h = l.d.rows();
  l.c_fwd = cmatrix_from_json(j.at("C"), h, n, "C");
  if (j.contains("C_bwd")) l.c_bwd = cmatrix_from_json(j.at("C_bwd"), h, n, "C_bwd");
  l.b_fixed = j.value("b_fixed", false);
  if (j.contains("architecture")) l.arch = arch_from_json(j.at("architecture"));
  if (j.contains("conj_pairs")) {
    std::vector<IndexPair> pairs;
    for (const auto& p : j.at("conj_pairs")) {
      if (!p.is_array() || p.size() != 2) malformed("conj_pairs entries must be [i, j]");
      pairs.emplace_back(p[0].get<Index>(), p[1].get<Index>());
    }
    l.conj_pairs = std::move(pairs);
  }
  if (j.contains("original_indices")) l.original_index = j.at("original_indices").get<std::vector<Index>>();
}

json ct_to_json(const CtLayerd& l) {
  json j;
  j["lambda"] = cvector_to_json(l.lambda);
  j["B"] = cmatrix_to_json(l.b);
  j["delta"] = rvector_to_json(l.delta);
  common_to_json(l, j);
  return j;
}

json dt_to_json(const DtLayerd& l) {
  json j;
  j["lambda_bar"] = cvector_to_json(l.lambda_bar);
  j["B_bar"] = cmatrix_to_json(l.b_bar);
  common_to_json(l, j);
  return j;
}

CtLayerd ct_from_json(const json& j) {
  CtLayerd l;
  l.lambda = cvector_from_json(j.at("lambda"), "lambda");
  const Index n = l.lambda.size();
  common_from_json(j, n, l);
  l.b = cmatrix_from_json(j.at("B"), n, l.d.rows(), "B");
  l.delta = rvector_from_json(j.at("delta"), "delta");
  return l;
}

DtLayerd dt_from_json(const json& j) {
  DtLayerd l;
  l.lambda_bar = cvector_from_json(j.at("lambda_bar"), "lambda_bar");
  const Index n = l.lambda_bar.size();
  common_from_json(j, n, l);
  l.b_bar = cmatrix_from_json(j.at("B_bar"), n, l.d.rows(), "B_bar");
  return l;
}

json record_to_json(const PruningRecord& r) {
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
  return j;
}

PruningRecord record_from_json(const json& j) {
  PruningRecord r;
  r.criterion = j.at("criterion").get<std::string>();
  r.ratio = j.at("ratio").get<double>();
  if (j.contains("seed") && !j.at("seed").is_null()) r.seed = j.at("seed").get<std::uint64_t>();
  r.mode = j.at("mode").get<std::string>();
  r.realized_ratio = j.value("realized_ratio", 0.0);
  r.mean_layer_ratio = j.value("mean_layer_ratio", 0.0);
  for (const auto& row : j.at("keep")) {
    KeepMask k(static_cast<Index>(row.size()));
    for (size_t i = 0; i < row.size(); ++i) k(static_cast<Index>(i)) = row[i].get<int>() != 0;
    r.keep.push_back(std::move(k));
  }
  if (j.contains("original_indices")) r.original_index = j.at("original_indices").get<std::vector<std::vector<Index>>>();
  return r;
}

template <typename Layer>
void require_valid(const Layer& l, size_t layer_index) {
  const auto report = validate_layer(l);
  if (report.empty()) return;
  throw Error(ErrorCode::kValidationFailed, "layer " + std::to_string(layer_index) + ": " + describe(report),
              report.front().index);
}

template <typename Layer>
json flags_of(const std::vector<Layer>& layers) {
  bool b_fixed = !layers.empty(), bidir = false, paired = !layers.empty();
  for (const auto& l : layers) {
    b_fixed = b_fixed && l.b_fixed;
    bidir = bidir || l.bidirectional();
    paired = paired && l.conj_pairs.has_value();
  }
  return json{{"b_fixed", b_fixed}, {"bidirectional", bidir}, {"conj_paired", paired}};
}

template <typename Layer>
std::string arch_summary(const std::vector<Layer>& layers) {
  const bool siso = !layers.empty() && std::all_of(layers.begin(), layers.end(), [](const Layer& l) {
    return l.arch.kind == Architecture::Kind::kMultiSiso;
  });
  return siso ? "MultiSISO" : "MIMO";
}

}  // namespace

std::string checkpoint_to_json(const Checkpoint& ckpt) {
  json j;
  j["schema_version"] = kCheckpointSchema;
  j["domain"] = ckpt.domain == Domain::kContinuous ? "continuous" : "discrete";
  j["activation"] = to_string(ckpt.model.activation);
  json layers = json::array();
  if (ckpt.domain == Domain::kContinuous) {
    j["architecture"] = arch_summary(ckpt.ct);
    j["flags"] = flags_of(ckpt.ct);
    for (const auto& l : ckpt.ct) layers.push_back(ct_to_json(l));
  } else {
    j["architecture"] = arch_summary(ckpt.model.layers);
    j["flags"] = flags_of(ckpt.model.layers);
    for (const auto& l : ckpt.model.layers) layers.push_back(dt_to_json(l));
  }
  j["layers"] = std::move(layers);
  j["metadata"] = ckpt.model.meta;
  if (ckpt.pruning) j["pruning"] = record_to_json(*ckpt.pruning);
  return j.dump(1) + "\n";
}

Checkpoint checkpoint_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    malformed(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) malformed("top level is not an object");
  if (!j.contains("schema_version") || !j["schema_version"].is_string())
    throw Error(ErrorCode::kSchemaMismatch, "missing schema_version");
  const std::string schema = j["schema_version"].get<std::string>();
  if (schema != kCheckpointSchema)
    throw Error(ErrorCode::kSchemaMismatch, "unrecognized schema_version '" + schema + "'");

  Checkpoint ckpt;
  try {
    const std::string domain = j.at("domain").get<std::string>();
    if (domain == "continuous")
      ckpt.domain = Domain::kContinuous;
    else if (domain == "discrete")
      ckpt.domain = Domain::kDiscrete;
    else
      malformed("domain must be continuous or discrete");
    const std::string arch = j.value("architecture", std::string("MIMO"));
    if (arch != "MIMO" && arch != "MultiSISO") malformed("architecture must be MIMO or MultiSISO");
    try {
      ckpt.model.activation = activation_from_string(j.at("activation").get<std::string>());
    } catch (const Error& e) {
      malformed(e.what());
    }
    const json& layers = j.at("layers");
    if (!layers.is_array()) malformed("layers must be an array");
    for (size_t l = 0; l < layers.size(); ++l) {
      if (ckpt.domain == Domain::kContinuous) {
        CtLayerd ct = ct_from_json(layers[l]);
        require_valid(ct, l);
        ckpt.model.layers.push_back(zoh_discretize(ct));
        ckpt.ct.push_back(std::move(ct));
      } else {
        DtLayerd dt = dt_from_json(layers[l]);
        require_valid(dt, l);
        ckpt.model.layers.push_back(std::move(dt));
      }
    }
    for (size_t l = 1; l < ckpt.model.layers.size(); ++l)
      if (ckpt.model.layers[l].channels() != ckpt.model.layers[0].channels())
        throw Error(ErrorCode::kValidationFailed, "layer " + std::to_string(l) + " has a different channel count",
                    static_cast<Index>(l));
    if (j.contains("metadata")) {
      for (const auto& [k, v] : j.at("metadata").items())
        ckpt.model.meta[k] = v.is_string() ? v.get<std::string>() : v.dump();
    }
    if (j.contains("pruning") && !j.at("pruning").is_null()) ckpt.pruning = record_from_json(j.at("pruning"));
  } catch (const json::exception& e) {
    malformed(e.what());
  }
  return ckpt;
}

Checkpoint load_checkpoint(const fs::path& path) { return checkpoint_from_json(read_text(path)); }

void save_checkpoint(const Checkpoint& ckpt, const fs::path& path) { write_text(path, checkpoint_to_json(ckpt)); }

Modeld load_model(const fs::path& path) { return load_checkpoint(path).model; }

void save_model(const Modeld& model, const fs::path& path) {
  Checkpoint ckpt;
  ckpt.model = model;
  save_checkpoint(ckpt, path);
}

Checkpoint make_continuous_checkpoint(std::vector<CtLayerd> layers, Activation act,
                                      std::map<std::string, std::string> meta) {
  Checkpoint ckpt;
  ckpt.domain = Domain::kContinuous;
  ckpt.model.activation = act;
  ckpt.model.meta = std::move(meta);
  for (const auto& l : layers) ckpt.model.layers.push_back(zoh_discretize(l));
  ckpt.ct = std::move(layers);
  return ckpt;
}

// ---------------------------------------------------------------------------
// Signals

namespace {

constexpr std::array<char, 8> kSignalMagic = {'S', 'S', 'M', 'S', 'I', 'G', '0', '1'};

template <typename T>
void put_le(std::string& out, T v) {
  static_assert(std::is_integral_v<T>);
  for (size_t b = 0; b < sizeof(T); ++b) out.push_back(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * b)) & 0xff));
}

template <typename T>
T get_le(const std::string& in, size_t pos) {
  std::uint64_t v = 0;
  for (size_t b = 0; b < sizeof(T); ++b) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + b])) << (8 * b);
  return static_cast<T>(v);
}

Signald read_signal_binary(const std::string& bytes) {
  constexpr size_t header = 8 + 8 + 8 + 4 + 4;
  if (bytes.size() < header || !std::equal(kSignalMagic.begin(), kSignalMagic.end(), bytes.begin()))
    malformed("not a signal file");
  const auto T = get_le<std::uint64_t>(bytes, 8);
  const auto h = get_le<std::uint64_t>(bytes, 16);
  const auto dtype = get_le<std::uint32_t>(bytes, 24);
  if (dtype != kDtypeF64) malformed("unsupported dtype tag " + std::to_string(dtype));
  if (h != 0 && T > (bytes.size() / 8) / h) malformed("signal payload shorter than its header");
  if (bytes.size() != header + 8 * T * h) malformed("signal byte length does not match its header");
  Signald u(static_cast<Index>(T), static_cast<Index>(h));
  for (std::uint64_t k = 0; k < T * h; ++k)
    u.data()[k] = std::bit_cast<double>(get_le<std::uint64_t>(bytes, header + 8 * k));
  return u;
}

Signald read_signal_csv(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      double v;
      const char* first = cell.data();
      while (first < cell.data() + cell.size() && *first == ' ') ++first;
      auto [ptr, ec] = std::from_chars(first, cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size()) malformed("bad number '" + cell + "' in signal CSV");
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size()) malformed("signal CSV rows differ in length");
    rows.push_back(std::move(row));
  }
  const Index T = static_cast<Index>(rows.size());
  const Index h = rows.empty() ? 0 : static_cast<Index>(rows.front().size());
  Signald u(T, h);
  for (Index k = 0; k < T; ++k)
    for (Index c = 0; c < h; ++c) u(k, c) = rows[static_cast<size_t>(k)][static_cast<size_t>(c)];
  return u;
}

std::map<std::string, std::string> parse_kv(const std::string& s) {
  std::map<std::string, std::string> kv;
  std::istringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::kInvalidArgument, "expected key=value, got '" + item + "'");
    kv[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return kv;
}

}  // namespace

Signald read_signal(const fs::path& path) {
  const std::string bytes = read_text(path);
  if (path.extension() == ".csv") return read_signal_csv(bytes);
  return read_signal_binary(bytes);
}

void write_signal_binary(const Signald& u, const fs::path& path) {
  std::string out(kSignalMagic.begin(), kSignalMagic.end());
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(u.rows()));
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(u.cols()));
  put_le<std::uint32_t>(out, kDtypeF64);
  put_le<std::uint32_t>(out, 0);
  for (Index k = 0; k < u.size(); ++k) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(u.data()[k]));
  write_text(path, out);
}

void write_signal_csv(const Signald& u, const fs::path& path) {
  std::string out;
  for (Index k = 0; k < u.rows(); ++k) {
    for (Index c = 0; c < u.cols(); ++c) {
      if (c) out += ',';
      out += format_double(u(k, c));
    }
    out += '\n';
  }
  write_text(path, out);
}

std::vector<Signald> load_signals(const std::string& source, Index channels) {
  std::vector<Signald> out;
  if (source.rfind("gen:", 0) == 0) {
    const std::string rest = source.substr(4);
    const auto colon = rest.find(':');
    const std::string kind = rest.substr(0, colon);
    const auto kv = parse_kv(colon == std::string::npos ? "" : rest.substr(colon + 1));
    auto get = [&](const std::string& key, long long def) {
      const auto it = kv.find(key);
      if (it == kv.end()) return def;
      long long v;
      auto [ptr, ec] = std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
      if (ec != std::errc() || ptr != it->second.data() + it->second.size() || v < 0)
        throw Error(ErrorCode::kInvalidArgument, "bad value for '" + key + "'");
      return v;
    };
    for (const auto& [k, v] : kv)
      if (k != "count" && k != "len" && k != "seed") throw Error(ErrorCode::kInvalidArgument, "unknown key '" + k + "'");
    const Index count = get("count", 8), len = get("len", 256);
    const auto seed = static_cast<std::uint64_t>(get("seed", 0));
    if (len <= 0) throw Error(ErrorCode::kInvalidArgument, "len must be positive");
    if (kind == "noise") {
      Rng rng(seed, 0x5197);
      for (Index i = 0; i < count; ++i) out.push_back(white_noise(rng, len, channels));
    } else if (kind == "impulse") {
      for (Index i = 0; i < count; ++i) out.push_back(impulse(len, channels, i % std::max<Index>(channels, 1)));
    } else {
      throw Error(ErrorCode::kInvalidArgument, "unknown signal generator '" + kind + "'");
    }
    return out;
  }
  const fs::path dir(source);
  if (!fs::is_directory(dir)) throw Error(ErrorCode::kInvalidArgument, "signal directory '" + source + "' not found");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && (e.path().extension() == ".bin" || e.path().extension() == ".csv"))
      files.push_back(e.path());
  std::sort(files.begin(), files.end(), [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });
  for (const auto& f : files) {
    Signald u = read_signal(f);
    if (u.cols() != channels)
      throw Error(ErrorCode::kChannelMismatch, f.filename().string() + " has " + std::to_string(u.cols()) +
                                                   " channels, model expects " + std::to_string(channels));
    out.push_back(std::move(u));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reports

std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

std::string score_csv(const ScoreTable<double>& table) {
  std::string out = "layer,state,hinf_sq,last,rank,score\n";
  for (size_t l = 0; l < table.layers.size(); ++l) {
    const auto& ls = table.layers[l];
    const auto rank = ls.rank_of();
    for (Index i = 0; i < ls.size(); ++i) {
      out += std::to_string(l) + ',' + std::to_string(i) + ',' + format_double(ls.hinf_sq(i)) + ',' +
             format_double(ls.last(i)) + ',' + std::to_string(rank[static_cast<size_t>(i)]) + ',' +
             format_double(ls.score(i)) + '\n';
    }
  }
  return out;
}

std::string distortion_csv(const std::vector<DistortionRow>& rows) {
  std::string out = "input_id,energy_full,energy_pruned,distortion,bound,ratio\n";
  for (const auto& r : rows)
    out += std::to_string(r.input_id) + ',' + format_double(r.energy_full) + ',' + format_double(r.energy_pruned) +
           ',' + format_double(r.distortion) + ',' + format_double(r.bound) + ',' + format_double(r.ratio) + '\n';
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kInvalidArgument, "cannot write '" + path.string() + "'");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorCode::kInvalidArgument, "write to '" + path.string() + "' failed");
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kMalformedFile, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace ssmprune
