// Copyright 2026 The ssmprune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Domain types for diagonal state space layers.

#ifndef SSMPRUNE_TYPES_HPP
#define SSMPRUNE_TYPES_HPP

#include <complex>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace ssmprune {

using Index = Eigen::Index;

template <typename Scalar>
using Complex = std::complex<Scalar>;

template <typename Scalar>
using CVector = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1>;

template <typename Scalar>
using CMatrix = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using RVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using RMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Time-major real signal: row k is the sample u_k in R^h.
template <typename Scalar>
using Signal = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Per-state keep flags; `true` means the state survives.
using KeepMask = Eigen::Array<bool, Eigen::Dynamic, 1>;

using IndexPair = std::pair<Index, Index>;
using StateSet = std::vector<Index>;

enum class Activation { kGelu, kRelu, kIdentity };

/// How a layer's states map onto channels.
struct Architecture {
  enum class Kind { kMimo, kMultiSiso };
  Kind kind = Kind::kMimo;
  Index siso_order = 0;  // n_s, MultiSiso only
  Index channels = 0;    // h, MultiSiso only

  static Architecture mimo() { return {}; }
  static Architecture multi_siso(Index n_s, Index h) { return {Kind::kMultiSiso, n_s, h}; }

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

/// Continuous-time diagonal layer: dx/dt = diag(lambda) x + B u, y = C x + D u.
template <typename Scalar>
struct CtLayer {
  CVector<Scalar> lambda;            // n poles
  CMatrix<Scalar> b;                 // n x h
  CMatrix<Scalar> c_fwd;             // h x n
  std::optional<CMatrix<Scalar>> c_bwd;
  RMatrix<Scalar> d;                 // h x h
  RVector<Scalar> delta;             // n timescales
  bool b_fixed = false;
  Architecture arch;
  std::optional<std::vector<IndexPair>> conj_pairs;
  std::vector<Index> original_index;  // empty means identity

  Index state_dim() const { return lambda.size(); }
  Index channels() const { return c_fwd.rows(); }
  bool bidirectional() const { return c_bwd.has_value(); }
};

/// Zero-order-hold discretized layer: x_{k+1} = diag(lambda_bar) x_k + B_bar u_k,
/// y_k = C x_k + D u_k.
template <typename Scalar>
struct DtLayer {
  CVector<Scalar> lambda_bar;
  CMatrix<Scalar> b_bar;             // n x h
  CMatrix<Scalar> c_fwd;             // h x n
  std::optional<CMatrix<Scalar>> c_bwd;
  RMatrix<Scalar> d;                 // h x h
  bool b_fixed = false;
  Architecture arch;
  std::optional<std::vector<IndexPair>> conj_pairs;
  std::vector<Index> original_index;

  Index state_dim() const { return lambda_bar.size(); }
  Index channels() const { return c_fwd.rows(); }
  bool bidirectional() const { return c_bwd.has_value(); }
};

/// Ordered stack of layers, each followed by the same activation.
template <typename Scalar>
struct Model {
  std::vector<DtLayer<Scalar>> layers;
  Activation activation = Activation::kRelu;
  std::map<std::string, std::string> meta;

  Index depth() const { return static_cast<Index>(layers.size()); }
  Index channels() const { return layers.empty() ? 0 : layers.front().channels(); }
  Index total_states() const {
    Index n = 0;
    for (const auto& l : layers) n += l.state_dim();
    return n;
  }
};

using CtLayerd = CtLayer<double>;
using DtLayerd = DtLayer<double>;
using Modeld = Model<double>;
using Signald = Signal<double>;

enum class ErrorCode {
  kNonHurwitz,
  kUnstableState,
  kUnstableLayer,
  kUnpairedState,
  kDimensionMismatch,
  kChannelMismatch,
  kNonPositiveRatio,
  kEmptyLayer,
  kBudgetTooLarge,
  kDegenerateLayer,
  kSchemaMismatch,
  kValidationFailed,
  kMalformedFile,
  kInvalidArgument,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNonHurwitz: return "NonHurwitz";
    case ErrorCode::kUnstableState: return "UnstableState";
    case ErrorCode::kUnstableLayer: return "UnstableLayer";
    case ErrorCode::kUnpairedState: return "UnpairedState";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kChannelMismatch: return "ChannelMismatch";
    case ErrorCode::kNonPositiveRatio: return "NonPositiveRatio";
    case ErrorCode::kEmptyLayer: return "EmptyLayer";
    case ErrorCode::kBudgetTooLarge: return "BudgetTooLarge";
    case ErrorCode::kDegenerateLayer: return "DegenerateLayer";
    case ErrorCode::kSchemaMismatch: return "SchemaMismatch";
    case ErrorCode::kValidationFailed: return "ValidationFailed";
    case ErrorCode::kMalformedFile: return "MalformedFile";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what, std::optional<Index> index = std::nullopt)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), index_(index) {}

  ErrorCode code() const noexcept { return code_; }
  std::optional<Index> index() const noexcept { return index_; }

 private:
  ErrorCode code_;
  std::optional<Index> index_;
};

inline const char* to_string(Activation act) {
  switch (act) {
    case Activation::kGelu: return "gelu";
    case Activation::kRelu: return "relu";
    case Activation::kIdentity: return "identity";
  }
  return "identity";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "gelu") return Activation::kGelu;
  if (s == "relu") return Activation::kRelu;
  if (s == "identity") return Activation::kIdentity;
  throw Error(ErrorCode::kInvalidArgument, "unknown activation '" + s + "'");
}

}  // namespace ssmprune

#endif  // SSMPRUNE_TYPES_HPP
