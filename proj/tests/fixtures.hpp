// Copyright 2026 The ssmprune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Small layer builders and independent reference computations for tests.

#ifndef SSMPRUNE_TESTS_FIXTURES_HPP
#define SSMPRUNE_TESTS_FIXTURES_HPP

#include <cmath>
#include <complex>
#include <vector>

#include "ssmprune/ssmprune.hpp"

namespace fixtures {

using namespace ssmprune;
using cd = std::complex<double>;

/// Order-1 SISO discrete layer.
inline DtLayerd siso1(cd lambda_bar, cd b_bar, cd c, double d = 0.0) {
  DtLayerd dt;
  dt.lambda_bar = CVector<double>::Constant(1, lambda_bar);
  dt.b_bar = CMatrix<double>::Constant(1, 1, b_bar);
  dt.c_fwd = CMatrix<double>::Constant(1, 1, c);
  dt.d = RMatrix<double>::Constant(1, 1, d);
  return dt;
}

/// Diagonal discrete layer from explicit arrays; conj_pairs left unset.
inline DtLayerd diag_layer(const std::vector<cd>& lambda_bar, const CMatrix<double>& b, const CMatrix<double>& c) {
  DtLayerd dt;
  dt.lambda_bar = Eigen::Map<const CVector<double>>(lambda_bar.data(), static_cast<Index>(lambda_bar.size()));
  dt.b_bar = b;
  dt.c_fwd = c;
  dt.d = RMatrix<double>::Zero(c.rows(), c.rows());
  return dt;
}

inline Modeld single_layer_model(const DtLayerd& dt, Activation act = Activation::kIdentity) {
  Modeld m;
  m.layers.push_back(dt);
  m.activation = act;
  return m;
}

/// Layer whose state i has closed-form score h[i]: lambda_bar = 0, b = 1, c = sqrt(h).
inline DtLayerd scored_layer(const std::vector<double>& h) {
  const Index n = static_cast<Index>(h.size());
  DtLayerd dt;
  dt.lambda_bar = CVector<double>::Zero(n);
  dt.b_bar = CMatrix<double>::Ones(n, 1);
  dt.c_fwd.resize(1, n);
  for (Index i = 0; i < n; ++i) dt.c_fwd(0, i) = std::sqrt(h[static_cast<size_t>(i)]);
  dt.d = RMatrix<double>::Zero(1, 1);
  return dt;
}

/// Direct convolution reference: y_k = sum_{j<k} Re(sum_i c_i lambda_i^{k-1-j} b_i) u_j + D u_k.
inline Signald convolve_reference(const DtLayerd& dt, const Signald& u) {
  const Index T = u.rows(), h = dt.channels(), n = dt.state_dim();
  std::vector<RMatrix<double>> markov(static_cast<size_t>(T));
  for (Index m = 0; m < T; ++m) {
    CMatrix<double> g = CMatrix<double>::Zero(h, h);
    for (Index i = 0; i < n; ++i) g += dt.c_fwd.col(i) * std::pow(dt.lambda_bar(i), static_cast<double>(m)) * dt.b_bar.row(i);
    markov[static_cast<size_t>(m)] = g.real();
  }
  Signald y = u * dt.d.transpose();
  for (Index k = 0; k < T; ++k)
    for (Index j = 0; j < k; ++j) y.row(k) += (markov[static_cast<size_t>(k - 1 - j)] * u.row(j).transpose()).transpose();
  return y;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace fixtures

#endif  // SSMPRUNE_TESTS_FIXTURES_HPP
