// Copyright 2026 The ssmprune Authors
// SPDX-License-Identifier: Apache-2.0
//
// H-infinity norms (closed form and frequency sweep), signal energies and
// Parseval checks.

#ifndef SSMPRUNE_NORMS_HPP
#define SSMPRUNE_NORMS_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/FFT>

#include "ssmprune/simulate.hpp"
#include "ssmprune/types.hpp"

namespace ssmprune {

/// Guard for relative-error denominators.
inline constexpr double kRelativeEpsilon = 1e-300;

/// Largest singular value. Small matrices use the Gram eigenvalues, larger
/// ones power iteration on G^H G.
template <typename Scalar>
Scalar max_singular_value(const CMatrix<Scalar>& g) {
  if (g.size() == 0) return 0;
  if (g.rows() == 1 || g.cols() == 1) return g.norm();
  if (std::min(g.rows(), g.cols()) <= 8) {
    const CMatrix<Scalar> gram = g.cols() <= g.rows() ? CMatrix<Scalar>(g.adjoint() * g) : CMatrix<Scalar>(g * g.adjoint());
    Eigen::SelfAdjointEigenSolver<CMatrix<Scalar>> es(gram, Eigen::EigenvaluesOnly);
    return std::sqrt(std::max(Scalar(0), es.eigenvalues().maxCoeff()));
  }
  const CMatrix<Scalar> gram = g.adjoint() * g;
  CVector<Scalar> v = CVector<Scalar>::Ones(gram.cols()).normalized();
  Scalar prev = 0;
  for (int it = 0; it < 10000; ++it) {
    CVector<Scalar> w = gram * v;
    const Scalar nrm = w.norm();
    if (nrm == 0) return 0;
    v = w / nrm;
    if (std::abs(nrm - prev) <= Scalar(1e-10) * nrm) {
      prev = nrm;
      break;
    }
    prev = nrm;
  }
  return std::sqrt(prev);
}

namespace detail {

template <typename Scalar>
Scalar c_norm_sq(const DtLayer<Scalar>& dt, Index i) {
  const Scalar fwd = dt.c_fwd.col(i).squaredNorm();
  if (!dt.c_bwd) return fwd;
  return (fwd + dt.c_bwd->col(i).squaredNorm()) / 2;
}

template <typename Scalar>
Scalar b_norm_sq(const DtLayer<Scalar>& dt, Index i) {
  return dt.b_fixed ? Scalar(1) : dt.b_bar.row(i).squaredNorm();
}

}  // namespace detail

/// Closed-form H-infinity norm of the rank-1 subsystem of state i.
template <typename Scalar>
Scalar subsystem_hinf(const DtLayer<Scalar>& dt, Index i) {
  const Scalar mag = std::abs(dt.lambda_bar(i));
  if (!(mag < 1)) throw Error(ErrorCode::kUnstableState, "state " + std::to_string(i) + " is not stable", i);
  return std::sqrt(detail::c_norm_sq(dt, i) * detail::b_norm_sq(dt, i)) / (Scalar(1) - mag);
}

struct SweepOptions {
  Index grid_size = 4096;
  Index refine_iters = 60;
  Index refine_peaks = 8;          // local grid maxima refined by golden section
  bool seed_pole_angles = false;   // also refine around arg(lambda_bar[i])
  bool include_feedthrough = false;
};

template <typename Scalar>
struct PeakGain {
  Scalar gain = 0;
  Scalar theta = 0;
};

/// Frequency-sweep estimate of ||G_subset||_inf. Always a lower bound: the
/// maximum over every frequency actually evaluated.
template <typename Scalar>
PeakGain<Scalar> hinf_bruteforce(const DtLayer<Scalar>& dt, const StateSet& subset, const SweepOptions& opt = {}) {
  if (opt.grid_size < 64) throw Error(ErrorCode::kInvalidArgument, "grid_size must be at least 64");
  for (Index i : subset)
    if (!(std::abs(dt.lambda_bar(i)) < 1))
      throw Error(ErrorCode::kUnstableLayer, "state " + std::to_string(i) + " is not stable", i);
  PeakGain<Scalar> best;
  if (subset.empty() && !opt.include_feedthrough) return best;

  const Scalar two_pi = Scalar(2) * std::numbers::pi_v<Scalar>;
  const Index n = opt.grid_size;
  const Scalar step = two_pi / Scalar(n);
  auto eval = [&](Scalar theta) {
    const Scalar s = max_singular_value(transfer_at(dt, subset, theta, opt.include_feedthrough));
    if (s > best.gain) best = {s, theta};
    return s;
  };

  std::vector<Scalar> vals(static_cast<size_t>(n));
  for (Index m = 0; m < n; ++m) vals[static_cast<size_t>(m)] = eval(step * Scalar(m));

  std::vector<Index> peaks;
  for (Index m = 0; m < n; ++m) {
    const Scalar v = vals[static_cast<size_t>(m)];
    if (v >= vals[static_cast<size_t>((m + n - 1) % n)] && v >= vals[static_cast<size_t>((m + 1) % n)])
      peaks.push_back(m);
  }
  std::stable_sort(peaks.begin(), peaks.end(),
                   [&](Index a, Index b) { return vals[static_cast<size_t>(a)] > vals[static_cast<size_t>(b)]; });
  if (static_cast<Index>(peaks.size()) > opt.refine_peaks) peaks.resize(static_cast<size_t>(opt.refine_peaks));

  std::vector<Scalar> centers;
  for (Index m : peaks) centers.push_back(step * Scalar(m));
  if (opt.seed_pole_angles)
    for (Index i : subset) {
      const Scalar a = std::arg(dt.lambda_bar(i));
      centers.push_back(a < 0 ? a + two_pi : a);
    }

  const Scalar inv_phi = (std::sqrt(Scalar(5)) - Scalar(1)) / Scalar(2);
  for (Scalar c : centers) {
    Scalar lo = c - step, hi = c + step;
    Scalar x1 = hi - inv_phi * (hi - lo), x2 = lo + inv_phi * (hi - lo);
    Scalar f1 = eval(x1), f2 = eval(x2);
    for (Index it = 0; it < opt.refine_iters; ++it) {
      if (f1 < f2) {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + inv_phi * (hi - lo);
        f2 = eval(x2);
      } else {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - inv_phi * (hi - lo);
        f1 = eval(x1);
      }
    }
  }
  best.theta = std::fmod(best.theta + two_pi, two_pi);
  return best;
}

template <typename Scalar>
Scalar signal_energy(const Signal<Scalar>& u) {
  return u.squaredNorm();
}

/// |E_time - E_freq| / max(E_time, eps) with the unitary DFT.
template <typename Scalar>
Scalar parseval_check(const Signal<Scalar>& u) {
  const Scalar e_time = signal_energy(u);
  const Index T = u.rows();
  if (T == 0) return 0;
  Eigen::FFT<Scalar> fft;
  Scalar e_freq = 0;
  std::vector<Scalar> col(static_cast<size_t>(T));
  std::vector<std::complex<Scalar>> spec;
  for (Index ch = 0; ch < u.cols(); ++ch) {
    for (Index k = 0; k < T; ++k) col[static_cast<size_t>(k)] = u(k, ch);
    fft.fwd(spec, col);
    for (const auto& x : spec) e_freq += std::norm(x);
  }
  e_freq /= Scalar(T);
  return std::abs(e_time - e_freq) / std::max(e_time, Scalar(kRelativeEpsilon));
}

template <typename Scalar>
struct EnergyGainCheck {
  Scalar output_energy = 0;  // includes the exact free-response tail
  Scalar input_energy = 0;
  Scalar hinf = 0;
  Scalar bound = 0;          // hinf^2 * input_energy
  Scalar slack = 0;          // bound - output_energy

  bool violated(Scalar rel = Scalar(1e-8)) const { return slack < -rel * bound; }
};

/// Output energy of the full layer (feedthrough included) against ||G + D||^2 ||u||^2.
template <typename Scalar>
EnergyGainCheck<Scalar> energy_gain_check(const DtLayer<Scalar>& dt, const Signal<Scalar>& u,
                                          SweepOptions opt = {.seed_pole_angles = true}) {
  opt.include_feedthrough = true;
  EnergyGainCheck<Scalar> r;
  const auto trace = simulate_linear(dt, u);
  r.output_energy = signal_energy(trace.y) + tail_energy(dt, trace);
  r.input_energy = signal_energy(u);
  r.hinf = hinf_bruteforce(dt, all_states(dt), opt).gain;
  r.bound = r.hinf * r.hinf * r.input_energy;
  r.slack = r.bound - r.output_energy;
  return r;
}

}  // namespace ssmprune

#endif  // SSMPRUNE_NORMS_HPP
