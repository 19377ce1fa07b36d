// Copyright 2026 The ssmprune Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <unsupported/Eigen/FFT>

#include "fixtures.hpp"

using namespace ssmprune;
using fixtures::cd;

TEST_CASE("zero input gives zero output") {
  const Modeld m = synthetic_model({2, 6, 3, 1, 1.0, Activation::kRelu});
  const Signald u = Signald::Zero(40, 3);
  CHECK(run_recursion(m.layers[0], u).isZero(0));
  CHECK(model_forward(m, u).isZero(0));
}

TEST_CASE("order-1 impulse response") {
  const auto dt = fixtures::siso1(0.5, 0.5, 1.0);
  const Signald y = run_recursion(dt, impulse(8, 1));
  // Unrolled: x_1 = b, y_k = c lambda^{k-1} b for k >= 1.
  CHECK(y(0, 0) == 0.0);
  for (Index k = 1; k < 8; ++k) CHECK(y(k, 0) == 1.0 * std::pow(0.5, double(k - 1)) * 0.5);
  CHECK(y(1, 0) == 0.5);
  CHECK(y(2, 0) == 0.25);
  CHECK(y(3, 0) == 0.125);
  // DC gain of the response equals G(1) = c b / (1 - lambda).
  CHECK(run_recursion(dt, impulse(80, 1)).sum() == doctest::Approx(1.0).epsilon(1e-15));

  const Signald yd = run_recursion(fixtures::siso1(0.5, 0.5, 1.0, 1.0), impulse(8, 1));
  CHECK(yd(0, 0) == 1.0);
  CHECK((yd.bottomRows(7) - y.bottomRows(7)).isZero(0));
}

TEST_CASE("recursion agrees with direct convolution") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Modeld m = synthetic_model({1, 6, 3, seed, 1.0, Activation::kIdentity});
    auto dt = m.layers[0];
    Rng rng(seed, 1);
    for (Index r = 0; r < 3; ++r)
      for (Index c = 0; c < 3; ++c) dt.d(r, c) = rng.normal();
    const Signald u = white_noise(rng, 50, 3);
    const Signald y = run_recursion(dt, u);
    const Signald ref = fixtures::convolve_reference(dt, u);
    CHECK((y - ref).norm() <= 1e-9 * ref.norm());
  }
}

TEST_CASE("linearity of the linear pass") {
  const Modeld m = synthetic_model({1, 8, 2, 4, 1.0, Activation::kIdentity});
  Rng rng(9);
  const Signald u1 = white_noise(rng, 64, 2), u2 = white_noise(rng, 64, 2);
  const Signald lhs = run_recursion(m.layers[0], Signald(2.5 * u1 - 0.75 * u2));
  const Signald rhs = 2.5 * run_recursion(m.layers[0], u1) - 0.75 * run_recursion(m.layers[0], u2);
  CHECK((lhs - rhs).norm() <= 1e-10 * rhs.norm());
}

TEST_CASE("paired layers produce real outputs") {
  const Modeld m = synthetic_model({1, 8, 3, 2, 1.0, Activation::kIdentity});
  Rng rng(2);
  const auto trace = simulate_linear(m.layers[0], white_noise(rng, 128, 3));
  CHECK(trace.max_imag_ratio < 1e-8);
}

TEST_CASE("channel mismatch is reported") {
  const auto dt = fixtures::siso1(0.5, 0.5, 1.0);
  try {
    run_recursion(dt, Signald(Signald::Zero(4, 2)));
    FAIL("expected ChannelMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kChannelMismatch);
  }
}

TEST_CASE("bidirectional pass adds the time-reversed response") {
  auto dt = fixtures::siso1(0.5, 0.5, 1.0);
  dt.c_bwd = CMatrix<double>::Constant(1, 1, 2.0);
  Signald u = Signald::Zero(6, 1);
  u(3, 0) = 1.0;
  const Signald y = run_recursion(dt, u);
  // Forward: 0.5^{k-3} for k > 3. Backward: 2 * 0.5^{3-k} for k < 3.
  CHECK(y(4, 0) == doctest::Approx(0.5));
  CHECK(y(5, 0) == doctest::Approx(0.25));
  CHECK(y(2, 0) == doctest::Approx(1.0));
  CHECK(y(1, 0) == doctest::Approx(0.5));
  CHECK(y(0, 0) == doctest::Approx(0.25));
  CHECK(y(3, 0) == 0.0);

  // The transfer function evaluates the backward term at 1/z.
  const double theta = 0.9;
  const cd z = std::polar(1.0, theta);
  const cd expected = 0.5 / (z - 0.5) + 2.0 * 0.5 / (1.0 / z - 0.5);
  CHECK(std::abs(transfer_at(dt, all_states(dt), theta)(0, 0) - expected) < 1e-14);
}

TEST_CASE("activations") {
  CHECK(activation_apply(Activation::kGelu, 0.0) == 0.0);
  CHECK(activation_apply(Activation::kRelu, -3.0) == 0.0);
  CHECK(activation_apply(Activation::kRelu, 3.0) == 3.0);
  CHECK(activation_apply(Activation::kIdentity, -2.5) == -2.5);
  CHECK(activation_apply(Activation::kGelu, 1e6) == doctest::Approx(1e6));
  CHECK(activation_apply(Activation::kGelu, 1.0) == doctest::Approx(0.8413447460685429).epsilon(1e-14));
  CHECK(activation_apply(Activation::kGelu, -1.0) == doctest::Approx(-0.15865525393145707).epsilon(1e-13));
}

TEST_CASE("layer_forward applies the activation elementwise") {
  const auto dt = fixtures::siso1(0.5, 0.5, -1.0);
  Signald u = Signald::Ones(10, 1);
  const Signald lin = run_recursion(dt, u);
  CHECK(layer_forward(dt, Activation::kIdentity, u) == lin);
  CHECK(layer_forward(dt, Activation::kRelu, u).isZero(0));
  CHECK(layer_forward(dt, Activation::kGelu, Signald(Signald::Zero(10, 1))).isZero(0));
}

TEST_CASE("single-layer model equals layer_forward; all-keep masks change nothing") {
  const Modeld m = synthetic_model({1, 6, 2, 7, 1.0, Activation::kRelu});
  Rng rng(7);
  const Signald u = white_noise(rng, 40, 2);
  CHECK(model_forward(m, u) == layer_forward(m.layers[0], Activation::kRelu, u));

  const Modeld m3 = synthetic_model({3, 6, 2, 8, 1.0, Activation::kGelu});
  std::vector<KeepMask> keeps(3, KeepMask::Constant(6, true));
  CHECK(model_forward(m3, u, std::span<const KeepMask>(keeps)) == model_forward(m3, u));
}

TEST_CASE("two identity layers cascade like the product of transfer functions") {
  const Modeld m = synthetic_model({2, 4, 2, 12, 1.0, Activation::kIdentity});
  Rng rng(12);
  const Index T = 256, pad = 4096;
  Signald u = Signald::Zero(T + pad, 2);
  u.topRows(T) = white_noise(rng, T, 2);
  // Fast-decaying poles keep the circular DFT a faithful picture of the linear output.
  Modeld fast = m;
  for (auto& l : fast.layers)
    for (Index i = 0; i < l.state_dim(); ++i) l.lambda_bar(i) = std::polar(0.8, std::arg(l.lambda_bar(i)));
  const Signald y = model_forward(fast, u);

  const Index N = u.rows();
  Eigen::FFT<double> fft;
  std::vector<std::vector<cd>> U(2), Y(2);
  for (Index c = 0; c < 2; ++c) {
    std::vector<double> uc(static_cast<size_t>(N)), yc(static_cast<size_t>(N));
    for (Index k = 0; k < N; ++k) {
      uc[static_cast<size_t>(k)] = u(k, c);
      yc[static_cast<size_t>(k)] = y(k, c);
    }
    fft.fwd(U[static_cast<size_t>(c)], uc);
    fft.fwd(Y[static_cast<size_t>(c)], yc);
  }
  double err = 0, ref = 0;
  for (Index m_ = 0; m_ < N; m_ += 37) {
    const double theta = 2 * std::numbers::pi * double(m_) / double(N);
    // Real-output layers act on real signals as (G(z) + conj(G(conj z)))/2 = G(z) with conjugate pairs.
    const CMatrix<double> g = transfer_at(fast.layers[1], all_states(fast.layers[1]), theta) *
                              transfer_at(fast.layers[0], all_states(fast.layers[0]), theta);
    CVector<double> um(2), ym(2);
    for (Index c = 0; c < 2; ++c) {
      um(c) = U[static_cast<size_t>(c)][static_cast<size_t>(m_)];
      ym(c) = Y[static_cast<size_t>(c)][static_cast<size_t>(m_)];
    }
    err += (g * um - ym).squaredNorm();
    ref += ym.squaredNorm();
  }
  CHECK(std::sqrt(err / ref) < 1e-8);
}

TEST_CASE("frequency response of subsets") {
  const auto dt = fixtures::siso1(0.5, 0.5, 1.0);
  CHECK(std::abs(transfer_at(dt, all_states(dt), 0.0)(0, 0) - cd(1.0, 0)) < 1e-15);
  const auto grid = FreqGrid<double>::uniform(16);
  CHECK(grid.valid());
  for (const auto& g : frequency_response(dt, {}, grid)) CHECK(g.isZero(0));

  const Modeld m = synthetic_model({1, 8, 3, 3, 1.0, Activation::kIdentity});
  const auto& l = m.layers[0];
  const auto full = frequency_response(l, all_states(l), grid);
  for (size_t k = 0; k < grid.thetas.size(); ++k) {
    CMatrix<double> sum = CMatrix<double>::Zero(3, 3);
    for (Index i = 0; i < l.state_dim(); ++i) sum += transfer_at(l, {i}, grid.thetas[k]);
    CHECK((sum - full[k]).norm() <= 1e-12 * std::max(1.0, full[k].norm()));
  }
}

TEST_CASE("masked simulation equals the compacted layer") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Modeld m = synthetic_model({1, 8, 3, seed, 1.0, Activation::kIdentity});
    const auto& dt = m.layers[0];
    KeepMask keep = KeepMask::Constant(8, true);
    keep(2) = keep(3) = keep(6) = keep(7) = false;
    Rng rng(seed);
    const Signald u = white_noise(rng, 100, 3);
    const Signald a = run_recursion(dt, u, keep);
    const Signald b = run_recursion(apply_mask(dt, keep, MaskMode::kCompacted), u);
    const Signald c = run_recursion(apply_mask(dt, keep, MaskMode::kMasked), u);
    CHECK((a - b).norm() <= 1e-12 * b.norm());
    CHECK((c - b).norm() <= 1e-12 * b.norm());
  }
}

TEST_CASE("decay padding and tail energy") {
  CHECK(decay_padding(0.5, 100000) == static_cast<Index>(std::ceil(std::log(1e-12) / std::log(0.5))));
  CHECK(decay_padding(0.999999, 1000) == 1000);
  CHECK(decay_padding(0.0, 1000) <= 1);

  // Tail beyond a short horizon equals the energy of the rest of the impulse response.
  const auto dt = fixtures::siso1(0.5, 0.5, 1.0);
  const auto trace = simulate_linear(dt, impulse(3, 1));
  const Signald longer = run_recursion(dt, impulse(200, 1));
  CHECK(tail_energy(dt, trace) == doctest::Approx(longer.bottomRows(197).squaredNorm()).epsilon(1e-13));
}
