// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>

#include "ncg/gradcheck.hpp"
#include "ncg/loss.hpp"
#include "ncg/model.hpp"

namespace ncg {

double max_grad_error(const std::function<Tensor(Tape&)>& forward,
                      std::vector<Tensor> params, double h) {
  for (auto& p : params) p.zero_grad();
  Tape tape;
  Tensor loss = forward(tape);
  tape.backward(loss);

  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (auto& p : params) analytic.push_back(p.grad());

  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    for (std::size_t j = 0; j < p.numel(); ++j) {
      const double orig = p.data()[j];
      p.data()[j] = orig + h;
      Tape tp;
      const double fp = forward(tp).item();
      p.data()[j] = orig - h;
      Tape tm;
      const double fm = forward(tm).item();
      p.data()[j] = orig;
      const double fd = (fp - fm) / (2.0 * h);
      const double a = analytic[i][j];
      const double denom = std::max({std::abs(a), std::abs(fd), 1e-3});
      worst = std::max(worst, std::abs(a - fd) / denom);
    }
  }
  return worst;
}

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, bool track,
                     double lo = -2.0, double hi = 2.0) {
  Tensor t = Tensor::zeros(std::move(shape), track);
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

// Fixed-weight scalar reduction; exposes every output element to the
// loss so a plain sum's gradient structure cannot mask bugs.
Tensor weighted_sum(Tape& tape, const Tensor& y, const Tensor& w) {
  double acc = 0.0;
  for (std::size_t i = 0; i < y.numel(); ++i) acc += y.data()[i] * w.data()[i];
  Tensor out = Tensor::scalar(acc);
  if (y.track()) {
    out.set_track(true);
    Tensor yc = y, oc = out, wc = w;
    tape.record([yc, oc, wc]() mutable {
      for (std::size_t i = 0; i < yc.numel(); ++i)
        yc.grad()[i] += oc.grad()[0] * wc.data()[i];
    });
  }
  return out;
}

double check_conv(Rng& rng) {
  const std::size_t B = 1 + rng.uniform_index(2), Ci = 1 + rng.uniform_index(3);
  const std::size_t Co = 1 + rng.uniform_index(3), W = 1 + rng.uniform_index(4);
  const std::size_t T = W + rng.uniform_index(7);
  Tensor x = random_tensor({B, Ci, T}, rng, true);
  Tensor k = random_tensor({Co, Ci, W}, rng, true);
  Tensor b = random_tensor({Co}, rng, true);
  Tensor w = random_tensor({B * Co * (T - W + 1)}, rng, false);
  auto fwd = [&](Tape& tape) { return weighted_sum(tape, conv1d(tape, x, k, b), w); };
  return max_grad_error(fwd, {x, k, b});
}

double check_leaky_relu(Rng& rng) {
  Tensor x = random_tensor({2, 3, 5}, rng, true);
  for (auto& v : x.data())  // keep clear of the kink at 0
    while (std::abs(v) < 1e-3) v = rng.uniform(-2.0, 2.0);
  const double alpha = rng.uniform(0.0, 0.5);
  Tensor w = random_tensor({x.numel()}, rng, false);
  auto fwd = [&](Tape& tape) {
    return weighted_sum(tape, leaky_relu(tape, x, alpha), w);
  };
  return max_grad_error(fwd, {x});
}

double check_batch_norm(Rng& rng) {
  const std::size_t C = 1 + rng.uniform_index(3);
  Tensor x = random_tensor({2, C, 4}, rng, true);
  Tensor gamma = random_tensor({C}, rng, true, 0.5, 1.5);
  Tensor beta = random_tensor({C}, rng, true);
  Tensor w = random_tensor({x.numel()}, rng, false);
  auto stats = std::make_shared<BatchNormStats>();
  auto fwd = [&, stats](Tape& tape) {
    return weighted_sum(tape, batch_norm(tape, x, gamma, beta, *stats, Mode::train), w);
  };
  return max_grad_error(fwd, {x, gamma, beta});
}

double check_dropout(Rng& rng) {
  Tensor x = random_tensor({2, 2, 6}, rng, true);
  const double rate = rng.uniform(0.0, 0.6);
  const std::uint64_t mask_seed = rng.next_u64();
  Tensor w = random_tensor({x.numel()}, rng, false);
  auto fwd = [&, mask_seed, rate](Tape& tape) {
    Rng mask_rng(mask_seed);  // identical mask for every evaluation
    return weighted_sum(tape, dropout(tape, x, rate, Mode::train, mask_rng), w);
  };
  return max_grad_error(fwd, {x});
}

double check_softmax(Rng& rng) {
  Tensor x = random_tensor({2, 4, 3}, rng, true);
  Tensor w = random_tensor({x.numel()}, rng, false);
  auto fwd = [&](Tape& tape) { return weighted_sum(tape, softmax(tape, x, 1), w); };
  return max_grad_error(fwd, {x});
}

double check_ncg_loss(Rng& rng) {
  const std::size_t K = 2 + rng.uniform_index(3);
  Tensor ls = random_tensor({1, K, 8}, rng, true);
  Tensor lp = random_tensor({1, K, 6}, rng, true);
  const long delta = 1 + static_cast<long>(rng.uniform_index(2));
  auto fwd = [&, K, delta](Tape& tape) {
    ClassDistributionSeries s{softmax(tape, ls, 1), K, 0};
    ClassDistributionSeries shat{softmax(tape, lp, 1), K, 0};
    return ncg_loss(tape, s, shat, delta);
  };
  return max_grad_error(fwd, {ls, lp});
}

double check_qreg(Rng& rng) {
  const std::size_t D = 1 + rng.uniform_index(3);
  Tensor y = random_tensor({2, D, 6}, rng, true);
  Tensor e = random_tensor({2, D, 6}, rng, true);
  auto fwd = [&](Tape& tape) {
    return ncg_loss_continuous(tape, y, ResidualSeries{e});
  };
  return max_grad_error(fwd, {y, e});
}

double check_composed_q(Rng& rng) {
  ModelSpec spec;
  spec.transformer = {{3, 3, true, 0.0}, {1, 2, false, 0.0}};
  spec.predictor = {{3, 3, true, 0.0}, {1, 2, false, 0.0}};
  spec.input_channels = 1;
  spec.num_classes = 2;
  spec.delta = 5;
  spec.alpha = 0.05;
  Rng init = rng.split(rng.next_u64());
  ModelState model = build(spec, init);
  Tensor window = random_tensor({2, 1, 16}, rng, false);
  auto fwd = [&](Tape& tape) {
    return ncg_forward(tape, model, window, Mode::train).q;
  };
  return max_grad_error(fwd, parameters(model));
}

}  // namespace

std::vector<GradCheckResult> run_gradcheck_suite(std::uint64_t seed,
                                                 std::size_t instances) {
  struct Entry {
    const char* name;
    double (*fn)(Rng&);
  };
  const Entry entries[] = {
      {"conv1d", check_conv},
      {"leaky_relu", check_leaky_relu},
      {"batch_norm", check_batch_norm},
      {"dropout", check_dropout},
      {"softmax", check_softmax},
      {"ncg_loss", check_ncg_loss},
      {"ncg_loss_continuous", check_qreg},
      {"composed_q", check_composed_q},
  };
  std::vector<GradCheckResult> results;
  Rng root(seed);
  std::uint64_t stream = 1;
  for (const auto& e : entries) {
    Rng r = root.split(stream++);
    double worst = 0.0;
    for (std::size_t i = 0; i < instances; ++i) worst = std::max(worst, e.fn(r));
    results.push_back({e.name, worst, worst < kGradCheckThreshold});
  }
  return results;
}

}  // namespace ncg
