// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <string>

#include "ncg/train.hpp"

namespace ncg {

void TrainConfig::validate() const {
  if (lr <= 0.0) throw std::invalid_argument("train config: lr must be > 0");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
    throw std::invalid_argument("train config: betas must be in [0, 1)");
  if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
  if (chunk_length < 1)
    throw std::invalid_argument("train config: chunk_length must be >= 1");
}

void adam_step(std::vector<Tensor>& params, AdamState& st, const TrainConfig& cfg) {
  if (st.m.size() != params.size()) {
    st.m.resize(params.size());
    st.v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      st.m[i].assign(params[i].numel(), 0.0);
      st.v[i].assign(params[i].numel(), 0.0);
    }
  }
  st.t++;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.t));

  double sqnorm = 0.0;
  if (cfg.grad_clip) {
    for (auto& p : params)
      for (double g : p.grad()) sqnorm += g * g;
  }
  const double clip = cfg.grad_clip && sqnorm > cfg.grad_clip_norm * cfg.grad_clip_norm
                          ? cfg.grad_clip_norm / std::sqrt(sqnorm)
                          : 1.0;

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    auto& g = p.grad();
    for (std::size_t j = 0; j < p.numel(); ++j) {
      if (!std::isfinite(g[j]))
        throw std::runtime_error("adam_step: non-finite gradient in parameter " +
                                 std::to_string(i) + " element " + std::to_string(j));
      const double gj = g[j] * clip;
      st.m[i][j] = cfg.beta1 * st.m[i][j] + (1.0 - cfg.beta1) * gj;
      st.v[i][j] = cfg.beta2 * st.v[i][j] + (1.0 - cfg.beta2) * gj * gj;
      const double mhat = st.m[i][j] / bc1;
      const double vhat = st.v[i][j] / bc2;
      p.data()[j] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps_adam);
      if (cfg.precision == Precision::f32)
        p.data()[j] = static_cast<double>(static_cast<float>(p.data()[j]));
    }
  }
}

namespace {

std::size_t min_window_length(const ModelSpec& spec) {
  const long rf_t = static_cast<long>(spec.transformer_rf());
  const long rf_p = static_cast<long>(spec.predictor_rf());
  const long center_p = (rf_p - 1) / 2;
  const long need = std::max(rf_t + rf_p - 1, rf_t + center_p + spec.delta);
  return static_cast<std::size_t>(need);
}

Tensor batch_tensor(const Signal& data, const std::vector<std::size_t>& chunk_starts,
                    std::size_t chunk_length) {
  Tensor t = Tensor::zeros({chunk_starts.size(), 1, chunk_length});
  for (std::size_t b = 0; b < chunk_starts.size(); ++b)
    std::copy(data.samples.begin() + static_cast<long>(chunk_starts[b]),
              data.samples.begin() + static_cast<long>(chunk_starts[b] + chunk_length),
              t.data().begin() + static_cast<long>(b * chunk_length));
  return t;
}

std::vector<std::vector<double>> snapshot(std::vector<Tensor>& params) {
  std::vector<std::vector<double>> s;
  s.reserve(params.size());
  for (auto& p : params) s.push_back(p.data());
  return s;
}

void restore(std::vector<Tensor>& params, const std::vector<std::vector<double>>& s) {
  for (std::size_t i = 0; i < params.size(); ++i) params[i].data() = s[i];
}

}  // namespace

double evaluate_q(ModelState& model, const Signal& data, std::size_t chunk_length) {
  const std::size_t n_chunks = data.samples.size() / chunk_length;
  if (n_chunks == 0)
    throw std::invalid_argument("evaluate_q: signal shorter than one chunk");
  const std::size_t per_batch = std::max<std::size_t>(1, 50000 / chunk_length);
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t c0 = 0; c0 < n_chunks; c0 += per_batch) {
    std::vector<std::size_t> starts;
    for (std::size_t c = c0; c < std::min(n_chunks, c0 + per_batch); ++c)
      starts.push_back(c * chunk_length);
    Tensor batch = batch_tensor(data, starts, chunk_length);
    Tape tape;
    auto r = ncg_forward(tape, model, batch, Mode::infer);
    acc += r.q.item() * static_cast<double>(starts.size());
    count += starts.size();
  }
  return acc / static_cast<double>(count);
}

RunLog train(ModelState& model, const Signal& train_data, const Signal& test_data,
             const TrainConfig& cfg, std::size_t start_epoch) {
  cfg.validate();
  if (cfg.chunk_length < min_window_length(model.spec))
    throw std::invalid_argument(
        "train: chunk_length " + std::to_string(cfg.chunk_length) +
        " is below the minimum window " + std::to_string(min_window_length(model.spec)));
  const std::size_t n_chunks = train_data.samples.size() / cfg.chunk_length;
  if (n_chunks == 0) throw std::invalid_argument("train: training signal too short");

  RunLog log;
  if (start_epoch >= cfg.epochs) return log;

  auto params = parameters(model);
  AdamState adam;
  Rng root(cfg.seed);
  Rng dropout_rng = root.split(7);

  const std::size_t chunks_per_batch =
      std::max<std::size_t>(1, cfg.batch_size / cfg.chunk_length);

  std::vector<std::size_t> order(n_chunks);
  for (std::size_t i = 0; i < n_chunks; ++i) order[i] = i;

  auto good = snapshot(params);
  const auto t0 = std::chrono::steady_clock::now();

  for (std::size_t epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    const auto e0 = std::chrono::steady_clock::now();
    Rng shuffle_rng = root.split(1000 + epoch);
    for (std::size_t i = n_chunks; i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.uniform_index(i)]);

    double train_q = 0.0;
    std::size_t batches = 0;
    bool diverged = false;
    for (std::size_t c0 = 0; c0 < n_chunks; c0 += chunks_per_batch) {
      std::vector<std::size_t> starts;
      for (std::size_t c = c0; c < std::min(n_chunks, c0 + chunks_per_batch); ++c)
        starts.push_back(order[c] * cfg.chunk_length);
      Tensor batch = batch_tensor(train_data, starts, cfg.chunk_length);
      Tape tape;
      ForwardResult r;
      try {
        r = ncg_forward(tape, model, batch, Mode::train, &dropout_rng);
        if (!std::isfinite(r.q.item())) throw std::runtime_error("non-finite Q");
        for (auto& p : params) p.zero_grad();
        tape.backward(r.q);
        adam_step(params, adam, cfg);
      } catch (const std::runtime_error&) {
        diverged = true;
        break;
      }
      train_q += r.q.item();
      batches++;
    }
    if (diverged) {
      restore(params, good);
      log.diverged = true;
      break;
    }
    good = snapshot(params);

    const double test_q = evaluate_q(model, test_data, cfg.chunk_length);
    const auto e1 = std::chrono::steady_clock::now();
    log.epochs.push_back(
        {epoch, train_q / static_cast<double>(std::max<std::size_t>(1, batches)),
         test_q, std::chrono::duration<double>(e1 - e0).count()});
  }
  log.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return log;
}

}  // namespace ncg
