// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include <doctest.h>

#include "ncg/train.hpp"

using namespace ncg;

namespace {

ModelSpec tiny_spec() {
  ModelSpec spec;
  spec.transformer = {{7, 8, true, 0.0}, {3, 8, true, 0.0}, {1, 2, false, 0.0}};
  spec.predictor = {{3, 8, true, 0.0}, {1, 2, false, 0.0}};
  spec.input_channels = 1;
  spec.num_classes = 2;
  spec.delta = 15;
  spec.alpha = 0.05;
  return spec;
}

Signal tiny_data(std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  NoiseSpec a{NoiseKind::ar1, 0.6}, b{NoiseKind::gaussian, 0.0};
  return gen_mixture(a, b, 500.0, n, rng);
}

}  // namespace

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  Tensor p = Tensor::from_values({3}, {1.0, -2.0, 0.5}, true);
  p.zero_grad();
  std::vector<Tensor> params{p};
  AdamState st;
  TrainConfig cfg;
  cfg.lr = 0.1;
  adam_step(params, st, cfg);
  CHECK(p.data() == std::vector<double>{1.0, -2.0, 0.5});
}

TEST_CASE("adam: first step with unit gradient moves by about -lr") {
  Tensor p = Tensor::from_values({1}, {0.0}, true);
  p.grad()[0] = 1.0;
  std::vector<Tensor> params{p};
  AdamState st;
  TrainConfig cfg;
  cfg.lr = 0.1;
  adam_step(params, st, cfg);
  CHECK(p.data()[0] == doctest::Approx(-0.1).epsilon(1e-6));
}

TEST_CASE("adam: non-finite gradient raises an error naming the parameter") {
  Tensor p = Tensor::from_values({2}, {0.0, 0.0}, true);
  p.grad()[1] = std::nan("");
  std::vector<Tensor> params{p};
  AdamState st;
  TrainConfig cfg;
  CHECK_THROWS_WITH_AS(adam_step(params, st, cfg),
                       doctest::Contains("parameter 0"), std::runtime_error);
}

TEST_CASE("training is bit-deterministic from (seed, config, data)") {
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 600;
  cfg.chunk_length = 200;
  cfg.lr = 2e-3;
  cfg.seed = 4242;
  auto data = tiny_data(1, 2000);
  auto held = tiny_data(2, 1000);

  Rng r1(7), r2(7);
  auto m1 = build(tiny_spec(), r1);
  auto m2 = build(tiny_spec(), r2);
  auto log1 = train(m1, data, held, cfg);
  auto log2 = train(m2, data, held, cfg);

  REQUIRE(log1.epochs.size() == 2);
  CHECK(log1.epochs[1].train_q == log2.epochs[1].train_q);
  CHECK(log1.epochs[1].test_q == log2.epochs[1].test_q);
  auto p1 = parameters(m1), p2 = parameters(m2);
  for (std::size_t i = 0; i < p1.size(); ++i) CHECK(p1[i].data() == p2[i].data());
}

TEST_CASE("zero epochs: empty RunLog, model untouched") {
  Rng rng(3);
  auto model = build(tiny_spec(), rng);
  auto before = parameters(model);
  std::vector<std::vector<double>> copy;
  for (auto& p : before) copy.push_back(p.data());
  TrainConfig cfg;
  cfg.epochs = 0;
  cfg.chunk_length = 200;
  auto log = train(model, tiny_data(4, 1000), tiny_data(5, 1000), cfg);
  CHECK(log.epochs.empty());
  auto after = parameters(model);
  for (std::size_t i = 0; i < after.size(); ++i) CHECK(after[i].data() == copy[i]);
}

TEST_CASE("epoch indices are contiguous and resuming continues the counter") {
  Rng rng(8);
  auto model = build(tiny_spec(), rng);
  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.batch_size = 600;
  cfg.chunk_length = 200;
  cfg.seed = 11;
  auto data = tiny_data(6, 1500);
  auto held = tiny_data(7, 800);
  auto first = train(model, data, held, cfg, 0);
  REQUIRE(first.epochs.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(first.epochs[i].epoch == i);
  auto resumed = train(model, data, held, cfg, 2);
  REQUIRE(resumed.epochs.size() == 2);
  CHECK(resumed.epochs[0].epoch == 2);
  CHECK(resumed.epochs[1].epoch == 3);
}

TEST_CASE("a model forced to emit uniform distributions has Q = 0 on any data") {
  Rng rng(5);
  auto model = build(tiny_spec(), rng);
  // zeroing the final layer of each stack makes both softmax outputs uniform
  auto zero_last = [](std::vector<LayerState>& stack) {
    for (auto& v : stack.back().kernel.data()) v = 0.0;
    for (auto& v : stack.back().bias.data()) v = 0.0;
  };
  zero_last(model.transformer);
  zero_last(model.predictor);
  for (std::uint64_t seed : {100ul, 101ul, 102ul}) {
    auto data = tiny_data(seed, 400);
    Tensor window = Tensor::from_values({1, 1, data.samples.size()}, data.samples);
    Tape tape;
    auto r = ncg_forward(tape, model, window, Mode::train);
    CHECK(std::abs(r.q.item()) < 1e-9);
  }
}

TEST_CASE("train validates chunk length against the receptive field") {
  Rng rng(6);
  auto model = build(preset("noise-default"), rng);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.chunk_length = 50;  // below rf + delta for noise-default
  CHECK_THROWS_AS(train(model, tiny_data(8, 1000), tiny_data(9, 500), cfg),
                  std::invalid_argument);
}

TEST_CASE("config validation") {
  TrainConfig cfg;
  cfg.lr = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.lr = 1e-3;
  cfg.beta1 = 1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.beta1 = 0.9;
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("f32 precision path stays finite and deterministic") {
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 600;
  cfg.chunk_length = 200;
  cfg.precision = Precision::f32;
  cfg.seed = 99;
  Rng r1(1), r2(1);
  auto m1 = build(tiny_spec(), r1);
  auto m2 = build(tiny_spec(), r2);
  auto data = tiny_data(10, 1200);
  auto held = tiny_data(11, 600);
  auto l1 = train(m1, data, held, cfg);
  auto l2 = train(m2, data, held, cfg);
  REQUIRE(l1.epochs.size() == 1);
  CHECK(std::isfinite(l1.epochs[0].train_q));
  CHECK(l1.epochs[0].train_q == l2.epochs[0].train_q);
  for (auto& p : parameters(m1))
    for (double v : p.data())
      CHECK(static_cast<double>(static_cast<float>(v)) == v);
}
