// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <cstdio>

#include <doctest.h>

#include "ncg/model.hpp"

using namespace ncg;

namespace {

Tensor random_window(std::size_t batch, std::size_t channels, std::size_t len,
                     std::uint64_t seed) {
  Rng rng(seed);
  Tensor w = Tensor::zeros({batch, channels, len});
  for (auto& v : w.data()) v = rng.normal();
  return w;
}

}  // namespace

TEST_CASE("noise-default spec round-trips through serialization") {
  auto spec = preset("noise-default");
  auto back = spec_from_json(spec_to_json(spec));
  CHECK(back.num_classes == 2);
  CHECK(back.delta == 50);
  CHECK(back.alpha == 0.05);
  CHECK(back.input_channels == 1);
  REQUIRE(back.transformer.size() == 3);
  CHECK(back.transformer[0].width == 15);
  CHECK(back.transformer[1].width == 7);
  CHECK(back.transformer[2].width == 1);
  CHECK(back.transformer[0].batch_norm);
  CHECK(back.transformer[1].batch_norm);
  CHECK_FALSE(back.transformer[2].batch_norm);
  CHECK(spec_to_json(back) == spec_to_json(spec));
}

TEST_CASE("receptive fields of the shipped presets") {
  auto noise = preset("noise-default");
  CHECK(noise.transformer_rf() == 21);  // (15-1)+(7-1)+(1-1)+1
  CHECK(noise.predictor_rf() == 5);
  auto har = preset("har-ucinet");
  CHECK(har.transformer_rf() == 7);  // 5+3+1 valid convs
  CHECK(har.predictor_rf() == 5);
  CHECK(har.num_classes == 20);
  CHECK(har.delta == 20);
  CHECK(har.input_channels == 516);
}

TEST_CASE("delta below the non-overlap minimum is rejected unless overridden") {
  auto spec = preset("noise-default");
  spec.delta = 5;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec.allow_overlap = true;
  CHECK_NOTHROW(spec.validate());
  CHECK(preset("noise-default").min_nonoverlap_delta() == 23);
}

TEST_CASE("unknown preset is an error") {
  CHECK_THROWS_AS(preset("nope"), std::invalid_argument);
}

TEST_CASE("transform output: distribution rows, length and offset") {
  Rng rng(1);
  auto model = build(preset("noise-default"), rng);
  Tensor window = random_window(2, 1, 120, 7);
  Tape tape;
  auto s = transform(tape, model, window, Mode::train);
  CHECK(s.length() == 120 - (21 - 1));
  CHECK(s.time_offset == 10);
  CHECK_NOTHROW(s.validate(1e-9));
}

TEST_CASE("transform rejects too-short windows") {
  Rng rng(2);
  auto model = build(preset("noise-default"), rng);
  Tensor window = random_window(1, 1, 15, 3);
  Tape tape;
  CHECK_THROWS_AS(transform(tape, model, window, Mode::train), std::invalid_argument);
}

TEST_CASE("identical windows give identical outputs in inference mode") {
  Rng rng(3);
  auto model = build(preset("noise-default"), rng);
  Tensor window = random_window(1, 1, 150, 11);
  {
    Tape warm;  // one training pass to populate batch-norm statistics
    transform(warm, model, window, Mode::train);
  }
  Tape t1, t2;
  auto a = transform(t1, model, window, Mode::infer);
  auto b = transform(t2, model, window, Mode::infer);
  CHECK(a.values.data() == b.values.data());
}

TEST_CASE("predict alignment arithmetic for noise-default") {
  Rng rng(4);
  auto model = build(preset("noise-default"), rng);
  Tensor window = random_window(1, 1, 200, 13);
  Tape tape;
  auto s = transform(tape, model, window, Mode::train);
  auto shat = predict(tape, model, s, Mode::train);
  CHECK(shat.length() == s.length() - (5 - 1));
  // shat index j is anchored at s index j + 2; hand count for j = 0:
  // raw anchor = 0 + 2 + 10 = 12, target raw = 12 + 50
  CHECK(shat.time_offset == 12);
  CHECK_NOTHROW(shat.validate(1e-9));
  CHECK_THROWS_AS(predict(tape, model, ClassDistributionSeries{
                    Tensor::zeros({1, 2, 3}), 2, 0}, Mode::train),
                  std::invalid_argument);
}

TEST_CASE("alignment invariant holds over random specs by index bookkeeping") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    ModelSpec spec;
    const std::size_t k = 2 + rng.uniform_index(3);
    auto layer = [&](bool last) {
      return LayerSpec{1 + rng.uniform_index(8),
                       last ? k : 1 + rng.uniform_index(6), false, 0.0};
    };
    spec.transformer = {layer(false), layer(true)};
    spec.predictor = {layer(false), layer(true)};
    spec.num_classes = k;
    spec.input_channels = 1;
    spec.delta = spec.min_nonoverlap_delta() + static_cast<long>(rng.uniform_index(20));
    CHECK_NOTHROW(spec.validate());
    Rng init(1000 + trial);
    auto model = build(spec, init);
    const std::size_t need = spec.transformer_rf() +
                             static_cast<std::size_t>(spec.delta) +
                             spec.predictor_rf() + 8;
    Tensor window = random_window(1, 1, need, 77 + trial);
    Tape tape;
    auto s = transform(tape, model, window, Mode::train);
    auto shat = predict(tape, model, s, Mode::train);
    // raw-signal index targeted by shat_j must be its anchor + delta
    const long anchor0 = shat.time_offset;
    const long target0 = anchor0 + spec.delta;
    const long target_s_index = target0 - s.time_offset;
    CHECK(target_s_index ==
          static_cast<long>((spec.predictor_rf() - 1) / 2) + spec.delta);
    CHECK(target_s_index >= 0);
    CHECK(target_s_index < static_cast<long>(s.length()));
  }
}

TEST_CASE("ncg_forward produces finite loss on a 200-sample window") {
  Rng rng(6);
  auto model = build(preset("noise-default"), rng);
  Tensor window = random_window(1, 1, 200, 17);
  Tape tape;
  auto r = ncg_forward(tape, model, window, Mode::train);
  CHECK(std::isfinite(r.q.item()));
}

TEST_CASE("freshly initialized network sits near the trivial plateau") {
  for (std::uint64_t seed : {21ul, 22ul, 23ul}) {
    Rng rng(seed);
    auto model = build(preset("noise-default"), rng);
    Tensor window = random_window(4, 1, 250, seed);
    Tape tape;
    auto r = ncg_forward(tape, model, window, Mode::train);
    CHECK(std::abs(r.q.item()) < 0.1);
  }
}

TEST_CASE("transformer gradients are nonzero with predictor frozen") {
  Rng rng(7);
  auto model = build(preset("noise-default"), rng);
  for (auto& l : model.predictor) {
    l.kernel.set_track(false);
    l.bias.set_track(false);
    if (l.gamma.valid()) {
      l.gamma.set_track(false);
      l.beta.set_track(false);
    }
  }
  Tensor window = random_window(2, 1, 200, 19);
  Tape tape;
  auto r = ncg_forward(tape, model, window, Mode::train);
  for (auto& l : model.transformer) l.kernel.zero_grad();
  tape.backward(r.q);
  double norm = 0;
  for (auto& l : model.transformer)
    for (double g : l.kernel.grad()) norm += g * g;
  CHECK(norm > 0.0);
}

TEST_CASE("jointly permuting class channels leaves Q unchanged") {
  Rng rng(8);
  auto model = build(preset("noise-default"), rng);
  Tensor window = random_window(2, 1, 220, 23);
  Tape t1;
  const double q1 = ncg_forward(t1, model, window, Mode::train).q.item();

  // swap the two class channels everywhere they appear:
  // transformer output layer rows, predictor input channels, predictor
  // output layer rows
  auto& tout = model.transformer.back();
  auto& pin = model.predictor.front();
  auto& pout = model.predictor.back();
  auto swap_out_rows = [](LayerState& l) {
    const std::size_t ci = l.kernel.dim(1), w = l.kernel.dim(2);
    for (std::size_t i = 0; i < ci * w; ++i)
      std::swap(l.kernel.data()[0 * ci * w + i], l.kernel.data()[1 * ci * w + i]);
    std::swap(l.bias.data()[0], l.bias.data()[1]);
  };
  swap_out_rows(tout);
  swap_out_rows(pout);
  const std::size_t co = pin.kernel.dim(0), ci = pin.kernel.dim(1), w = pin.kernel.dim(2);
  REQUIRE(ci == 2);
  for (std::size_t o = 0; o < co; ++o)
    for (std::size_t x = 0; x < w; ++x)
      std::swap(pin.kernel.data()[(o * ci + 0) * w + x],
                pin.kernel.data()[(o * ci + 1) * w + x]);

  Tape t2;
  const double q2 = ncg_forward(t2, model, window, Mode::train).q.item();
  CHECK(std::abs(q1 - q2) < 1e-10);
}

TEST_CASE("save -> load -> forward is bit-identical") {
  Rng rng(9);
  auto model = build(preset("noise-default"), rng);
  Tensor window = random_window(1, 1, 180, 29);
  {
    Tape warm;
    transform(warm, model, window, Mode::train);  // give bn stats some history
  }
  Tape t1;
  auto r1 = ncg_forward(t1, model, window, Mode::train);

  const std::string path = "/tmp/ncg_test_checkpoint.json";
  save_checkpoint(model, path);
  auto loaded = load_checkpoint(path);
  std::remove(path.c_str());

  Tape t2;
  auto r2 = ncg_forward(t2, loaded, window, Mode::train);
  CHECK(r1.q.item() == r2.q.item());
  CHECK(r1.s.values.data() == r2.s.values.data());
  CHECK(r1.shat.values.data() == r2.shat.values.data());
}

TEST_CASE("stop_target_grad blocks the target branch but not the entropy term") {
  Rng rng(10);
  auto spec = preset("noise-default");
  spec.stop_target_grad = true;
  auto model = build(spec, rng);
  Tensor window = random_window(2, 1, 200, 31);
  Tape tape;
  auto r = ncg_forward(tape, model, window, Mode::train);
  for (auto& l : model.transformer) l.kernel.zero_grad();
  for (auto& l : model.predictor) l.kernel.zero_grad();
  tape.backward(r.q);
  double tnorm = 0;
  for (auto& l : model.transformer)
    for (double g : l.kernel.grad()) tnorm += g * g;
  CHECK(tnorm > 0.0);  // entropy-of-average path still reaches T2
}
