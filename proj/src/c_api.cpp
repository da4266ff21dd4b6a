// SPDX-License-Identifier: Apache-2.0
#include "ncg/ncg.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "ncg/experiment.hpp"
#include "ncg/model.hpp"

namespace {

thread_local std::string g_last_error;

ncg_status fail(ncg_status code, const char* what) {
  g_last_error = what;
  return code;
}

// std::invalid_argument marks config/usage problems throughout the core;
// everything else is a runtime failure.
template <typename F>
ncg_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return NCG_OK;
  } catch (const std::invalid_argument& e) {
    return fail(NCG_ERR_CONFIG, e.what());
  } catch (const std::exception& e) {
    return fail(NCG_ERR_RUNTIME, e.what());
  }
}

}  // namespace

struct ncg_model {
  ncg::ModelState state;
};

extern "C" {

const char* ncg_last_error(void) { return g_last_error.c_str(); }

ncg_status ncg_generate(const char* config_json) {
  if (config_json == nullptr) return fail(NCG_ERR_CONFIG, "config is null");
  return guarded([&] { ncg::cmd_generate(config_json); });
}

ncg_status ncg_train(const char* config_json) {
  if (config_json == nullptr) return fail(NCG_ERR_CONFIG, "config is null");
  return guarded([&] { ncg::cmd_train(config_json); });
}

ncg_status ncg_eval(const char* config_json) {
  if (config_json == nullptr) return fail(NCG_ERR_CONFIG, "config is null");
  return guarded([&] { ncg::cmd_eval(config_json); });
}

ncg_status ncg_sweep(const char* config_json, size_t threads) {
  if (config_json == nullptr) return fail(NCG_ERR_CONFIG, "config is null");
  return guarded([&] { ncg::cmd_sweep(config_json, threads); });
}

ncg_status ncg_gradcheck(uint64_t seed, size_t instances, char* report,
                         size_t report_len) {
  bool all_pass = false;
  std::string text;
  const ncg_status st = guarded(
      [&] { text = ncg::gradcheck_report(seed, instances, all_pass); });
  if (report != nullptr && report_len > 0) {
    const size_t n = std::min(text.size(), report_len - 1);
    std::memcpy(report, text.data(), n);
    report[n] = '\0';
  }
  if (st != NCG_OK) return st;
  if (!all_pass) return fail(NCG_ERR_RUNTIME, "gradient check failed");
  return NCG_OK;
}

ncg_status ncg_model_load(const char* checkpoint_path, ncg_model** out) {
  if (checkpoint_path == nullptr || out == nullptr)
    return fail(NCG_ERR_CONFIG, "null argument");
  *out = nullptr;
  return guarded([&] {
    auto* m = new ncg_model{ncg::load_checkpoint(checkpoint_path)};
    *out = m;
  });
}

void ncg_model_free(ncg_model* model) { delete model; }

ncg_status ncg_model_transform(ncg_model* model, const double* samples,
                               size_t num_samples, double** probs,
                               size_t* num_classes, size_t* length,
                               long* time_offset) {
  if (model == nullptr || samples == nullptr || probs == nullptr ||
      num_classes == nullptr || length == nullptr || time_offset == nullptr)
    return fail(NCG_ERR_CONFIG, "null argument");
  *probs = nullptr;
  return guarded([&] {
    std::vector<double> x(samples, samples + num_samples);
    const auto s = ncg::transform_signal(model->state, x);
    const size_t k = s.num_classes, t = s.length();
    auto* buf = static_cast<double*>(std::malloc(k * t * sizeof(double)));
    if (buf == nullptr) throw std::bad_alloc();
    for (size_t c = 0; c < k; ++c)
      for (size_t i = 0; i < t; ++i) buf[c * t + i] = s.values.at3(0, c, i);
    *probs = buf;
    *num_classes = k;
    *length = t;
    *time_offset = s.time_offset;
  });
}

void ncg_free(void* ptr) { std::free(ptr); }

}  // extern "C"
