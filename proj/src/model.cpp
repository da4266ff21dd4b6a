// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "ncg/model.hpp"

namespace ncg {

using nlohmann::json;

namespace {

std::size_t stack_rf(const std::vector<LayerSpec>& layers) {
  std::size_t rf = 1;
  for (const auto& l : layers) rf += l.width - 1;
  return rf;
}

}  // namespace

std::size_t ModelSpec::transformer_rf() const { return stack_rf(transformer); }
std::size_t ModelSpec::predictor_rf() const { return stack_rf(predictor); }

long ModelSpec::min_nonoverlap_delta() const {
  // predictor input at shat index j spans raw [j, j + (rf_p-1) + (rf_t-1)];
  // its target starts at raw j + center_p + delta.
  const long rf_t = static_cast<long>(transformer_rf());
  const long rf_p = static_cast<long>(predictor_rf());
  const long center_p = (rf_p - 1) / 2;
  return (rf_p - 1) + (rf_t - 1) - center_p + 1;
}

void ModelSpec::validate() const {
  if (transformer.empty() || predictor.empty())
    throw std::invalid_argument("model spec: empty layer stack");
  if (num_classes < 2) throw std::invalid_argument("model spec: need at least 2 classes");
  if (transformer.back().channels != num_classes)
    throw std::invalid_argument("model spec: transformer must end in num_classes channels");
  if (predictor.back().channels != num_classes)
    throw std::invalid_argument("model spec: predictor must end in num_classes channels");
  if (alpha < 0.0) throw std::invalid_argument("model spec: alpha must be >= 0");
  for (const auto& l : transformer)
    if (l.width < 1 || l.channels < 1)
      throw std::invalid_argument("model spec: layer width/channels must be >= 1");
  for (const auto& l : predictor)
    if (l.width < 1 || l.channels < 1)
      throw std::invalid_argument("model spec: layer width/channels must be >= 1");
  if (!allow_overlap && delta < min_nonoverlap_delta())
    throw std::invalid_argument(
        "model spec: delta " + std::to_string(delta) +
        " is below the non-overlap minimum " + std::to_string(min_nonoverlap_delta()) +
        " (set allow_overlap to override)");
}

ModelSpec preset(const std::string& name) {
  ModelSpec spec;
  if (name == "noise-default") {
    // Channel counts are not pinned by the reference setup; 32 is the
    // default hidden width (hidden-layer size has little effect here).
    spec.transformer = {{15, 32, true, 0.0}, {7, 32, true, 0.0}, {1, 2, false, 0.0}};
    spec.predictor = {{5, 32, true, 0.0}, {1, 32, true, 0.0}, {1, 2, false, 0.0}};
    spec.input_channels = 1;
    spec.num_classes = 2;
    spec.delta = 50;
    spec.alpha = 0.05;
  } else if (name == "har-ucinet") {
    spec.transformer = {{5, 100, true, 0.3}, {3, 100, true, 0.3}, {1, 20, true, 0.0}};
    spec.predictor = {{5, 100, true, 0.3}, {1, 100, true, 0.3}, {1, 20, true, 0.0}};
    spec.input_channels = 516;
    spec.num_classes = 20;
    spec.delta = 20;
    spec.alpha = 0.05;
  } else {
    throw std::invalid_argument("unknown preset: " + name);
  }
  spec.validate();
  return spec;
}

namespace {

std::vector<LayerState> build_stack(const std::vector<LayerSpec>& specs,
                                    std::size_t in_channels, Rng& rng) {
  std::vector<LayerState> out;
  std::size_t ci = in_channels;
  for (const auto& l : specs) {
    LayerState st;
    st.kernel = Tensor::zeros({l.channels, ci, l.width}, true);
    st.bias = Tensor::zeros({l.channels}, true);
    const double bound = std::sqrt(1.0 / static_cast<double>(ci * l.width));
    for (auto& v : st.kernel.data()) v = rng.uniform(-bound, bound);
    if (l.batch_norm) {
      st.gamma = Tensor::zeros({l.channels}, true);
      for (auto& v : st.gamma.data()) v = 1.0;
      st.beta = Tensor::zeros({l.channels}, true);
    }
    ci = l.channels;
    out.push_back(std::move(st));
  }
  return out;
}

Tensor run_stack(Tape& tape, const std::vector<LayerSpec>& specs,
                 std::vector<LayerState>& layers, Tensor x, double alpha,
                 Mode mode, Rng* rng) {
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& l = specs[i];
    x = conv1d(tape, x, layers[i].kernel, layers[i].bias);
    if (l.batch_norm)
      x = batch_norm(tape, x, layers[i].gamma, layers[i].beta, layers[i].bn, mode);
    const bool last = i + 1 == specs.size();
    if (last) {
      x = softmax(tape, x, 1);
    } else {
      x = leaky_relu(tape, x, alpha);
      if (l.dropout > 0.0 && mode == Mode::train) {
        if (!rng) throw std::invalid_argument("dropout layer requires an rng in train mode");
        x = dropout(tape, x, l.dropout, mode, *rng);
      }
    }
  }
  return x;
}

}  // namespace

ModelState build(const ModelSpec& spec, Rng& rng) {
  spec.validate();
  ModelState state;
  state.spec = spec;
  Rng rt = rng.split(1), rp = rng.split(2);
  state.transformer = build_stack(spec.transformer, spec.input_channels, rt);
  state.predictor = build_stack(spec.predictor, spec.num_classes, rp);
  return state;
}

std::vector<Tensor> parameters(ModelState& state) {
  std::vector<Tensor> ps;
  for (auto* stack : {&state.transformer, &state.predictor})
    for (auto& l : *stack) {
      ps.push_back(l.kernel);
      ps.push_back(l.bias);
      if (l.gamma.valid()) {
        ps.push_back(l.gamma);
        ps.push_back(l.beta);
      }
    }
  return ps;
}

ClassDistributionSeries transform(Tape& tape, ModelState& state,
                                  const Tensor& window, Mode mode, Rng* rng) {
  const auto& spec = state.spec;
  if (window.rank() != 3 || window.dim(1) != spec.input_channels)
    throw std::invalid_argument("transform: window must be [B, input_channels, T]");
  if (window.dim(2) < spec.transformer_rf())
    throw std::invalid_argument("transform: window length " +
                                std::to_string(window.dim(2)) +
                                " is below the receptive field " +
                                std::to_string(spec.transformer_rf()));
  Tensor out = run_stack(tape, spec.transformer, state.transformer, window,
                         spec.alpha, mode, rng);
  ClassDistributionSeries s;
  s.values = out;
  s.num_classes = spec.num_classes;
  s.time_offset = static_cast<long>((spec.transformer_rf() - 1) / 2);
  return s;
}

ClassDistributionSeries predict(Tape& tape, ModelState& state,
                                const ClassDistributionSeries& s, Mode mode,
                                Rng* rng) {
  const auto& spec = state.spec;
  if (s.num_classes != spec.num_classes)
    throw std::invalid_argument("predict: class count mismatch");
  if (s.length() < spec.predictor_rf())
    throw std::invalid_argument("predict: input length " +
                                std::to_string(s.length()) +
                                " is below the predictor receptive field " +
                                std::to_string(spec.predictor_rf()));
  Tensor out = run_stack(tape, spec.predictor, state.predictor, s.values,
                         spec.alpha, mode, rng);
  ClassDistributionSeries shat;
  shat.values = out;
  shat.num_classes = spec.num_classes;
  shat.time_offset =
      s.time_offset + static_cast<long>((spec.predictor_rf() - 1) / 2);
  return shat;
}

ForwardResult ncg_forward(Tape& tape, ModelState& state, const Tensor& window,
                          Mode mode, Rng* rng) {
  ForwardResult r;
  r.s = transform(tape, state, window, mode, rng);
  r.shat = predict(tape, state, r.s, mode, rng);
  r.q = ncg_loss(tape, r.s, r.shat, state.spec.delta, state.spec.stop_target_grad);
  return r;
}

ClassDistributionSeries transform_signal(ModelState& state,
                                         const std::vector<double>& samples) {
  Tensor window = Tensor::from_values({1, 1, samples.size()}, samples);
  Tape tape;  // recorded closures are simply discarded
  return transform(tape, state, window, Mode::infer);
}

// ---------------------------------------------------------------------------
// serialization

namespace {

json layer_spec_to_json(const LayerSpec& l) {
  return json{{"width", l.width},
              {"channels", l.channels},
              {"batch_norm", l.batch_norm},
              {"dropout", l.dropout}};
}

LayerSpec layer_spec_from_json(const json& j) {
  LayerSpec l;
  l.width = j.at("width").get<std::size_t>();
  l.channels = j.at("channels").get<std::size_t>();
  l.batch_norm = j.value("batch_norm", false);
  l.dropout = j.value("dropout", 0.0);
  return l;
}

json spec_to_json_obj(const ModelSpec& spec) {
  json jt = json::array(), jp = json::array();
  for (const auto& l : spec.transformer) jt.push_back(layer_spec_to_json(l));
  for (const auto& l : spec.predictor) jp.push_back(layer_spec_to_json(l));
  return json{{"transformer", jt},
              {"predictor", jp},
              {"input_channels", spec.input_channels},
              {"num_classes", spec.num_classes},
              {"delta", spec.delta},
              {"alpha", spec.alpha},
              {"stop_target_grad", spec.stop_target_grad},
              {"allow_overlap", spec.allow_overlap}};
}

ModelSpec spec_from_json_obj(const json& j) {
  ModelSpec spec;
  spec.transformer.clear();
  spec.predictor.clear();
  for (const auto& l : j.at("transformer")) spec.transformer.push_back(layer_spec_from_json(l));
  for (const auto& l : j.at("predictor")) spec.predictor.push_back(layer_spec_from_json(l));
  spec.input_channels = j.at("input_channels").get<std::size_t>();
  spec.num_classes = j.at("num_classes").get<std::size_t>();
  spec.delta = j.at("delta").get<long>();
  spec.alpha = j.at("alpha").get<double>();
  spec.stop_target_grad = j.value("stop_target_grad", false);
  spec.allow_overlap = j.value("allow_overlap", false);
  spec.validate();
  return spec;
}

json layer_state_to_json(const LayerState& l) {
  json j;
  j["kernel_shape"] = l.kernel.shape();
  j["kernel"] = l.kernel.data();
  j["bias"] = l.bias.data();
  if (l.gamma.valid()) {
    j["gamma"] = l.gamma.data();
    j["beta"] = l.beta.data();
    j["bn_mean"] = l.bn.running_mean;
    j["bn_var"] = l.bn.running_var;
    j["bn_updates"] = l.bn.updates;
  }
  return j;
}

LayerState layer_state_from_json(const json& j) {
  LayerState l;
  l.kernel = Tensor::from_values(j.at("kernel_shape").get<std::vector<std::size_t>>(),
                                 j.at("kernel").get<std::vector<double>>(), true);
  l.bias = Tensor::from_values({j.at("bias").size()},
                               j.at("bias").get<std::vector<double>>(), true);
  if (j.contains("gamma")) {
    l.gamma = Tensor::from_values({j.at("gamma").size()},
                                  j.at("gamma").get<std::vector<double>>(), true);
    l.beta = Tensor::from_values({j.at("beta").size()},
                                 j.at("beta").get<std::vector<double>>(), true);
    l.bn.running_mean = j.at("bn_mean").get<std::vector<double>>();
    l.bn.running_var = j.at("bn_var").get<std::vector<double>>();
    l.bn.updates = j.at("bn_updates").get<std::int64_t>();
  }
  return l;
}

}  // namespace

std::string spec_to_json(const ModelSpec& spec) { return spec_to_json_obj(spec).dump(); }

ModelSpec spec_from_json(const std::string& text) {
  return spec_from_json_obj(json::parse(text));
}

void save_checkpoint(const ModelState& state, const std::string& path) {
  json j;
  j["format"] = "ncg-checkpoint";
  j["version"] = 1;
  j["spec"] = spec_to_json_obj(state.spec);
  json jt = json::array(), jp = json::array();
  for (const auto& l : state.transformer) jt.push_back(layer_state_to_json(l));
  for (const auto& l : state.predictor) jp.push_back(layer_state_to_json(l));
  j["transformer"] = jt;
  j["predictor"] = jp;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
  out << j.dump() << "\n";
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

ModelState load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  json j = json::parse(in);
  if (j.value("format", "") != "ncg-checkpoint")
    throw std::runtime_error("checkpoint: unrecognized format in " + path);
  if (j.at("version").get<int>() != 1)
    throw std::runtime_error("checkpoint: unsupported version");
  ModelState state;
  state.spec = spec_from_json_obj(j.at("spec"));
  for (const auto& l : j.at("transformer"))
    state.transformer.push_back(layer_state_from_json(l));
  for (const auto& l : j.at("predictor"))
    state.predictor.push_back(layer_state_from_json(l));
  if (state.transformer.size() != state.spec.transformer.size() ||
      state.predictor.size() != state.spec.predictor.size())
    throw std::runtime_error("checkpoint: layer count mismatch");
  return state;
}

}  // namespace ncg
