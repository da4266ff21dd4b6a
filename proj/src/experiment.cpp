// SPDX-License-Identifier: Apache-2.0
#include "ncg/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "ncg/analysis.hpp"
#include "ncg/gradcheck.hpp"
#include "ncg/train.hpp"

namespace ncg {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& msg) {
  throw std::invalid_argument("config: " + msg);
}

json parse_config(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) config_error("not valid JSON");
  if (!j.is_object()) config_error("top level must be an object");
  return j;
}

void check_keys(const json& j, const std::vector<std::string>& allowed,
                const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
      config_error("unknown key \"" + it.key() + "\" in " + where);
}

const json& require(const json& j, const std::string& key,
                    const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) config_error("missing \"" + key + "\" in " + where);
  return *it;
}

double as_number(const json& j, const std::string& where) {
  if (!j.is_number()) config_error(where + " must be a number");
  return j.get<double>();
}

std::size_t as_count(const json& j, const std::string& where) {
  if (!j.is_number_unsigned()) config_error(where + " must be a non-negative integer");
  return j.get<std::size_t>();
}

std::string as_string(const json& j, const std::string& where) {
  if (!j.is_string()) config_error(where + " must be a string");
  return j.get<std::string>();
}

NoiseSpec parse_noise(const json& j, const std::string& where) {
  if (!j.is_object()) config_error(where + " must be an object");
  check_keys(j, {"kind", "theta", "cos_theta"}, where);
  NoiseSpec spec;
  try {
    spec.kind = noise_kind_from_string(as_string(require(j, "kind", where), where + ".kind"));
  } catch (const std::invalid_argument& e) {
    config_error(where + ": " + e.what());
  }
  const bool has_theta = j.contains("theta"), has_cos = j.contains("cos_theta");
  if (spec.kind != NoiseKind::ar1) {
    if (has_theta || has_cos)
      config_error(where + ": theta applies only to ar1 noise");
    return spec;
  }
  if (has_theta == has_cos)
    config_error(where + ": ar1 needs exactly one of theta, cos_theta");
  if (has_theta) {
    spec.theta = as_number(j["theta"], where + ".theta");
  } else {
    const double c = as_number(j["cos_theta"], where + ".cos_theta");
    if (!(c >= 0.0 && c < 1.0))
      config_error(where + ".cos_theta must be in [0, 1)");
    spec.theta = std::acos(c);
  }
  return spec;
}

// Either an in-memory generator recipe or a pair of CSV paths.
struct DataConfig {
  bool generated = false;
  NoiseSpec a, b;
  double tau = 2000.0;
  std::size_t train_samples = 0, test_samples = 0;
  std::uint64_t seed = 0;

  std::string train_csv, test_csv, truth_csv;
  std::string column = "0";
};

DataConfig parse_data(const json& cfg) {
  const json& j = require(cfg, "data", "config");
  if (!j.is_object()) config_error("data must be an object");
  DataConfig d;
  if (j.contains("a") || j.contains("b")) {
    check_keys(j, {"a", "b", "tau", "train_samples", "test_samples", "seed"},
               "data");
    d.generated = true;
    d.a = parse_noise(require(j, "a", "data"), "data.a");
    d.b = parse_noise(require(j, "b", "data"), "data.b");
    d.tau = as_number(require(j, "tau", "data"), "data.tau");
    if (!(d.tau > 0.0)) config_error("data.tau must be > 0");
    d.train_samples = as_count(require(j, "train_samples", "data"), "data.train_samples");
    d.test_samples = as_count(require(j, "test_samples", "data"), "data.test_samples");
    if (d.train_samples == 0 || d.test_samples == 0)
      config_error("data sample counts must be >= 1");
    d.seed = as_count(require(j, "seed", "data"), "data.seed");
  } else {
    check_keys(j, {"train_csv", "test_csv", "truth_csv", "column"}, "data");
    d.train_csv = as_string(require(j, "train_csv", "data"), "data.train_csv");
    d.test_csv = as_string(require(j, "test_csv", "data"), "data.test_csv");
    if (j.contains("truth_csv"))
      d.truth_csv = as_string(j["truth_csv"], "data.truth_csv");
    if (j.contains("column")) d.column = as_string(j["column"], "data.column");
  }
  return d;
}

// truth.csv rows: split,index,psi
void write_truth_csv(const std::string& path, const Signal& train,
                     const Signal& test) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "split,index,psi\n";
  for (std::size_t t = 0; t < train.truth.size(); ++t)
    out << "train," << t << ',' << format_double(train.truth[t]) << '\n';
  for (std::size_t t = 0; t < test.truth.size(); ++t)
    out << "test," << t << ',' << format_double(test.truth[t]) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<double> read_truth_csv(const std::string& path,
                                   const std::string& split) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::string line;
  if (!std::getline(in, line) || line != "split,index,psi")
    throw std::runtime_error(path + ": expected header split,index,psi");
  std::vector<double> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto c1 = line.find(','), c2 = line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
      throw std::runtime_error(path + ": malformed line " + std::to_string(lineno));
    if (line.substr(0, c1) != split) continue;
    try {
      out.push_back(std::stod(line.substr(c2 + 1)));
    } catch (const std::exception&) {
      throw std::runtime_error(path + ": bad value at line " + std::to_string(lineno));
    }
  }
  return out;
}

struct DataPair {
  Signal train, test;
};

DataPair load_data(const DataConfig& d) {
  DataPair p;
  if (d.generated) {
    Rng root(d.seed);
    Rng rt = root.split(1), rs = root.split(2);
    p.train = gen_mixture(d.a, d.b, d.tau, d.train_samples, rt);
    p.test = gen_mixture(d.a, d.b, d.tau, d.test_samples, rs);
  } else {
    if (!fs::exists(d.train_csv))
      config_error("data.train_csv not found: " + d.train_csv);
    if (!fs::exists(d.test_csv))
      config_error("data.test_csv not found: " + d.test_csv);
    p.train = ingest_csv(d.train_csv, d.column);
    p.test = ingest_csv(d.test_csv, d.column);
    if (!d.truth_csv.empty()) {
      if (!fs::exists(d.truth_csv))
        config_error("data.truth_csv not found: " + d.truth_csv);
      p.train.truth = read_truth_csv(d.truth_csv, "train");
      p.test.truth = read_truth_csv(d.truth_csv, "test");
    }
  }
  return p;
}

ModelSpec parse_model(const json& cfg) {
  const json& j = require(cfg, "model", "config");
  if (!j.is_object()) config_error("model must be an object");
  if (j.contains("preset")) {
    check_keys(j, {"preset"}, "model");
    try {
      return preset(as_string(j["preset"], "model.preset"));
    } catch (const std::invalid_argument& e) {
      config_error(e.what());
    }
  }
  try {
    ModelSpec spec = spec_from_json(j.dump());
    spec.validate();
    return spec;
  } catch (const std::exception& e) {
    config_error(std::string("model: ") + e.what());
  }
}

struct TrainSection {
  TrainConfig cfg;
  std::string resume;          // checkpoint path, empty when fresh
  std::size_t start_epoch = 0;
};

TrainSection parse_train(const json& cfg) {
  TrainSection out;
  auto it = cfg.find("train");
  if (it == cfg.end()) return out;
  const json& j = *it;
  if (!j.is_object()) config_error("train must be an object");
  check_keys(j,
             {"lr", "epochs", "batch_size", "chunk_length", "seed", "precision",
              "grad_clip", "grad_clip_norm", "resume", "start_epoch"},
             "train");
  TrainConfig& t = out.cfg;
  if (j.contains("lr")) t.lr = as_number(j["lr"], "train.lr");
  if (j.contains("epochs")) t.epochs = as_count(j["epochs"], "train.epochs");
  if (j.contains("batch_size")) t.batch_size = as_count(j["batch_size"], "train.batch_size");
  if (j.contains("chunk_length")) t.chunk_length = as_count(j["chunk_length"], "train.chunk_length");
  if (j.contains("seed")) t.seed = as_count(j["seed"], "train.seed");
  if (j.contains("precision")) {
    const std::string p = as_string(j["precision"], "train.precision");
    if (p == "f32") t.precision = Precision::f32;
    else if (p == "f64") t.precision = Precision::f64;
    else config_error("train.precision must be f32 or f64");
  }
  if (j.contains("grad_clip")) {
    if (!j["grad_clip"].is_boolean()) config_error("train.grad_clip must be a bool");
    t.grad_clip = j["grad_clip"].get<bool>();
  }
  if (j.contains("grad_clip_norm"))
    t.grad_clip_norm = as_number(j["grad_clip_norm"], "train.grad_clip_norm");
  if (j.contains("resume")) out.resume = as_string(j["resume"], "train.resume");
  if (j.contains("start_epoch"))
    out.start_epoch = as_count(j["start_epoch"], "train.start_epoch");
  t.validate();
  return out;
}

struct EvalSection {
  std::string checkpoint;
  bool correlation = true;
  double threshold = 0.2;
  std::string runlog;  // optional explicit runlog.csv path
};

EvalSection parse_eval(const json& cfg, bool need_checkpoint) {
  EvalSection e;
  auto it = cfg.find("eval");
  if (it != cfg.end()) {
    const json& j = *it;
    if (!j.is_object()) config_error("eval must be an object");
    check_keys(j, {"checkpoint", "correlation", "transition_threshold", "runlog"},
               "eval");
    if (j.contains("checkpoint"))
      e.checkpoint = as_string(j["checkpoint"], "eval.checkpoint");
    if (j.contains("correlation")) {
      if (!j["correlation"].is_boolean())
        config_error("eval.correlation must be a bool");
      e.correlation = j["correlation"].get<bool>();
    }
    if (j.contains("transition_threshold")) {
      e.threshold = as_number(j["transition_threshold"], "eval.transition_threshold");
      if (!(e.threshold >= 0.0 && e.threshold < 1.0))
        config_error("eval.transition_threshold must be in [0, 1)");
    }
    if (j.contains("runlog")) e.runlog = as_string(j["runlog"], "eval.runlog");
  }
  if (need_checkpoint && e.checkpoint.empty())
    config_error("missing \"eval.checkpoint\"");
  return e;
}

std::string parse_output(const json& cfg) {
  return as_string(require(cfg, "output", "config"), "output");
}

void validate_sections(const json& cfg,
                       const std::vector<std::string>& allowed) {
  check_keys(cfg, allowed, "config");
}

fs::path ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw std::runtime_error("cannot create output directory " + dir);
  return fs::path(dir);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_runlog_csv(const fs::path& path, const RunLog& log) {
  std::ostringstream os;
  os << "epoch,train_q,test_q,seconds\n";
  for (const auto& e : log.epochs)
    os << e.epoch << ',' << format_double(e.train_q) << ','
       << format_double(e.test_q) << ',' << format_double(e.seconds) << '\n';
  write_text(path, os.str());
}

// Minimal deterministic SVG plotting: fixed 800x400 canvas, one polyline
// per series, no timestamps or generator metadata.
struct SvgSeries {
  std::string label;
  std::string color;
  std::vector<double> x, y;
};

std::string render_svg(const std::vector<SvgSeries>& series,
                       const std::string& title) {
  const double W = 800, H = 400, ml = 60, mr = 20, mt = 30, mb = 40;
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool first = true;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (first) {
        xmin = xmax = s.x[i];
        ymin = ymax = s.y[i];
        first = false;
      }
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (W - ml - mr); };
  auto py = [&](double y) { return H - mb - (y - ymin) / (ymax - ymin) * (H - mt - mb); };
  char buf[64];
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
     << "\" height=\"" << H << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n";
  os << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" "
        "font-family=\"sans-serif\" font-size=\"14\">" << title << "</text>\n";
  os << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr
     << "\" y2=\"" << H - mb << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml
     << "\" y2=\"" << H - mb << "\" stroke=\"black\"/>\n";
  for (double f : {0.0, 0.5, 1.0}) {
    std::snprintf(buf, sizeof(buf), "%.4g", xmin + f * (xmax - xmin));
    os << "<text x=\"" << ml + f * (W - ml - mr) << "\" y=\"" << H - mb + 16
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
          "font-size=\"11\">" << buf << "</text>\n";
    std::snprintf(buf, sizeof(buf), "%.4g", ymin + f * (ymax - ymin));
    os << "<text x=\"" << ml - 6 << "\" y=\"" << py(ymin + f * (ymax - ymin)) + 4
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
       << buf << "</text>\n";
  }
  double ly = mt + 14;
  for (const auto& s : series) {
    os << "<polyline fill=\"none\" stroke=\"" << s.color
       << "\" stroke-width=\"1\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", px(s.x[i]), py(s.y[i]));
      os << buf;
    }
    os << "\"/>\n";
    os << "<text x=\"" << W - mr - 150 << "\" y=\"" << ly
       << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"" << s.color
       << "\">" << s.label << "</text>\n";
    ly += 16;
  }
  os << "</svg>\n";
  return os.str();
}

// Uniform stride subsampling keeps SVG sizes bounded.
SvgSeries subsampled(const std::string& label, const std::string& color,
                     const std::vector<double>& x, const std::vector<double>& y,
                     std::size_t max_points = 2000) {
  SvgSeries s{label, color, {}, {}};
  const std::size_t n = y.size();
  const std::size_t stride = n > max_points ? (n + max_points - 1) / max_points : 1;
  for (std::size_t i = 0; i < n; i += stride) {
    s.x.push_back(x.empty() ? static_cast<double>(i) : x[i]);
    s.y.push_back(y[i]);
  }
  return s;
}

json transitions_to_json(const TransitionGraph& g) {
  json out;
  out["num_classes"] = g.num_classes;
  out["threshold"] = g.threshold;
  out["matrix"] = g.matrix;
  out["row_counts"] = g.row_counts;
  json edges = json::array();
  double max_self = 0.0;
  for (auto [a, b] : g.edges()) edges.push_back({a, b});
  for (std::size_t k = 0; k < g.num_classes; ++k)
    if (g.row_counts[k] > 0)
      max_self = std::max(max_self, g.matrix[k * g.num_classes + k]);
  out["edges"] = edges;
  out["max_self_transition"] = max_self;
  return out;
}

// Shared by cmd_train and sweep cells.
struct TrainOutcome {
  RunLog log;
  double final_train_q = 0.0, final_test_q = 0.0;
  std::size_t epochs_completed = 0;
};

TrainOutcome run_training(ModelState& model, const DataPair& data,
                          const TrainSection& ts) {
  TrainOutcome out;
  out.log = train(model, data.train, data.test, ts.cfg, ts.start_epoch);
  out.epochs_completed = ts.start_epoch + out.log.epochs.size();
  if (deterministic_mode()) {
    // Wall-clock timings would break byte-identical reruns.
    out.log.wall_seconds = 0.0;
    for (auto& e : out.log.epochs) e.seconds = 0.0;
  }
  if (!out.log.epochs.empty()) {
    out.final_train_q = out.log.epochs.back().train_q;
    out.final_test_q = out.log.epochs.back().test_q;
  }
  return out;
}

json summary_json(const TrainOutcome& o, const TrainConfig& cfg) {
  json s;
  s["final_train_q"] = o.final_train_q;
  s["final_test_q"] = o.final_test_q;
  s["epochs_completed"] = o.epochs_completed;
  s["wall_seconds"] = o.log.wall_seconds;
  s["diverged"] = o.log.diverged;
  s["seed"] = cfg.seed;
  return s;
}

}  // namespace

bool deterministic_mode() {
  const char* v = std::getenv("NCG_DETERMINISTIC");
  return v != nullptr && std::string(v) == "1";
}

void cmd_generate(const std::string& config_json) {
  const json cfg = parse_config(config_json);
  validate_sections(cfg, {"output", "data"});
  const std::string outdir = parse_output(cfg);
  const DataConfig d = parse_data(cfg);
  if (!d.generated)
    config_error("generate requires a generator data block, not CSV paths");

  const DataPair pair = load_data(d);
  const fs::path out = ensure_dir(outdir);
  write_csv((out / "train.csv").string(), {&pair.train.samples}, {"x"});
  write_csv((out / "test.csv").string(), {&pair.test.samples}, {"x"});
  write_truth_csv((out / "truth.csv").string(), pair.train, pair.test);

  json meta;
  meta["train_samples"] = pair.train.length();
  meta["test_samples"] = pair.test.length();
  meta["seed"] = d.seed;
  meta["tau"] = d.tau;
  meta["train"] = json::parse(pair.train.meta);
  meta["test"] = json::parse(pair.test.meta);
  write_text(out / "meta.json", meta.dump(2) + "\n");
}

void cmd_train(const std::string& config_json) {
  const json cfg = parse_config(config_json);
  validate_sections(cfg, {"output", "data", "model", "train"});
  const std::string outdir = parse_output(cfg);
  const DataConfig d = parse_data(cfg);
  const ModelSpec spec = parse_model(cfg);
  const TrainSection ts = parse_train(cfg);
  if (!ts.resume.empty() && !fs::exists(ts.resume))
    config_error("train.resume checkpoint not found: " + ts.resume);

  const DataPair pair = load_data(d);
  ModelState model = [&] {
    if (!ts.resume.empty()) return load_checkpoint(ts.resume);
    Rng rng(ts.cfg.seed);
    return build(spec, rng);
  }();

  const TrainOutcome o = run_training(model, pair, ts);
  const fs::path out = ensure_dir(outdir);
  save_checkpoint(model, (out / "checkpoint.json").string());
  write_runlog_csv(out / "runlog.csv", o.log);
  write_text(out / "summary.json", summary_json(o, ts.cfg).dump(2) + "\n");
}

void cmd_eval(const std::string& config_json) {
  const json cfg = parse_config(config_json);
  validate_sections(cfg, {"output", "data", "eval"});
  const std::string outdir = parse_output(cfg);
  const DataConfig d = parse_data(cfg);
  const EvalSection ev = parse_eval(cfg, /*need_checkpoint=*/true);
  if (!fs::exists(ev.checkpoint))
    config_error("eval.checkpoint not found: " + ev.checkpoint);

  const DataPair pair = load_data(d);
  ModelState model = load_checkpoint(ev.checkpoint);
  const ClassDistributionSeries s = transform_signal(model, pair.test.samples);
  const fs::path out = ensure_dir(outdir);

  const auto graph = transition_graph(s, ev.threshold);
  write_text(out / "transitions.json", transitions_to_json(graph).dump(2) + "\n");

  if (ev.correlation) {
    if (pair.test.has_truth()) {
      json c;
      c["pearson"] = envelope_correlation(s, pair.test.truth);
      c["method"] = "max over classes of |pearson(class prob, truth)|";
      write_text(out / "correlation.json", c.dump(2) + "\n");
    } else {
      std::cerr << "warning: no ground truth available; skipping correlation\n";
    }
  }

  // Fig-style overlay: one series per class plus the truth envelope.
  const std::size_t K = s.num_classes, T = s.length();
  static const char* kColors[] = {"#d62728", "#1f77b4", "#2ca02c", "#9467bd",
                                  "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f"};
  std::vector<SvgSeries> series;
  std::vector<double> xs(T);
  for (std::size_t t = 0; t < T; ++t)
    xs[t] = static_cast<double>(t) + static_cast<double>(s.time_offset);
  for (std::size_t k = 0; k < K && k < 8; ++k) {
    std::vector<double> ys(T);
    for (std::size_t t = 0; t < T; ++t) ys[t] = s.values.at3(0, k, t);
    series.push_back(subsampled("class " + std::to_string(k), kColors[k], xs, ys));
  }
  if (pair.test.has_truth()) {
    std::vector<double> tx(pair.test.truth.size());
    for (std::size_t t = 0; t < tx.size(); ++t) tx[t] = static_cast<double>(t);
    series.push_back(subsampled("truth", "black", tx, pair.test.truth));
  }
  write_text(out / "overlay.svg",
             render_svg(series, "class probabilities vs truth"));

  // Training curve when a runlog is available next to the checkpoint.
  fs::path runlog = ev.runlog.empty()
                        ? fs::path(ev.checkpoint).parent_path() / "runlog.csv"
                        : fs::path(ev.runlog);
  if (fs::exists(runlog)) {
    auto cols = ingest_csv_multi(runlog.string());
    if (cols.size() >= 3 && !cols[0].empty()) {
      std::vector<SvgSeries> curve;
      curve.push_back(subsampled("train Q", "#1f77b4", cols[0], cols[1]));
      curve.push_back(subsampled("test Q", "#d62728", cols[0], cols[2]));
      write_text(out / "training_curve.svg", render_svg(curve, "Q per epoch"));
    }
  }
}

void cmd_sweep(const std::string& config_json, std::size_t threads) {
  const json cfg = parse_config(config_json);
  validate_sections(cfg, {"output", "data", "model", "train", "eval", "sweep"});
  const std::string outdir = parse_output(cfg);
  const DataConfig base_data = parse_data(cfg);
  if (!base_data.generated)
    config_error("sweep requires a generator data block");
  const ModelSpec spec = parse_model(cfg);
  const TrainSection base_train = parse_train(cfg);
  const EvalSection ev = parse_eval(cfg, /*need_checkpoint=*/false);

  const json& sj = require(cfg, "sweep", "config");
  if (!sj.is_object()) config_error("sweep must be an object");
  check_keys(sj, {"parameter", "values", "seeds"}, "sweep");
  const std::string param = as_string(require(sj, "parameter", "sweep"), "sweep.parameter");
  if (param != "theta" && param != "cos_theta")
    config_error("sweep.parameter must be theta or cos_theta");
  const json& vj = require(sj, "values", "sweep");
  if (!vj.is_array() || vj.empty())
    config_error("sweep.values must be a non-empty array");
  std::vector<double> values;
  for (const auto& v : vj) values.push_back(as_number(v, "sweep.values"));
  std::vector<std::uint64_t> seeds;
  const json& sdj = require(sj, "seeds", "sweep");
  if (!sdj.is_array() || sdj.empty())
    config_error("sweep.seeds must be a non-empty array");
  for (const auto& v : sdj)
    seeds.push_back(as_count(v, "sweep.seeds"));
  // Validate every cell's theta up front, before any training starts.
  for (double v : values) {
    json probe = {{"kind", "ar1"}, {param, v}};
    parse_noise(probe, "sweep cell");
  }

  struct Cell {
    double value;
    std::uint64_t seed;
    double pearson = std::nan("");
    double final_q = std::nan("");
    std::string error;
  };
  std::vector<Cell> cells;
  for (double v : values)
    for (std::uint64_t s : seeds) cells.push_back({v, s, std::nan(""), std::nan(""), {}});

  const fs::path out = ensure_dir(outdir);
  if (threads == 0) threads = 1;
  if (deterministic_mode()) threads = 1;

  auto run_cell = [&](Cell& cell) {
    try {
      DataConfig d = base_data;
      d.a.theta = param == "theta" ? cell.value : std::acos(cell.value);
      d.seed = cell.seed;
      TrainSection ts = base_train;
      ts.cfg.seed = cell.seed;
      const DataPair pair = load_data(d);
      Rng rng(ts.cfg.seed);
      ModelState model = build(spec, rng);
      const TrainOutcome o = run_training(model, pair, ts);
      cell.final_q = o.final_test_q;
      cell.pearson = envelope_correlation(
          transform_signal(model, pair.test.samples), pair.test.truth);

      std::ostringstream name;
      name << param << '_' << format_double(cell.value) << "_seed" << cell.seed;
      const fs::path cell_dir = ensure_dir((out / "cells" / name.str()).string());
      save_checkpoint(model, (cell_dir / "checkpoint.json").string());
      write_runlog_csv(cell_dir / "runlog.csv", o.log);
      json s = summary_json(o, ts.cfg);
      s["pearson"] = cell.pearson;
      s[param] = cell.value;
      write_text(cell_dir / "summary.json", s.dump(2) + "\n");
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
  };

  if (threads <= 1) {
    for (auto& c : cells) run_cell(c);
  } else {
    std::mutex mu;
    std::size_t next = 0;
    auto worker = [&] {
      while (true) {
        std::size_t i;
        {
          std::lock_guard<std::mutex> lk(mu);
          if (next >= cells.size()) return;
          i = next++;
        }
        run_cell(cells[i]);
      }
    };
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < std::min(threads, cells.size()); ++i)
      pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::ostringstream os;
  os << "value,seed,pearson,final_q\n";
  for (const auto& c : cells) {
    os << format_double(c.value) << ',' << c.seed << ','
       << format_double(c.pearson) << ',' << format_double(c.final_q) << '\n';
    if (!c.error.empty())
      std::cerr << "warning: sweep cell value=" << c.value << " seed=" << c.seed
                << " failed: " << c.error << '\n';
  }
  write_text(out / "sweep.csv", os.str());
  (void)ev;
}

std::string gradcheck_report(std::uint64_t seed, std::size_t instances,
                             bool& all_pass) {
  const auto results = run_gradcheck_suite(seed, instances);
  all_pass = true;
  std::ostringstream os;
  for (const auto& r : results) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3e", r.max_rel_err);
    os << (r.pass ? "PASS" : "FAIL") << ' ' << r.op << " max_rel_err=" << buf
       << '\n';
    all_pass = all_pass && r.pass;
  }
  return os.str();
}

}  // namespace ncg
