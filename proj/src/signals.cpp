// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "ncg/signals.hpp"

namespace ncg {

std::string to_string(NoiseKind k) {
  switch (k) {
    case NoiseKind::ar1: return "ar1";
    case NoiseKind::gaussian: return "gaussian";
    case NoiseKind::binary: return "binary";
    case NoiseKind::ternary_balanced: return "ternary_balanced";
    case NoiseKind::ternary_unbalanced: return "ternary_unbalanced";
  }
  throw std::logic_error("unreachable noise kind");
}

NoiseKind noise_kind_from_string(const std::string& s) {
  if (s == "ar1") return NoiseKind::ar1;
  if (s == "gaussian") return NoiseKind::gaussian;
  if (s == "binary") return NoiseKind::binary;
  if (s == "ternary_balanced") return NoiseKind::ternary_balanced;
  if (s == "ternary_unbalanced") return NoiseKind::ternary_unbalanced;
  throw std::invalid_argument("unknown noise kind: " + s);
}

Signal gen_ar1(double theta, std::size_t n, Rng& rng) {
  if (!(theta > 0.0 && theta <= std::numbers::pi / 2.0))
    throw std::invalid_argument("gen_ar1: theta must be in (0, pi/2], got " +
                                std::to_string(theta));
  if (n < 1) throw std::invalid_argument("gen_ar1: n must be >= 1");
  Signal sig;
  sig.samples.resize(n);
  const double c = std::cos(theta), s = std::sin(theta);
  double x = rng.normal();  // stationary distribution is N(0,1)
  sig.samples[0] = x;
  for (std::size_t t = 1; t < n; ++t) {
    x = c * x + s * rng.normal();
    sig.samples[t] = x;
  }
  sig.meta = "{\"kind\":\"ar1\",\"theta\":" + format_double(theta) + "}";
  return sig;
}

Signal gen_gaussian(std::size_t n, Rng& rng) {
  Signal sig;
  sig.samples.resize(n);
  for (auto& v : sig.samples) v = rng.normal();
  sig.meta = "{\"kind\":\"gaussian\"}";
  return sig;
}

Signal gen_discrete(NoiseKind kind, std::size_t n, Rng& rng) {
  static const double sqrt32 = std::sqrt(1.5);
  static const double sqrt3 = std::sqrt(3.0);
  std::vector<double> levels;
  switch (kind) {
    case NoiseKind::binary:
      levels = {-1.0, 1.0};
      break;
    case NoiseKind::ternary_balanced:
      levels = {-sqrt32, 0.0, sqrt32};
      break;
    case NoiseKind::ternary_unbalanced:
      levels = {-(1.0 + sqrt3) / 2.0, (sqrt3 - 1.0) / 2.0, 1.0};
      break;
    default:
      throw std::invalid_argument("gen_discrete: kind must be a discrete noise");
  }
  Signal sig;
  sig.samples.resize(n);
  for (auto& v : sig.samples) v = levels[rng.uniform_index(levels.size())];
  sig.meta = "{\"kind\":\"" + to_string(kind) + "\"}";
  return sig;
}

Signal gen_noise(const NoiseSpec& spec, std::size_t n, Rng& rng) {
  switch (spec.kind) {
    case NoiseKind::ar1: return gen_ar1(spec.theta, n, rng);
    case NoiseKind::gaussian: return gen_gaussian(n, rng);
    default: return gen_discrete(spec.kind, n, rng);
  }
}

double envelope(double t, double tau) {
  if (tau <= 0.0) throw std::invalid_argument("envelope: tau must be > 0");
  return 0.5 * (1.0 + std::tanh(std::sin(2.0 * std::numbers::pi * t / tau)));
}

Signal gen_mixture(const NoiseSpec& spec_a, const NoiseSpec& spec_b, double tau,
                   std::size_t n, Rng& rng, bool force_psi_one) {
  if (n < 1) throw std::invalid_argument("gen_mixture: n must be >= 1");
  Rng rng_a = rng.split(1);
  Rng rng_b = rng.split(2);
  Signal a = gen_noise(spec_a, n, rng_a);
  Signal b = gen_noise(spec_b, n, rng_b);
  Signal sig;
  sig.samples.resize(n);
  sig.truth.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    const double psi =
        force_psi_one ? 1.0 : envelope(static_cast<double>(t), tau);
    sig.samples[t] = psi * a.samples[t] + (1.0 - psi) * b.samples[t];
    sig.truth[t] = psi;
  }
  sig.meta = "{\"mixture\":{\"a\":" + a.meta + ",\"b\":" + b.meta +
             ",\"tau\":" + format_double(tau) + "}}";
  return sig;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

bool parse_double(const std::string& s, double& out) {
  try {
    std::size_t pos = 0;
    out = std::stod(s, &pos);
    while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\r' || s[pos] == '\t')) ++pos;
    return pos == s.size();
  } catch (const std::exception&) {
    return false;
  }
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

struct CsvTable {
  std::vector<std::string> header;  // empty if no header row
  std::vector<std::vector<double>> rows;
};

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("csv: cannot open " + path);
  CsvTable tab;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto cells = split_row(line);
    std::vector<double> row(cells.size());
    bool numeric = true;
    for (std::size_t i = 0; i < cells.size(); ++i)
      if (!parse_double(cells[i], row[i])) {
        numeric = false;
        break;
      }
    if (!numeric) {
      if (lineno == 1 && tab.rows.empty()) {
        tab.header = cells;
        continue;
      }
      throw std::runtime_error("csv: non-numeric value at line " +
                               std::to_string(lineno) + " of " + path);
    }
    tab.rows.push_back(std::move(row));
  }
  return tab;
}

}  // namespace

Signal ingest_csv(const std::string& path, const std::string& column) {
  CsvTable tab = read_csv(path);
  std::size_t col = 0;
  bool found = false;
  if (!tab.header.empty()) {
    for (std::size_t i = 0; i < tab.header.size(); ++i)
      if (tab.header[i] == column) {
        col = i;
        found = true;
        break;
      }
  }
  if (!found) {
    try {
      col = static_cast<std::size_t>(std::stoul(column));
      found = true;
    } catch (const std::exception&) {
      throw std::runtime_error("csv: column '" + column + "' not found in " + path);
    }
  }
  Signal sig;
  sig.samples.reserve(tab.rows.size());
  for (std::size_t r = 0; r < tab.rows.size(); ++r) {
    if (col >= tab.rows[r].size())
      throw std::runtime_error("csv: row " + std::to_string(r + 1) +
                               " has no column " + std::to_string(col));
    const double v = tab.rows[r][col];
    if (!std::isfinite(v))
      throw std::runtime_error("csv: non-finite value at data row " +
                               std::to_string(r + 1));
    sig.samples.push_back(v);
  }
  sig.meta = "{\"source\":\"csv\"}";
  return sig;
}

std::vector<std::vector<double>> ingest_csv_multi(const std::string& path) {
  CsvTable tab = read_csv(path);
  if (tab.rows.empty()) return {};
  const std::size_t cols = tab.rows[0].size();
  std::vector<std::vector<double>> out(cols);
  for (auto& c : out) c.reserve(tab.rows.size());
  for (std::size_t r = 0; r < tab.rows.size(); ++r) {
    if (tab.rows[r].size() != cols)
      throw std::runtime_error("csv: ragged row " + std::to_string(r + 1));
    for (std::size_t c = 0; c < cols; ++c) out[c].push_back(tab.rows[r][c]);
  }
  return out;
}

void write_csv(const std::string& path,
               const std::vector<const std::vector<double>*>& columns,
               const std::vector<std::string>& header) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("csv: cannot write " + path);
  if (!header.empty()) {
    for (std::size_t i = 0; i < header.size(); ++i)
      out << (i ? "," : "") << header[i];
    out << "\n";
  }
  const std::size_t n = columns.empty() ? 0 : columns[0]->size();
  for (const auto* c : columns)
    if (c->size() != n) throw std::invalid_argument("csv: column length mismatch");
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < columns.size(); ++c)
      out << (c ? "," : "") << format_double((*columns[c])[r]);
    out << "\n";
  }
  if (!out) throw std::runtime_error("csv: write failed for " + path);
}

}  // namespace ncg
