// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "ncg/analysis.hpp"

namespace ncg {

namespace {

// -sum p ln p over an arbitrary (already normalized) array.
double entropy_of(const std::vector<double>& p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

std::vector<double> stationary(const std::vector<double>& kernel, std::size_t n) {
  std::vector<double> pi(n, 1.0 / static_cast<double>(n)), next(n);
  for (int iter = 0; iter < 200000; ++iter) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t x = 0; x < n; ++x)
      for (std::size_t x2 = 0; x2 < n; ++x2)
        next[x2] += pi[x] * kernel[x * n + x2];
    double diff = 0.0;
    for (std::size_t x = 0; x < n; ++x) diff += std::abs(next[x] - pi[x]);
    pi.swap(next);
    if (diff < 1e-14) return pi;
  }
  // Periodic chains do not converge under power iteration; solve
  // (P^T - I) pi = 0 with the normalization row appended.
  std::vector<double> a(n * (n + 1), 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) a[r * (n + 1) + c] = kernel[c * n + r];
    a[r * (n + 1) + r] -= 1.0;
  }
  for (std::size_t c = 0; c < n; ++c) a[0 * (n + 1) + c] = 1.0;  // replace one row
  a[0 * (n + 1) + n] = 1.0;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t best = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r * (n + 1) + col]) > std::abs(a[best * (n + 1) + col])) best = r;
    if (a[best * (n + 1) + col] == 0.0)
      throw std::runtime_error("stationary: singular system");
    if (best != col)
      for (std::size_t c = 0; c <= n; ++c)
        std::swap(a[col * (n + 1) + c], a[best * (n + 1) + c]);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a[r * (n + 1) + col] / a[col * (n + 1) + col];
      if (f == 0.0) continue;
      for (std::size_t c = col; c <= n; ++c) a[r * (n + 1) + c] -= f * a[col * (n + 1) + c];
    }
  }
  for (std::size_t x = 0; x < n; ++x) pi[x] = a[x * (n + 1) + n] / a[x * (n + 1) + x];
  return pi;
}

}  // namespace

DiscreteProcess DiscreteProcess::make(std::size_t nx, std::vector<double> kernel,
                                      std::vector<std::size_t> map, std::size_t ny) {
  if (kernel.size() != nx * nx)
    throw std::invalid_argument("process: kernel must be nx*nx");
  if (map.size() != nx) throw std::invalid_argument("process: map must have length nx");
  for (std::size_t x = 0; x < nx; ++x) {
    double row = 0.0;
    for (std::size_t x2 = 0; x2 < nx; ++x2) {
      if (kernel[x * nx + x2] < 0.0)
        throw std::invalid_argument("process: negative kernel entry");
      row += kernel[x * nx + x2];
    }
    if (std::abs(row - 1.0) > 1e-12)
      throw std::invalid_argument("process: kernel row " + std::to_string(x) +
                                  " sums to " + std::to_string(row));
    if (map[x] >= ny) throw std::invalid_argument("process: map value out of range");
  }
  DiscreteProcess p;
  p.nx = nx;
  p.ny = ny;
  p.kernel = std::move(kernel);
  p.map = std::move(map);
  p.pi = stationary(p.kernel, nx);
  std::vector<double> check(nx, 0.0);
  for (std::size_t x = 0; x < nx; ++x)
    for (std::size_t x2 = 0; x2 < nx; ++x2)
      check[x2] += p.pi[x] * p.kernel[x * nx + x2];
  for (std::size_t x = 0; x < nx; ++x)
    if (std::abs(check[x] - p.pi[x]) > 1e-10)
      throw std::runtime_error("process: stationary distribution residual too large");
  return p;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2)
    throw std::invalid_argument("pearson: need equal lengths >= 2");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double saa = 0.0, sbb = 0.0, sab = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    saa += da * da;
    sbb += db * db;
    sab += da * db;
  }
  if (saa == 0.0 || sbb == 0.0)
    throw std::invalid_argument("pearson: zero variance input");
  return sab / std::sqrt(saa * sbb);
}

double envelope_correlation(const ClassDistributionSeries& s,
                            const std::vector<double>& truth) {
  const std::size_t B = s.batch(), K = s.num_classes, T = s.length();
  if (B != 1)
    throw std::invalid_argument("envelope_correlation: expects a single batch");
  double best = 0.0;
  std::vector<double> sc(T), tr(T);
  for (std::size_t t = 0; t < T; ++t) {
    const long raw = static_cast<long>(t) + s.time_offset;
    if (raw < 0 || raw >= static_cast<long>(truth.size()))
      throw std::invalid_argument("envelope_correlation: alignment leaves raw range");
    tr[t] = truth[static_cast<std::size_t>(raw)];
  }
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t t = 0; t < T; ++t) sc[t] = s.values.at3(0, k, t);
    double r;
    try {
      r = pearson(sc, tr);
    } catch (const std::invalid_argument&) {
      continue;  // constant class output carries no envelope signal
    }
    best = std::max(best, std::abs(r));
  }
  return best;
}

std::vector<std::size_t> argmax_classes(const ClassDistributionSeries& s) {
  const std::size_t B = s.batch(), K = s.num_classes, T = s.length();
  std::vector<std::size_t> out;
  out.reserve(B * T);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < T; ++t) {
      std::size_t best = 0;
      for (std::size_t k = 1; k < K; ++k)
        if (s.values.at3(b, k, t) > s.values.at3(b, best, t)) best = k;
      out.push_back(best);
    }
  return out;
}

TransitionGraph transition_graph(const std::vector<std::size_t>& classes,
                                 std::size_t num_classes, double threshold) {
  if (classes.size() < 2)
    throw std::invalid_argument("transition_graph: need at least 2 steps");
  TransitionGraph g;
  g.num_classes = num_classes;
  g.threshold = threshold;
  g.matrix.assign(num_classes * num_classes, 0.0);
  g.row_counts.assign(num_classes, 0);
  for (std::size_t t = 0; t + 1 < classes.size(); ++t) {
    g.matrix[classes[t] * num_classes + classes[t + 1]] += 1.0;
    g.row_counts[classes[t]]++;
  }
  for (std::size_t k = 0; k < num_classes; ++k)
    if (g.row_counts[k] > 0)
      for (std::size_t k2 = 0; k2 < num_classes; ++k2)
        g.matrix[k * num_classes + k2] /= static_cast<double>(g.row_counts[k]);
  return g;
}

TransitionGraph transition_graph(const ClassDistributionSeries& s, double threshold) {
  // transitions are counted within each batch element, never across
  const std::size_t B = s.batch(), T = s.length();
  auto all = argmax_classes(s);
  TransitionGraph g;
  g.num_classes = s.num_classes;
  g.threshold = threshold;
  g.matrix.assign(s.num_classes * s.num_classes, 0.0);
  g.row_counts.assign(s.num_classes, 0);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t + 1 < T; ++t) {
      const std::size_t from = all[b * T + t], to = all[b * T + t + 1];
      g.matrix[from * s.num_classes + to] += 1.0;
      g.row_counts[from]++;
    }
  for (std::size_t k = 0; k < s.num_classes; ++k)
    if (g.row_counts[k] > 0)
      for (std::size_t k2 = 0; k2 < s.num_classes; ++k2)
        g.matrix[k * s.num_classes + k2] /= static_cast<double>(g.row_counts[k]);
  return g;
}

std::vector<std::pair<std::size_t, std::size_t>> TransitionGraph::edges() const {
  std::vector<std::pair<std::size_t, std::size_t>> e;
  for (std::size_t a = 0; a < num_classes; ++a)
    for (std::size_t b = 0; b < num_classes; ++b)
      if (matrix[a * num_classes + b] > threshold) e.emplace_back(a, b);
  return e;
}

double predictive_information(const DiscreteProcess& p) {
  const std::size_t n = p.nx;
  std::vector<double> marginal_next(n, 0.0);
  double h_cond = 0.0;
  for (std::size_t x = 0; x < n; ++x) {
    double hx = 0.0;
    for (std::size_t x2 = 0; x2 < n; ++x2) {
      const double k = p.kernel[x * n + x2];
      marginal_next[x2] += p.pi[x] * k;
      if (k > 0.0) hx -= k * std::log(k);
    }
    h_cond += p.pi[x] * hx;
  }
  return entropy_of(marginal_next) - h_cond;
}

double ntic(const DiscreteProcess& p) {
  const std::size_t nx = p.nx, ny = p.ny;
  // joint of (X_t, Y_{t+1}); Y_t = f(X_t) is implied by x
  std::vector<double> jxy(nx * ny, 0.0);
  for (std::size_t x = 0; x < nx; ++x)
    for (std::size_t x2 = 0; x2 < nx; ++x2)
      jxy[x * ny + p.map[x2]] += p.pi[x] * p.kernel[x * nx + x2];

  std::vector<double> py1(ny, 0.0);  // p(Y_{t+1})
  for (std::size_t x = 0; x < nx; ++x)
    for (std::size_t y = 0; y < ny; ++y) py1[y] += jxy[x * ny + y];

  double i_x_y1 = 0.0;  // I(X_t : Y_{t+1})
  for (std::size_t x = 0; x < nx; ++x)
    for (std::size_t y = 0; y < ny; ++y) {
      const double j = jxy[x * ny + y];
      if (j > 0.0) i_x_y1 += j * std::log(j / (p.pi[x] * py1[y]));
    }

  // I(Y_{t+1} : X_t | Y_t), enumerating the joint of (Y_t, X_t, Y_{t+1})
  std::vector<double> py(ny, 0.0);
  for (std::size_t x = 0; x < nx; ++x) py[p.map[x]] += p.pi[x];
  std::vector<double> jyy(ny * ny, 0.0);  // p(Y_t, Y_{t+1})
  for (std::size_t x = 0; x < nx; ++x)
    for (std::size_t y1 = 0; y1 < ny; ++y1) jyy[p.map[x] * ny + y1] += jxy[x * ny + y1];

  double i_cond = 0.0;
  for (std::size_t x = 0; x < nx; ++x) {
    const std::size_t y = p.map[x];
    for (std::size_t y1 = 0; y1 < ny; ++y1) {
      const double j = jxy[x * ny + y1];  // = p(x, y, y') since y = f(x)
      if (j <= 0.0) continue;
      // p(x,y'|y) / (p(x|y) p(y'|y)) = p(x,y,y') p(y) / (p(x,y) p(y,y'))
      i_cond += j * std::log(j * py[y] / (p.pi[x] * jyy[y * ny + y1]));
    }
  }
  return i_x_y1 - i_cond;
}

double readout_predictive_information(const DiscreteProcess& p) {
  const std::size_t nx = p.nx, ny = p.ny;
  std::vector<double> jyy(ny * ny, 0.0);
  for (std::size_t x = 0; x < nx; ++x)
    for (std::size_t x2 = 0; x2 < nx; ++x2)
      jyy[p.map[x] * ny + p.map[x2]] += p.pi[x] * p.kernel[x * nx + x2];
  std::vector<double> py(ny, 0.0), py1(ny, 0.0);
  for (std::size_t a = 0; a < ny; ++a)
    for (std::size_t b = 0; b < ny; ++b) {
      py[a] += jyy[a * ny + b];
      py1[b] += jyy[a * ny + b];
    }
  double h_joint = entropy_of(jyy);
  return entropy_of(py1) - (h_joint - entropy_of(py));
}

double empirical_ntic(const std::vector<std::size_t>& classes) {
  if (classes.size() < 2)
    throw std::invalid_argument("empirical_ntic: need at least 2 steps");
  std::size_t k = 0;
  for (auto c : classes) k = std::max(k, c + 1);
  std::vector<double> jyy(k * k, 0.0);
  const double n = static_cast<double>(classes.size() - 1);
  for (std::size_t t = 0; t + 1 < classes.size(); ++t)
    jyy[classes[t] * k + classes[t + 1]] += 1.0 / n;
  std::vector<double> py(k, 0.0), py1(k, 0.0);
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b < k; ++b) {
      py[a] += jyy[a * k + b];
      py1[b] += jyy[a * k + b];
    }
  return entropy_of(py1) - (entropy_of(jyy) - entropy_of(py));
}

}  // namespace ncg
