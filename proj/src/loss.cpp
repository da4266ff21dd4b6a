// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "ncg/loss.hpp"

namespace ncg {

void ClassDistributionSeries::validate(double tol) const {
  if (values.rank() != 3 || values.dim(1) != num_classes)
    throw std::invalid_argument("class series: values must be [batch, K, time]");
  const std::size_t B = values.dim(0), K = num_classes, T = values.dim(2);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < T; ++t) {
      double sum = 0.0;
      for (std::size_t k = 0; k < K; ++k) {
        const double v = values.at3(b, k, t);
        if (v < 0.0 || v > 1.0)
          throw std::invalid_argument("class series: probability out of [0,1]");
        sum += v;
      }
      if (std::abs(sum - 1.0) > tol)
        throw std::invalid_argument("class series: slice does not sum to 1");
    }
}

double entropy(std::span<const double> p) {
  double sum = 0.0, h = 0.0;
  for (double v : p) {
    if (v < 0.0) throw std::invalid_argument("entropy: negative probability");
    sum += v;
    if (v > 0.0) h -= v * std::log(v);
  }
  if (std::abs(sum - 1.0) > 1e-6)
    throw std::invalid_argument("entropy: probabilities sum to " + std::to_string(sum));
  return h;
}

double cross_entropy(std::span<const double> s, std::span<const double> shat) {
  if (s.size() != shat.size())
    throw std::invalid_argument("cross_entropy: length mismatch");
  double ce = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] < 0.0 || shat[i] < 0.0)
      throw std::invalid_argument("cross_entropy: negative probability");
    if (s[i] > 0.0) ce -= s[i] * std::log(std::max(shat[i], kProbFloor));
  }
  return ce;
}

double kl(std::span<const double> s, std::span<const double> shat) {
  if (s.size() != shat.size()) throw std::invalid_argument("kl: length mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] < 0.0 || shat[i] < 0.0)
      throw std::invalid_argument("kl: negative probability");
    if (s[i] > 0.0) d += s[i] * std::log(s[i] / std::max(shat[i], kProbFloor));
  }
  return d;
}

Tensor ncg_loss(Tape& tape, const ClassDistributionSeries& s,
                const ClassDistributionSeries& shat, long delta,
                bool stop_target_grad) {
  if (s.num_classes != shat.num_classes)
    throw std::invalid_argument("ncg_loss: class count mismatch");
  const Tensor& sv = s.values;
  const Tensor& pv = shat.values;
  if (sv.dim(0) != pv.dim(0))
    throw std::invalid_argument("ncg_loss: batch mismatch");
  const std::size_t B = sv.dim(0), K = s.num_classes;
  const std::size_t Ts = sv.dim(2), Tp = pv.dim(2);

  // shat index j targets s index j + shift
  const long shift = shat.time_offset + delta - s.time_offset;
  const long j_lo = std::max<long>(0, -shift);
  const long j_hi = std::min<long>(static_cast<long>(Tp),
                                   static_cast<long>(Ts) - shift);
  if (j_hi <= j_lo)
    throw std::invalid_argument("ncg_loss: empty overlap between prediction and target");
  const std::size_t Tov = static_cast<std::size_t>(j_hi - j_lo);

  // Entropy of the batch/time average of s.
  std::vector<double> m(K, 0.0);
  const double ns = static_cast<double>(B * Ts);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t t = 0; t < Ts; ++t) m[k] += sv.at3(b, k, t);
  for (std::size_t k = 0; k < K; ++k) m[k] /= ns;

  double term1 = 0.0;  // -H(<s>) = sum m ln m
  for (std::size_t k = 0; k < K; ++k)
    if (m[k] > 0.0) term1 += m[k] * std::log(m[k]);

  double term2 = 0.0;  // mean cross-entropy over the overlap
  const double nov = static_cast<double>(B * Tov);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t k = 0; k < K; ++k)
      for (long j = j_lo; j < j_hi; ++j) {
        const double tgt = sv.at3(b, k, static_cast<std::size_t>(j + shift));
        if (tgt > 0.0)
          term2 -= tgt * std::log(std::max(pv.at3(b, k, static_cast<std::size_t>(j)),
                                           kProbFloor));
      }
  term2 /= nov;

  Tensor q = Tensor::scalar(term1 + term2);
  detail::check_finite(q, "ncg_loss");

  if (sv.track() || pv.track()) {
    q.set_track(true);
    Tensor svc = sv, pvc = pv;
    const bool stop_tgt = stop_target_grad;
    tape.record([svc, pvc, q, m, B, K, Ts, ns, nov, j_lo, j_hi, shift,
                 stop_tgt]() mutable {
      const double g = q.grad()[0];
      if (svc.track()) {
        // entropy-of-average contribution touches every s entry
        for (std::size_t k = 0; k < K; ++k) {
          const double d1 = (std::log(std::max(m[k], kProbFloor)) + 1.0) / ns;
          for (std::size_t b = 0; b < B; ++b)
            for (std::size_t t = 0; t < Ts; ++t)
              svc.grad()[(b * K + k) * Ts + t] += g * d1;
        }
        // cross-entropy contribution through the target branch
        if (!stop_tgt) {
          for (std::size_t b = 0; b < B; ++b)
            for (std::size_t k = 0; k < K; ++k)
              for (long j = j_lo; j < j_hi; ++j) {
                const double ph = std::max(
                    pvc.at3(b, k, static_cast<std::size_t>(j)), kProbFloor);
                svc.grad()[(b * K + k) * Ts + static_cast<std::size_t>(j + shift)] -=
                    g * std::log(ph) / nov;
              }
        }
      }
      if (pvc.track()) {
        const std::size_t Tp = pvc.dim(2);
        for (std::size_t b = 0; b < B; ++b)
          for (std::size_t k = 0; k < K; ++k)
            for (long j = j_lo; j < j_hi; ++j) {
              const double p = pvc.at3(b, k, static_cast<std::size_t>(j));
              if (p <= kProbFloor) continue;
              const double tgt =
                  svc.at3(b, k, static_cast<std::size_t>(j + shift));
              pvc.grad()[(b * K + k) * Tp + static_cast<std::size_t>(j)] -=
                  g * tgt / (p * nov);
            }
      }
    });
  }
  return q;
}

namespace {

// LU with partial pivoting; returns false on exact singularity.
bool lu_decompose(std::vector<double>& a, std::size_t d, std::vector<std::size_t>& piv,
                  int& sign) {
  sign = 1;
  piv.resize(d);
  for (std::size_t i = 0; i < d; ++i) piv[i] = i;
  for (std::size_t col = 0; col < d; ++col) {
    std::size_t best = col;
    for (std::size_t r = col + 1; r < d; ++r)
      if (std::abs(a[r * d + col]) > std::abs(a[best * d + col])) best = r;
    if (a[best * d + col] == 0.0) return false;
    if (best != col) {
      for (std::size_t c = 0; c < d; ++c) std::swap(a[col * d + c], a[best * d + c]);
      std::swap(piv[col], piv[best]);
      sign = -sign;
    }
    for (std::size_t r = col + 1; r < d; ++r) {
      const double f = a[r * d + col] / a[col * d + col];
      a[r * d + col] = f;
      for (std::size_t c = col + 1; c < d; ++c) a[r * d + c] -= f * a[col * d + c];
    }
  }
  return true;
}

double logdet_pd(const std::vector<double>& mat, std::size_t d) {
  std::vector<double> a = mat;
  std::vector<std::size_t> piv;
  int sign;
  if (!lu_decompose(a, d, piv, sign))
    throw std::runtime_error("ncg_loss_continuous: singular covariance");
  double ld = 0.0;
  int s = sign;
  for (std::size_t i = 0; i < d; ++i) {
    const double p = a[i * d + i];
    if (p < 0.0) s = -s;
    ld += std::log(std::abs(p));
  }
  if (s <= 0)
    throw std::runtime_error("ncg_loss_continuous: covariance not positive definite");
  return ld;
}

std::vector<double> invert_pd(const std::vector<double>& mat, std::size_t d) {
  // Gauss-Jordan on [A | I]
  std::vector<double> a(d * 2 * d, 0.0);
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t c = 0; c < d; ++c) a[r * 2 * d + c] = mat[r * d + c];
    a[r * 2 * d + d + r] = 1.0;
  }
  for (std::size_t col = 0; col < d; ++col) {
    std::size_t best = col;
    for (std::size_t r = col + 1; r < d; ++r)
      if (std::abs(a[r * 2 * d + col]) > std::abs(a[best * 2 * d + col])) best = r;
    if (a[best * 2 * d + col] == 0.0)
      throw std::runtime_error("ncg_loss_continuous: singular covariance");
    if (best != col)
      for (std::size_t c = 0; c < 2 * d; ++c) std::swap(a[col * 2 * d + c], a[best * 2 * d + c]);
    const double p = a[col * 2 * d + col];
    for (std::size_t c = 0; c < 2 * d; ++c) a[col * 2 * d + c] /= p;
    for (std::size_t r = 0; r < d; ++r) {
      if (r == col) continue;
      const double f = a[r * 2 * d + col];
      if (f == 0.0) continue;
      for (std::size_t c = 0; c < 2 * d; ++c) a[r * 2 * d + c] -= f * a[col * 2 * d + c];
    }
  }
  std::vector<double> inv(d * d);
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t c = 0; c < d; ++c) inv[r * d + c] = a[r * 2 * d + d + c];
  return inv;
}

// Covariance over samples of [B, D, T] data, ridge added on the diagonal.
std::vector<double> covariance(const Tensor& x, double lambda,
                               std::vector<double>& mean_out) {
  const std::size_t B = x.dim(0), D = x.dim(1), T = x.dim(2);
  const double n = static_cast<double>(B * T);
  mean_out.assign(D, 0.0);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t d = 0; d < D; ++d)
      for (std::size_t t = 0; t < T; ++t) mean_out[d] += x.at3(b, d, t);
  for (std::size_t d = 0; d < D; ++d) mean_out[d] /= n;
  std::vector<double> cov(D * D, 0.0);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t j = 0; j < D; ++j) {
        const double xj = x.at3(b, j, t) - mean_out[j];
        for (std::size_t k = j; k < D; ++k)
          cov[j * D + k] += xj * (x.at3(b, k, t) - mean_out[k]);
      }
  for (std::size_t j = 0; j < D; ++j)
    for (std::size_t k = j; k < D; ++k) {
      cov[j * D + k] /= n;
      cov[k * D + j] = cov[j * D + k];
    }
  for (std::size_t j = 0; j < D; ++j) {
    cov[j * D + j] += lambda;
    if (!std::isfinite(cov[j * D + j]))
      throw std::runtime_error("ncg_loss_continuous: non-finite covariance");
  }
  for (double v : cov)
    if (!std::isfinite(v))
      throw std::runtime_error("ncg_loss_continuous: non-finite covariance");
  return cov;
}

// Accumulates d logdet(cov(x)+lambda I)/dx = (2/N) Xc M into grad.
void accumulate_logdet_grad(Tensor& x, const std::vector<double>& mean,
                            const std::vector<double>& inv, double scale) {
  const std::size_t B = x.dim(0), D = x.dim(1), T = x.dim(2);
  const double n = static_cast<double>(B * T);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t j = 0; j < D; ++j) {
        double acc = 0.0;
        for (std::size_t k = 0; k < D; ++k)
          acc += (x.at3(b, k, t) - mean[k]) * inv[k * D + j];
        x.grad()[(b * D + j) * T + t] += scale * 2.0 / n * acc;
      }
}

}  // namespace

Tensor ncg_loss_continuous(Tape& tape, const Tensor& y, const ResidualSeries& eps,
                           double lambda) {
  const Tensor& ev = eps.values;
  if (y.rank() != 3 || ev.rank() != 3 || y.dim(1) != ev.dim(1))
    throw std::invalid_argument("ncg_loss_continuous: y and eps must be [B,D,T] with equal D");
  const std::size_t D = y.dim(1);
  if (y.dim(0) * y.dim(2) <= D || ev.dim(0) * ev.dim(2) <= D)
    throw std::invalid_argument("ncg_loss_continuous: need more samples than dimensions");

  std::vector<double> mu_y, mu_e;
  const std::vector<double> cy = covariance(y, lambda, mu_y);
  const std::vector<double> ce = covariance(ev, lambda, mu_e);
  const double q = logdet_pd(cy, D) - logdet_pd(ce, D);

  Tensor out = Tensor::scalar(q);
  detail::check_finite(out, "ncg_loss_continuous");

  if (y.track() || ev.track()) {
    out.set_track(true);
    Tensor yc = y, ec = ev;
    auto inv_y = invert_pd(cy, D);
    auto inv_e = invert_pd(ce, D);
    tape.record([yc, ec, out, inv_y, inv_e, mu_y, mu_e]() mutable {
      const double g = out.grad()[0];
      if (yc.track()) accumulate_logdet_grad(yc, mu_y, inv_y, g);
      if (ec.track()) accumulate_logdet_grad(ec, mu_e, inv_e, -g);
    });
  }
  return out;
}

double determinant(const double* a, std::size_t d) {
  std::vector<double> m(a, a + d * d);
  std::vector<std::size_t> piv;
  int sign;
  if (!lu_decompose(m, d, piv, sign)) return 0.0;
  double det = static_cast<double>(sign);
  for (std::size_t i = 0; i < d; ++i) det *= m[i * d + i];
  return det;
}

}  // namespace ncg
