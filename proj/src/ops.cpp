// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "ncg/autodiff.hpp"

namespace ncg {

namespace detail {

bool conv_backward_sign_flip = false;

void check_finite(const Tensor& t, const char* op) {
  for (double v : t.data())
    if (!std::isfinite(v))
      throw std::runtime_error(std::string(op) + ": non-finite value in output");
}

}  // namespace detail

void Tape::backward(const Tensor& loss) {
  if (loss.numel() != 1)
    throw std::invalid_argument("backward: loss must be scalar, got " +
                                std::to_string(loss.numel()) + " elements");
  if (consumed_)
    throw std::runtime_error("backward: tape already consumed; run a new forward pass");
  consumed_ = true;
  Tensor& l = const_cast<Tensor&>(loss);
  l.grad()[0] = 1.0;
  for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
}

Tensor conv1d(Tape& tape, const Tensor& input, const Tensor& kernel,
              const Tensor& bias) {
  if (input.rank() != 3 || kernel.rank() != 3 || bias.rank() != 1)
    throw std::invalid_argument("conv1d: expected input[B,Ci,T], kernel[Co,Ci,W], bias[Co]");
  const std::size_t B = input.dim(0), Ci = input.dim(1), T = input.dim(2);
  const std::size_t Co = kernel.dim(0), W = kernel.dim(2);
  if (kernel.dim(1) != Ci)
    throw std::invalid_argument("conv1d: kernel channels_in " +
                                std::to_string(kernel.dim(1)) +
                                " != input channels " + std::to_string(Ci));
  if (bias.dim(0) != Co)
    throw std::invalid_argument("conv1d: bias length != channels_out");
  if (W > T)
    throw std::invalid_argument("conv1d: kernel width " + std::to_string(W) +
                                " exceeds input length " + std::to_string(T));
  const std::size_t To = T - W + 1;

  Tensor out = Tensor::zeros({B, Co, To});
  const double* in = input.data().data();
  const double* k = kernel.data().data();
  double* o = out.data().data();
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t oc = 0; oc < Co; ++oc) {
      double* orow = o + (b * Co + oc) * To;
      std::fill(orow, orow + To, bias.data()[oc]);
      for (std::size_t ic = 0; ic < Ci; ++ic) {
        const double* irow = in + (b * Ci + ic) * T;
        const double* krow = k + (oc * Ci + ic) * W;
        for (std::size_t w = 0; w < W; ++w) {
          const double kv = krow[w];
          for (std::size_t t = 0; t < To; ++t) orow[t] += kv * irow[t + w];
        }
      }
    }
  detail::check_finite(out, "conv1d");

  if (input.track() || kernel.track() || bias.track()) {
    out.set_track(true);
    tape.record([input, kernel, bias, out, B, Ci, T, Co, W, To]() mutable {
      const double* go = out.grad().data();
      const double* in = input.data().data();
      const double* k = kernel.data().data();
      const double ksign = detail::conv_backward_sign_flip ? -1.0 : 1.0;
      if (input.track()) {
        double* gi = input.grad().data();
        for (std::size_t b = 0; b < B; ++b)
          for (std::size_t oc = 0; oc < Co; ++oc) {
            const double* grow = go + (b * Co + oc) * To;
            for (std::size_t ic = 0; ic < Ci; ++ic) {
              double* girow = gi + (b * Ci + ic) * T;
              const double* krow = k + (oc * Ci + ic) * W;
              for (std::size_t w = 0; w < W; ++w) {
                const double kv = krow[w];
                for (std::size_t t = 0; t < To; ++t) girow[t + w] += kv * grow[t];
              }
            }
          }
      }
      if (kernel.track()) {
        double* gk = kernel.grad().data();
        for (std::size_t b = 0; b < B; ++b)
          for (std::size_t oc = 0; oc < Co; ++oc) {
            const double* grow = go + (b * Co + oc) * To;
            for (std::size_t ic = 0; ic < Ci; ++ic) {
              const double* irow = in + (b * Ci + ic) * T;
              double* gkrow = gk + (oc * Ci + ic) * W;
              for (std::size_t w = 0; w < W; ++w) {
                double acc = 0.0;
                for (std::size_t t = 0; t < To; ++t) acc += grow[t] * irow[t + w];
                gkrow[w] += ksign * acc;
              }
            }
          }
      }
      if (bias.track()) {
        double* gb = bias.grad().data();
        for (std::size_t b = 0; b < B; ++b)
          for (std::size_t oc = 0; oc < Co; ++oc) {
            const double* grow = go + (b * Co + oc) * To;
            for (std::size_t t = 0; t < To; ++t) gb[oc] += grow[t];
          }
      }
    });
  }
  return out;
}

Tensor leaky_relu(Tape& tape, const Tensor& x, double alpha) {
  if (alpha < 0.0) throw std::invalid_argument("leaky_relu: alpha must be >= 0");
  Tensor out = Tensor::zeros(x.shape());
  const std::size_t n = x.numel();
  for (std::size_t i = 0; i < n; ++i) {
    const double v = x.data()[i];
    out.data()[i] = v > 0.0 ? v : alpha * v;
  }
  detail::check_finite(out, "leaky_relu");
  if (x.track()) {
    out.set_track(true);
    tape.record([x, out, alpha, n]() mutable {
      const double* go = out.grad().data();
      double* gx = x.grad().data();
      for (std::size_t i = 0; i < n; ++i)
        gx[i] += go[i] * (x.data()[i] > 0.0 ? 1.0 : alpha);
    });
  }
  return out;
}

Tensor batch_norm(Tape& tape, const Tensor& x, const Tensor& gamma,
                  const Tensor& beta, BatchNormStats& stats, Mode mode,
                  double eps, double momentum) {
  if (x.rank() != 3) throw std::invalid_argument("batch_norm: expected x[B,C,T]");
  const std::size_t B = x.dim(0), C = x.dim(1), T = x.dim(2);
  if (gamma.dim(0) != C || beta.dim(0) != C)
    throw std::invalid_argument("batch_norm: gamma/beta length != channels");
  if (stats.running_mean.size() != C) {
    stats.running_mean.assign(C, 0.0);
    stats.running_var.assign(C, 1.0);
  }
  const std::size_t N = B * T;

  std::vector<double> mean(C), invstd(C);
  if (mode == Mode::train) {
    if (N < 2) throw std::invalid_argument("batch_norm: need batch*time > 1 per channel");
    for (std::size_t c = 0; c < C; ++c) {
      double m = 0.0;
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t t = 0; t < T; ++t) m += x.at3(b, c, t);
      m /= static_cast<double>(N);
      double v = 0.0;
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t t = 0; t < T; ++t) {
          const double d = x.at3(b, c, t) - m;
          v += d * d;
        }
      v /= static_cast<double>(N);
      mean[c] = m;
      invstd[c] = 1.0 / std::sqrt(v + eps);
      stats.running_mean[c] = (1.0 - momentum) * stats.running_mean[c] + momentum * m;
      stats.running_var[c] = (1.0 - momentum) * stats.running_var[c] + momentum * v;
    }
    stats.updates++;
  } else {
    if (stats.updates == 0)
      throw std::runtime_error("batch_norm: infer mode before any training step");
    for (std::size_t c = 0; c < C; ++c) {
      mean[c] = stats.running_mean[c];
      invstd[c] = 1.0 / std::sqrt(stats.running_var[c] + eps);
    }
  }

  Tensor out = Tensor::zeros(x.shape());
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t t = 0; t < T; ++t)
        out.at3(b, c, t) =
            gamma.data()[c] * (x.at3(b, c, t) - mean[c]) * invstd[c] + beta.data()[c];
  detail::check_finite(out, "batch_norm");

  if (x.track() || gamma.track() || beta.track()) {
    out.set_track(true);
    const bool train = mode == Mode::train;
    tape.record([x, gamma, beta, out, mean, invstd, B, C, T, N, train]() mutable {
      for (std::size_t c = 0; c < C; ++c) {
        const double g = gamma.data()[c];
        double sum_go = 0.0, sum_go_xhat = 0.0;
        for (std::size_t b = 0; b < B; ++b)
          for (std::size_t t = 0; t < T; ++t) {
            const double go = out.grad()[(b * C + c) * T + t];
            const double xhat = (x.at3(b, c, t) - mean[c]) * invstd[c];
            sum_go += go;
            sum_go_xhat += go * xhat;
          }
        if (gamma.track()) gamma.grad()[c] += sum_go_xhat;
        if (beta.track()) beta.grad()[c] += sum_go;
        if (x.track()) {
          if (train) {
            // dL/dx with batch statistics in the graph
            const double n = static_cast<double>(N);
            for (std::size_t b = 0; b < B; ++b)
              for (std::size_t t = 0; t < T; ++t) {
                const double go = out.grad()[(b * C + c) * T + t];
                const double xhat = (x.at3(b, c, t) - mean[c]) * invstd[c];
                x.grad()[(b * C + c) * T + t] +=
                    g * invstd[c] * (go - sum_go / n - xhat * sum_go_xhat / n);
              }
          } else {
            for (std::size_t b = 0; b < B; ++b)
              for (std::size_t t = 0; t < T; ++t)
                x.grad()[(b * C + c) * T + t] +=
                    g * invstd[c] * out.grad()[(b * C + c) * T + t];
          }
        }
      }
    });
  }
  return out;
}

Tensor dropout(Tape& tape, const Tensor& x, double rate, Mode mode, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0)
    throw std::invalid_argument("dropout: rate must be in [0, 1)");
  if (mode == Mode::infer || rate == 0.0) {
    Tensor out = Tensor::from_values(x.shape(), x.data());
    if (x.track()) {
      out.set_track(true);
      tape.record([x, out]() mutable {
        if (!x.track()) return;
        const std::size_t n = x.numel();
        for (std::size_t i = 0; i < n; ++i) x.grad()[i] += out.grad()[i];
      });
    }
    return out;
  }
  const double scale = 1.0 / (1.0 - rate);
  const std::size_t n = x.numel();
  auto mask = std::make_shared<std::vector<double>>(n);
  for (std::size_t i = 0; i < n; ++i)
    (*mask)[i] = rng.uniform() < rate ? 0.0 : scale;
  Tensor out = Tensor::zeros(x.shape());
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = x.data()[i] * (*mask)[i];
  detail::check_finite(out, "dropout");
  if (x.track()) {
    out.set_track(true);
    tape.record([x, out, mask, n]() mutable {
      for (std::size_t i = 0; i < n; ++i) x.grad()[i] += out.grad()[i] * (*mask)[i];
    });
  }
  return out;
}

Tensor softmax(Tape& tape, const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) throw std::invalid_argument("softmax: axis out of range");
  const std::size_t K = x.dim(axis);
  std::size_t inner = 1, outer = 1;
  for (std::size_t i = axis + 1; i < x.rank(); ++i) inner *= x.dim(i);
  for (std::size_t i = 0; i < axis; ++i) outer *= x.dim(i);

  Tensor out = Tensor::zeros(x.shape());
  for (std::size_t a = 0; a < outer; ++a)
    for (std::size_t b = 0; b < inner; ++b) {
      const std::size_t base = a * K * inner + b;
      double mx = x.data()[base];
      for (std::size_t k = 1; k < K; ++k)
        mx = std::max(mx, x.data()[base + k * inner]);
      double z = 0.0;
      for (std::size_t k = 0; k < K; ++k) {
        const double e = std::exp(x.data()[base + k * inner] - mx);
        out.data()[base + k * inner] = e;
        z += e;
      }
      for (std::size_t k = 0; k < K; ++k) out.data()[base + k * inner] /= z;
    }
  detail::check_finite(out, "softmax");

  if (x.track()) {
    out.set_track(true);
    tape.record([x, out, K, inner, outer]() mutable {
      for (std::size_t a = 0; a < outer; ++a)
        for (std::size_t b = 0; b < inner; ++b) {
          const std::size_t base = a * K * inner + b;
          double dot = 0.0;
          for (std::size_t k = 0; k < K; ++k)
            dot += out.grad()[base + k * inner] * out.data()[base + k * inner];
          for (std::size_t k = 0; k < K; ++k) {
            const std::size_t i = base + k * inner;
            x.grad()[i] += out.data()[i] * (out.grad()[i] - dot);
          }
        }
    });
  }
  return out;
}

Tensor sum(Tape& tape, const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  Tensor out = Tensor::scalar(acc);
  detail::check_finite(out, "sum");
  if (x.track()) {
    out.set_track(true);
    tape.record([x, out]() mutable {
      const double g = out.grad()[0];
      const std::size_t n = x.numel();
      for (std::size_t i = 0; i < n; ++i) x.grad()[i] += g;
    });
  }
  return out;
}

}  // namespace ncg
