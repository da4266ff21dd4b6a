// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <unistd.h>
#include <numbers>

#include <doctest.h>

#include "ncg/signals.hpp"

using namespace ncg;

namespace {

double mean_of(const std::vector<double>& v) {
  double m = 0;
  for (double x : v) m += x;
  return m / static_cast<double>(v.size());
}

double var_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size());
}

double lag1_autocorr(const std::vector<double>& v) {
  const double m = mean_of(v);
  double num = 0, den = 0;
  for (std::size_t t = 0; t + 1 < v.size(); ++t)
    num += (v[t] - m) * (v[t + 1] - m);
  for (double x : v) den += (x - m) * (x - m);
  return num / den;
}

// Two-sample Kolmogorov-Smirnov statistic.
double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double d = 0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] <= b[j])
      ++i;
    else
      ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() -
                             static_cast<double>(j) / b.size()));
  }
  return d;
}

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& contents) {
    char buf[] = "/tmp/ncg_test_XXXXXX";
    const int fd = mkstemp(buf);
    REQUIRE(fd >= 0);
    path = buf;
    std::ofstream(path) << contents;
    close(fd);
  }
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("ar1 at theta=pi/2 is iid standard Gaussian") {
  Rng rng(1);
  auto sig = gen_ar1(std::numbers::pi / 2.0, 1000000, rng);
  CHECK(std::abs(lag1_autocorr(sig.samples)) < 0.01);
  CHECK(std::abs(mean_of(sig.samples)) < 0.01);
  CHECK(var_of(sig.samples) == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("ar1 lag-1 autocorrelation tracks cos(theta)") {
  Rng rng(2);
  const double theta = std::acos(std::sqrt(3.0) / 2.0);
  auto sig = gen_ar1(theta, 1000000, rng);
  CHECK(lag1_autocorr(sig.samples) == doctest::Approx(0.866).epsilon(0.012));
  CHECK(var_of(sig.samples) == doctest::Approx(1.0).epsilon(0.012));
}

TEST_CASE("ar1 rejects theta out of range") {
  Rng rng(3);
  CHECK_THROWS_AS(gen_ar1(0.0, 10, rng), std::invalid_argument);
  CHECK_THROWS_AS(gen_ar1(2.0, 10, rng), std::invalid_argument);
  CHECK_THROWS_AS(gen_ar1(-0.5, 10, rng), std::invalid_argument);
}

TEST_CASE("discrete noise level sets have exact zero mean and unit variance") {
  const double s32 = std::sqrt(1.5), s3 = std::sqrt(3.0);
  // algebraic moments of the stated levels
  const std::vector<std::vector<double>> level_sets = {
      {-1.0, 1.0},
      {-s32, 0.0, s32},
      {-(1.0 + s3) / 2.0, (s3 - 1.0) / 2.0, 1.0}};
  for (const auto& levels : level_sets) {
    double m = 0, v = 0;
    for (double x : levels) m += x;
    m /= static_cast<double>(levels.size());
    for (double x : levels) v += x * x;
    v /= static_cast<double>(levels.size());
    CHECK(std::abs(m) < 1e-15);
    CHECK(v == doctest::Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("discrete generators: sample moments at n=1e6") {
  for (auto kind : {NoiseKind::binary, NoiseKind::ternary_balanced,
                    NoiseKind::ternary_unbalanced}) {
    Rng rng(4);
    auto sig = gen_discrete(kind, 1000000, rng);
    CHECK(std::abs(mean_of(sig.samples)) < 0.005);
    CHECK(var_of(sig.samples) == doctest::Approx(1.0).epsilon(0.01));
  }
  Rng rng(5);
  CHECK_THROWS_AS(gen_discrete(NoiseKind::gaussian, 10, rng), std::invalid_argument);
}

TEST_CASE("envelope values and periodicity") {
  CHECK(envelope(0.0, 2000.0) == doctest::Approx(0.5));
  CHECK(envelope(500.0, 2000.0) == doctest::Approx(0.880797).epsilon(1e-5));
  for (double t : {0.0, 123.0, 1777.5})
    CHECK(std::abs(envelope(t + 2000.0, 2000.0) - envelope(t, 2000.0)) < 1e-12);
  CHECK_THROWS_AS(envelope(1.0, 0.0), std::invalid_argument);
}

TEST_CASE("mixture with psi forced to 1 is the pure first component") {
  Rng rng(6);
  NoiseSpec a{NoiseKind::ar1, 0.5}, b{NoiseKind::gaussian, 0.0};
  auto mix = gen_mixture(a, b, 2000.0, 5000, rng, true);
  Rng rng2(6);
  Rng ra = rng2.split(1);
  auto pure = gen_ar1(0.5, 5000, ra);
  CHECK(mix.samples == pure.samples);
  for (double v : mix.truth) CHECK(v == 1.0);
}

TEST_CASE("mixture truth equals the envelope exactly") {
  Rng rng(7);
  NoiseSpec a{NoiseKind::gaussian, 0.0}, b{NoiseKind::binary, 0.0};
  auto mix = gen_mixture(a, b, 500.0, 3000, rng);
  REQUIRE(mix.truth.size() == 3000);
  for (std::size_t t = 0; t < 3000; ++t)
    CHECK(mix.truth[t] == envelope(static_cast<double>(t), 500.0));
}

TEST_CASE("Gaussian mixture standardized by psi^2 + (1-psi)^2 is Gaussian (KS oracle)") {
  Rng rng(8);
  NoiseSpec g{NoiseKind::gaussian, 0.0};
  auto mix = gen_mixture(g, g, 2000.0, 100000, rng);
  for (std::size_t t = 0; t < mix.samples.size(); ++t) {
    const double psi = mix.truth[t];
    mix.samples[t] /= std::sqrt(psi * psi + (1.0 - psi) * (1.0 - psi));
  }
  Rng ref_rng(909);
  auto ref = gen_gaussian(100000, ref_rng);
  CHECK(ks_statistic(mix.samples, ref.samples) < 0.01);
}

TEST_CASE("generators are bit-reproducible from the seed") {
  NoiseSpec a{NoiseKind::ar1, 1.0}, b{NoiseKind::ternary_unbalanced, 0.0};
  Rng r1(42), r2(42);
  auto m1 = gen_mixture(a, b, 2000.0, 10000, r1);
  auto m2 = gen_mixture(a, b, 2000.0, 10000, r2);
  CHECK(m1.samples == m2.samples);
  CHECK(m1.truth == m2.truth);
}

TEST_CASE("csv ingestion: plain column") {
  TempFile f("1\n2\n3\n4\n");
  auto sig = ingest_csv(f.path);
  CHECK(sig.samples == std::vector<double>{1, 2, 3, 4});
  CHECK_FALSE(sig.has_truth());
}

TEST_CASE("csv ingestion: named column behind a header") {
  TempFile f("a,b\n1,10\n2,20\n3,3e1\n");
  auto sig = ingest_csv(f.path, "b");
  CHECK(sig.samples == std::vector<double>{10, 20, 30});
}

TEST_CASE("csv ingestion: bad row is reported with its line number") {
  TempFile f("1\n2\nabc\n4\n");
  CHECK_THROWS_WITH_AS(ingest_csv(f.path), doctest::Contains("line 3"),
                       std::runtime_error);
}

TEST_CASE("csv ingestion: missing column") {
  TempFile f("a,b\n1,2\n");
  CHECK_THROWS_AS(ingest_csv(f.path, "zz"), std::runtime_error);
}

TEST_CASE("csv round trip preserves doubles bit-exactly") {
  std::vector<double> col{0.1, -1.0 / 3.0, 1e-300, 12345.678901234567};
  TempFile f("");
  write_csv(f.path, {&col}, {"x"});
  auto sig = ingest_csv(f.path, "x");
  CHECK(sig.samples == col);
}
