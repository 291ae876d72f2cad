#include "dialoforge/dsp.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <numbers>

#include "dialoforge/errors.hpp"

namespace dialoforge::dsp {

double rms(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc / static_cast<double>(x.size()));
}

double peak(std::span<const double> x) {
  double p = 0.0;
  for (double v : x) p = std::max(p, std::abs(v));
  return p;
}

std::size_t seconds_to_samples(double seconds, int rate) {
  if (!(seconds >= 0.0)) throw ContractError("negative duration");
  return static_cast<std::size_t>(std::llround(seconds * rate));
}

void fft(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  if (n == 0 || !std::has_single_bit(n)) throw ContractError("fft size must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const auto u = a[i + k];
        const auto v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

std::vector<double> magnitude_spectrum(std::span<const double> x, std::size_t n) {
  std::vector<std::complex<double>> buf(n);
  for (std::size_t i = 0; i < std::min(n, x.size()); ++i) buf[i] = x[i];
  fft(buf);
  std::vector<double> mag(n / 2 + 1);
  for (std::size_t k = 0; k < mag.size(); ++k) mag[k] = std::abs(buf[k]);
  return mag;
}

namespace {

constexpr int kZeroCrossings = 32;
constexpr int kTableResolution = 512;  // entries per zero crossing
constexpr double kKaiserBeta = 8.6;
constexpr double kRolloff = 0.96;

double bessel_i0(double x) {
  double sum = 1.0, term = 1.0;
  const double q = x * x / 4.0;
  for (int k = 1; k < 64; ++k) {
    term *= q / (static_cast<double>(k) * k);
    sum += term;
    if (term < 1e-17 * sum) break;
  }
  return sum;
}

// Windowed sinc sampled on u in [0, kZeroCrossings] (units of zero crossings).
const std::vector<double>& kernel_table() {
  static const std::vector<double> table = [] {
    const int size = kZeroCrossings * kTableResolution + 2;
    std::vector<double> t(static_cast<std::size_t>(size), 0.0);
    const double i0b = bessel_i0(kKaiserBeta);
    for (int i = 0; i <= kZeroCrossings * kTableResolution; ++i) {
      const double u = static_cast<double>(i) / kTableResolution;
      const double r = u / kZeroCrossings;
      const double window = bessel_i0(kKaiserBeta * std::sqrt(std::max(0.0, 1.0 - r * r))) / i0b;
      const double sinc = i == 0 ? 1.0 : std::sin(std::numbers::pi * u) / (std::numbers::pi * u);
      t[static_cast<std::size_t>(i)] = sinc * window;
    }
    return t;
  }();
  return table;
}

double kernel_at(const std::vector<double>& table, double u) {
  u = std::abs(u);
  if (u >= kZeroCrossings) return 0.0;
  const double pos = u * kTableResolution;
  const auto i = static_cast<std::size_t>(pos);
  const double frac = pos - static_cast<double>(i);
  return table[i] + frac * (table[i + 1] - table[i]);
}

}  // namespace

Waveform resample(const Waveform& w, int target_rate) {
  if (w.sample_rate <= 0 || target_rate <= 0) throw ContractError("resample: sample rates must be > 0");
  if (w.sample_rate == target_rate) return w;

  const auto in_len = static_cast<std::int64_t>(w.samples.size());
  const std::int64_t out_len = (in_len * target_rate + w.sample_rate / 2) / w.sample_rate;
  const double step = static_cast<double>(w.sample_rate) / target_rate;  // input samples per output sample
  const double cutoff = std::min(1.0, 1.0 / step) * kRolloff;            // fraction of input Nyquist
  const double half_width = kZeroCrossings / cutoff;                      // in input samples
  const auto& table = kernel_table();

  Waveform out;
  out.sample_rate = target_rate;
  out.samples.resize(static_cast<std::size_t>(out_len));
  for (std::int64_t n = 0; n < out_len; ++n) {
    const double x = static_cast<double>(n) * step;
    const auto lo = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(x - half_width)));
    const auto hi = std::min<std::int64_t>(in_len - 1, static_cast<std::int64_t>(std::floor(x + half_width)));
    double acc = 0.0;
    for (std::int64_t k = lo; k <= hi; ++k)
      acc += w.samples[static_cast<std::size_t>(k)] * kernel_at(table, (x - static_cast<double>(k)) * cutoff);
    out.samples[static_cast<std::size_t>(n)] = acc * cutoff;
  }
  return out;
}

std::uint64_t fingerprint(const Waveform& w) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xFF;
      h *= 0x100000001b3ULL;
    }
  };
  feed(static_cast<std::uint64_t>(w.sample_rate));
  feed(w.samples.size());
  for (double x : w.samples) feed(std::bit_cast<std::uint64_t>(x));
  return h;
}

}  // namespace dialoforge::dsp
