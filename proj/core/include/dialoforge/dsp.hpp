#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "dialoforge/schema.hpp"

namespace dialoforge::dsp {

double rms(std::span<const double> x);
double peak(std::span<const double> x);

/// Sample count for a duration at `rate`, rounded to nearest.
std::size_t seconds_to_samples(double seconds, int rate = kCanonicalSampleRate);

/// In-place iterative radix-2 FFT. Size must be a power of two.
void fft(std::vector<std::complex<double>>& a);

/// |FFT| of the first `n` samples (zero-padded), bins 0..n/2.
std::vector<double> magnitude_spectrum(std::span<const double> x, std::size_t n);

/// Band-limited resampling with a Kaiser-windowed sinc kernel (32 zero
/// crossings per side). Output length is round(len * target / source).
Waveform resample(const Waveform& w, int target_rate);

/// Fingerprint of sample bits and rate (FNV-1a).
std::uint64_t fingerprint(const Waveform& w);

}  // namespace dialoforge::dsp
