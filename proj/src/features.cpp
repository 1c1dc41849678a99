// Copyright (C) 2026 the ssdkan authors
// SPDX-License-Identifier: Apache-2.0
//
// Deterministic feature stub: Hann-windowed frames, a radix-2 FFT, log
// mel-style triangular band energies, then a fixed seeded random projection
// to the configured width. Stands in for a pretrained speech encoder.

#include <cmath>

#include "ssdkan/harness.hpp"
#include "ssdkan/kernels.hpp"

namespace ssdkan {

namespace {

constexpr int kBands = 40;
constexpr uint64_t kProjectionSeed = 0xfea7423a11ce5eedULL;
constexpr double kPi = 3.14159265358979323846;

void fft_inplace(std::vector<double>& re, std::vector<double>& im) {
  const size_t n = re.size();
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      std::swap(re[i], re[j]);
      std::swap(im[i], im[j]);
    }
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * kPi / static_cast<double>(len);
    const double wre = std::cos(ang);
    const double wim = std::sin(ang);
    for (size_t i = 0; i < n; i += len) {
      double cre = 1.0;
      double cim = 0.0;
      for (size_t j = 0; j < len / 2; ++j) {
        const size_t a = i + j;
        const size_t b = i + j + len / 2;
        const double vre = re[b] * cre - im[b] * cim;
        const double vim = re[b] * cim + im[b] * cre;
        re[b] = re[a] - vre;
        im[b] = im[a] - vim;
        re[a] += vre;
        im[a] += vim;
        const double nre = cre * wre - cim * wim;
        cim = cre * wim + cim * wre;
        cre = nre;
      }
    }
  }
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

}  // namespace

int64_t feature_frame_count(int64_t samples, int sample_rate) {
  const int64_t win = std::llround(0.025 * sample_rate);
  const int64_t hop = std::llround(0.010 * sample_rate);
  if (samples < win) return 0;
  return 1 + (samples - win) / hop;
}

Tensor extract_features(std::span<const double> wave, int feature_dim,
                        int sample_rate) {
  if (feature_dim < 1) {
    throw ContractError("extract_features: feature_dim must be >= 1");
  }
  const int64_t win = std::llround(0.025 * sample_rate);
  const int64_t hop = std::llround(0.010 * sample_rate);
  const int64_t frames = feature_frame_count(
      static_cast<int64_t>(wave.size()), sample_rate);
  if (frames < 1) {
    throw ContractError("extract_features: waveform shorter than one frame (" +
                        std::to_string(wave.size()) + " < " +
                        std::to_string(win) + " samples)");
  }
  size_t fft_size = 1;
  while (fft_size < static_cast<size_t>(win)) fft_size <<= 1;
  const size_t bins = fft_size / 2 + 1;

  std::vector<double> window(win);
  for (int64_t i = 0; i < win; ++i) {
    window[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / (win - 1));
  }

  // Triangular bands, mel-spaced between 50 Hz and 0.95 * Nyquist.
  const double mel_lo = hz_to_mel(50.0);
  const double mel_hi = hz_to_mel(0.95 * sample_rate / 2.0);
  std::vector<double> band_edges(kBands + 2);
  for (int b = 0; b < kBands + 2; ++b) {
    const double mel = mel_lo + (mel_hi - mel_lo) * b / (kBands + 1);
    band_edges[b] = mel_to_hz(mel) * static_cast<double>(fft_size) /
                    sample_rate;  // in bins
  }

  std::vector<double> energies(static_cast<size_t>(frames) * kBands);
  std::vector<double> re(fft_size);
  std::vector<double> im(fft_size);
  for (int64_t f = 0; f < frames; ++f) {
    const double* src = wave.data() + f * hop;
    std::fill(re.begin(), re.end(), 0.0);
    std::fill(im.begin(), im.end(), 0.0);
    for (int64_t i = 0; i < win; ++i) re[i] = src[i] * window[i];
    fft_inplace(re, im);
    double* erow = energies.data() + static_cast<size_t>(f) * kBands;
    for (int b = 0; b < kBands; ++b) {
      const double lo = band_edges[b];
      const double mid = band_edges[b + 1];
      const double hi = band_edges[b + 2];
      double acc = 0.0;
      const int k0 = std::max<int>(0, static_cast<int>(std::ceil(lo)));
      const int k1 = std::min<int>(static_cast<int>(bins) - 1,
                                   static_cast<int>(std::floor(hi)));
      for (int k = k0; k <= k1; ++k) {
        const double kk = static_cast<double>(k);
        double weight = 0.0;
        if (kk <= mid) {
          weight = mid > lo ? (kk - lo) / (mid - lo) : 0.0;
        } else {
          weight = hi > mid ? (hi - kk) / (hi - mid) : 0.0;
        }
        if (weight <= 0.0) continue;
        acc += weight * (re[k] * re[k] + im[k] * im[k]);
      }
      erow[b] = std::log(acc + 1e-10);
    }
  }

  // Fixed random projection: the same seed on every call, so features are a
  // pure function of the waveform.
  Rng rng(kProjectionSeed);
  std::vector<double> projection(static_cast<size_t>(kBands) * feature_dim);
  const double stddev = 1.0 / std::sqrt(static_cast<double>(kBands));
  for (auto& v : projection) v = rng.normal() * stddev;

  std::vector<double> out(static_cast<size_t>(frames) * feature_dim);
  kernels::matmul(energies.data(), projection.data(), out.data(),
                  static_cast<int>(frames), kBands, feature_dim);
  return Tensor::from_data({frames, feature_dim}, std::move(out));
}

}  // namespace ssdkan
