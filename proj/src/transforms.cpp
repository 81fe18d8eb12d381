// Copyright 2026 The tddan Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "tddan/transforms.hpp"

#include <algorithm>
#include <cmath>

namespace tddan::dsp {

Framing plan_framing(int source_len, int window_size, int hop) {
  if (hop <= 0 || window_size <= 0) throw InvalidArgument("framing: hop and window must be positive");
  if (hop > window_size) throw InvalidArgument("framing: hop must not exceed window size");
  Framing fr;
  fr.pad_left = window_size - hop;
  int padded = source_len + 2 * (window_size - hop);
  if (padded < window_size)
    throw InvalidArgument("framing: signal shorter than one frame");
  int rem = (padded - window_size) % hop;
  if (rem != 0) padded += hop - rem;
  fr.padded_len = padded;
  fr.frames = (padded - window_size) / hop + 1;
  return fr;
}

std::vector<double> hann_window(int n) {
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / n);
  return w;
}

std::vector<double> sqrt_hann_window(int n) {
  std::vector<double> w = hann_window(n);
  for (double& v : w) v = std::sqrt(v);
  return w;
}

std::vector<double> rect_window(int n) { return std::vector<double>(n, 1.0); }

std::vector<double> make_window(const std::string& name, int n) {
  if (name == "hann") return hann_window(n);
  if (name == "sqrt_hann") return sqrt_hann_window(n);
  if (name == "rect") return rect_window(n);
  throw InvalidArgument("unknown window: " + name);
}

namespace {

std::vector<double> pad_signal(const Waveform& x, const Framing& fr) {
  std::vector<double> padded(fr.padded_len, 0.0);
  std::copy(x.begin(), x.end(), padded.begin() + fr.pad_left);
  return padded;
}

}  // namespace

ComplexSpectrogram stft(const Waveform& x, int window_size, int hop,
                        const std::vector<double>& window) {
  if (window_size % 2 != 0) throw InvalidArgument("stft: window size must be even");
  if (static_cast<int>(window.size()) != window_size)
    throw InvalidArgument("stft: window length must equal window size");
  const Framing fr = plan_framing(static_cast<int>(x.size()), window_size, hop);
  const std::vector<double> padded = pad_signal(x, fr);

  ComplexSpectrogram spec;
  spec.window_size = window_size;
  spec.hop = hop;
  spec.frames = fr.frames;
  spec.bins = window_size / 2 + 1;
  spec.source_len = static_cast<int>(x.size());
  spec.window = window;
  spec.data.assign(static_cast<std::size_t>(spec.frames) * spec.bins, {0.0, 0.0});

  const int n_bins = spec.bins;
  std::vector<double> wx(window_size);
  for (int t = 0; t < fr.frames; ++t) {
    const double* frame = padded.data() + static_cast<std::size_t>(t) * hop;
    for (int n = 0; n < window_size; ++n) wx[n] = window[n] * frame[n];
    for (int f = 0; f < n_bins; ++f) {
      double re = 0.0, im = 0.0;
      for (int n = 0; n < window_size; ++n) {
        const double phase = 2.0 * M_PI * static_cast<double>(n) * f / window_size;
        re += wx[n] * std::cos(phase);
        im -= wx[n] * std::sin(phase);
      }
      spec.at(t, f) = {re, im};
    }
  }
  return spec;
}

Waveform istft(const ComplexSpectrogram& spec) {
  const int N = spec.window_size;
  const int hop = spec.hop;
  const int F = N / 2;
  if (spec.bins != F + 1) throw InvalidArgument("istft: inconsistent bin count");
  const std::vector<double>& w = spec.window;

  const Framing fr = plan_framing(spec.source_len, N, hop);
  if (fr.frames != spec.frames) throw InvalidArgument("istft: frame count mismatch");

  std::vector<double> acc(fr.padded_len, 0.0);
  std::vector<double> den(fr.padded_len, 0.0);
  std::vector<double> frame_rec(N);

  for (int t = 0; t < spec.frames; ++t) {
    // real inverse transform of the half spectrum (conjugate symmetry)
    for (int n = 0; n < N; ++n) {
      double acc_n = spec.at(t, 0).real();
      for (int f = 1; f < F; ++f) {
        const double phase = 2.0 * M_PI * static_cast<double>(n) * f / N;
        acc_n += 2.0 * (spec.at(t, f).real() * std::cos(phase) -
                        spec.at(t, f).imag() * std::sin(phase));
      }
      acc_n += spec.at(t, F).real() * std::cos(M_PI * n);
      frame_rec[n] = acc_n / N;
    }
    const int base = t * hop;
    for (int n = 0; n < N; ++n) {
      acc[base + n] += w[n] * frame_rec[n];
      den[base + n] += w[n] * w[n];
    }
  }

  // constant-overlap-add check over the span that maps back to real samples
  double dmin = 1e300, dmax = 0.0;
  for (int s = 0; s < spec.source_len; ++s) {
    const double d = den[fr.pad_left + s];
    dmin = std::min(dmin, d);
    dmax = std::max(dmax, d);
  }
  if (dmin <= 0.0 || (dmax - dmin) > 1e-6 * dmax)
    throw InvalidConfiguration("istft: window/hop pair does not satisfy overlap-add constancy");

  Waveform out(spec.source_len);
  for (int s = 0; s < spec.source_len; ++s)
    out[s] = acc[fr.pad_left + s] / den[fr.pad_left + s];
  return out;
}

Mat lps(const ComplexSpectrogram& spec, double floor) {
  if (floor <= 0.0) throw InvalidArgument("lps: floor must be positive");
  Mat out(spec.frames, spec.bins);
  for (int t = 0; t < spec.frames; ++t)
    for (int f = 0; f < spec.bins; ++f) out.at(t, f) = std::log(std::norm(spec.at(t, f)) + floor);
  return out;
}

Mat stft_magnitude(const ComplexSpectrogram& spec) {
  Mat out(spec.frames, spec.bins);
  for (int t = 0; t < spec.frames; ++t)
    for (int f = 0; f < spec.bins; ++f) out.at(t, f) = std::abs(spec.at(t, f));
  return out;
}

AnalysisKernel build_stacked_stft_kernel(int kernel_size, const std::vector<double>& window,
                                         int hop) {
  const int N = kernel_size;
  if (N % 2 != 0) throw InvalidArgument("stacked kernel: kernel size must be even");
  if (static_cast<int>(window.size()) != N)
    throw InvalidArgument("stacked kernel: window length must equal kernel size");
  const int F = N / 2;

  AnalysisKernel k;
  k.kind = KernelKind::StackedStft;
  k.hop = hop;
  k.window = window;
  k.weights = Mat(N, N);
  int row = 0;
  for (int f = 0; f <= F; ++f, ++row)
    for (int n = 0; n < N; ++n)
      k.weights.at(row, n) = window[n] * std::cos(2.0 * M_PI * static_cast<double>(n) * f / N);
  for (int f = 1; f < F; ++f, ++row)
    for (int n = 0; n < N; ++n)
      k.weights.at(row, n) = window[n] * std::sin(2.0 * M_PI * static_cast<double>(n) * f / N);
  return k;
}

namespace {

// Gauss-Jordan inverse with partial pivoting; the unwindowed stacked basis is
// square and well conditioned.
Mat invert_matrix(Mat a) {
  const int n = a.rows;
  Mat inv(n, n);
  for (int i = 0; i < n; ++i) inv.at(i, i) = 1.0;
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(a.at(r, col)) > std::abs(a.at(pivot, col))) pivot = r;
    if (std::abs(a.at(pivot, col)) < 1e-12)
      throw NumericalFailure("kernel inversion: singular matrix");
    if (pivot != col) {
      for (int c = 0; c < n; ++c) {
        std::swap(a.at(pivot, c), a.at(col, c));
        std::swap(inv.at(pivot, c), inv.at(col, c));
      }
    }
    const double d = a.at(col, col);
    for (int c = 0; c < n; ++c) {
      a.at(col, c) /= d;
      inv.at(col, c) /= d;
    }
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      const double factor = a.at(r, col);
      if (factor == 0.0) continue;
      for (int c = 0; c < n; ++c) {
        a.at(r, c) -= factor * a.at(col, c);
        inv.at(r, c) -= factor * inv.at(col, c);
      }
    }
  }
  return inv;
}

}  // namespace

AnalysisKernel build_synthesis_kernel(const AnalysisKernel& analysis) {
  if (analysis.kind != KernelKind::StackedStft)
    throw InvalidArgument("synthesis kernel: only defined for stacked kernels");
  const int N = analysis.kernel_size();
  const int hop = analysis.hop;
  const std::vector<double>& w = analysis.window;

  // overlap-add constant of w*w at this hop; must not depend on the phase
  double cola = 0.0;
  {
    std::vector<double> sums(hop, 0.0);
    for (int r = 0; r < hop; ++r)
      for (int n = r; n < N; n += hop) sums[r] += w[n] * w[n];
    const auto [mn, mx] = std::minmax_element(sums.begin(), sums.end());
    if (*mn <= 0.0 || (*mx - *mn) > 1e-6 * *mx)
      throw InvalidConfiguration("synthesis kernel: window/hop pair is not overlap-add constant");
    cola = *mx;
  }

  // Invert the unwindowed basis; dividing the analysis rows by the window is
  // not safe where it vanishes.
  Mat k(N, N);
  const int F = N / 2;
  int row = 0;
  for (int f = 0; f <= F; ++f, ++row)
    for (int n = 0; n < N; ++n)
      k.at(row, n) = std::cos(2.0 * M_PI * static_cast<double>(n) * f / N);
  for (int f = 1; f < F; ++f, ++row)
    for (int n = 0; n < N; ++n)
      k.at(row, n) = std::sin(2.0 * M_PI * static_cast<double>(n) * f / N);
  const Mat kinv = invert_matrix(k);

  AnalysisKernel synth;
  synth.kind = KernelKind::StackedStft;
  synth.hop = hop;
  synth.window = w;
  synth.weights = Mat(N, N);
  for (int c = 0; c < N; ++c)
    for (int n = 0; n < N; ++n) synth.weights.at(c, n) = w[n] * kinv.at(n, c) / cola;
  return synth;
}

Rep encode(const Waveform& x, const AnalysisKernel& kernel) {
  const int N = kernel.kernel_size();
  const int C = kernel.channels();
  const int hop = kernel.hop;
  if (static_cast<int>(x.size()) < N)
    throw InvalidArgument("encode: signal shorter than the kernel");
  const Framing fr = plan_framing(static_cast<int>(x.size()), N, hop);
  const std::vector<double> padded = pad_signal(x, fr);

  Rep rep;
  rep.hop = hop;
  rep.kernel_size = N;
  rep.source_len = static_cast<int>(x.size());
  rep.data = Mat(fr.frames, C);
  for (int t = 0; t < fr.frames; ++t) {
    const double* frame = padded.data() + static_cast<std::size_t>(t) * hop;
    for (int c = 0; c < C; ++c) {
      double acc = 0.0;
      const double* wrow = kernel.weights.data.data() + static_cast<std::size_t>(c) * N;
      for (int n = 0; n < N; ++n) acc += wrow[n] * frame[n];
      rep.data.at(t, c) = acc;
    }
  }
  return rep;
}

Waveform decode(const Rep& rep, const AnalysisKernel& kernel) {
  const int N = kernel.kernel_size();
  const int C = kernel.channels();
  const int hop = kernel.hop;
  if (rep.hop != hop || rep.data.cols != C)
    throw InvalidArgument("decode: representation framing does not match the kernel");
  const Framing fr = plan_framing(rep.source_len, N, hop);
  if (fr.frames != rep.frames()) throw InvalidArgument("decode: frame count mismatch");

  std::vector<double> acc(fr.padded_len, 0.0);
  for (int t = 0; t < rep.frames(); ++t) {
    const int base = t * hop;
    for (int c = 0; c < C; ++c) {
      const double v = rep.data.at(t, c);
      if (v == 0.0) continue;
      const double* wrow = kernel.weights.data.data() + static_cast<std::size_t>(c) * N;
      for (int n = 0; n < N; ++n) acc[base + n] += wrow[n] * v;
    }
  }
  Waveform out(rep.source_len);
  for (int s = 0; s < rep.source_len; ++s) out[s] = acc[fr.pad_left + s];
  return out;
}

Mat magnitude(const Rep& rep) {
  Mat out = rep.data;
  for (double& v : out.data) v = std::abs(v);
  return out;
}

}  // namespace tddan::dsp
