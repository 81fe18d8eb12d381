// Copyright 2026 The tddan Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace tddan {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& msg) : Error(msg) {}
};

class InvalidState : public Error {
 public:
  explicit InvalidState(const std::string& msg) : Error(msg) {}
};

class InvalidConfiguration : public Error {
 public:
  explicit InvalidConfiguration(const std::string& msg) : Error(msg) {}
};

class DegenerateSource : public Error {
 public:
  explicit DegenerateSource(const std::string& msg) : Error(msg) {}
};

class EmptySpeaker : public Error {
 public:
  explicit EmptySpeaker(const std::string& msg) : Error(msg) {}
};

class NumericalFailure : public Error {
 public:
  explicit NumericalFailure(const std::string& msg) : Error(msg) {}
};

class UnsupportedCondition : public Error {
 public:
  explicit UnsupportedCondition(const std::string& msg) : Error(msg) {}
};

/// Parse failure with the byte offset where the input stopped making sense.
class ParseError : public Error {
 public:
  ParseError(const std::string& msg, std::size_t byte_offset)
      : Error(msg + " (byte offset " + std::to_string(byte_offset) + ")"),
        byte_offset_(byte_offset) {}
  std::size_t byte_offset() const { return byte_offset_; }

 private:
  std::size_t byte_offset_;
};

using Waveform = std::vector<double>;

/// Dense row-major real matrix, the workhorse for magnitudes and masks.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Mat() = default;
  Mat(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {}

  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  std::size_t size() const { return data.size(); }
  bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
};

inline double signal_power(const Waveform& x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return x.empty() ? 0.0 : acc / static_cast<double>(x.size());
}

inline double signal_energy(const Waveform& x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return acc;
}

inline double rms(const Waveform& x) { return std::sqrt(signal_power(x)); }

inline double power_db(double p_num, double p_den) {
  return 10.0 * std::log10(p_num / p_den);
}

// --- deterministic seeding -------------------------------------------------
//
// splitmix64 is the stated hash for deriving child seeds; the constant stream
// is reproducible across platforms, unlike std::seed_seq.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(master ^ splitmix64(index + 1));
}

/// Hand-rolled Gaussian sampler (Box-Muller over mt19937_64 output) so that
/// streams do not depend on the standard library's unspecified
/// normal_distribution algorithm.
class GaussianSampler {
 public:
  explicit GaussianSampler(std::uint64_t seed) : state_(splitmix64(seed)) {}

  double uniform() {
    // xorshift-free: iterate splitmix64 as a counter-less PRNG
    state_ = splitmix64(state_);
    // 53-bit mantissa in [0, 1)
    return static_cast<double>(state_ >> 11) * 0x1.0p-53;
  }

  double operator()() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  double uniform_in(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::uint64_t next_u64() {
    state_ = splitmix64(state_);
    return state_;
  }

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// FNV-1a, used to place scene ids into train/valid/test buckets.
inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace tddan
