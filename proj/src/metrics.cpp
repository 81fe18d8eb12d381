// Copyright 2026 The tddan Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "tddan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tddan::metrics {

double si_sdr(const Waveform& estimate, const Waveform& reference) {
  if (estimate.size() != reference.size())
    throw InvalidArgument("si_sdr: estimate and reference lengths differ");
  const double ref_energy = signal_energy(reference);
  if (ref_energy <= 0.0) throw InvalidArgument("si_sdr: all-zero reference");

  double inner = 0.0;
  for (std::size_t i = 0; i < estimate.size(); ++i) inner += estimate[i] * reference[i];
  const double alpha = inner / ref_energy;

  double err_energy = 0.0;
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    const double e = estimate[i] - alpha * reference[i];
    err_energy += e * e;
  }
  const double target_energy = alpha * alpha * ref_energy;
  return 10.0 * std::log10(target_energy / (err_energy + 1e-12));
}

namespace {

// Cholesky solve of the loaded normal equations.
std::vector<double> solve_spd(std::vector<double>& g, std::vector<double> rhs, int n) {
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      double sum = g[static_cast<std::size_t>(i) * n + j];
      for (int k = 0; k < j; ++k)
        sum -= g[static_cast<std::size_t>(i) * n + k] * g[static_cast<std::size_t>(j) * n + k];
      if (i == j) {
        if (sum <= 0.0)
          throw NumericalFailure("sdr_projective: normal equations not positive definite");
        g[static_cast<std::size_t>(i) * n + j] = std::sqrt(sum);
      } else {
        g[static_cast<std::size_t>(i) * n + j] = sum / g[static_cast<std::size_t>(j) * n + j];
      }
    }
  }
  // forward then backward substitution
  for (int i = 0; i < n; ++i) {
    double sum = rhs[i];
    for (int k = 0; k < i; ++k) sum -= g[static_cast<std::size_t>(i) * n + k] * rhs[k];
    rhs[i] = sum / g[static_cast<std::size_t>(i) * n + i];
  }
  for (int i = n - 1; i >= 0; --i) {
    double sum = rhs[i];
    for (int k = i + 1; k < n; ++k) sum -= g[static_cast<std::size_t>(k) * n + i] * rhs[k];
    rhs[i] = sum / g[static_cast<std::size_t>(i) * n + i];
  }
  return rhs;
}

}  // namespace

double sdr_projective(const Waveform& estimate, const Waveform& reference, int filter_len) {
  if (filter_len < 1) throw InvalidArgument("sdr_projective: filter_len must be >= 1");
  if (static_cast<int>(reference.size()) <= filter_len)
    throw InvalidArgument("sdr_projective: reference shorter than the filter");
  if (estimate.size() != reference.size())
    throw InvalidArgument("sdr_projective: estimate and reference lengths differ");

  const int L = filter_len;
  const int M = static_cast<int>(estimate.size());

  // Gram matrix of delayed references: G[i][j] = sum_u ref[u]*ref[u+|i-j|]
  // truncated at the later shift's support.
  std::vector<double> gram(static_cast<std::size_t>(L) * L, 0.0);
  for (int d = 0; d < L; ++d) {
    // caps needed: prefix sums up to M-1-i for i = L-1 .. d
    double acc = 0.0;
    int u = 0;
    for (int i = L - 1; i >= d; --i) {
      const int cap = M - 1 - i;
      for (; u <= cap; ++u) acc += reference[u] * reference[u + d];
      gram[static_cast<std::size_t>(i) * L + (i - d)] = acc;
      gram[static_cast<std::size_t>(i - d) * L + i] = acc;
    }
  }

  std::vector<double> rhs(L, 0.0);
  for (int i = 0; i < L; ++i) {
    double acc = 0.0;
    for (int n = i; n < M; ++n) acc += estimate[n] * reference[n - i];
    rhs[i] = acc;
  }

  double max_diag = 0.0;
  for (int i = 0; i < L; ++i)
    max_diag = std::max(max_diag, gram[static_cast<std::size_t>(i) * L + i]);
  const double loading = 1e-10 * std::max(1.0, max_diag);
  for (int i = 0; i < L; ++i) gram[static_cast<std::size_t>(i) * L + i] += loading;

  const std::vector<double> h = solve_spd(gram, rhs, L);

  double proj_energy = 0.0;
  for (int i = 0; i < L; ++i) proj_energy += h[i] * rhs[i];
  proj_energy = std::max(proj_energy, 0.0);
  const double est_energy = signal_energy(estimate);
  const double resid_energy = std::max(est_energy - proj_energy, 0.0);

  const double eps = 1e-12 * std::max(est_energy, 1e-300);
  return 10.0 * std::log10((proj_energy + eps) / (resid_energy + eps));
}

Alignment eval_align(const std::vector<Waveform>& estimates,
                     const std::vector<Waveform>& references, const MetricFn& metric) {
  const int K = static_cast<int>(references.size());
  if (static_cast<int>(estimates.size()) != K)
    throw InvalidArgument("eval_align: estimate/reference count mismatch");
  if (K < 1 || K > 4) throw InvalidArgument("eval_align: supports 1..4 speakers");

  std::vector<std::vector<double>> score(K, std::vector<double>(K));
  for (int e = 0; e < K; ++e)
    for (int r = 0; r < K; ++r) score[e][r] = metric(estimates[e], references[r]);

  std::vector<int> perm(K);
  std::iota(perm.begin(), perm.end(), 0);
  Alignment best;
  best.mean_score = -1e300;
  do {
    double mean = 0.0;
    for (int r = 0; r < K; ++r) mean += score[perm[r]][r];
    mean /= K;
    if (mean > best.mean_score) {
      best.mean_score = mean;
      best.permutation = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  best.scores.resize(K);
  for (int r = 0; r < K; ++r) best.scores[r] = score[best.permutation[r]][r];
  return best;
}

double median(std::vector<double> values) {
  if (values.empty()) throw InvalidArgument("median: empty input");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace tddan::metrics
