#include "qsr/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qsr::stats {

double pairwise_sum(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n == 0) return 0.0;
  if (n <= 8) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

MeanSE mean_se(std::span<const double> values) {
  MeanSE out;
  out.n = values.size();
  if (out.n == 0) return out;
  out.mean = pairwise_sum(values) / static_cast<double>(out.n);
  if (out.n < 2) return out;
  std::vector<double> sq(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double d = values[i] - out.mean;
    sq[i] = d * d;
  }
  const double var = pairwise_sum(sq) / static_cast<double>(out.n - 1);
  out.sd = std::sqrt(var);
  out.se = out.sd / std::sqrt(static_cast<double>(out.n));
  return out;
}

double sample_variance(std::span<const double> values) {
  const MeanSE m = mean_se(values);
  return m.sd * m.sd;
}

double chi_square_quantile_999(std::size_t dof) {
  // Standard table values, dof 1..32.
  static constexpr double kTable[] = {
      10.828, 13.816, 16.266, 18.467, 20.515, 22.458, 24.322, 26.124,
      27.877, 29.588, 31.264, 32.909, 34.528, 36.123, 37.697, 39.252,
      40.790, 42.312, 43.820, 45.315, 46.797, 48.268, 49.728, 51.179,
      52.620, 54.052, 55.476, 56.892, 58.301, 59.703, 61.098, 62.487};
  if (dof == 0) return 0.0;
  if (dof <= 32) return kTable[dof - 1];
  // Wilson-Hilferty for larger dof.
  const double k = static_cast<double>(dof);
  const double z = 3.0902;  // 99.9% normal quantile
  const double c = 1.0 - 2.0 / (9.0 * k) + z * std::sqrt(2.0 / (9.0 * k));
  return k * c * c * c;
}

std::vector<double> hermitian_eigenvalues(std::vector<std::complex<double>> a,
                                          std::size_t n) {
  if (a.size() != n * n) {
    throw std::invalid_argument("hermitian_eigenvalues: matrix size mismatch");
  }
  using C = std::complex<double>;
  auto at = [&](std::size_t r, std::size_t c) -> C& { return a[r * n + c]; };

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += std::norm(at(p, q));
    if (off < 1e-30) break;

    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const C apq = at(p, q);
        const double abs_apq = std::abs(apq);
        if (abs_apq < 1e-300) continue;
        const double app = at(p, p).real();
        const double aqq = at(q, q).real();
        // Complex Jacobi rotation zeroing a_pq.
        const C phase = apq / abs_apq;
        const double tau = (aqq - app) / (2.0 * abs_apq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        const C s_phase = s * phase;

        for (std::size_t k = 0; k < n; ++k) {
          const C akp = at(k, p);
          const C akq = at(k, q);
          at(k, p) = c * akp - std::conj(s_phase) * akq;
          at(k, q) = s_phase * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const C apk = at(p, k);
          const C aqk = at(q, k);
          at(p, k) = c * apk - s_phase * aqk;
          at(q, k) = std::conj(s_phase) * apk + c * aqk;
        }
      }
    }
  }

  std::vector<double> eig(n);
  for (std::size_t i = 0; i < n; ++i) eig[i] = at(i, i).real();
  std::sort(eig.begin(), eig.end());
  return eig;
}

double von_neumann_entropy(std::vector<std::complex<double>> matrix, std::size_t n) {
  const std::vector<double> eig = hermitian_eigenvalues(std::move(matrix), n);
  double s = 0.0;
  for (double lambda : eig) {
    if (lambda > 1e-15) s -= lambda * std::log(lambda);
  }
  return s;
}

}  // namespace qsr::stats
