#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace qsr::stats {

// Order-stable pairwise summation; used for every ensemble reduction so the
// result does not depend on thread scheduling.
double pairwise_sum(std::span<const double> values);

struct MeanSE {
  double mean = 0.0;
  double sd = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};

MeanSE mean_se(std::span<const double> values);

double sample_variance(std::span<const double> values);

// 99.9% quantile of the chi-square distribution for small dof.
double chi_square_quantile_999(std::size_t dof);

// Eigenvalues of a small Hermitian matrix (row-major, n x n), ascending.
// Classic cyclic Jacobi; intended for level-count sized matrices.
std::vector<double> hermitian_eigenvalues(std::vector<std::complex<double>> matrix,
                                          std::size_t n);

// -sum lambda ln lambda over the eigenvalues of a positive semidefinite
// Hermitian matrix with unit trace; tiny negative eigenvalues from roundoff
// are clipped to zero.
double von_neumann_entropy(std::vector<std::complex<double>> matrix, std::size_t n);

}  // namespace qsr::stats
