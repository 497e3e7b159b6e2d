#pragma once

#include <complex>
#include <stdexcept>
#include <vector>

namespace caustic {

/// Thomas algorithm for a complex tridiagonal system.
/// lower[0] and upper[m-1] are unused. Overwrites nothing; returns x.
inline std::vector<std::complex<double>> solve_tridiag(
    const std::vector<std::complex<double>>& lower,
    const std::vector<std::complex<double>>& diag,
    const std::vector<std::complex<double>>& upper,
    const std::vector<std::complex<double>>& rhs) {
  const std::size_t m = diag.size();
  if (lower.size() != m || upper.size() != m || rhs.size() != m)
    throw std::invalid_argument("solve_tridiag: size mismatch");
  std::vector<std::complex<double>> c(m), d(m);
  std::complex<double> piv = diag[0];
  if (std::abs(piv) == 0.0) throw std::runtime_error("solve_tridiag: zero pivot");
  c[0] = upper[0] / piv;
  d[0] = rhs[0] / piv;
  for (std::size_t j = 1; j < m; ++j) {
    piv = diag[j] - lower[j] * c[j - 1];
    if (std::abs(piv) == 0.0) throw std::runtime_error("solve_tridiag: zero pivot");
    c[j] = upper[j] / piv;
    d[j] = (rhs[j] - lower[j] * d[j - 1]) / piv;
  }
  for (std::size_t j = m - 1; j-- > 0;) d[j] -= c[j] * d[j + 1];
  return d;
}

} // namespace caustic
