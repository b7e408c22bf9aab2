#include "masstest/dct.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace masstest {

DctBasis::DctBasis(std::size_t length) : length_(length), table_(length * length) {
  if (length == 0) throw std::invalid_argument("DCT length must be positive");
  const double n = static_cast<double>(length);
  for (std::size_t p = 0; p < length; ++p) {
    const double scale = p == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
    for (std::size_t i = 0; i < length; ++i) {
      table_[p * length + i] =
          scale * std::cos(std::numbers::pi * (2.0 * static_cast<double>(i) + 1.0) *
                           static_cast<double>(p) / (2.0 * n));
    }
  }
}

namespace {

void check_block(std::span<const double> a, std::size_t m, std::size_t n) {
  if (m == 0 || n == 0) throw std::invalid_argument("DCT input is empty");
  if (a.size() != m * n) {
    throw std::invalid_argument("DCT input has " + std::to_string(a.size()) + " values, expected " +
                                std::to_string(m * n));
  }
}

}  // namespace

DctCoeffs dct2(std::span<const double> a, std::size_t m, std::size_t n) {
  check_block(a, m, n);
  const DctBasis row_basis(m);
  const DctBasis col_basis(n);

  // Transform along j (columns of each row) first.
  std::vector<double> tmp(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t q = 0; q < n; ++q) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += a[i * n + j] * col_basis(q, j);
      tmp[i * n + q] = s;
    }
  }
  DctCoeffs out{m, n, std::vector<double>(m * n, 0.0)};
  for (std::size_t p = 0; p < m; ++p) {
    for (std::size_t q = 0; q < n; ++q) {
      double s = 0.0;
      for (std::size_t i = 0; i < m; ++i) s += tmp[i * n + q] * row_basis(p, i);
      out.values[p * n + q] = s;
    }
  }
  return out;
}

std::vector<double> idct2(const DctCoeffs& b) {
  check_block(b.values, b.rows, b.cols);
  const std::size_t m = b.rows;
  const std::size_t n = b.cols;
  const DctBasis row_basis(m);
  const DctBasis col_basis(n);

  std::vector<double> tmp(m * n, 0.0);
  for (std::size_t p = 0; p < m; ++p) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t q = 0; q < n; ++q) s += b.values[p * n + q] * col_basis(q, j);
      tmp[p * n + j] = s;
    }
  }
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < m; ++p) s += tmp[p * n + j] * row_basis(p, i);
      out[i * n + j] = s;
    }
  }
  return out;
}

DctCoeffs dct1(std::span<const double> x) {
  if (x.empty()) throw std::invalid_argument("DCT input is empty");
  return dct2(x, x.size(), 1);
}

std::vector<double> zonal_mask(const DctCoeffs& b, const ZonalMask& mask) {
  if (mask.u == 0 || mask.v == 0) throw std::invalid_argument("zonal mask must keep at least one coefficient");
  if (mask.u > b.rows || mask.v > b.cols) {
    throw std::invalid_argument("zonal mask " + std::to_string(mask.u) + "x" + std::to_string(mask.v) +
                                " exceeds coefficient block " + std::to_string(b.rows) + "x" +
                                std::to_string(b.cols));
  }
  std::vector<double> out;
  out.reserve(mask.u * mask.v);
  for (std::size_t p = 0; p < mask.u; ++p) {
    for (std::size_t q = 0; q < mask.v; ++q) out.push_back(b(p, q));
  }
  return out;
}

void dct2_zonal(std::span<const double> a, const DctBasis& row_basis, const DctBasis& col_basis,
                const ZonalMask& mask, std::span<double> out) {
  const std::size_t m = row_basis.length();
  const std::size_t n = col_basis.length();
  check_block(a, m, n);
  if (mask.u == 0 || mask.v == 0 || mask.u > m || mask.v > n) {
    throw std::invalid_argument("zonal mask exceeds coefficient block");
  }
  if (out.size() != mask.u * mask.v) throw std::invalid_argument("output span has the wrong size");

  // Column transform restricted to the first v coefficients, then rows.
  std::vector<double> tmp(m * mask.v, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t q = 0; q < mask.v; ++q) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += a[i * n + j] * col_basis(q, j);
      tmp[i * mask.v + q] = s;
    }
  }
  for (std::size_t p = 0; p < mask.u; ++p) {
    for (std::size_t q = 0; q < mask.v; ++q) {
      double s = 0.0;
      for (std::size_t i = 0; i < m; ++i) s += tmp[i * mask.v + q] * row_basis(p, i);
      out[p * mask.v + q] = s;
    }
  }
}

void dct1_zonal(std::span<const double> x, const DctBasis& basis, std::size_t u,
                std::span<double> out) {
  if (x.size() != basis.length()) throw std::invalid_argument("DCT input length mismatch");
  if (u == 0 || u > basis.length()) throw std::invalid_argument("zonal mask exceeds coefficient block");
  if (out.size() != u) throw std::invalid_argument("output span has the wrong size");
  for (std::size_t p = 0; p < u; ++p) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * basis(p, i);
    out[p] = s;
  }
}

}  // namespace masstest
