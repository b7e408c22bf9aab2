#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace masstest {

// Orthonormal DCT-II coefficients of an m x n block (n == 1 for the 1-D
// transform), row-major with p (row frequency) outer and q inner.
struct DctCoeffs {
  std::size_t rows{0};
  std::size_t cols{0};
  std::vector<double> values;

  double operator()(std::size_t p, std::size_t q) const { return values[p * cols + q]; }
};

// Low-index block kept by zonal masking: u rows by v columns (v = 1 for 1-D).
struct ZonalMask {
  std::size_t u{5};
  std::size_t v{5};
};

// B_pq = a_p a_q sum_ij A_ij cos(pi (2i+1) p / 2m) cos(pi (2j+1) q / 2n) with
// a_0 = 1/sqrt(m), a_p = sqrt(2/m) otherwise. Evaluated separably (rows, then
// columns). `a` is row-major m x n; throws std::invalid_argument when empty or
// when the size does not match.
DctCoeffs dct2(std::span<const double> a, std::size_t m, std::size_t n);
std::vector<double> idct2(const DctCoeffs& b);
DctCoeffs dct1(std::span<const double> x);

// Unrolls the u x v low-index block row-major: (0,0), (0,1), ..., (1,0), ...
// Throws std::invalid_argument when the mask is empty or exceeds the block.
std::vector<double> zonal_mask(const DctCoeffs& b, const ZonalMask& mask);

// Precomputed orthonormal DCT-II basis for repeated transforms of the same
// length; used on the hot paths of the pipeline.
class DctBasis {
 public:
  explicit DctBasis(std::size_t length);
  std::size_t length() const { return length_; }
  // basis(p, i) = a_p cos(pi (2i+1) p / 2N)
  double operator()(std::size_t p, std::size_t i) const { return table_[p * length_ + i]; }

 private:
  std::size_t length_;
  std::vector<double> table_;
};

// Zonal features straight from the data without forming the full coefficient
// matrix: only the first u x v coefficients are computed.
void dct2_zonal(std::span<const double> a, const DctBasis& row_basis, const DctBasis& col_basis,
                const ZonalMask& mask, std::span<double> out);
void dct1_zonal(std::span<const double> x, const DctBasis& basis, std::size_t u,
                std::span<double> out);

}  // namespace masstest
