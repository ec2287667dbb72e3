#pragma once

// Vectorizable helpers for the inverse-CDF grid. Internal to the library.

#include <cstdint>
#include <cstring>
#include <vector>

namespace expfam::detail {

/// exp(x) for x in [-700, 0] with relative error below 1e-15. Written so the
/// compiler can vectorize loops over it
/// when built with -fno-trapping-math.
inline double exp_nonpositive(double x) {
  constexpr double kLog2e = 1.4426950408889634;
  constexpr double kLn2Hi = 0.6931471803691238;
  constexpr double kLn2Lo = 1.9082149292705877e-10;
  constexpr double kShifter = 0x1.8p52;
  x = x < -700.0 ? -700.0 : x;
  const double shifted = x * kLog2e + kShifter;
  const double k = shifted - kShifter;
  const double r = (x - k * kLn2Hi) - k * kLn2Lo;  // |r| <= ln2/2
  double p = 1.0 / 6227020800.0;                   // 1/13!
  p = p * r + 1.0 / 479001600.0;
  p = p * r + 1.0 / 39916800.0;
  p = p * r + 1.0 / 3628800.0;
  p = p * r + 1.0 / 362880.0;
  p = p * r + 1.0 / 40320.0;
  p = p * r + 1.0 / 5040.0;
  p = p * r + 1.0 / 720.0;
  p = p * r + 1.0 / 120.0;
  p = p * r + 1.0 / 24.0;
  p = p * r + 1.0 / 6.0;
  p = p * r + 0.5;
  p = p * r + 1.0;
  p = p * r + 1.0;
  // Low mantissa bits of `shifted` hold k as a two's-complement integer.
  std::uint64_t bits;
  std::memcpy(&bits, &shifted, sizeof bits);
  bits = (bits + 1023u) << 52;
  double scale;
  std::memcpy(&scale, &bits, sizeof scale);
  return p * scale;
}

template <int D>
void eval_poly_grid_fixed(const double* c, double lo, double step, int count, double* out) {
  for (int g = 0; g < count; ++g) {
    const double t = lo + g * step;
    double v = c[D];
    for (int j = D - 1; j >= 0; --j) v = v * t + c[j];
    out[g] = v;
  }
}

/// out[g] = sum_j c[j] (lo + g step)^j for g < count.
inline void eval_poly_grid(const std::vector<double>& c, double lo, double step, int count, double* out) {
  switch (c.size()) {
    case 1: eval_poly_grid_fixed<0>(c.data(), lo, step, count, out); return;
    case 2: eval_poly_grid_fixed<1>(c.data(), lo, step, count, out); return;
    case 3: eval_poly_grid_fixed<2>(c.data(), lo, step, count, out); return;
    case 4: eval_poly_grid_fixed<3>(c.data(), lo, step, count, out); return;
    case 5: eval_poly_grid_fixed<4>(c.data(), lo, step, count, out); return;
    case 6: eval_poly_grid_fixed<5>(c.data(), lo, step, count, out); return;
    case 7: eval_poly_grid_fixed<6>(c.data(), lo, step, count, out); return;
    case 8: eval_poly_grid_fixed<7>(c.data(), lo, step, count, out); return;
    case 9: eval_poly_grid_fixed<8>(c.data(), lo, step, count, out); return;
    default:
      for (int g = 0; g < count; ++g) {
        const double t = lo + g * step;
        double v = 0.0;
        for (std::size_t j = c.size(); j-- > 0;) v = v * t + c[j];
        out[g] = v;
      }
  }
}

}  // namespace expfam::detail
