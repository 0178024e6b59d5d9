#pragma once
#include "stlctl/tape.hpp"
#include "stlctl/tensor.hpp"

namespace stlctl {

// Componentwise affine map of [lo, hi] onto [-1, 1]. Degenerate
// components (lo == hi) map to 0.
struct AffineNorm {
  Vec lo, hi;

  AffineNorm() = default;
  AffineNorm(Vec lo_, Vec hi_) : lo(std::move(lo_)), hi(std::move(hi_)) {
    if (lo.size() != hi.size()) throw Error("normalization bounds must share one dimension");
  }

  std::size_t dim() const { return lo.size(); }

  Vec apply(const Vec& x) const {
    Vec out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double range = hi[i] - lo[i];
      out[i] = range == 0.0 ? 0.0 : (2.0 * (x[i] - lo[i]) / range - 1.0);
    }
    return out;
  }

  int apply_tape(ad::Tape& t, int x) const {
    Vec scale(lo.size()), shift(lo.size());
    for (std::size_t i = 0; i < lo.size(); ++i) {
      const double range = hi[i] - lo[i];
      scale[i] = range == 0.0 ? 0.0 : 2.0 / range;
      shift[i] = range == 0.0 ? 0.0 : -(2.0 * lo[i] / range + 1.0);
    }
    int scaled = t.mul(x, ad::const_vector(t, scale));
    return t.add(scaled, ad::const_vector(t, shift));
  }
};

}  // namespace stlctl
