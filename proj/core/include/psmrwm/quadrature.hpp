#pragma once

#include <functional>
#include <span>

namespace psmrwm {

struct QuadResult {
  double value = 0.0;
  double error = 0.0;  // absolute error estimate
};

struct SimpsonOptions {
  double abs_tol = 1e-10;
  int initial_segments = 32;
  int max_depth = 40;
};

/// Adaptive Simpson with Richardson correction on [lo, hi]. The interval is
/// first cut at every breakpoint inside it and then into
/// `initial_segments` equal pieces, so narrow peaks are not stepped over.
/// Throws QuadratureError if a segment hits `max_depth` without meeting its
/// share of the tolerance.
QuadResult adaptive_simpson(const std::function<double(double)>& fn, double lo, double hi,
                            std::span<const double> breakpoints = {},
                            const SimpsonOptions& opts = {});

/// Fixed 7/15-point Gauss-Kronrod pair on [lo, hi].
struct GaussKronrod15 {
  static constexpr int kNodes = 15;
  // Abscissae on [-1, 1], in ascending order; odd indices are the Gauss nodes.
  static const double kAbscissae[kNodes];
  static const double kKronrodWeights[kNodes];
  static const double kGaussWeights[kNodes];  // zero at the Kronrod-only nodes
};

}  // namespace psmrwm
