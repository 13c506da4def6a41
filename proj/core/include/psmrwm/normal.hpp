#pragma once

namespace psmrwm {

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

/// Standard normal density.
double norm_pdf(double z);
double norm_log_pdf(double z);

/// Standard normal CDF via erfc, accurate in relative terms in both tails.
double norm_cdf(double z);

/// log Phi(z). Uses erfc down to z = -30 and a Mills-ratio series beyond,
/// so it stays finite for arguments where Phi itself underflows.
double norm_log_cdf(double z);

/// log(e^a + e^b) without overflow; either argument may be -inf.
double log_add_exp(double a, double b);

}  // namespace psmrwm
