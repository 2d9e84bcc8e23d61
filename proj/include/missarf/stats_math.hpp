#pragma once

#include <cmath>
#include <cstdint>

// Scalar distribution functions used across the library: normal pdf/cdf and
// quantile, regularized incomplete gamma/beta, Student-t, chi-square, and the
// quantile functions needed by the copula simulator. Self-contained; accuracy
// targets are ~1e-9 or better for the quantiles (rational approximation plus
// one Halley refinement for the normal case).

namespace missarf::stats {

inline constexpr double kSqrt2 = 1.4142135623730951;
inline constexpr double kSqrt2Pi = 2.5066282746310002;
inline constexpr double kLogSqrt2Pi = 0.9189385332046727;

inline double normal_pdf(double x) { return std::exp(-0.5 * x * x) / kSqrt2Pi; }
inline double normal_log_pdf(double x) { return -0.5 * x * x - kLogSqrt2Pi; }

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }
// Upper tail 1 - Phi(x), accurate for large positive x.
inline double normal_cdf_upper(double x) { return 0.5 * std::erfc(x / kSqrt2); }

// Inverse standard normal CDF for p in (0, 1).
double normal_quantile(double p);

// Regularized lower incomplete gamma P(a, x), a > 0, x >= 0.
double gamma_p(double a, double x);
// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
double gamma_q(double a, double x);

// Regularized incomplete beta I_x(a, b), x in [0, 1], a, b > 0.
double beta_inc(double a, double b, double x);

double chi_square_cdf(double x, double df);

double student_t_cdf(double t, double df);
// Two-sided upper quantile: returns t such that P(T <= t) = p, p in (0, 1).
double student_t_quantile(double p, double df);

// Quantile of Gamma(shape, rate). Newton on P(shape, rate*x) with a
// bisection safeguard.
double gamma_quantile(double u, double shape, double rate);

// Quantile of Poisson(lambda) by walking the CDF.
std::int64_t poisson_quantile(double u, double lambda);

// Quantile of Bernoulli(prob).
inline int bernoulli_quantile(double u, double prob) { return u <= 1.0 - prob ? 0 : 1; }

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace missarf::stats
