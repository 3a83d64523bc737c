#pragma once

// Distribution functions needed by the tests and models. Accuracy target is
// 1e-8 relative over the ranges exercised here.

namespace tracelens::special {

double normal_cdf(double x);
// Upper tail 1 - Phi(x), accurate for large x.
double normal_sf(double x);
// Inverse of normal_cdf on (0, 1).
double normal_quantile(double p);

// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);

// P(|T| >= |t|) for Student's t with `df` degrees of freedom.
double student_t_two_sided(double t, double df);
// P(F >= f) for the F distribution with (d1, d2) degrees of freedom.
double f_sf(double f, double d1, double d2);

} // namespace tracelens::special
