#pragma once

namespace affex::special {

// Regularized incomplete beta I_x(a, b), continued-fraction (modified Lentz)
// evaluation with the usual symmetry switch.
double incomplete_beta(double a, double b, double x);

// Upper tail of the F(df1, df2) distribution.
double f_sf(double f, double df1, double df2);

// Two-sided tail P(|T| >= |t|) of Student's t with `df` degrees of freedom
// (df may be fractional, as in Welch's test).
double t_two_sided(double t, double df);

// Standard normal CDF.
double normal_cdf(double x);

// CDF of the studentized range for `groups` means and `df` error degrees of
// freedom (Copenhaver & Holland quadrature, one range).
double studentized_range_cdf(double q, double groups, double df);

}  // namespace affex::special
