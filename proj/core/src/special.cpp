#include "affex/special.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "affex/error.hpp"

namespace affex::special {
namespace {

double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIterations = 10000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIterations; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) return h;
  }
  return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw DomainError("incomplete beta needs a, b > 0");
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("incomplete beta needs x in [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return std::exp(log_front) * beta_continued_fraction(a, b, x) / a;
  }
  return 1.0 - std::exp(log_front) * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double f_sf(double f, double df1, double df2) {
  if (!(df1 > 0.0 && df2 > 0.0)) throw DomainError("F distribution needs positive df");
  if (std::isnan(f)) throw DomainError("F statistic is NaN");
  if (f <= 0.0) return 1.0;
  if (std::isinf(f)) return 0.0;
  return incomplete_beta(0.5 * df2, 0.5 * df1, df2 / (df2 + df1 * f));
}

double t_two_sided(double t, double df) {
  if (!(df > 0.0)) throw DomainError("t distribution needs positive df");
  if (std::isinf(t)) return 0.0;
  return incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

namespace {

// Probability that the range of `cc` standard normals is below w, raised to
// the power rr (the number of independent ranges).
double range_probability(double w, double rr, double cc) {
  constexpr int kLegendre = 12;
  constexpr int kHalf = 6;
  constexpr double kC1 = -30.0;
  constexpr double kC3 = 60.0;
  constexpr double kBound = 8.0;
  constexpr double kWide = 3.0;
  static constexpr double xleg[kHalf] = {
      0.981560634246719250690549090149, 0.904117256370474856678465866119,
      0.769902674194304687036893833213, 0.587317954286617447296702418941,
      0.367831498998180193752691536644, 0.125233408511468915472441369464};
  static constexpr double aleg[kHalf] = {
      0.047175336386511827194615961485, 0.106939325995318430960254718194,
      0.160078328543346226334652529543, 0.203167426723065921749064455810,
      0.233492536538354808760849898925, 0.249147045813402785000562436043};

  const double qsqz = w * 0.5;
  if (qsqz >= kBound) return 1.0;

  double pr_w = 2.0 * normal_cdf(qsqz) - 1.0;
  pr_w = pr_w >= 1.0 ? 1.0 : std::pow(pr_w, cc);

  const int increments = w > kWide ? 2 : 3;
  double blb = qsqz;
  const double binc = (kBound - qsqz) / increments;
  double bub = blb + binc;
  double einsum = 0.0;
  const double cc1 = cc - 1.0;

  for (int wi = 1; wi <= increments; ++wi) {
    double elsum = 0.0;
    const double a = 0.5 * (bub + blb);
    const double b = 0.5 * (bub - blb);
    for (int jj = 1; jj <= kLegendre; ++jj) {
      int j;
      double xx;
      if (kHalf < jj) {
        j = kLegendre - jj + 1;
        xx = xleg[j - 1];
      } else {
        j = jj;
        xx = -xleg[j - 1];
      }
      const double ac = a + b * xx;
      const double qexpo = ac * ac;
      if (qexpo > kC3) break;
      const double pplus = 2.0 * normal_cdf(ac);
      const double pminus = 2.0 * normal_cdf(ac - w);
      double rinsum = 0.5 * pplus - 0.5 * pminus;
      if (rinsum >= std::exp(kC1 / cc1)) {
        rinsum = aleg[j - 1] * std::exp(-0.5 * qexpo) * std::pow(rinsum, cc1);
        elsum += rinsum;
      }
    }
    elsum *= 2.0 * b * cc / std::sqrt(2.0 * std::numbers::pi);
    einsum += elsum;
    blb = bub;
    bub += binc;
  }

  pr_w += einsum;
  if (pr_w <= std::exp(kC1 / rr)) return 0.0;
  pr_w = std::pow(pr_w, rr);
  return std::min(pr_w, 1.0);
}

}  // namespace

double studentized_range_cdf(double q, double groups, double df) {
  constexpr int kLegendre = 16;
  constexpr int kHalf = 8;
  constexpr double kEps1 = -30.0;
  constexpr double kEps2 = 1.0e-14;
  static constexpr double xlegq[kHalf] = {
      0.989400934991649932596154173450, 0.944575023073232576077988415535,
      0.865631202387831743880467897712, 0.755404408355003033895101194847,
      0.617876244402643748446671764049, 0.458016777657227386342419442984,
      0.281603550779258913230460501460, 0.950125098376374401853193354250e-1};
  static constexpr double alegq[kHalf] = {
      0.271524594117540948517805724560e-1, 0.622535239386478928628438369944e-1,
      0.951585116824927848099251076022e-1, 0.124628971255533872052476282192,
      0.149595988816576732081501730547,    0.169156519395002538189312079030,
      0.182603415044923588866763667969,    0.189450610455068496285396723208};

  if (!(groups >= 2.0 && df >= 2.0)) throw DomainError("studentized range needs groups >= 2, df >= 2");
  if (q <= 0.0) return 0.0;
  const double rr = 1.0;
  if (df > 25000.0) return range_probability(q, rr, groups);

  const double f2 = df * 0.5;
  double f2lf = f2 * std::log(df) - df * std::numbers::ln2 - std::lgamma(f2);
  const double f21 = f2 - 1.0;
  const double ff4 = df * 0.25;
  const double ulen = df <= 100.0 ? 1.0 : df <= 800.0 ? 0.5 : df <= 5000.0 ? 0.25 : 0.125;
  f2lf += std::log(ulen);

  double ans = 0.0;
  for (int i = 1; i <= 50; ++i) {
    double otsum = 0.0;
    const double twa1 = (2 * i - 1) * ulen;
    for (int jj = 1; jj <= kLegendre; ++jj) {
      int j;
      double t1;
      double node;
      if (kHalf < jj) {
        j = jj - kHalf - 1;
        node = twa1 + xlegq[j] * ulen;
        t1 = f2lf + f21 * std::log(node) - node * ff4;
      } else {
        j = jj - 1;
        node = twa1 - xlegq[j] * ulen;
        t1 = f2lf + f21 * std::log(node) - node * ff4;
      }
      if (t1 >= kEps1) {
        const double qsqz = q * std::sqrt(node * 0.5);
        otsum += range_probability(qsqz, rr, groups) * alegq[j] * std::exp(t1);
      }
    }
    if (i * ulen >= 1.0 && otsum <= kEps2) break;
    ans += otsum;
  }
  return std::min(ans, 1.0);
}

}  // namespace affex::special
