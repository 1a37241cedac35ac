#include "tractshape/stats.hpp"

#include <cmath>
#include <limits>

#include "tractshape/error.hpp"

namespace tractshape {

double accuracy_percent(const std::vector<int>& pred,
                        const std::vector<int>& truth) {
  if (pred.size() != truth.size())
    fail(Errc::dimension_mismatch, "label vectors differ in length");
  if (pred.empty()) fail(Errc::invalid_input, "no labels");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i)
    if (pred[i] == truth[i]) ++correct;
  return 100.0 * static_cast<double>(correct) /
         static_cast<double>(pred.size());
}

double mean_absolute_error(const Eigen::VectorXd& pred,
                           const Eigen::VectorXd& truth) {
  if (pred.size() != truth.size())
    fail(Errc::dimension_mismatch, "vectors differ in length");
  if (pred.size() == 0) fail(Errc::invalid_input, "empty vectors");
  return (pred - truth).cwiseAbs().mean();
}

double pearson_r(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  if (x.size() != y.size())
    fail(Errc::dimension_mismatch, "vectors differ in length");
  const Eigen::Index n = x.size();
  if (n < 2) fail(Errc::invalid_input, "need at least 2 samples");
  const Eigen::VectorXd dx = x.array() - x.mean();
  const Eigen::VectorXd dy = y.array() - y.mean();
  const double sxx = dx.squaredNorm();
  const double syy = dy.squaredNorm();
  if (sxx == 0.0 || syy == 0.0)
    fail(Errc::undefined_correlation, "zero variance argument");
  return dx.dot(dy) / std::sqrt(sxx * syy);
}

namespace {

// Continued fraction for the incomplete beta (modified Lentz).
double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 1e-15;
  constexpr double kTiny = 1e-300;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double reg_inc_beta(double x, double a, double b) {
  if (!(a > 0.0) || !(b > 0.0))
    fail(Errc::invalid_input, "beta parameters must be positive");
  if (std::isnan(x) || x < 0.0 || x > 1.0)
    fail(Errc::invalid_input, "x outside [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;

  const double ln_front = std::lgamma(a + b) - std::lgamma(a) -
                          std::lgamma(b) + a * std::log(x) +
                          b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0))
    return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double student_t_two_tailed_p(double t, double df) {
  if (std::isinf(t)) return 0.0;
  if (t == 0.0) return 1.0;
  return reg_inc_beta(df / (df + t * t), df / 2.0, 0.5);
}

double f_upper_tail_p(double f, double df1, double df2) {
  if (std::isinf(f)) return 0.0;
  if (f <= 0.0) return 1.0;
  return reg_inc_beta(df2 / (df2 + df1 * f), df2 / 2.0, df1 / 2.0);
}

TestResult paired_t_test(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size())
    fail(Errc::dimension_mismatch, "paired samples differ in length");
  const Eigen::Index n = a.size();
  if (n < 2) fail(Errc::invalid_input, "need at least 2 pairs");

  const Eigen::VectorXd d = a - b;
  const double mean = d.mean();
  const double ss = (d.array() - mean).square().sum();
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));

  TestResult r;
  r.df1 = static_cast<double>(n - 1);
  if (sd == 0.0) {
    if (mean == 0.0) {
      r.statistic = 0.0;
      r.p = 1.0;
    } else {
      r.statistic = mean > 0 ? std::numeric_limits<double>::infinity()
                             : -std::numeric_limits<double>::infinity();
      r.p = 0.0;
    }
    return r;
  }
  r.statistic = mean / (sd / std::sqrt(static_cast<double>(n)));
  r.p = student_t_two_tailed_p(r.statistic, r.df1);
  return r;
}

TestResult rm_anova(const Eigen::MatrixXd& table) {
  const Eigen::Index n = table.rows();  // folds
  const Eigen::Index k = table.cols();  // methods
  if (n < 2 || k < 2)
    fail(Errc::invalid_input, "need at least 2 folds and 2 methods");
  if (!table.allFinite())
    fail(Errc::incomplete_table, "table contains non-finite entries");

  const double grand = table.mean();
  const Eigen::RowVectorXd method_means = table.colwise().mean();
  const Eigen::VectorXd fold_means = table.rowwise().mean();

  const double ss_method =
      static_cast<double>(n) * (method_means.array() - grand).square().sum();
  const double ss_fold =
      static_cast<double>(k) * (fold_means.array() - grand).square().sum();
  const double ss_total = (table.array() - grand).square().sum();
  const double ss_error = ss_total - ss_method - ss_fold;

  TestResult r;
  r.df1 = static_cast<double>(k - 1);
  r.df2 = static_cast<double>((k - 1) * (n - 1));
  if (ss_error <= 0.0) {
    // Exactly reproducible columns: no within-cell error left.
    if (ss_method == 0.0) {
      r.statistic = 0.0;
      r.p = 1.0;
    } else {
      r.statistic = std::numeric_limits<double>::infinity();
      r.p = 0.0;
    }
    return r;
  }
  r.statistic = (ss_method / r.df1) / (ss_error / r.df2);
  r.p = f_upper_tail_p(r.statistic, r.df1, r.df2);
  return r;
}

std::string significance_marker(double p) {
  if (p < 0.001) return "***";
  if (p < 0.01) return "**";
  if (p < 0.05) return "*";
  return "n.s.";
}

}  // namespace tractshape
