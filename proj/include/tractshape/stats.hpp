#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace tractshape {

struct TestResult {
  double statistic = 0;  // t or F
  double df1 = 0;        // t: df; F: numerator df
  double df2 = 0;        // F: denominator df (unused for t)
  double p = 1;          // two-tailed (t) or upper-tail (F)
};

// Percent correct, 0..100.
double accuracy_percent(const std::vector<int>& pred,
                        const std::vector<int>& truth);

double mean_absolute_error(const Eigen::VectorXd& pred,
                           const Eigen::VectorXd& truth);

// Sample Pearson correlation; both arguments need nonzero variance.
double pearson_r(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

// Regularized incomplete beta I_x(a, b) via the modified-Lentz continued
// fraction; absolute error below 1e-10 on [0, 1].
double reg_inc_beta(double x, double a, double b);

double student_t_two_tailed_p(double t, double df);
double f_upper_tail_p(double f, double df1, double df2);

// Two-tailed paired t-test on equally long samples; the all-equal case
// reports t = 0, p = 1.
TestResult paired_t_test(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// One-way repeated-measures ANOVA. Rows of `table` are folds (the repeated
// blocking unit), columns are methods. Identical methods report F = 0, p = 1.
TestResult rm_anova(const Eigen::MatrixXd& table);

// "n.s.", "*", "**" or "***" at the 0.05 / 0.01 / 0.001 thresholds.
std::string significance_marker(double p);

}  // namespace tractshape
