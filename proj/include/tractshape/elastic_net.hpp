#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace tractshape {

// Regression objective, n = sample count, rho = l1_ratio:
//   (1/(2n)) * ||y - b - X w||^2 + alpha * (rho*||w||_1 + (1-rho)/2*||w||^2)
// Fitting standardizes columns internally (population std) and centers y;
// cyclic coordinate descent with soft-threshold updates runs on that scale
// and the solution is mapped back.
struct ElasticNetModel {
  Eigen::VectorXd weights;  // original scale
  double intercept = 0;
  double alpha = 0;
  double l1_ratio = 0.5;
  Eigen::VectorXd column_means;
  Eigen::VectorXd column_scales;  // 1.0 for constant columns (weight is 0)
  bool converged = false;
  int sweeps = 0;
  std::vector<std::string> measures;  // provenance for serialized models
};

inline double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

ElasticNetModel enet_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                         double alpha, double l1_ratio, double tol = 1e-4,
                         int max_iter = 1000,
                         std::vector<double>* objective_trace = nullptr);

Eigen::VectorXd enet_predict(const ElasticNetModel& model,
                             const Eigen::MatrixXd& x);

// The seven-candidate tuning grid, strongest penalty first.
std::vector<double> default_alpha_grid();

// Picks the grid alpha with the lowest mean inner-CV MSE on (x, y); exact
// ties resolve to the larger alpha.
double enet_tune_alpha(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                       const std::vector<double>& grid, int inner_folds,
                       std::uint64_t seed, double l1_ratio = 0.5,
                       double tol = 1e-4, int max_iter = 1000);

std::string enet_to_json(const ElasticNetModel& model);
ElasticNetModel enet_from_json(const std::string& text);

}  // namespace tractshape
