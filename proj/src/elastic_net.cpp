#include "tractshape/elastic_net.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "tractshape/error.hpp"
#include "tractshape/rng.hpp"

namespace tractshape {

namespace {

double standardized_objective(const Eigen::MatrixXd& xs,
                              const Eigen::VectorXd& yc,
                              const Eigen::VectorXd& w, double alpha,
                              double rho) {
  const double n = static_cast<double>(xs.rows());
  const double fit = (yc - xs * w).squaredNorm() / (2.0 * n);
  const double penalty =
      alpha * (rho * w.lpNorm<1>() + 0.5 * (1.0 - rho) * w.squaredNorm());
  return fit + penalty;
}

}  // namespace

ElasticNetModel enet_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                         double alpha, double l1_ratio, double tol,
                         int max_iter,
                         std::vector<double>* objective_trace) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (n < 2) fail(Errc::invalid_data, "need at least 2 samples");
  if (y.size() != n)
    fail(Errc::dimension_mismatch, "target length differs from row count");
  if (!x.allFinite() || !y.allFinite())
    fail(Errc::invalid_data, "non-finite value in inputs");
  if (alpha < 0 || l1_ratio < 0 || l1_ratio > 1)
    fail(Errc::invalid_input, "alpha must be >= 0 and l1_ratio in [0, 1]");

  ElasticNetModel model;
  model.alpha = alpha;
  model.l1_ratio = l1_ratio;
  model.column_means = x.colwise().mean();
  model.column_scales.resize(p);

  Eigen::MatrixXd xs(n, p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const Eigen::VectorXd centered = x.col(j).array() - model.column_means[j];
    const double scale =
        std::sqrt(centered.squaredNorm() / static_cast<double>(n));
    model.column_scales[j] = scale > 0 ? scale : 1.0;  // constant column
    xs.col(j) = centered / model.column_scales[j];
  }
  const double y_mean = y.mean();
  const Eigen::VectorXd yc = y.array() - y_mean;

  Eigen::VectorXd w = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd residual = yc;  // yc - xs*w, maintained incrementally
  const double threshold = alpha * l1_ratio;
  const double denom = 1.0 + alpha * (1.0 - l1_ratio);
  const double inv_n = 1.0 / static_cast<double>(n);

  model.converged = false;
  if (objective_trace)
    objective_trace->assign(
        1, standardized_objective(xs, yc, w, alpha, l1_ratio));
  for (int sweep = 0; sweep < max_iter; ++sweep) {
    double max_delta = 0;
    for (Eigen::Index j = 0; j < p; ++j) {
      const double w_old = w[j];
      // partial residual correlation with column j
      const double z = inv_n * (xs.col(j).dot(residual)) + w_old;
      const double w_new = soft_threshold(z, threshold) / denom;
      if (w_new != w_old) {
        residual.noalias() += xs.col(j) * (w_old - w_new);
        w[j] = w_new;
      }
      max_delta = std::max(max_delta, std::fabs(w_new - w_old));
    }
    model.sweeps = sweep + 1;
    if (objective_trace)
      objective_trace->push_back(
          standardized_objective(xs, yc, w, alpha, l1_ratio));
    if (max_delta < tol) {
      model.converged = true;
      break;
    }
  }

  model.weights = (w.array() / model.column_scales.array()).matrix();
  model.intercept = y_mean - model.weights.dot(model.column_means);
  return model;
}

Eigen::VectorXd enet_predict(const ElasticNetModel& model,
                             const Eigen::MatrixXd& x) {
  if (x.cols() != model.weights.size())
    fail(Errc::dimension_mismatch,
         "feature count differs from the fitted model");
  return (x * model.weights).array() + model.intercept;
}

std::vector<double> default_alpha_grid() {
  return {1.0, 0.5, 0.1, 0.05, 0.01, 0.005, 0.001};
}

double enet_tune_alpha(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                       const std::vector<double>& grid, int inner_folds,
                       std::uint64_t seed, double l1_ratio, double tol,
                       int max_iter) {
  if (grid.empty()) fail(Errc::invalid_input, "empty alpha grid");
  const Eigen::Index n = x.rows();
  if (inner_folds < 2 || n < inner_folds)
    fail(Errc::invalid_input, "need at least `inner_folds` samples");

  // Seeded shuffle then round-robin, one assignment shared by all alphas.
  std::vector<Eigen::Index> order(n);
  for (Eigen::Index i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<int> fold_of(n);
  for (Eigen::Index i = 0; i < n; ++i)
    fold_of[order[i]] = static_cast<int>(i % inner_folds);

  std::vector<double> sorted = grid;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());

  double best_alpha = sorted.front();
  double best_mse = std::numeric_limits<double>::infinity();
  for (double alpha : sorted) {
    double sq_sum = 0;
    Eigen::Index count = 0;
    for (int f = 0; f < inner_folds; ++f) {
      std::vector<Eigen::Index> train, test;
      for (Eigen::Index i = 0; i < n; ++i)
        (fold_of[i] == f ? test : train).push_back(i);
      Eigen::MatrixXd x_train(train.size(), x.cols());
      Eigen::VectorXd y_train(train.size());
      for (std::size_t i = 0; i < train.size(); ++i) {
        x_train.row(static_cast<Eigen::Index>(i)) = x.row(train[i]);
        y_train[static_cast<Eigen::Index>(i)] = y[train[i]];
      }
      const ElasticNetModel model =
          enet_fit(x_train, y_train, alpha, l1_ratio, tol, max_iter);
      for (Eigen::Index i : test) {
        const double pred =
            model.intercept + model.weights.dot(x.row(i).transpose());
        sq_sum += (pred - y[i]) * (pred - y[i]);
        ++count;
      }
    }
    const double mse = sq_sum / static_cast<double>(count);
    if (mse < best_mse) {  // ties keep the earlier (larger) alpha
      best_mse = mse;
      best_alpha = alpha;
    }
  }
  return best_alpha;
}

std::string enet_to_json(const ElasticNetModel& model) {
  nlohmann::json j;
  j["kind"] = "elastic_net";
  j["measures"] = model.measures;
  j["weights"] = std::vector<double>(
      model.weights.data(), model.weights.data() + model.weights.size());
  j["intercept"] = model.intercept;
  j["alpha"] = model.alpha;
  j["l1_ratio"] = model.l1_ratio;
  j["column_means"] = std::vector<double>(
      model.column_means.data(),
      model.column_means.data() + model.column_means.size());
  j["column_scales"] = std::vector<double>(
      model.column_scales.data(),
      model.column_scales.data() + model.column_scales.size());
  j["converged"] = model.converged;
  j["sweeps"] = model.sweeps;
  return j.dump(2);
}

ElasticNetModel enet_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::format_error, std::string("bad model JSON: ") + e.what());
  }
  if (!j.is_object() || j.value("kind", "") != "elastic_net")
    fail(Errc::format_error, "not an elastic_net model file");
  ElasticNetModel m;
  const auto to_vec = [](const nlohmann::json& arr) {
    Eigen::VectorXd v(arr.size());
    for (std::size_t i = 0; i < arr.size(); ++i)
      v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
    return v;
  };
  m.weights = to_vec(j.at("weights"));
  m.intercept = j.at("intercept").get<double>();
  m.alpha = j.at("alpha").get<double>();
  m.l1_ratio = j.at("l1_ratio").get<double>();
  m.column_means = to_vec(j.at("column_means"));
  m.column_scales = to_vec(j.at("column_scales"));
  m.converged = j.at("converged").get<bool>();
  m.sweeps = j.at("sweeps").get<int>();
  m.measures = j.value("measures", std::vector<std::string>{});
  return m;
}

}  // namespace tractshape
