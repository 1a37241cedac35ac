#include "tractshape/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tractshape/error.hpp"
#include "tractshape/io.hpp"
#include "tractshape/normalize.hpp"
#include "tractshape/parallel.hpp"
#include "tractshape/rng.hpp"

namespace tractshape {

namespace {

std::string join(const std::vector<std::string>& parts,
                 const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

bool has_normalized_variant(MeasureKind m) {
  return !is_normalized(m) && m != MeasureKind::FA && m != MeasureKind::MD;
}

FeatureBatch batch_from_rows(const Eigen::MatrixXd& x) {
  FeatureBatch b;
  b.batch = static_cast<int>(x.rows());
  b.length = static_cast<int>(x.cols());
  b.values.resize(1, x.rows() * x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    b.values.block(0, i * x.cols(), 1, x.cols()) = x.row(i);
  return b;
}

double sample_sd(const std::vector<double>& values, double mean) {
  if (values.size() < 2) return 0.0;
  double acc = 0;
  for (double v : values) acc += (v - mean) * (v - mean);
  return std::sqrt(acc / static_cast<double>(values.size() - 1));
}

MetricSummary summarize(const PredictionSet& set, const TargetVector& targets,
                        const std::string& label) {
  if (set.subject_ids != targets.subject_ids)
    fail(Errc::fold_mismatch, "prediction and target subjects differ");
  MetricSummary out;
  out.label = label;
  const int k = set.folds.k;
  for (int f = 0; f < k; ++f) {
    std::vector<int> idx;
    for (std::size_t i = 0; i < set.subject_ids.size(); ++i)
      if (set.predicted_by_fold[i] == f) idx.push_back(static_cast<int>(i));
    if (idx.empty())
      fail(Errc::fold_mismatch, "fold " + std::to_string(f) + " is empty");
    double value = 0;
    if (set.task.metric == MetricKind::accuracy) {
      std::vector<int> pred, truth;
      for (int i : idx) {
        // argmax with first-index tie break
        int best = 0;
        for (Eigen::Index c = 1; c < set.values.cols(); ++c)
          if (set.values(i, c) > set.values(i, best))
            best = static_cast<int>(c);
        pred.push_back(best);
        truth.push_back(static_cast<int>(targets.values[i]));
      }
      value = accuracy_percent(pred, truth);
    } else {
      Eigen::VectorXd pred(idx.size()), truth(idx.size());
      for (std::size_t j = 0; j < idx.size(); ++j) {
        pred[static_cast<Eigen::Index>(j)] = set.values(idx[j], 0);
        truth[static_cast<Eigen::Index>(j)] = targets.values[idx[j]];
      }
      if (set.task.metric == MetricKind::mae) {
        value = mean_absolute_error(pred, truth);
      } else if ((pred.array() - pred[0]).abs().maxCoeff() == 0.0) {
        // A fully regularized model predicts one value for the whole fold.
        // Such a predictor has no correlation skill, so score it 0 instead
        // of propagating the zero-variance error from pearson_r.
        value = 0.0;
      } else {
        value = pearson_r(pred, truth);
      }
    }
    out.per_fold.push_back(value);
  }
  double sum = 0;
  for (double v : out.per_fold) sum += v;
  out.mean = sum / static_cast<double>(out.per_fold.size());
  out.sd = sample_sd(out.per_fold, out.mean);
  return out;
}

nlohmann::json summary_to_json(const MetricSummary& s) {
  return {{"label", s.label},
          {"per_fold", s.per_fold},
          {"mean", s.mean},
          {"sd", s.sd}};
}

MetricSummary summary_from_json(const nlohmann::json& j) {
  MetricSummary s;
  s.label = j.at("label").get<std::string>();
  s.per_fold = j.at("per_fold").get<std::vector<double>>();
  s.mean = j.at("mean").get<double>();
  s.sd = j.at("sd").get<double>();
  return s;
}

}  // namespace

std::string target_name(TargetKind t) {
  switch (t) {
    case TargetKind::sex: return "sex";
    case TargetKind::age: return "age";
    case TargetKind::tpvt: return "tpvt";
    case TargetKind::torrt: return "torrt";
    case TargetKind::tfat: return "tfat";
  }
  return "?";
}

TargetKind target_from_name(const std::string& name) {
  for (TargetKind t : {TargetKind::sex, TargetKind::age, TargetKind::tpvt,
                       TargetKind::torrt, TargetKind::tfat})
    if (name == target_name(t)) return t;
  fail(Errc::invalid_input, "unknown prediction target `" + name + "`");
}

std::string metric_name(MetricKind m) {
  switch (m) {
    case MetricKind::accuracy: return "Acc";
    case MetricKind::mae: return "MAE";
    case MetricKind::pearson_r: return "r";
  }
  return "?";
}

std::string model_name(ModelKind m) {
  return m == ModelKind::cnn ? "cnn" : "enet";
}

ModelKind model_from_name(const std::string& name) {
  if (name == "cnn") return ModelKind::cnn;
  if (name == "enet") return ModelKind::enet;
  fail(Errc::invalid_input, "unknown model `" + name + "` (want cnn or enet)");
}

TaskSpec task_for_target(TargetKind target) {
  TaskSpec task;
  task.target = target;
  switch (target) {
    case TargetKind::sex:
      task.kind = TaskKind::classification;
      task.metric = MetricKind::accuracy;
      break;
    case TargetKind::age:
      task.kind = TaskKind::regression;
      task.metric = MetricKind::mae;
      break;
    default:
      task.kind = TaskKind::regression;
      task.metric = MetricKind::pearson_r;
      break;
  }
  return task;
}

FoldAssignment make_folds(std::vector<std::string> subject_ids, int k,
                          std::uint64_t seed) {
  if (k < 2) fail(Errc::invalid_input, "need at least two folds");
  std::sort(subject_ids.begin(), subject_ids.end());
  for (std::size_t i = 1; i < subject_ids.size(); ++i)
    if (subject_ids[i] == subject_ids[i - 1])
      fail(Errc::duplicate_id, "duplicate subject `" + subject_ids[i] + "`");
  if (static_cast<int>(subject_ids.size()) < k)
    fail(Errc::invalid_input,
         "fewer subjects (" + std::to_string(subject_ids.size()) +
             ") than folds (" + std::to_string(k) + ")");
  Rng rng(seed);
  rng.shuffle(subject_ids);
  FoldAssignment out;
  out.k = k;
  out.seed = seed;
  for (std::size_t i = 0; i < subject_ids.size(); ++i)
    out.fold_of[subject_ids[i]] = static_cast<int>(i % k);
  return out;
}

TargetVector targets_for_task(
    const std::map<std::string, PhenotypeRecord>& phenotypes,
    TargetKind target) {
  std::vector<std::pair<std::string, double>> rows;
  for (const auto& [id, rec] : phenotypes) {
    std::optional<double> value;
    switch (target) {
      case TargetKind::sex:
        if (rec.sex) value = static_cast<double>(*rec.sex);
        break;
      case TargetKind::age: value = rec.age; break;
      case TargetKind::tpvt: value = rec.tpvt; break;
      case TargetKind::torrt: value = rec.torrt; break;
      case TargetKind::tfat: value = rec.tfat; break;
    }
    if (value) rows.emplace_back(id, *value);  // map order: already sorted
  }
  TargetVector out;
  out.values.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.subject_ids.push_back(rows[i].first);
    out.values[static_cast<Eigen::Index>(i)] = rows[i].second;
  }
  return out;
}

void audit_no_leakage(const PredictionSet& set) {
  const int k = set.folds.k;
  if (static_cast<int>(set.fold_training_ids.size()) != k ||
      set.predicted_by_fold.size() != set.subject_ids.size())
    fail(Errc::fold_mismatch, "prediction set provenance is incomplete");
  // expected training set per fold: every subject of every other fold
  std::vector<std::vector<std::string>> expected(k);
  for (const std::string& id : set.subject_ids) {
    const auto it = set.folds.fold_of.find(id);
    if (it == set.folds.fold_of.end())
      fail(Errc::fold_mismatch, "subject `" + id + "` missing from folds");
    for (int f = 0; f < k; ++f)
      if (f != it->second) expected[f].push_back(id);
  }
  for (int f = 0; f < k; ++f)
    if (expected[f] != set.fold_training_ids[f])
      fail(Errc::fold_mismatch,
           "fold " + std::to_string(f) +
               " was not trained on exactly the other folds' subjects");
  for (std::size_t i = 0; i < set.subject_ids.size(); ++i) {
    const std::string& id = set.subject_ids[i];
    const int f = set.predicted_by_fold[i];
    if (f != set.folds.fold_of.at(id))
      fail(Errc::fold_mismatch,
           "subject `" + id + "` predicted by the wrong fold");
    if (std::binary_search(set.fold_training_ids[f].begin(),
                           set.fold_training_ids[f].end(), id))
      fail(Errc::fold_mismatch,
           "subject `" + id + "` appears in its own training set");
  }
}

PredictionSet train_measure_model(const FeatureMatrix& features,
                                  const TargetVector& targets,
                                  const TaskSpec& task, ModelKind model,
                                  const FoldAssignment& folds,
                                  std::uint64_t seed,
                                  const ModelOptions& options, int jobs) {
  if (model == ModelKind::enet && task.kind == TaskKind::classification)
    fail(Errc::unsupported_combination,
         "the linear model supports regression targets only");
  if (folds.fold_of.empty()) fail(Errc::invalid_input, "empty fold assignment");

  std::map<std::string, Eigen::Index> feature_row;
  for (std::size_t i = 0; i < features.subject_ids.size(); ++i)
    if (!feature_row.emplace(features.subject_ids[i], i).second)
      fail(Errc::duplicate_id,
           "duplicate feature row `" + features.subject_ids[i] + "`");
  std::map<std::string, double> target_of;
  for (std::size_t i = 0; i < targets.subject_ids.size(); ++i)
    target_of[targets.subject_ids[i]] =
        targets.values[static_cast<Eigen::Index>(i)];

  std::vector<std::string> subjects;
  std::vector<std::string> missing_features, missing_targets;
  for (const auto& [id, fold] : folds.fold_of) {
    subjects.push_back(id);  // map order: sorted
    if (fold < 0 || fold >= folds.k)
      fail(Errc::fold_mismatch, "fold index out of range for `" + id + "`");
    if (!feature_row.count(id)) missing_features.push_back(id);
    if (!target_of.count(id)) missing_targets.push_back(id);
  }
  if (!missing_features.empty())
    fail(Errc::invalid_input, "subjects missing from the feature matrix: " +
                                  join(missing_features, ", "));
  if (!missing_targets.empty())
    fail(Errc::invalid_input,
         "subjects missing the target value: " + join(missing_targets, ", "));

  const int n = static_cast<int>(subjects.size());
  const Eigen::Index width = features.values.cols();
  const int k = folds.k;

  // per-subject max-min normalization feeds both model kinds
  Eigen::MatrixXd x(n, width);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    x.row(i) = minmax_normalize(
                   features.values.row(feature_row.at(subjects[i])).transpose())
                   .transpose();
    y[i] = target_of.at(subjects[i]);
  }

  PredictionSet out;
  out.task = task;
  out.folds = folds;
  out.subject_ids = subjects;
  out.values.resize(n, task.kind == TaskKind::classification ? 2 : 1);
  out.measures = {measure_name(features.measure)};
  out.model = model_name(model);
  out.predicted_by_fold.resize(n);
  out.fold_training_ids.assign(k, {});

  std::vector<std::vector<int>> test_idx(k), train_idx(k);
  for (int i = 0; i < n; ++i) {
    const int f = folds.fold_of.at(subjects[i]);
    out.predicted_by_fold[i] = f;
    test_idx[f].push_back(i);
    for (int g = 0; g < k; ++g)
      if (g != f) {
        train_idx[g].push_back(i);
        out.fold_training_ids[g].push_back(subjects[i]);  // stays sorted
      }
  }
  for (int f = 0; f < k; ++f)
    if (test_idx[f].empty() || train_idx[f].empty())
      fail(Errc::fold_mismatch,
           "fold " + std::to_string(f) + " has an empty train or test side");

  std::vector<Eigen::MatrixXd> fold_pred(k);  // slot per fold: order-independent
  parallel_for(static_cast<std::size_t>(k), jobs, [&](std::size_t fi) {
    const int f = static_cast<int>(fi);
    const std::uint64_t model_seed =
        derive_seed(seed, static_cast<std::uint64_t>(features.measure),
                    static_cast<std::uint64_t>(f));
    const std::vector<int>& tr = train_idx[f];
    const std::vector<int>& te = test_idx[f];
    Eigen::MatrixXd xt(tr.size(), width), xe(te.size(), width);
    Eigen::VectorXd yt(tr.size());
    for (std::size_t i = 0; i < tr.size(); ++i) {
      xt.row(static_cast<Eigen::Index>(i)) = x.row(tr[i]);
      yt[static_cast<Eigen::Index>(i)] = y[tr[i]];
    }
    for (std::size_t i = 0; i < te.size(); ++i)
      xe.row(static_cast<Eigen::Index>(i)) = x.row(te[i]);

    if (model == ModelKind::enet) {
      const int inner =
          std::min<int>(options.enet_inner_folds, static_cast<int>(tr.size()));
      double alpha = options.alpha_grid.empty() ? 0.0 : options.alpha_grid[0];
      if (inner >= 2)
        alpha = enet_tune_alpha(xt, yt, options.alpha_grid, inner,
                                derive_seed(model_seed, 0xA1FAu, 0),
                                options.enet_l1_ratio);
      const ElasticNetModel fit =
          enet_fit(xt, yt, alpha, options.enet_l1_ratio);
      fold_pred[f] = enet_predict(fit, xe);
    } else {
      Cnn1dSpec cspec;
      cspec.input_length = static_cast<int>(width);
      cspec.input_channels = 1;
      cspec.conv_channels = options.cnn_conv_channels;
      cspec.head_dims = options.cnn_head_dims;
      cspec.output_dim = task.kind == TaskKind::classification ? 2 : 1;
      TrainConfig tc = options.cnn;
      tc.seed = model_seed;
      tc.loss = task.kind == TaskKind::classification
                    ? LossKind::cross_entropy
                    : LossKind::mean_squared_error;
      CnnDataset dataset;
      dataset.inputs = batch_from_rows(xt);
      if (task.kind == TaskKind::classification) {
        dataset.labels.resize(tr.size());
        for (std::size_t i = 0; i < tr.size(); ++i)
          dataset.labels[i] = static_cast<int>(yt[static_cast<Eigen::Index>(i)]);
      } else {
        dataset.targets = yt;
      }
      const CnnTrainResult trained = train_cnn(dataset, cspec, tc);
      fold_pred[f] = cnn_predict(trained.model, batch_from_rows(xe));
    }
  });

  for (int f = 0; f < k; ++f)
    for (std::size_t j = 0; j < test_idx[f].size(); ++j)
      out.values.row(test_idx[f][j]) =
          fold_pred[f].row(static_cast<Eigen::Index>(j));
  return out;
}

PredictionSet fuse_predictions(const std::vector<PredictionSet>& sets,
                               const TaskSpec& task) {
  if (sets.empty()) fail(Errc::invalid_input, "nothing to fuse");
  const PredictionSet& first = sets.front();
  if (first.task.target != task.target || first.task.kind != task.kind)
    fail(Errc::invalid_input, "prediction sets do not match the task");
  for (const PredictionSet& s : sets) {
    if (s.task.target != task.target || s.task.kind != task.kind)
      fail(Errc::invalid_input, "prediction sets do not match the task");
    if (!(s.folds == first.folds))
      fail(Errc::fold_mismatch, "fused sets use different fold assignments");
    if (s.subject_ids != first.subject_ids ||
        s.values.rows() != first.values.rows() ||
        s.values.cols() != first.values.cols())
      fail(Errc::fold_mismatch, "fused sets cover different subjects");
  }
  if (sets.size() == 1) return first;

  PredictionSet out = first;
  bool same_model = true;
  for (std::size_t i = 1; i < sets.size(); ++i) {
    out.values += sets[i].values;
    out.measures.insert(out.measures.end(), sets[i].measures.begin(),
                        sets[i].measures.end());
    same_model = same_model && sets[i].model == first.model;
  }
  out.values /= static_cast<double>(sets.size());
  if (!same_model) out.model = "mixed";
  return out;
}

ExperimentConfig experiment_from_config(const FlatConfig& config) {
  ExperimentConfig cfg;
  cfg.seed = config.require_seed();
  if (!config.has("task"))
    fail(Errc::config_error, "missing `task` (sex|age|tpvt|torrt|tfat)");
  cfg.target = target_from_name(config.get_string("task", ""));
  cfg.model = model_from_name(config.get_string("model", "enet"));
  cfg.folds = static_cast<int>(config.get_int("folds", 5));
  cfg.normalized = config.get_bool("normalized", false);
  cfg.name = config.get_string("name", "");
  if (!config.has("categories"))
    fail(Errc::config_error, "missing `categories`");
  for (const std::string& cat : config.get_list("categories", ',')) {
    ExperimentCategory category;
    category.name = cat;
    const std::string key = cat + "_measures";
    if (!config.has(key))
      fail(Errc::config_error, "missing `" + key + "` for category " + cat);
    for (const std::string& name : config.get_list(key, ',')) {
      const std::optional<MeasureKind> kind = measure_from_name(name);
      if (!kind)
        fail(Errc::config_error, "unknown measure `" + name + "` in " + key);
      category.measures.push_back(*kind);
    }
    cfg.categories.push_back(std::move(category));
  }
  cfg.options.cnn.epochs = static_cast<int>(config.get_int("cnn_epochs", 300));
  cfg.options.cnn.batch_size =
      static_cast<int>(config.get_int("cnn_batch", 8));
  cfg.options.cnn.learning_rate = config.get_double("cnn_lr", 0.1);
  cfg.options.cnn.momentum = config.get_double("cnn_momentum", 0.0);
  cfg.options.cnn_conv_channels =
      static_cast<int>(config.get_int("cnn_channels", 64));
  if (config.has("cnn_head")) {
    cfg.options.cnn_head_dims.clear();
    for (const std::string& d : config.get_list("cnn_head", ',')) {
      try {
        cfg.options.cnn_head_dims.push_back(std::stoi(d));
      } catch (const std::exception&) {
        fail(Errc::config_error, "`cnn_head` must be a list of integers");
      }
    }
  }
  cfg.options.enet_inner_folds =
      static_cast<int>(config.get_int("enet_inner_folds", 5));
  return cfg;
}

EvalReport run_experiment(
    const std::map<MeasureKind, FeatureMatrix>& features,
    const std::map<std::string, PhenotypeRecord>& phenotypes,
    const ExperimentConfig& config, int jobs) {
  if (config.categories.empty())
    fail(Errc::invalid_input, "experiment needs at least one category");
  ExperimentConfig cfg = config;
  for (ExperimentCategory& category : cfg.categories) {
    if (category.measures.empty())
      fail(Errc::invalid_input,
           "category `" + category.name + "` has no measures");
    if (cfg.normalized)
      for (MeasureKind& m : category.measures)
        if (has_normalized_variant(m)) m = normalized_kind(m);
    // within one category everything is raw or everything normalized
    const bool head = is_normalized(category.measures.front());
    for (MeasureKind m : category.measures)
      if (is_normalized(m) != head)
        fail(Errc::invalid_input,
             "category `" + category.name +
                 "` mixes raw and normalized measures");
  }
  const TaskSpec task = task_for_target(cfg.target);
  if (cfg.model == ModelKind::enet && task.kind == TaskKind::classification)
    fail(Errc::unsupported_combination,
         "the linear model cannot run the sex classification task");

  std::vector<MeasureKind> used;
  for (const ExperimentCategory& category : cfg.categories)
    for (MeasureKind m : category.measures)
      if (std::find(used.begin(), used.end(), m) == used.end())
        used.push_back(m);
  for (MeasureKind m : used)
    if (!features.count(m))
      fail(Errc::invalid_input, std::string("no feature matrix for measure ") +
                                    measure_name(m));

  const TargetVector targets = targets_for_task(phenotypes, cfg.target);
  if (static_cast<int>(targets.subject_ids.size()) < cfg.folds)
    fail(Errc::invalid_input, "not enough subjects with the target value");
  for (MeasureKind m : used) {
    const FeatureMatrix& matrix = features.at(m);
    std::vector<std::string> missing;
    for (const std::string& id : targets.subject_ids)
      if (std::find(matrix.subject_ids.begin(), matrix.subject_ids.end(),
                    id) == matrix.subject_ids.end())
        missing.push_back(id);
    if (!missing.empty())
      fail(Errc::invalid_input, std::string(measure_name(m)) +
                                    " feature matrix is missing subjects: " +
                                    join(missing, ", "));
  }

  const FoldAssignment folds =
      make_folds(targets.subject_ids, cfg.folds, cfg.seed);

  std::map<MeasureKind, PredictionSet> sets;
  for (MeasureKind m : used) {
    sets.emplace(m, train_measure_model(features.at(m), targets, task,
                                        cfg.model, folds, cfg.seed,
                                        cfg.options, jobs));
    audit_no_leakage(sets.at(m));
  }

  EvalReport report;
  report.task = task;
  report.model = cfg.model;
  report.folds = cfg.folds;
  report.seed = cfg.seed;
  report.categories = cfg.categories;
  report.fold_assignment = folds;
  {
    std::vector<std::string> names;
    for (const ExperimentCategory& category : cfg.categories)
      names.push_back(category.name);
    report.name = !cfg.name.empty()
                      ? cfg.name
                      : model_name(cfg.model) + "-" + target_name(cfg.target) +
                            "-" + join(names, "+");
  }

  for (MeasureKind m : used)
    report.measure_rows.push_back(
        summarize(sets.at(m), targets, measure_name(m)));

  std::vector<PredictionSet> category_sets;
  for (const ExperimentCategory& category : cfg.categories) {
    std::vector<PredictionSet> members;
    for (MeasureKind m : category.measures) members.push_back(sets.at(m));
    category_sets.push_back(fuse_predictions(members, task));
    report.category_rows.push_back(
        summarize(category_sets.back(), targets, category.name));
  }
  const PredictionSet fused = fuse_predictions(category_sets, task);
  report.fused = summarize(fused, targets, "fused");

  // Hash every supplied feature CSV in canonical form so compare can refuse
  // reports built from different data, independent of the category layout.
  std::string blob;
  for (const auto& [kind, matrix] : features) blob += write_feature_csv(matrix);
  report.features_hash = fnv1a_hex(blob);
  return report;
}

Comparison compare_experiments(const std::vector<EvalReport>& reports) {
  if (reports.size() < 2)
    fail(Errc::invalid_input, "need at least two reports to compare");
  const EvalReport& first = reports.front();
  const int k = static_cast<int>(first.fused.per_fold.size());
  for (const EvalReport& r : reports) {
    if (r.task.target != first.task.target ||
        r.task.metric != first.task.metric)
      fail(Errc::invalid_input, "reports score different tasks");
    if (r.features_hash != first.features_hash)
      fail(Errc::fold_mismatch,
           "reports were built from different feature inputs (hash mismatch)");
    if (!(r.fold_assignment == first.fold_assignment))
      fail(Errc::fold_mismatch, "reports use different fold assignments");
    if (static_cast<int>(r.fused.per_fold.size()) != k)
      fail(Errc::incomplete_table, "reports have different fold counts");
  }

  Comparison out;
  Eigen::MatrixXd table(k, reports.size());
  for (std::size_t j = 0; j < reports.size(); ++j) {
    out.labels.push_back(reports[j].name);
    for (int f = 0; f < k; ++f)
      table(f, static_cast<Eigen::Index>(j)) = reports[j].fused.per_fold[f];
  }
  out.anova = rm_anova(table);
  for (std::size_t a = 0; a < reports.size(); ++a)
    for (std::size_t b = a + 1; b < reports.size(); ++b) {
      Comparison::Pair pair;
      pair.a = static_cast<int>(a);
      pair.b = static_cast<int>(b);
      pair.t = paired_t_test(table.col(static_cast<Eigen::Index>(a)),
                             table.col(static_cast<Eigen::Index>(b)));
      pair.marker = significance_marker(pair.t.p);
      out.pairs.push_back(std::move(pair));
    }
  return out;
}

std::string report_to_json(const EvalReport& report) {
  nlohmann::json j;
  j["kind"] = "eval_report";
  j["name"] = report.name;
  j["target"] = target_name(report.task.target);
  j["metric"] = metric_name(report.task.metric);
  j["model"] = model_name(report.model);
  j["folds"] = report.folds;
  j["seed"] = report.seed;
  j["categories"] = nlohmann::json::array();
  for (const ExperimentCategory& category : report.categories) {
    nlohmann::json names = nlohmann::json::array();
    for (MeasureKind m : category.measures) names.push_back(measure_name(m));
    j["categories"].push_back({{"name", category.name}, {"measures", names}});
  }
  j["measure_rows"] = nlohmann::json::array();
  for (const MetricSummary& s : report.measure_rows)
    j["measure_rows"].push_back(summary_to_json(s));
  j["category_rows"] = nlohmann::json::array();
  for (const MetricSummary& s : report.category_rows)
    j["category_rows"].push_back(summary_to_json(s));
  j["fused"] = summary_to_json(report.fused);
  j["features_hash"] = report.features_hash;
  j["fold_assignment"] = {{"k", report.fold_assignment.k},
                          {"seed", report.fold_assignment.seed},
                          {"fold_of", report.fold_assignment.fold_of}};
  return j.dump(2);
}

EvalReport report_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::format_error, std::string("bad report JSON: ") + e.what());
  }
  if (!j.is_object() || j.value("kind", "") != "eval_report")
    fail(Errc::format_error, "not an evaluation report");
  EvalReport report;
  report.name = j.at("name").get<std::string>();
  report.task =
      task_for_target(target_from_name(j.at("target").get<std::string>()));
  report.model = model_from_name(j.at("model").get<std::string>());
  report.folds = j.at("folds").get<int>();
  report.seed = j.at("seed").get<std::uint64_t>();
  for (const nlohmann::json& jc : j.at("categories")) {
    ExperimentCategory category;
    category.name = jc.at("name").get<std::string>();
    for (const nlohmann::json& jm : jc.at("measures")) {
      const std::optional<MeasureKind> kind =
          measure_from_name(jm.get<std::string>());
      if (!kind) fail(Errc::format_error, "unknown measure in report");
      category.measures.push_back(*kind);
    }
    report.categories.push_back(std::move(category));
  }
  for (const nlohmann::json& js : j.at("measure_rows"))
    report.measure_rows.push_back(summary_from_json(js));
  for (const nlohmann::json& js : j.at("category_rows"))
    report.category_rows.push_back(summary_from_json(js));
  report.fused = summary_from_json(j.at("fused"));
  report.features_hash = j.at("features_hash").get<std::string>();
  report.fold_assignment.k = j.at("fold_assignment").at("k").get<int>();
  report.fold_assignment.seed =
      j.at("fold_assignment").at("seed").get<std::uint64_t>();
  report.fold_assignment.fold_of =
      j.at("fold_assignment")
          .at("fold_of")
          .get<std::map<std::string, int>>();
  return report;
}

namespace {

void append_row(std::string& out, const MetricSummary& s) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "  %-16s %9.4f +- %7.4f  |", s.label.c_str(),
                s.mean, s.sd);
  out += buf;
  for (double v : s.per_fold) {
    std::snprintf(buf, sizeof(buf), " %8.4f", v);
    out += buf;
  }
  out += '\n';
}

}  // namespace

std::string render_report(const EvalReport& report) {
  std::string out;
  out += "experiment: " + report.name + "\n";
  out += "target: " + target_name(report.task.target) +
         "  metric: " + metric_name(report.task.metric) +
         (report.task.metric == MetricKind::accuracy ? " (%)" : "") +
         "  model: " + model_name(report.model) +
         "  folds: " + std::to_string(report.folds) +
         "  seed: " + std::to_string(report.seed) + "\n\n";
  out += "per-measure models:\n";
  for (const MetricSummary& s : report.measure_rows) append_row(out, s);
  out += "category fusion:\n";
  for (const MetricSummary& s : report.category_rows) append_row(out, s);
  out += "cross-category fusion:\n";
  append_row(out, report.fused);
  return out;
}

std::string render_comparison(const Comparison& comparison) {
  std::string out;
  char buf[160];
  out += "methods:\n";
  for (std::size_t i = 0; i < comparison.labels.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "  [%zu] %s\n", i,
                  comparison.labels[i].c_str());
    out += buf;
  }
  std::snprintf(buf, sizeof(buf),
                "repeated-measures ANOVA: F(%.0f, %.0f) = %.4f, p = %.4g\n",
                comparison.anova.df1, comparison.anova.df2,
                comparison.anova.statistic, comparison.anova.p);
  out += buf;
  out += "pairwise paired t-tests:\n";
  for (const Comparison::Pair& pair : comparison.pairs) {
    std::snprintf(buf, sizeof(buf),
                  "  [%d] vs [%d]: t(%.0f) = %.4f, p = %.4g  %s\n", pair.a,
                  pair.b, pair.t.df1, pair.t.statistic, pair.t.p,
                  pair.marker.c_str());
    out += buf;
  }
  return out;
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t hash = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(hash));
  return buf;
}

}  // namespace tractshape
