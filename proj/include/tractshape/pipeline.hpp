#pragma once
// Cross-validated experiment orchestration: shared fold assignment, one model
// per (measure, fold) with out-of-fold predictions, two-stage fusion (within
// measure category, then across categories), per-fold metrics, and report
// comparison with repeated-measures statistics.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tractshape/cnn.hpp"
#include "tractshape/config.hpp"
#include "tractshape/elastic_net.hpp"
#include "tractshape/stats.hpp"
#include "tractshape/types.hpp"

namespace tractshape {

enum class TargetKind { sex, age, tpvt, torrt, tfat };
enum class TaskKind { classification, regression };
enum class MetricKind { accuracy, mae, pearson_r };
enum class ModelKind { cnn, enet };

std::string target_name(TargetKind t);
TargetKind target_from_name(const std::string& name);
std::string metric_name(MetricKind m);
std::string model_name(ModelKind m);
ModelKind model_from_name(const std::string& name);

// Task shape is fully determined by the target: sex is classification scored
// by accuracy, age regression scored by MAE, the cognitive scores regression
// scored by Pearson r.
struct TaskSpec {
  TargetKind target = TargetKind::age;
  TaskKind kind = TaskKind::regression;
  MetricKind metric = MetricKind::mae;
};
TaskSpec task_for_target(TargetKind target);

struct FoldAssignment {
  std::map<std::string, int> fold_of;  // subject id -> fold in [0, k)
  int k = 5;
  std::uint64_t seed = 0;
  bool operator==(const FoldAssignment& other) const = default;
};

// Sort ids, seeded shuffle, round-robin: deterministic, sizes differ by <= 1.
FoldAssignment make_folds(std::vector<std::string> subject_ids, int k,
                          std::uint64_t seed);

// Ground truth for one task, subjects sorted by id; subjects missing the
// target are dropped. Classification values are 0/1.
struct TargetVector {
  std::vector<std::string> subject_ids;
  Eigen::VectorXd values;
};
TargetVector targets_for_task(
    const std::map<std::string, PhenotypeRecord>& phenotypes,
    TargetKind target);

// Out-of-fold predictions for every subject of a fold assignment, plus the
// provenance needed for the leakage audit: which fold predicted each subject
// and which subjects each fold's model was trained on.
struct PredictionSet {
  TaskSpec task;
  FoldAssignment folds;
  std::vector<std::string> subject_ids;  // sorted
  Eigen::MatrixXd values;  // n x 2 class probabilities, or n x 1 scalars
  std::vector<std::string> measures;  // provenance
  std::string model;
  std::vector<int> predicted_by_fold;  // per subject, equals its fold index
  std::vector<std::vector<std::string>> fold_training_ids;  // per fold
};

// Throws unless every subject's prediction came from a model whose training
// set was exactly the other folds (and in particular excluded the subject).
void audit_no_leakage(const PredictionSet& set);

// Training knobs. Defaults are the reference settings (learning rate 0.1,
// batch size 8, 300 epochs, 64 conv kernels, 512/128 head, ElasticNet alpha
// grid {1, 0.5, 0.1, 0.05, 0.01, 0.005, 0.001} tuned by inner CV); tests may
// shrink them to desk scale.
struct ModelOptions {
  TrainConfig cnn;  // loss kind and seed are set per task/fold internally
  int cnn_conv_channels = 64;
  std::vector<int> cnn_head_dims = {512, 128};
  int enet_inner_folds = 5;
  std::vector<double> alpha_grid = default_alpha_grid();
  double enet_l1_ratio = 0.5;
};

// Train one model per fold on the other folds and predict the held-out fold.
// Inputs are max-min normalized per subject before either model sees them.
PredictionSet train_measure_model(const FeatureMatrix& features,
                                  const TargetVector& targets,
                                  const TaskSpec& task, ModelKind model,
                                  const FoldAssignment& folds,
                                  std::uint64_t seed,
                                  const ModelOptions& options = {},
                                  int jobs = 1);

// Per-subject mean of scalar predictions (regression) or of class-probability
// pairs (soft vote); a single set is returned unchanged.
PredictionSet fuse_predictions(const std::vector<PredictionSet>& sets,
                               const TaskSpec& task);

struct ExperimentCategory {
  std::string name;
  std::vector<MeasureKind> measures;
};

struct ExperimentConfig {
  std::string name;  // label used by compare output
  std::vector<ExperimentCategory> categories;
  ModelKind model = ModelKind::enet;
  TargetKind target = TargetKind::age;
  int folds = 5;
  std::uint64_t seed = 0;
  // When set, each measure is replaced by its brain-size-normalized variant
  // where one exists (FA/MD have none and a category mixing the two fails).
  bool normalized = false;
  ModelOptions options;
};

// Flat-config keys: task, model, folds, seed (required), normalized,
// categories = name list, <category>_measures = measure-name list, name, and
// optional scale knobs cnn_epochs/cnn_batch/cnn_lr/cnn_momentum/cnn_channels/
// cnn_head/enet_inner_folds.
ExperimentConfig experiment_from_config(const FlatConfig& config);

struct MetricSummary {
  std::string label;
  std::vector<double> per_fold;
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation over folds
};

struct EvalReport {
  std::string name;
  TaskSpec task;
  ModelKind model = ModelKind::enet;
  int folds = 5;
  std::uint64_t seed = 0;
  std::vector<ExperimentCategory> categories;
  std::vector<MetricSummary> measure_rows;   // stage 0, one per measure
  std::vector<MetricSummary> category_rows;  // stage 1, one per category
  MetricSummary fused;                       // stage 2
  std::string features_hash;  // FNV-1a of the canonical feature CSVs
  FoldAssignment fold_assignment;
};

// Stage 0: per-measure models; stage 1: fuse within category; stage 2: fuse
// the category outputs (mean over categories, not over measures). The same
// fold assignment is shared by every measure. `jobs` bounds (measure, fold)
// training parallelism; results are independent of it.
EvalReport run_experiment(
    const std::map<MeasureKind, FeatureMatrix>& features,
    const std::map<std::string, PhenotypeRecord>& phenotypes,
    const ExperimentConfig& config, int jobs = 1);

// Repeated-measures ANOVA across reports (folds as blocks) plus pairwise
// paired t-tests with the n.s./*/**/*** markers.
struct Comparison {
  std::vector<std::string> labels;
  TestResult anova;
  struct Pair {
    int a = 0, b = 0;  // indices into labels
    TestResult t;
    std::string marker;
  };
  std::vector<Pair> pairs;
};
Comparison compare_experiments(const std::vector<EvalReport>& reports);

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);
std::string render_report(const EvalReport& report);
std::string render_comparison(const Comparison& comparison);

// 64-bit FNV-1a, 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);

}  // namespace tractshape
