#include "tractshape/cli.hpp"

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tractshape/config.hpp"
#include "tractshape/error.hpp"
#include "tractshape/io.hpp"
#include "tractshape/measures.hpp"
#include "tractshape/normalize.hpp"
#include "tractshape/parallel.hpp"
#include "tractshape/pipeline.hpp"
#include "tractshape/synth.hpp"

namespace tractshape {
namespace {

namespace fs = std::filesystem;

void log_line(const std::string& line) { std::cerr << line << std::endl; }

// ---- synth ----------------------------------------------------------------

void cmd_synth(const std::string& config_path, const std::string& out_dir,
               std::uint64_t seed) {
  FlatConfig config = FlatConfig::load(config_path);
  config.set("seed", std::to_string(seed));  // command line wins over the file
  const CohortSpec spec = cohort_from_config(config);
  log_line("[synth] config=" + config_path + " seed=" +
           std::to_string(spec.seed) +
           " subjects=" + std::to_string(spec.subject_count) +
           " clusters=" + std::to_string(spec.cluster_count) +
           " atlas=" + std::to_string(spec.atlas_size));
  const CohortResult cohort = gen_cohort(spec);
  write_cohort(cohort, out_dir);
  log_line("[synth] wrote " + std::to_string(cohort.subjects.size()) +
           " subjects to " + out_dir);
}

// ---- extract --------------------------------------------------------------

// Largest cluster id present in any subject's clusters/ directory; 0 when no
// cluster file exists anywhere.
int scan_cluster_count(const std::vector<fs::path>& subject_dirs) {
  int max_id = 0;
  for (const fs::path& dir : subject_dirs) {
    const fs::path clusters = dir / "clusters";
    if (!fs::is_directory(clusters)) continue;
    for (const auto& entry : fs::directory_iterator(clusters)) {
      const std::string name = entry.path().filename().string();
      constexpr std::string_view prefix = "cluster_";
      constexpr std::string_view suffix = ".tck";
      if (name.size() <= prefix.size() + suffix.size()) continue;
      if (name.compare(0, prefix.size(), prefix) != 0) continue;
      if (name.compare(name.size() - suffix.size(), suffix.size(), suffix) !=
          0)
        continue;
      const std::string digits =
          name.substr(prefix.size(), name.size() - prefix.size() - suffix.size());
      if (digits.empty() ||
          !std::all_of(digits.begin(), digits.end(),
                       [](unsigned char c) { return std::isdigit(c); }))
        continue;
      max_id = std::max(max_id, std::stoi(digits));
    }
  }
  return max_id;
}

void cmd_extract(const std::string& data_dir, const std::string& out_dir,
                 bool normalize, int clusters, int jobs) {
  const fs::path root = data_dir;
  if (!fs::is_directory(root))
    fail(Errc::io_error, "not a directory: " + data_dir);
  const fs::path subjects_root =
      fs::is_directory(root / "subjects") ? root / "subjects" : root;

  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(subjects_root))
    if (entry.is_directory()) dirs.push_back(entry.path());
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty())
    fail(Errc::invalid_input,
         "no subject directories under " + subjects_root.string());

  const int cluster_count = clusters > 0 ? clusters : scan_cluster_count(dirs);
  if (cluster_count <= 0)
    fail(Errc::invalid_input,
         "no cluster files found; pass --clusters to set the atlas size");
  log_line("[extract] data=" + data_dir + " subjects=" +
           std::to_string(dirs.size()) +
           " clusters=" + std::to_string(cluster_count) +
           (normalize ? " normalized-variants=yes" : "") +
           " jobs=" + std::to_string(jobs));

  const std::size_t n = dirs.size();
  std::vector<std::string> ids(n);
  std::vector<std::map<MeasureKind, Eigen::VectorXd>> rows(n);
  parallel_for(n, jobs, [&](std::size_t i) {
    SubjectLayout layout;
    layout.cluster_count = cluster_count;
    const SubjectData subject = load_subject(dirs[i], layout);
    ids[i] = subject.subject_id;
    std::map<MeasureKind, Eigen::VectorXd> row;
    const auto features = extract_features(subject);
    for (const auto& [kind, vec] : features) row[kind] = vec.values;
    if (normalize) {
      const std::vector<bool> mask = missing_cluster_mask(subject);
      for (const MeasureKind kind :
           {MeasureKind::NoS, MeasureKind::Length, MeasureKind::Diameter,
            MeasureKind::Elongation}) {
        const FeatureVector scaled =
            brain_size_normalize(features.at(kind), mask);
        row[scaled.measure] = scaled.values;
      }
    }
    rows[i] = std::move(row);
  });

  for (std::size_t i = 1; i < n; ++i)
    if (ids[i] == ids[i - 1])
      fail(Errc::duplicate_id, "duplicate subject id " + ids[i]);

  fs::create_directories(out_dir);
  int written = 0;
  for (const auto& [kind, unused] : rows.front()) {
    (void)unused;
    FeatureMatrix matrix;
    matrix.measure = kind;
    matrix.subject_ids = ids;
    matrix.values.resize(static_cast<Eigen::Index>(n), cluster_count);
    for (std::size_t i = 0; i < n; ++i)
      matrix.values.row(static_cast<Eigen::Index>(i)) =
          rows[i].at(kind).transpose();
    const fs::path path =
        fs::path(out_dir) / (std::string(measure_name(kind)) + ".csv");
    write_file(path, write_feature_csv(matrix));
    ++written;
  }
  log_line("[extract] wrote " + std::to_string(written) +
           " feature files to " + out_dir);
}

// ---- shared loading for train/experiment ----------------------------------

// Loads every feature CSV in a directory, keyed by measure. Files without
// the `# measure=` metadata line are skipped so a phenotype CSV living in
// the same directory does not trip the parser.
std::map<MeasureKind, FeatureMatrix> load_feature_dir(const std::string& dir) {
  if (!fs::is_directory(dir)) fail(Errc::io_error, "not a directory: " + dir);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".csv")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());

  std::map<MeasureKind, FeatureMatrix> out;
  for (const fs::path& path : files) {
    const std::string bytes = read_file(path);
    if (bytes.rfind("# measure=", 0) != 0) continue;
    FeatureMatrix matrix = read_feature_csv(bytes);
    if (out.count(matrix.measure))
      fail(Errc::duplicate_id, "measure " +
                                   std::string(measure_name(matrix.measure)) +
                                   " appears twice under " + dir);
    out[matrix.measure] = std::move(matrix);
  }
  if (out.empty()) fail(Errc::invalid_input, "no feature CSVs under " + dir);
  return out;
}

void write_report_artifacts(const EvalReport& report,
                            const std::string& out_dir) {
  fs::create_directories(out_dir);
  write_file(fs::path(out_dir) / "report.json", report_to_json(report));
  write_file(fs::path(out_dir) / "report.txt", render_report(report));
  log_line("[report] " + report.fused.label + " mean=" +
           format_double(report.fused.mean) + " sd=" +
           format_double(report.fused.sd));
  log_line("[report] artifacts in " + out_dir);
}

// ---- train ----------------------------------------------------------------

void cmd_train(const std::string& features_dir, const std::string& phen_path,
               const std::string& task, const std::string& model,
               const std::string& measures, int folds, std::uint64_t seed,
               const std::string& out_dir, int jobs) {
  ExperimentConfig config;
  config.target = target_from_name(task);
  config.model = model_from_name(model);
  config.folds = folds;
  config.seed = seed;

  ExperimentCategory category;
  category.name = "measures";
  for (const std::string& item : split(measures, ',')) {
    const std::string name = trim(item);
    if (name.empty()) continue;
    const auto kind = measure_from_name(name);
    if (!kind) fail(Errc::invalid_input, "unknown measure " + name);
    category.measures.push_back(*kind);
  }
  if (category.measures.empty())
    fail(Errc::invalid_input, "--measures must name at least one measure");
  config.categories = {category};
  config.name = model + "-" + task;

  log_line("[train] task=" + task + " model=" + model + " measures=" +
           measures + " folds=" + std::to_string(folds) +
           " seed=" + std::to_string(seed) + " jobs=" + std::to_string(jobs));
  const auto features = load_feature_dir(features_dir);
  const auto phenotypes = load_phenotypes(read_file(phen_path));
  write_report_artifacts(run_experiment(features, phenotypes, config, jobs),
                         out_dir);
}

// ---- experiment -----------------------------------------------------------

void cmd_experiment(const std::string& config_path, const std::string& out_dir,
                    int jobs) {
  const FlatConfig file = FlatConfig::load(config_path);
  const ExperimentConfig config = experiment_from_config(file);
  const std::string features_dir = file.get_string("features_dir", "");
  const std::string phen_path = file.get_string("phenotypes", "");
  if (features_dir.empty())
    fail(Errc::config_error, "config is missing `features_dir`");
  if (phen_path.empty()) fail(Errc::config_error, "config is missing `phenotypes`");

  std::string categories;
  for (const auto& category : config.categories)
    categories += (categories.empty() ? "" : "+") + category.name;
  log_line("[experiment] name=" + (config.name.empty() ? "(auto)" : config.name) +
           " target=" +
           std::string(target_name(config.target)) + " model=" +
           std::string(model_name(config.model)) + " folds=" +
           std::to_string(config.folds) + " seed=" +
           std::to_string(config.seed) + " categories=" + categories +
           " jobs=" + std::to_string(jobs));
  const auto features = load_feature_dir(features_dir);
  const auto phenotypes = load_phenotypes(read_file(phen_path));
  write_report_artifacts(run_experiment(features, phenotypes, config, jobs),
                         out_dir);
}

// ---- compare / report -----------------------------------------------------

void cmd_compare(const std::vector<std::string>& report_paths,
                 const std::string& out_path) {
  if (report_paths.size() < 2)
    fail(Errc::invalid_input, "--reports needs at least two report files");
  std::vector<EvalReport> reports;
  reports.reserve(report_paths.size());
  for (const std::string& path : report_paths)
    reports.push_back(report_from_json(read_file(path)));
  const Comparison comparison = compare_experiments(reports);
  write_file(out_path, render_comparison(comparison));
  log_line("[compare] " + std::to_string(reports.size()) +
           " reports, F = " + format_double(comparison.anova.statistic) +
           ", p = " + format_double(comparison.anova.p));
  log_line("[compare] wrote " + out_path);
}

void cmd_report(const std::string& in_path) {
  std::cout << render_report(report_from_json(read_file(in_path)));
}

}  // namespace

int run_command(int argc, const char* const* argv) {
  CLI::App app{"fiber-bundle measure extraction and phenotype prediction",
               "tractshape"};
  app.require_subcommand(1);

  std::string config_path, data_dir, out_path, features_dir, phen_path;
  std::string task = "age", model = "enet", measures;
  std::vector<std::string> report_paths;
  std::uint64_t seed = 0;
  int folds = 5, clusters = 0, jobs = 1;
  bool normalize = false;

  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic cohort");
  synth->add_option("--config", config_path, "cohort config file")->required();
  synth->add_option("--out", out_path, "output cohort directory")->required();
  synth->add_option("--seed", seed, "generator seed (overrides the config)")
      ->required();

  CLI::App* extract = app.add_subcommand(
      "extract", "Compute per-cluster feature CSVs from a cohort directory");
  extract->add_option("--data", data_dir, "cohort directory")->required();
  extract->add_option("--out", out_path, "output feature directory")
      ->required();
  extract->add_flag("--normalize", normalize,
                    "also emit brain-size-normalized -N variants");
  extract->add_option("--clusters", clusters,
                      "atlas size (default: inferred from the data)");
  extract->add_option("--jobs", jobs, "worker threads (default 1)");

  CLI::App* train = app.add_subcommand(
      "train", "Cross-validated training on one list of measures");
  train->add_option("--features", features_dir, "feature CSV directory")
      ->required();
  train->add_option("--phenotypes", phen_path, "phenotype CSV file")
      ->required();
  train->add_option("--task", task, "target: sex|age|tpvt|torrt|tfat")
      ->required();
  train->add_option("--model", model, "cnn|enet")->required();
  train->add_option("--measures", measures, "comma-separated measure names")
      ->required();
  train->add_option("--folds", folds, "cross-validation folds (default 5)");
  train->add_option("--seed", seed, "fold and model seed")->required();
  train->add_option("--out", out_path, "output report directory")->required();
  train->add_option("--jobs", jobs, "worker threads (default 1)");

  CLI::App* experiment = app.add_subcommand(
      "experiment", "Two-stage fusion run from an experiment config");
  experiment->add_option("--config", config_path, "experiment config file")
      ->required();
  experiment->add_option("--out", out_path, "output report directory")
      ->required();
  experiment->add_option("--jobs", jobs, "worker threads (default 1)");

  CLI::App* compare = app.add_subcommand(
      "compare", "Repeated-measures comparison of saved reports");
  compare->add_option("--reports", report_paths, "two or more report.json files")
      ->required();
  compare->add_option("--out", out_path, "output text file")->required();

  CLI::App* report = app.add_subcommand("report", "Render a saved report");
  report->add_option("--in", config_path, "report.json file")->required();

  synth->callback([&] { cmd_synth(config_path, out_path, seed); });
  extract->callback(
      [&] { cmd_extract(data_dir, out_path, normalize, clusters, jobs); });
  train->callback([&] {
    cmd_train(features_dir, phen_path, task, model, measures, folds, seed,
              out_path, jobs);
  });
  experiment->callback([&] { cmd_experiment(config_path, out_path, jobs); });
  compare->callback([&] { cmd_compare(report_paths, out_path); });
  report->callback([&] { cmd_report(config_path); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
    std::cerr << "usage error: " << e.what() << "\n\n";
    const auto parsed = app.get_subcommands();
    std::cerr << (parsed.size() == 1 ? parsed.front()->help() : app.help());
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace tractshape
