#include "tractshape/synth.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "tractshape/error.hpp"
#include "tractshape/io.hpp"
#include "tractshape/measures.hpp"
#include "tractshape/rng.hpp"

namespace tractshape {

namespace {

void validate_bundle(const BundleSpec& spec) {
  if (!(spec.length > 0)) fail(Errc::invalid_input, "bundle length must be > 0");
  if (spec.spread < 0 || spec.jitter < 0)
    fail(Errc::invalid_input, "spread and jitter must be >= 0");
  if (spec.streamline_count < 1)
    fail(Errc::invalid_input, "need at least one streamline");
  if (spec.points_per_streamline < 2)
    fail(Errc::invalid_input, "need at least two points per streamline");
  constexpr double kTwoPi = 6.283185307179586;
  if (spec.centerline == CenterlineKind::arc &&
      !(spec.arc_angle > 0 && spec.arc_angle <= kTwoPi))
    fail(Errc::invalid_input, "arc angle must be in (0, 2*pi]");
}

// Clamp multiplicative variation factors so degenerate draws cannot flip the
// sign of a physical parameter.
double factor(Rng& rng, double rel_sd) {
  return std::max(0.2, 1.0 + rel_sd * rng.normal());
}

std::string subject_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "S%04d", index + 1);
  return buf;
}

double feature_value(const std::map<MeasureKind, FeatureVector>& features,
                     const PlantedCoefficient& c) {
  auto it = features.find(c.measure);
  if (it == features.end())
    fail(Errc::invalid_input, std::string("planted coefficients must use raw "
                                          "measures, got ") +
                                  measure_name(c.measure));
  return it->second.values[c.cluster_id - 1];
}

std::optional<std::pair<double, double>> range_of(const FlatConfig& config,
                                                  const std::string& key) {
  if (!config.has(key)) return std::nullopt;
  const std::vector<std::string> parts = config.get_list(key, ',');
  if (parts.size() != 2)
    fail(Errc::config_error, "`" + key + "` must be `lo,hi`");
  double lo = 0, hi = 0;
  try {
    lo = std::stod(parts[0]);
    hi = std::stod(parts[1]);
  } catch (const std::exception&) {
    fail(Errc::config_error, "`" + key + "` must be numeric `lo,hi`");
  }
  if (!(lo <= hi)) fail(Errc::config_error, "`" + key + "` has lo > hi");
  return std::pair{lo, hi};
}

std::vector<PlantedCoefficient> parse_coeffs(const FlatConfig& config,
                                             const std::string& key,
                                             int cluster_count) {
  std::vector<PlantedCoefficient> out;
  if (!config.has(key)) return out;
  for (const std::string& item : config.get_list(key, ',')) {
    const std::vector<std::string> parts = split(item, ':');
    if (parts.size() != 3)
      fail(Errc::config_error,
           "`" + key + "` entries must be `Measure:cluster:beta`, got `" +
               item + "`");
    PlantedCoefficient c;
    const std::optional<MeasureKind> kind = measure_from_name(trim(parts[0]));
    if (!kind || is_normalized(*kind))
      fail(Errc::config_error,
           "`" + key + "`: unknown or non-raw measure `" + parts[0] + "`");
    c.measure = *kind;
    try {
      c.cluster_id = std::stoi(trim(parts[1]));
      c.beta = std::stod(trim(parts[2]));
    } catch (const std::exception&) {
      fail(Errc::config_error, "`" + key + "`: bad number in `" + item + "`");
    }
    if (c.cluster_id < 1 || c.cluster_id > cluster_count)
      fail(Errc::config_error,
           "`" + key + "`: cluster id " + std::to_string(c.cluster_id) +
               " outside 1.." + std::to_string(cluster_count));
    if (!std::isfinite(c.beta))
      fail(Errc::config_error, "`" + key + "`: non-finite beta");
    out.push_back(c);
  }
  return out;
}

nlohmann::json coeffs_to_json(const std::vector<PlantedCoefficient>& coeffs) {
  nlohmann::json arr = nlohmann::json::array();
  for (const PlantedCoefficient& c : coeffs)
    arr.push_back({{"measure", measure_name(c.measure)},
                   {"cluster_id", c.cluster_id},
                   {"beta", c.beta}});
  return arr;
}

}  // namespace

FiberCluster gen_bundle(const BundleSpec& spec, int cluster_id,
                        std::uint64_t seed) {
  validate_bundle(spec);
  Rng rng(seed);
  const int k = spec.points_per_streamline;

  Streamline center(3, k);
  Eigen::Vector3d u, v;  // basis of the plane perpendicular to the midpoint tangent
  if (spec.centerline == CenterlineKind::straight) {
    for (int i = 0; i < k; ++i)
      center.col(i) =
          Eigen::Vector3d(spec.length * i / (k - 1), 0.0, 0.0);
    u = Eigen::Vector3d(0, 1, 0);
    v = Eigen::Vector3d(0, 0, 1);
  } else {
    const double radius = spec.length / spec.arc_angle;
    for (int i = 0; i < k; ++i) {
      const double theta = spec.arc_angle * i / (k - 1);
      center.col(i) = Eigen::Vector3d(radius * std::sin(theta),
                                      radius * (1.0 - std::cos(theta)), 0.0);
    }
    const double mid = spec.arc_angle / 2.0;  // tangent (cos, sin, 0) there
    u = Eigen::Vector3d(-std::sin(mid), std::cos(mid), 0.0);
    v = Eigen::Vector3d(0, 0, 1);
  }

  FiberCluster cluster;
  cluster.cluster_id = cluster_id;
  std::vector<ScalarTrack> fa_tracks, md_tracks;
  for (int s = 0; s < spec.streamline_count; ++s) {
    const Eigen::Vector3d offset =
        rng.normal(0.0, spec.spread) * u + rng.normal(0.0, spec.spread) * v;
    Streamline line = center.colwise() + offset;
    if (spec.jitter > 0)
      for (Eigen::Index i = 0; i < line.size(); ++i)
        line.data()[i] += rng.normal(0.0, spec.jitter);
    cluster.streamlines.push_back(std::move(line));

    ScalarTrack fa(k), md(k);
    for (int i = 0; i < k; ++i) {
      fa[i] = spec.fa_mean + (spec.fa_sd > 0 ? rng.normal(0.0, spec.fa_sd) : 0.0);
      md[i] = spec.md_mean + (spec.md_sd > 0 ? rng.normal(0.0, spec.md_sd) : 0.0);
    }
    fa_tracks.push_back(std::move(fa));
    md_tracks.push_back(std::move(md));
  }
  cluster.scalar_channels["FA"] = std::move(fa_tracks);
  cluster.scalar_channels["MD"] = std::move(md_tracks);
  return cluster;
}

CohortSpec cohort_from_config(const FlatConfig& config) {
  CohortSpec spec;
  spec.seed = config.require_seed();
  spec.subject_count = static_cast<int>(config.get_int("subjects", 200));
  spec.cluster_count = static_cast<int>(config.get_int("clusters", 32));
  spec.atlas_size =
      static_cast<int>(config.get_int("atlas_size", spec.cluster_count));
  spec.rel_sd = config.get_double("rel_sd", 0.1);
  spec.subject_scale_sd = config.get_double("subject_scale_sd", 0.0);

  BundleSpec base;
  base.streamline_count = static_cast<int>(config.get_int("streamlines", 60));
  base.points_per_streamline = static_cast<int>(config.get_int("points", 30));
  base.length = config.get_double("length", 50.0);
  base.spread = config.get_double("spread", 1.5);
  base.jitter = config.get_double("jitter", 0.0);
  base.arc_angle = config.get_double("arc_angle", base.arc_angle);
  base.fa_mean = config.get_double("fa", 0.5);
  base.fa_sd = config.get_double("fa_sd", 0.0);
  base.md_mean = config.get_double("md", 0.7);
  base.md_sd = config.get_double("md_sd", 0.0);
  const double arc_fraction = config.get_double("arc_fraction", 0.5);

  const auto length_range = range_of(config, "length_range");
  const auto spread_range = range_of(config, "spread_range");
  const auto count_range = range_of(config, "streamline_range");
  const auto fa_range = range_of(config, "fa_range");
  const auto md_range = range_of(config, "md_range");

  for (int j = 0; j < spec.cluster_count; ++j) {
    // Per-cluster template drawn from its own derived stream so the cohort
    // layout is stable under changes to the subject count.
    Rng trng(derive_seed(spec.seed, 0x7E41u, static_cast<std::uint64_t>(j)));
    BundleSpec b = base;
    const double u_len = trng.uniform();
    const double u_spread = trng.uniform();
    const double u_count = trng.uniform();
    const double u_arc = trng.uniform();
    const double u_fa = trng.uniform();
    const double u_md = trng.uniform();
    if (length_range)
      b.length = length_range->first +
                 u_len * (length_range->second - length_range->first);
    if (spread_range)
      b.spread = spread_range->first +
                 u_spread * (spread_range->second - spread_range->first);
    if (count_range)
      b.streamline_count = static_cast<int>(
          count_range->first +
          u_count * (count_range->second - count_range->first) + 0.5);
    if (fa_range)
      b.fa_mean =
          fa_range->first + u_fa * (fa_range->second - fa_range->first);
    if (md_range)
      b.md_mean =
          md_range->first + u_md * (md_range->second - md_range->first);
    b.centerline = u_arc < arc_fraction ? CenterlineKind::arc
                                        : CenterlineKind::straight;
    spec.clusters.push_back(b);
  }

  for (const char* name : {"age", "tpvt", "torrt", "tfat"}) {
    const std::string prefix = name;
    PlantedPhenotype p;
    p.name = name;
    p.base = config.get_double(prefix + "_base", 0.0);
    p.noise_sd = config.get_double(prefix + "_noise_sd", 0.0);
    p.noise_r_target = config.get_double(prefix + "_noise_r", 0.0);
    p.coefficients =
        parse_coeffs(config, prefix + "_coeffs", spec.cluster_count);
    const bool configured = config.has(prefix + "_base") ||
                            config.has(prefix + "_noise_sd") ||
                            config.has(prefix + "_noise_r") ||
                            !p.coefficients.empty();
    if (configured) spec.phenotypes.push_back(std::move(p));
  }
  spec.sex.coefficients = parse_coeffs(config, "sex_coeffs", spec.cluster_count);
  spec.sex.steepness = config.get_double("sex_steepness", 4.0);
  return spec;
}

CohortResult gen_cohort(const CohortSpec& spec) {
  if (spec.subject_count < 10)
    fail(Errc::invalid_input, "cohort needs at least 10 subjects");
  if (spec.cluster_count < 1 ||
      static_cast<int>(spec.clusters.size()) != spec.cluster_count)
    fail(Errc::invalid_input,
         "cluster template count does not match cluster_count");
  if (spec.atlas_size < spec.cluster_count)
    fail(Errc::invalid_input, "atlas_size smaller than cluster_count");
  if (spec.rel_sd < 0 || spec.subject_scale_sd < 0)
    fail(Errc::invalid_input, "variation sds must be >= 0");
  for (const PlantedPhenotype& p : spec.phenotypes) {
    if (p.name != "age" && p.name != "tpvt" && p.name != "torrt" &&
        p.name != "tfat")
      fail(Errc::invalid_input, "unknown phenotype `" + p.name + "`");
    if (!(p.noise_sd >= 0) ||
        !(p.noise_r_target == 0 ||
          (p.noise_r_target > 0 && p.noise_r_target <= 1)))
      fail(Errc::invalid_input, "bad noise settings for `" + p.name + "`");
    for (const PlantedCoefficient& c : p.coefficients)
      if (!std::isfinite(c.beta) || c.cluster_id < 1 ||
          c.cluster_id > spec.cluster_count || is_normalized(c.measure))
        fail(Errc::invalid_input, "bad planted coefficient for `" + p.name + "`");
  }
  for (const PlantedCoefficient& c : spec.sex.coefficients)
    if (!std::isfinite(c.beta) || c.cluster_id < 1 ||
        c.cluster_id > spec.cluster_count || is_normalized(c.measure))
      fail(Errc::invalid_input, "bad planted sex coefficient");

  CohortResult result;
  result.subjects.resize(spec.subject_count);
  std::vector<std::map<MeasureKind, FeatureVector>> features(
      spec.subject_count);

  for (int i = 0; i < spec.subject_count; ++i) {
    // One parameter stream per subject plus one bundle stream per cluster, so
    // subjects are independent and could be generated in any order.
    Rng prng(derive_seed(spec.seed, 0xA11CEu, static_cast<std::uint64_t>(i)));
    const double global = std::max(
        0.2, 1.0 + spec.subject_scale_sd * prng.normal());
    SubjectData& subject = result.subjects[i];
    subject.subject_id = subject_name(i);
    subject.clusters.resize(spec.atlas_size);
    for (int j = 0; j < spec.atlas_size; ++j)
      subject.clusters[j].cluster_id = j + 1;
    for (int j = 0; j < spec.cluster_count; ++j) {
      BundleSpec b = spec.clusters[j];
      b.length *= global * factor(prng, spec.rel_sd);
      b.spread *= global * factor(prng, spec.rel_sd);
      b.streamline_count = std::max(
          2, static_cast<int>(std::lround(b.streamline_count *
                                          factor(prng, spec.rel_sd))));
      b.fa_mean *= factor(prng, spec.rel_sd);
      b.md_mean *= factor(prng, spec.rel_sd);
      subject.clusters[j] =
          gen_bundle(b, j + 1,
                     derive_seed(spec.seed, static_cast<std::uint64_t>(i) + 1,
                                 static_cast<std::uint64_t>(j) + 1));
    }
    features[i] = extract_features(subject);
  }

  nlohmann::json truth;
  truth["seed"] = spec.seed;
  truth["subjects"] = spec.subject_count;
  truth["clusters"] = spec.cluster_count;
  truth["atlas_size"] = spec.atlas_size;
  truth["rel_sd"] = spec.rel_sd;
  truth["subject_scale_sd"] = spec.subject_scale_sd;
  truth["bundles"] = nlohmann::json::array();
  for (int j = 0; j < spec.cluster_count; ++j) {
    const BundleSpec& b = spec.clusters[j];
    truth["bundles"].push_back(
        {{"cluster_id", j + 1},
         {"length", b.length},
         {"centerline",
          b.centerline == CenterlineKind::arc ? "arc" : "straight"},
         {"arc_angle", b.arc_angle},
         {"spread", b.spread},
         {"streamlines", b.streamline_count},
         {"points", b.points_per_streamline},
         {"jitter", b.jitter},
         {"fa", b.fa_mean},
         {"md", b.md_mean}});
  }

  // planted phenotypes: y = base + sum beta*feature + noise
  truth["phenotypes"] = nlohmann::json::array();
  for (std::size_t p = 0; p < spec.phenotypes.size(); ++p) {
    const PlantedPhenotype& plant = spec.phenotypes[p];
    Eigen::VectorXd signal(spec.subject_count);
    for (int i = 0; i < spec.subject_count; ++i) {
      double s = plant.base;
      for (const PlantedCoefficient& c : plant.coefficients)
        s += c.beta * feature_value(features[i], c);
      signal[i] = s;
    }
    double noise_sd = plant.noise_sd;
    if (plant.noise_r_target > 0) {
      const double mean = signal.mean();
      const double sd =
          std::sqrt((signal.array() - mean).square().sum() /
                    std::max(1, spec.subject_count - 1));
      const double r = plant.noise_r_target;
      // r of the true signal against signal+noise is sd_s/sqrt(sd_s^2+sd_n^2)
      noise_sd = r >= 1.0 ? 0.0 : sd * std::sqrt(1.0 / (r * r) - 1.0);
    }
    Rng nrng(derive_seed(spec.seed, 0xBEEFu, static_cast<std::uint64_t>(p)));
    for (int i = 0; i < spec.subject_count; ++i) {
      const double y = signal[i] + (noise_sd > 0 ? nrng.normal(0, noise_sd) : 0);
      PhenotypeRecord& rec = result.subjects[i].phenotypes;
      if (plant.name == "age")
        rec.age = y;
      else if (plant.name == "tpvt")
        rec.tpvt = y;
      else if (plant.name == "torrt")
        rec.torrt = y;
      else
        rec.tfat = y;
    }
    truth["phenotypes"].push_back({{"name", plant.name},
                                   {"base", plant.base},
                                   {"noise_sd", noise_sd},
                                   {"noise_r_target", plant.noise_r_target},
                                   {"coefficients",
                                    coeffs_to_json(plant.coefficients)}});
  }

  // sex: Bernoulli(logistic(steepness * standardized planted score))
  {
    Eigen::VectorXd score = Eigen::VectorXd::Zero(spec.subject_count);
    for (int i = 0; i < spec.subject_count; ++i)
      for (const PlantedCoefficient& c : spec.sex.coefficients)
        score[i] += c.beta * feature_value(features[i], c);
    std::vector<double> sorted(score.data(), score.data() + score.size());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t half = sorted.size() / 2;
    const double median = sorted.size() % 2 == 1
                              ? sorted[half]
                              : 0.5 * (sorted[half - 1] + sorted[half]);
    const double mean = score.mean();
    double sd = std::sqrt((score.array() - mean).square().sum() /
                          std::max(1, spec.subject_count - 1));
    if (sd <= 0) sd = 1.0;
    Rng srng(derive_seed(spec.seed, 0x5E7u, 0));
    for (int i = 0; i < spec.subject_count; ++i) {
      const double z = (score[i] - median) / sd;
      const double prob = 1.0 / (1.0 + std::exp(-spec.sex.steepness * z));
      result.subjects[i].phenotypes.sex = srng.uniform() < prob ? 1 : 0;
    }
    truth["sex"] = {{"steepness", spec.sex.steepness},
                    {"coefficients", coeffs_to_json(spec.sex.coefficients)}};
  }

  result.ground_truth_json = truth.dump(2);
  return result;
}

void write_cohort(const CohortResult& cohort,
                  const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "subjects");
  std::map<std::string, PhenotypeRecord> records;
  for (const SubjectData& subject : cohort.subjects) {
    write_subject(dir / "subjects" / subject.subject_id, subject);
    records[subject.subject_id] = subject.phenotypes;
  }
  write_file(dir / "phenotypes.csv", write_phenotype_csv(records));
  write_file(dir / "ground_truth.json", cohort.ground_truth_json);
}

}  // namespace tractshape
