#include <doctest.h>

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "tractshape/config.hpp"
#include "tractshape/error.hpp"
#include "tractshape/io.hpp"
#include "tractshape/measures.hpp"
#include "tractshape/stats.hpp"
#include "tractshape/synth.hpp"

using namespace tractshape;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("tractshape_synth_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

double get_phenotype(const PhenotypeRecord& rec, const std::string& name) {
  if (name == "age") return rec.age.value();
  if (name == "tpvt") return rec.tpvt.value();
  if (name == "torrt") return rec.torrt.value();
  return rec.tfat.value();
}

CohortSpec small_cohort(std::uint64_t seed, int subjects = 12,
                        int clusters = 3) {
  CohortSpec spec;
  spec.seed = seed;
  spec.subject_count = subjects;
  spec.cluster_count = clusters;
  spec.atlas_size = clusters;
  spec.rel_sd = 0.05;
  BundleSpec bundle;
  bundle.streamline_count = 40;
  bundle.points_per_streamline = 20;
  for (int j = 0; j < clusters; ++j) {
    bundle.length = 30.0 + 10.0 * j;
    spec.clusters.push_back(bundle);
  }
  return spec;
}

}  // namespace

TEST_CASE("bundle generation is deterministic and validated") {
  BundleSpec spec;
  spec.streamline_count = 20;
  spec.points_per_streamline = 12;
  spec.jitter = 0.05;
  spec.fa_sd = 0.02;

  const FiberCluster a = gen_bundle(spec, 3, 77);
  const FiberCluster b = gen_bundle(spec, 3, 77);
  const FiberCluster c = gen_bundle(spec, 3, 78);
  CHECK(a.cluster_id == 3);
  REQUIRE(a.streamline_count() == 20);
  CHECK(a.streamlines[0] == b.streamlines[0]);
  CHECK(a.streamlines[19] == b.streamlines[19]);
  CHECK(a.scalar_channels.at("FA")[5] == b.scalar_channels.at("FA")[5]);
  CHECK(a.streamlines[0] != c.streamlines[0]);

  BundleSpec bad = spec;
  bad.length = 0.0;
  CHECK_THROWS_AS(gen_bundle(bad, 1, 1), Error);
  bad = spec;
  bad.spread = -1.0;
  CHECK_THROWS_AS(gen_bundle(bad, 1, 1), Error);
  bad = spec;
  bad.streamline_count = 0;
  CHECK_THROWS_AS(gen_bundle(bad, 1, 1), Error);
  bad = spec;
  bad.points_per_streamline = 1;
  CHECK_THROWS_AS(gen_bundle(bad, 1, 1), Error);
  bad = spec;
  bad.centerline = CenterlineKind::arc;
  bad.arc_angle = 0.0;
  CHECK_THROWS_AS(gen_bundle(bad, 1, 1), Error);
}

TEST_CASE("straight bundles recover the specified geometry") {
  BundleSpec spec;  // defaults: length 50, spread 1.5, straight
  spec.streamline_count = 500;
  const FiberCluster bundle = gen_bundle(spec, 1, 2024);
  const ClusterMeasures m = cluster_measures(bundle);

  // rigid translation preserves the centerline length exactly
  for (const Streamline& s : bundle.streamlines)
    CHECK(streamline_length(s) == doctest::Approx(50.0).epsilon(1e-12));
  CHECK(m.length == doctest::Approx(50.0).epsilon(1e-12));
  CHECK(m.nos == 500);
  CHECK(m.fa == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(m.md == doctest::Approx(0.7).epsilon(1e-9));

  // isotropic sigma=1.5 offsets make the expected diameter 2*sigma = 3
  CHECK(m.diameter == doctest::Approx(3.0).epsilon(0.10));
  CHECK(m.elongation == doctest::Approx(50.0 / m.diameter).epsilon(1e-12));

  // offsets live in the plane perpendicular to the x-axis centerline
  const MidpointCovariance cov = midpoint_covariance(bundle);
  CHECK(cov.matrix(0, 0) == doctest::Approx(0.0).epsilon(1e-18));
  CHECK(std::sqrt(cov.matrix(1, 1)) == doctest::Approx(1.5).epsilon(0.15));
  CHECK(std::sqrt(cov.matrix(2, 2)) == doctest::Approx(1.5).epsilon(0.15));
  for (const Streamline& s : bundle.streamlines)
    CHECK(streamline_midpoint(s)[0] == doctest::Approx(25.0).epsilon(1e-12));
}

TEST_CASE("zero spread collapses the bundle onto the centerline") {
  BundleSpec spec;
  spec.spread = 0.0;
  spec.streamline_count = 30;
  const FiberCluster bundle = gen_bundle(spec, 1, 5);
  const ClusterMeasures m = cluster_measures(bundle);
  CHECK(m.diameter == 0.0);
  CHECK(m.elongation == 0.0);
  CHECK(bundle.streamlines[0] == bundle.streamlines[29]);
}

TEST_CASE("arc bundles bend without changing arc length") {
  BundleSpec spec;
  spec.centerline = CenterlineKind::arc;
  spec.arc_angle = 1.5707963267948966;  // quarter circle
  spec.length = 50.0;
  spec.streamline_count = 200;
  spec.points_per_streamline = 30;
  const FiberCluster bundle = gen_bundle(spec, 1, 9);
  const ClusterMeasures m = cluster_measures(bundle);

  // the 29-segment polyline slightly undercuts the true arc length
  CHECK(m.length == doctest::Approx(50.0).epsilon(0.005));
  CHECK(m.length < 50.0);

  // chord between the endpoints: 2 R sin(angle/2) with R = L/angle
  const double radius = 50.0 / spec.arc_angle;
  const double chord = 2.0 * radius * std::sin(spec.arc_angle / 2.0);
  for (const Streamline& s : bundle.streamlines) {
    const double d = (s.col(29) - s.col(0)).norm();
    CHECK(d == doctest::Approx(chord).epsilon(1e-9));
  }
  CHECK(m.diameter == doctest::Approx(3.0).epsilon(0.15));
}

TEST_CASE("point jitter lengthens streamlines") {
  BundleSpec spec;
  spec.streamline_count = 50;
  BundleSpec wiggly = spec;
  wiggly.jitter = 0.5;
  const double straight =
      cluster_measures(gen_bundle(spec, 1, 4)).length;
  const double jittered =
      cluster_measures(gen_bundle(wiggly, 1, 4)).length;
  CHECK(straight == doctest::Approx(50.0).epsilon(1e-12));
  CHECK(jittered > 50.0);
}

TEST_CASE("cohort generation fills the atlas layout") {
  CohortSpec spec = small_cohort(11);
  spec.atlas_size = 5;  // two trailing slots stay missing
  const CohortResult cohort = gen_cohort(spec);

  REQUIRE(cohort.subjects.size() == 12);
  CHECK(cohort.subjects[0].subject_id == "S0001");
  CHECK(cohort.subjects[11].subject_id == "S0012");
  std::set<std::string> ids;
  for (const SubjectData& s : cohort.subjects) {
    ids.insert(s.subject_id);
    REQUIRE(s.cluster_count() == 5);
    for (int j = 0; j < 3; ++j) {
      CHECK_FALSE(s.clusters[j].missing());
      CHECK(s.clusters[j].cluster_id == j + 1);
    }
    CHECK(s.clusters[3].missing());
    CHECK(s.clusters[4].missing());
  }
  CHECK(ids.size() == 12);

  // repeated generation is identical down to the geometry
  const CohortResult again = gen_cohort(spec);
  CHECK(again.ground_truth_json == cohort.ground_truth_json);
  CHECK(again.subjects[7].clusters[2].streamlines[3] ==
        cohort.subjects[7].clusters[2].streamlines[3]);
}

TEST_CASE("noise-free planted phenotypes are exactly linear in the features") {
  CohortSpec spec = small_cohort(21);
  PlantedPhenotype age;
  age.name = "age";
  age.base = 40.0;
  age.coefficients.push_back({MeasureKind::Length, 2, 0.25});
  age.coefficients.push_back({MeasureKind::Diameter, 1, -1.5});
  spec.phenotypes.push_back(age);
  PlantedPhenotype tpvt;
  tpvt.name = "tpvt";
  tpvt.base = 100.0;
  tpvt.coefficients.push_back({MeasureKind::NoS, 3, 0.1});
  spec.phenotypes.push_back(tpvt);

  const CohortResult cohort = gen_cohort(spec);
  for (const SubjectData& s : cohort.subjects) {
    const auto features = extract_features(s);
    const double expect_age = 40.0 +
                              0.25 * features.at(MeasureKind::Length).values[1] -
                              1.5 * features.at(MeasureKind::Diameter).values[0];
    CHECK(s.phenotypes.age.value() ==
          doctest::Approx(expect_age).epsilon(1e-12));
    const double expect_tpvt =
        100.0 + 0.1 * features.at(MeasureKind::NoS).values[2];
    CHECK(s.phenotypes.tpvt.value() ==
          doctest::Approx(expect_tpvt).epsilon(1e-12));
    CHECK_FALSE(s.phenotypes.torrt.has_value());
    CHECK_FALSE(s.phenotypes.tfat.has_value());
  }
}

TEST_CASE("noise targeting calibrates the signal-to-noise ratio") {
  CohortSpec spec = small_cohort(33, 150);
  PlantedPhenotype age;
  age.name = "age";
  age.base = 45.0;
  age.noise_r_target = 0.9;
  age.coefficients.push_back({MeasureKind::Diameter, 2, 8.0});
  spec.phenotypes.push_back(age);

  const CohortResult cohort = gen_cohort(spec);

  // recompute the noiseless signal from the realized features
  Eigen::VectorXd signal(150), observed(150);
  for (int i = 0; i < 150; ++i) {
    const auto features = extract_features(cohort.subjects[i]);
    signal[i] = 45.0 + 8.0 * features.at(MeasureKind::Diameter).values[1];
    observed[i] = cohort.subjects[i].phenotypes.age.value();
  }
  const double mean = signal.mean();
  const double sd = std::sqrt((signal.array() - mean).square().sum() / 149.0);
  const double expected_noise = sd * std::sqrt(1.0 / (0.9 * 0.9) - 1.0);

  const nlohmann::json truth = nlohmann::json::parse(cohort.ground_truth_json);
  REQUIRE(truth.at("phenotypes").size() == 1);
  CHECK(truth["phenotypes"][0]["name"] == "age");
  CHECK(truth["phenotypes"][0]["noise_sd"].get<double>() ==
        doctest::Approx(expected_noise).epsilon(1e-9));

  // the empirical correlation should land near the target
  CHECK(pearson_r(signal, observed) == doctest::Approx(0.9).epsilon(0.08));

  // r = 1 means exactly zero noise
  CohortSpec clean = spec;
  clean.phenotypes[0].noise_r_target = 1.0;
  const CohortResult noiseless = gen_cohort(clean);
  const nlohmann::json ct = nlohmann::json::parse(noiseless.ground_truth_json);
  CHECK(ct["phenotypes"][0]["noise_sd"].get<double>() == 0.0);
}

TEST_CASE("sex labels follow the planted score with balanced classes") {
  CohortSpec spec = small_cohort(55, 100);
  spec.sex.steepness = 8.0;
  spec.sex.coefficients.push_back({MeasureKind::Length, 1, 1.0});
  const CohortResult cohort = gen_cohort(spec);

  int male = 0, female = 0;
  for (const SubjectData& s : cohort.subjects) {
    REQUIRE(s.phenotypes.sex.has_value());
    (*s.phenotypes.sex == 1 ? male : female)++;
  }
  CHECK(male + female == 100);
  // median centering keeps the classes roughly balanced
  CHECK(male >= 30);
  CHECK(female >= 30);

  // high steepness makes the score strongly predictive of the label
  int consistent = 0;
  std::vector<std::pair<double, int>> scored;
  for (const SubjectData& s : cohort.subjects) {
    const auto features = extract_features(s);
    scored.push_back({features.at(MeasureKind::Length).values[0],
                      *s.phenotypes.sex});
  }
  std::sort(scored.begin(), scored.end());
  for (int i = 0; i < 100; ++i)
    if (scored[i].second == (i >= 50 ? 1 : 0)) ++consistent;
  CHECK(consistent >= 75);
}

TEST_CASE("cohort validation rejects inconsistent specs") {
  CohortSpec spec = small_cohort(1);
  spec.subject_count = 5;
  CHECK_THROWS_AS(gen_cohort(spec), Error);

  spec = small_cohort(1);
  spec.clusters.pop_back();
  CHECK_THROWS_AS(gen_cohort(spec), Error);

  spec = small_cohort(1);
  spec.atlas_size = 2;
  CHECK_THROWS_AS(gen_cohort(spec), Error);

  spec = small_cohort(1);
  spec.rel_sd = -0.1;
  CHECK_THROWS_AS(gen_cohort(spec), Error);

  spec = small_cohort(1);
  PlantedPhenotype p;
  p.name = "height";
  spec.phenotypes.push_back(p);
  CHECK_THROWS_AS(gen_cohort(spec), Error);

  spec = small_cohort(1);
  p.name = "age";
  p.coefficients.push_back({MeasureKind::Length, 9, 1.0});  // no such cluster
  spec.phenotypes.push_back(p);
  CHECK_THROWS_AS(gen_cohort(spec), Error);

  spec = small_cohort(1);
  p.coefficients = {{MeasureKind::Length_N, 1, 1.0}};  // derived measure
  spec.phenotypes = {p};
  CHECK_THROWS_AS(gen_cohort(spec), Error);

  spec = small_cohort(1);
  p.coefficients.clear();
  p.noise_r_target = 1.5;
  spec.phenotypes = {p};
  CHECK_THROWS_AS(gen_cohort(spec), Error);
}

TEST_CASE("written cohorts load back with matching features") {
  TempDir dir;
  CohortSpec spec = small_cohort(77);
  PlantedPhenotype age;
  age.name = "age";
  age.base = 50.0;
  age.noise_sd = 2.0;
  age.coefficients.push_back({MeasureKind::Length, 1, 0.1});
  spec.phenotypes.push_back(age);
  spec.sex.coefficients.push_back({MeasureKind::Length, 1, 1.0});

  const CohortResult cohort = gen_cohort(spec);
  write_cohort(cohort, dir.path);

  CHECK(fs::exists(dir.path / "ground_truth.json"));
  CHECK(fs::exists(dir.path / "phenotypes.csv"));
  CHECK(fs::exists(dir.path / "subjects" / "S0001" / "clusters" /
                   "cluster_00001.tck"));
  CHECK(fs::exists(dir.path / "subjects" / "S0001" / "scalars" /
                   "cluster_00001.fa.tsf"));

  // phenotype table round-trips the planted values
  const auto table = load_phenotypes(read_file(dir.path / "phenotypes.csv"));
  REQUIRE(table.size() == 12);
  for (const SubjectData& s : cohort.subjects) {
    const PhenotypeRecord& disk = table.at(s.subject_id);
    CHECK(disk.age.value() ==
          doctest::Approx(s.phenotypes.age.value()).epsilon(1e-12));
    CHECK(disk.sex.value() == s.phenotypes.sex.value());
  }

  // geometry survives the float32 track format within quantization error
  const SubjectData loaded =
      load_subject(dir.path / "subjects" / "S0005", SubjectLayout{3});
  const SubjectData& orig = cohort.subjects[4];
  REQUIRE(loaded.cluster_count() == 3);
  for (int j = 0; j < 3; ++j) {
    const auto a = cluster_measures(orig.clusters[j]);
    const auto b = cluster_measures(loaded.clusters[j]);
    CHECK(b.length == doctest::Approx(a.length).epsilon(1e-5));
    CHECK(b.diameter == doctest::Approx(a.diameter).epsilon(1e-4));
    CHECK(b.nos == a.nos);
    CHECK(b.fa == doctest::Approx(a.fa).epsilon(1e-6));
    CHECK(b.md == doctest::Approx(a.md).epsilon(1e-6));
  }
}

TEST_CASE("cohort configuration keys") {
  FlatConfig config;
  config.set("seed", "123");
  config.set("subjects", "15");
  config.set("clusters", "4");
  config.set("atlas_size", "6");
  config.set("rel_sd", "0.2");
  config.set("streamlines", "25");
  config.set("points", "18");
  config.set("length", "42");
  config.set("spread", "1.1");
  config.set("arc_fraction", "0");
  config.set("age_base", "47");
  config.set("age_noise_r", "0.85");
  config.set("age_coeffs", "Length:2:0.3, Diameter:1:-2");
  config.set("sex_coeffs", "NoS:3:1");
  config.set("sex_steepness", "6");

  SUBCASE("values land in the spec") {
    const CohortSpec spec = cohort_from_config(config);
    CHECK(spec.seed == 123);
    CHECK(spec.subject_count == 15);
    CHECK(spec.cluster_count == 4);
    CHECK(spec.atlas_size == 6);
    CHECK(spec.rel_sd == 0.2);
    REQUIRE(spec.clusters.size() == 4);
    for (const BundleSpec& b : spec.clusters) {
      CHECK(b.length == 42.0);
      CHECK(b.spread == 1.1);
      CHECK(b.streamline_count == 25);
      CHECK(b.points_per_streamline == 18);
      CHECK(b.centerline == CenterlineKind::straight);
    }
    REQUIRE(spec.phenotypes.size() == 1);
    CHECK(spec.phenotypes[0].name == "age");
    CHECK(spec.phenotypes[0].base == 47.0);
    CHECK(spec.phenotypes[0].noise_r_target == 0.85);
    REQUIRE(spec.phenotypes[0].coefficients.size() == 2);
    CHECK(spec.phenotypes[0].coefficients[0].measure == MeasureKind::Length);
    CHECK(spec.phenotypes[0].coefficients[0].cluster_id == 2);
    CHECK(spec.phenotypes[0].coefficients[0].beta == 0.3);
    CHECK(spec.phenotypes[0].coefficients[1].beta == -2.0);
    REQUIRE(spec.sex.coefficients.size() == 1);
    CHECK(spec.sex.coefficients[0].measure == MeasureKind::NoS);
    CHECK(spec.sex.steepness == 6.0);
    // the config round-trips into a runnable cohort
    CHECK_NOTHROW(gen_cohort(spec));
  }
  SUBCASE("arc_fraction one bends every cluster") {
    config.set("arc_fraction", "1");
    const CohortSpec spec = cohort_from_config(config);
    for (const BundleSpec& b : spec.clusters)
      CHECK(b.centerline == CenterlineKind::arc);
  }
  SUBCASE("template ranges spread the clusters") {
    config.set("length_range", "30,60");
    config.set("streamline_range", "20,40");
    const CohortSpec spec = cohort_from_config(config);
    double lo = 1e9, hi = -1e9;
    for (const BundleSpec& b : spec.clusters) {
      lo = std::min(lo, b.length);
      hi = std::max(hi, b.length);
      CHECK(b.length >= 30.0);
      CHECK(b.length <= 60.0);
      CHECK(b.streamline_count >= 20);
      CHECK(b.streamline_count <= 40);
    }
    CHECK(hi - lo > 1.0);  // the draws actually vary
    // cluster templates do not depend on the subject count
    config.set("subjects", "99");
    const CohortSpec more = cohort_from_config(config);
    for (std::size_t j = 0; j < 4; ++j)
      CHECK(more.clusters[j].length == spec.clusters[j].length);
  }
  SUBCASE("malformed keys are rejected") {
    config.set("length_range", "60,30");
    CHECK_THROWS_AS(cohort_from_config(config), Error);
  }
  SUBCASE("coefficient strings are validated") {
    config.set("length_range", "30,60");
    config.set("age_coeffs", "Length:2");
    CHECK_THROWS_AS(cohort_from_config(config), Error);
    config.set("age_coeffs", "Volume:1:2");
    CHECK_THROWS_AS(cohort_from_config(config), Error);
    config.set("age_coeffs", "Length-N:1:2");
    CHECK_THROWS_AS(cohort_from_config(config), Error);
    config.set("age_coeffs", "Length:0:2");
    CHECK_THROWS_AS(cohort_from_config(config), Error);
    config.set("age_coeffs", "Length:1:x");
    CHECK_THROWS_AS(cohort_from_config(config), Error);
  }
  SUBCASE("seed is required") {
    FlatConfig bare;
    bare.set("subjects", "12");
    CHECK_THROWS_AS(cohort_from_config(bare), Error);
  }
}
