#pragma once
// Synthetic fiber-bundle and cohort generator. Bundles are built from an
// analytic centerline (straight segment or circular arc) whose streamlines
// are rigid translations of the centerline by an isotropic Gaussian offset in
// the plane perpendicular to the midpoint tangent, plus optional per-point
// jitter. The construction has closed-form expectations: mean length -> L and
// midpoint covariance -> sigma^2 in-plane, so the expected diameter is
// 2*sigma. Cohorts plant a known linear phenotype signal on the extracted
// features, which gives end-to-end tests an exact ground truth.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tractshape/config.hpp"
#include "tractshape/types.hpp"

namespace tractshape {

enum class CenterlineKind { straight, arc };

struct BundleSpec {
  double length = 50.0;  // centerline arc length, mm
  CenterlineKind centerline = CenterlineKind::straight;
  double arc_angle = 1.5707963267948966;  // radians subtended by the arc
  double spread = 1.5;                    // sigma of the radial offset, mm
  int streamline_count = 100;
  int points_per_streamline = 30;
  double jitter = 0.0;  // per-point isotropic Gaussian sd, mm
  double fa_mean = 0.5;
  double fa_sd = 0.0;
  double md_mean = 0.7;
  double md_sd = 0.0;
};

// Deterministic under (spec, seed); fills FA/MD channels.
FiberCluster gen_bundle(const BundleSpec& spec, int cluster_id,
                        std::uint64_t seed);

// One planted linear term: beta * feature(measure, cluster_id).
struct PlantedCoefficient {
  MeasureKind measure = MeasureKind::Length;
  int cluster_id = 1;
  double beta = 0.0;
};

struct PlantedPhenotype {
  std::string name;  // age | tpvt | torrt | tfat
  double base = 0.0;
  double noise_sd = 0.0;
  // When > 0, overrides noise_sd: the noise is scaled so a perfect model of
  // the planted signal scores Pearson r ~= noise_r_target.
  double noise_r_target = 0.0;
  std::vector<PlantedCoefficient> coefficients;
};

// Sex is drawn from a logistic probability of the planted score, centered on
// the cohort median (balanced classes) and scaled to unit spread; steepness
// controls how separable the classes are.
struct SexRule {
  double steepness = 4.0;
  std::vector<PlantedCoefficient> coefficients;
};

struct CohortSpec {
  int subject_count = 200;
  int cluster_count = 32;
  int atlas_size = 32;  // slots beyond cluster_count stay missing
  std::vector<BundleSpec> clusters;  // one template per generated cluster
  // Per-(subject, cluster) multiplicative variation of length, spread,
  // streamline count, FA, and MD (each factor 1 + rel_sd * N(0,1)).
  double rel_sd = 0.1;
  // Per-subject global size factor applied to every length and spread;
  // brain-size normalization is designed to remove exactly this.
  double subject_scale_sd = 0.0;
  std::vector<PlantedPhenotype> phenotypes;
  SexRule sex;
  std::uint64_t seed = 0;
};

struct CohortResult {
  std::vector<SubjectData> subjects;
  std::string ground_truth_json;  // spec echo + realized noise sds
};

// Flat-config keys: seed (required), subjects, clusters, atlas_size, rel_sd,
// subject_scale_sd, streamlines, points, length, spread, jitter, arc_angle,
// arc_fraction, fa, fa_sd, md, md_sd, optional per-cluster template ranges
// (length_range, spread_range, streamline_range, fa_range, md_range as
// `lo,hi`), and per phenotype P in {age,tpvt,torrt,tfat}: P_base, P_noise_sd,
// P_noise_r, P_coeffs as `Measure:cluster:beta, ...`; sex_coeffs,
// sex_steepness.
CohortSpec cohort_from_config(const FlatConfig& config);

CohortResult gen_cohort(const CohortSpec& spec);

// <dir>/subjects/<id>/... in the subject directory layout, plus
// <dir>/phenotypes.csv and <dir>/ground_truth.json.
void write_cohort(const CohortResult& cohort,
                  const std::filesystem::path& dir);

}  // namespace tractshape
