#pragma once

#include <Eigen/Dense>
#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tractshape/error.hpp"

namespace tractshape {

// Points are the columns of a 3xN matrix, coordinates in mm.
template <typename Scalar>
using PointsT = Eigen::Matrix<Scalar, 3, Eigen::Dynamic>;

using Streamline = PointsT<double>;

// One scalar value per streamline point (e.g. FA or MD along the line).
using ScalarTrack = Eigen::VectorXd;

// Cluster count of the white-matter atlas parcellation.
inline constexpr int kAtlasClusterCount = 1516;

struct FiberCluster {
  int cluster_id = 0;  // 1-based atlas id
  std::vector<Streamline> streamlines;  // empty means the cluster is missing
  std::map<std::string, std::vector<ScalarTrack>> scalar_channels;

  bool missing() const noexcept { return streamlines.empty(); }
  int streamline_count() const noexcept {
    return static_cast<int>(streamlines.size());
  }
};

struct PhenotypeRecord {
  std::optional<int> sex;  // 0 = F, 1 = M
  std::optional<double> age;
  std::optional<double> tpvt;
  std::optional<double> torrt;
  std::optional<double> tfat;
};

struct SubjectData {
  std::string subject_id;
  std::vector<FiberCluster> clusters;  // slot i holds cluster_id i+1
  PhenotypeRecord phenotypes;

  int cluster_count() const noexcept {
    return static_cast<int>(clusters.size());
  }
};

enum class MeasureKind {
  FA,
  MD,
  NoS,
  Length,
  Diameter,
  Elongation,
  NoS_N,
  Length_N,
  Diameter_N,
  Elongation_N,
};

enum class MeasureCategory { Microstructure, Connectivity, Shape };

inline constexpr std::array<MeasureKind, 6> kRawMeasures = {
    MeasureKind::FA,     MeasureKind::MD,       MeasureKind::NoS,
    MeasureKind::Length, MeasureKind::Diameter, MeasureKind::Elongation};

inline constexpr bool is_normalized(MeasureKind m) noexcept {
  switch (m) {
    case MeasureKind::NoS_N:
    case MeasureKind::Length_N:
    case MeasureKind::Diameter_N:
    case MeasureKind::Elongation_N:
      return true;
    default:
      return false;
  }
}

inline constexpr MeasureCategory category_of(MeasureKind m) noexcept {
  switch (m) {
    case MeasureKind::FA:
    case MeasureKind::MD:
      return MeasureCategory::Microstructure;
    case MeasureKind::NoS:
    case MeasureKind::NoS_N:
      return MeasureCategory::Connectivity;
    default:
      return MeasureCategory::Shape;
  }
}

// Normalized twin of a connectivity/shape measure; microstructure measures
// have none.
inline MeasureKind normalized_kind(MeasureKind m) {
  switch (m) {
    case MeasureKind::NoS: return MeasureKind::NoS_N;
    case MeasureKind::Length: return MeasureKind::Length_N;
    case MeasureKind::Diameter: return MeasureKind::Diameter_N;
    case MeasureKind::Elongation: return MeasureKind::Elongation_N;
    default:
      fail(Errc::invalid_input,
           "no normalized variant exists for microstructure measures");
  }
}

inline const char* measure_name(MeasureKind m) noexcept {
  switch (m) {
    case MeasureKind::FA: return "FA";
    case MeasureKind::MD: return "MD";
    case MeasureKind::NoS: return "NoS";
    case MeasureKind::Length: return "Length";
    case MeasureKind::Diameter: return "Diameter";
    case MeasureKind::Elongation: return "Elongation";
    case MeasureKind::NoS_N: return "NoS-N";
    case MeasureKind::Length_N: return "Length-N";
    case MeasureKind::Diameter_N: return "Diameter-N";
    case MeasureKind::Elongation_N: return "Elongation-N";
  }
  return "?";
}

std::optional<MeasureKind> measure_from_name(const std::string& name);

// Per-subject vector with one entry per cluster slot (canonically 1516).
struct FeatureVector {
  MeasureKind measure = MeasureKind::Length;
  Eigen::VectorXd values;
};

// Rows are subjects (keyed by subject_ids), columns are cluster slots.
struct FeatureMatrix {
  MeasureKind measure = MeasureKind::Length;
  std::vector<std::string> subject_ids;
  Eigen::MatrixXd values;
};

struct ClusterMeasures {
  double length = 0;      // mm
  double diameter = 0;    // mm
  double elongation = 0;  // dimensionless
  int nos = 0;
  double fa = 0;
  double md = 0;
};

inline std::optional<MeasureKind> measure_from_name(const std::string& name) {
  static const std::array<MeasureKind, 10> all = {
      MeasureKind::FA,       MeasureKind::MD,         MeasureKind::NoS,
      MeasureKind::Length,   MeasureKind::Diameter,   MeasureKind::Elongation,
      MeasureKind::NoS_N,    MeasureKind::Length_N,   MeasureKind::Diameter_N,
      MeasureKind::Elongation_N};
  for (MeasureKind m : all)
    if (name == measure_name(m)) return m;
  return std::nullopt;
}

}  // namespace tractshape
