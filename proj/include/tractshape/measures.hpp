#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "tractshape/error.hpp"
#include "tractshape/types.hpp"

namespace tractshape {

// Total polyline length: sum of Euclidean segment lengths over the columns.
// A single point has length zero.
template <typename Derived>
typename Derived::Scalar streamline_length(
    const Eigen::MatrixBase<Derived>& points) {
  using Scalar = typename Derived::Scalar;
  Scalar total = 0;
  for (Eigen::Index i = 1; i < points.cols(); ++i)
    total += (points.col(i) - points.col(i - 1)).norm();
  return total;
}

// Point at half the arc length, linearly interpolated inside the containing
// segment. Robust to non-uniform point sampling; a single-point (or
// zero-length) streamline maps to its first point.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, 3, 1> streamline_midpoint(
    const Eigen::MatrixBase<Derived>& points) {
  using Scalar = typename Derived::Scalar;
  const Scalar half = streamline_length(points) / Scalar(2);
  if (points.cols() == 1 || half == Scalar(0)) return points.col(0);
  Scalar walked = 0;
  for (Eigen::Index i = 1; i < points.cols(); ++i) {
    const Scalar seg = (points.col(i) - points.col(i - 1)).norm();
    if (walked + seg >= half && seg > Scalar(0)) {
      const Scalar t = (half - walked) / seg;
      return points.col(i - 1) + t * (points.col(i) - points.col(i - 1));
    }
    walked += seg;
  }
  return points.col(points.cols() - 1);  // numeric fallthrough at the end
}

// Largest eigenvalue of a symmetric 3x3 matrix by the trigonometric
// closed form, polished with Newton steps on the characteristic polynomial.
// Rejects matrices that are asymmetric beyond 1e-9 relative.
double sym3_eig_max(const Eigen::Matrix3d& m);

struct MidpointCovariance {
  Eigen::Matrix3d matrix = Eigen::Matrix3d::Zero();  // mm^2, sample (n-1)
  double e_max = 0;
};

// Sample covariance of the streamline midpoints; requires >= 2 streamlines.
MidpointCovariance midpoint_covariance(const FiberCluster& cluster);

// Cross-sectional diameter 2*sqrt(e_max) of the midpoint covariance.
// Zero for missing and single-streamline clusters.
double cluster_diameter(const FiberCluster& cluster);

// Mean streamline length over the cluster; zero when missing.
double cluster_mean_length(const FiberCluster& cluster);

// Mean length divided by diameter; zero when the cluster has at most one
// streamline or a degenerate (<= 1e-9 mm) diameter.
double cluster_elongation(const FiberCluster& cluster);

// Mean of a scalar channel pooled over every point of every streamline.
// Missing clusters contribute zero; a populated cluster without the channel
// is an error.
double cluster_scalar_mean(const FiberCluster& cluster,
                           const std::string& channel);

// All per-cluster measures in one pass; a missing cluster is all zeros.
ClusterMeasures cluster_measures(const FiberCluster& cluster);

// Six raw feature vectors (FA, MD, NoS, Length, Diameter, Elongation), one
// entry per cluster slot, cluster_id i stored at index i-1.
std::map<MeasureKind, FeatureVector> extract_features(
    const SubjectData& subject);

// True where the subject's cluster slot is empty.
std::vector<bool> missing_cluster_mask(const SubjectData& subject);

inline constexpr double kElongationDiameterFloor = 1e-9;  // mm

}  // namespace tractshape
