#include "tractshape/measures.hpp"

#include <cmath>

namespace tractshape {

namespace {

// Characteristic polynomial p(x) = x^3 - c2 x^2 + c1 x - c0 and derivative.
struct CharPoly {
  double c2, c1, c0;
  double eval(double x) const { return ((x - c2) * x + c1) * x - c0; }
  double deriv(double x) const { return (3.0 * x - 2.0 * c2) * x + c1; }
};

CharPoly char_poly(const Eigen::Matrix3d& a) {
  const double c2 = a.trace();
  const double c1 = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0) +
                    a(0, 0) * a(2, 2) - a(0, 2) * a(2, 0) +
                    a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1);
  const double c0 = a.determinant();
  return {c2, c1, c0};
}

}  // namespace

double sym3_eig_max(const Eigen::Matrix3d& m) {
  const double scale = m.cwiseAbs().maxCoeff();
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-9 * std::max(scale, 1e-300))
    fail(Errc::invalid_input, "matrix is not symmetric");
  const Eigen::Matrix3d a = 0.5 * (m + m.transpose());

  const double p1 = a(0, 1) * a(0, 1) + a(0, 2) * a(0, 2) + a(1, 2) * a(1, 2);
  double e_max;
  if (p1 == 0.0) {
    e_max = a.diagonal().maxCoeff();
  } else {
    const double q = a.trace() / 3.0;
    const double p2 = (a(0, 0) - q) * (a(0, 0) - q) +
                      (a(1, 1) - q) * (a(1, 1) - q) +
                      (a(2, 2) - q) * (a(2, 2) - q) + 2.0 * p1;
    const double p = std::sqrt(p2 / 6.0);
    const Eigen::Matrix3d b = (a - q * Eigen::Matrix3d::Identity()) / p;
    double r = b.determinant() / 2.0;
    r = std::clamp(r, -1.0, 1.0);
    const double phi = std::acos(r) / 3.0;
    e_max = q + 2.0 * p * std::cos(phi);
  }

  // One or two Newton steps on the characteristic polynomial tighten the
  // trigonometric result to ~1e-15 relative. Skip near-stationary points
  // (repeated roots), where the closed form is already the right answer.
  const CharPoly poly = char_poly(a);
  for (int it = 0; it < 2; ++it) {
    const double d = poly.deriv(e_max);
    if (std::fabs(d) < 1e-12 * std::max(1.0, scale * scale)) break;
    const double step = poly.eval(e_max) / d;
    if (!std::isfinite(step)) break;
    e_max -= step;
  }
  return e_max;
}

MidpointCovariance midpoint_covariance(const FiberCluster& cluster) {
  const int n = cluster.streamline_count();
  if (n < 2)
    fail(Errc::invalid_input, "midpoint covariance needs >= 2 streamlines");

  Eigen::Matrix3Xd mids(3, n);
  for (int i = 0; i < n; ++i)
    mids.col(i) = streamline_midpoint(cluster.streamlines[i]);

  const Eigen::Vector3d mean = mids.rowwise().mean();
  const Eigen::Matrix3Xd centered = mids.colwise() - mean;

  MidpointCovariance cov;
  cov.matrix = centered * centered.transpose() / static_cast<double>(n - 1);
  cov.e_max = std::max(0.0, sym3_eig_max(cov.matrix));
  return cov;
}

double cluster_diameter(const FiberCluster& cluster) {
  if (cluster.streamline_count() <= 1) return 0.0;
  return 2.0 * std::sqrt(midpoint_covariance(cluster).e_max);
}

double cluster_mean_length(const FiberCluster& cluster) {
  if (cluster.missing()) return 0.0;
  double sum = 0;
  for (const Streamline& s : cluster.streamlines) sum += streamline_length(s);
  return sum / static_cast<double>(cluster.streamline_count());
}

double cluster_elongation(const FiberCluster& cluster) {
  if (cluster.streamline_count() <= 1) return 0.0;
  const double diameter = cluster_diameter(cluster);
  if (diameter <= kElongationDiameterFloor) return 0.0;
  return cluster_mean_length(cluster) / diameter;
}

double cluster_scalar_mean(const FiberCluster& cluster,
                           const std::string& channel) {
  if (cluster.missing()) return 0.0;
  auto it = cluster.scalar_channels.find(channel);
  if (it == cluster.scalar_channels.end())
    fail(Errc::missing_channel, "cluster " + std::to_string(cluster.cluster_id)
                                    + " has no `" + channel + "` channel");
  double sum = 0;
  Eigen::Index count = 0;
  for (const ScalarTrack& track : it->second) {
    sum += track.sum();
    count += track.size();
  }
  if (count == 0) fail(Errc::invalid_input, "channel has no points");
  return sum / static_cast<double>(count);
}

ClusterMeasures cluster_measures(const FiberCluster& cluster) {
  ClusterMeasures m;
  if (cluster.missing()) return m;
  m.nos = cluster.streamline_count();
  m.length = cluster_mean_length(cluster);
  m.diameter = cluster_diameter(cluster);
  m.elongation = cluster_elongation(cluster);
  m.fa = cluster_scalar_mean(cluster, "FA");
  m.md = cluster_scalar_mean(cluster, "MD");
  return m;
}

std::map<MeasureKind, FeatureVector> extract_features(
    const SubjectData& subject) {
  const int n = subject.cluster_count();
  std::map<MeasureKind, FeatureVector> out;
  for (MeasureKind kind : kRawMeasures) {
    out[kind].measure = kind;
    out[kind].values = Eigen::VectorXd::Zero(n);
  }
  for (int i = 0; i < n; ++i) {
    const FiberCluster& c = subject.clusters[i];
    if (c.missing()) continue;  // zero-imputed
    const ClusterMeasures m = cluster_measures(c);
    out[MeasureKind::FA].values[i] = m.fa;
    out[MeasureKind::MD].values[i] = m.md;
    out[MeasureKind::NoS].values[i] = static_cast<double>(m.nos);
    out[MeasureKind::Length].values[i] = m.length;
    out[MeasureKind::Diameter].values[i] = m.diameter;
    out[MeasureKind::Elongation].values[i] = m.elongation;
  }
  return out;
}

std::vector<bool> missing_cluster_mask(const SubjectData& subject) {
  std::vector<bool> mask(subject.clusters.size());
  for (std::size_t i = 0; i < subject.clusters.size(); ++i)
    mask[i] = subject.clusters[i].missing();
  return mask;
}

}  // namespace tractshape
