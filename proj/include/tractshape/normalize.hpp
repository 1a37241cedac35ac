#pragma once

#include <Eigen/Dense>
#include <vector>

#include "tractshape/error.hpp"
#include "tractshape/types.hpp"

namespace tractshape {

// Divides a connectivity/shape vector by the subject-specific mean over the
// non-missing clusters. Missing entries stay zero; the result carries the
// `-N` measure kind.
FeatureVector brain_size_normalize(const FeatureVector& v,
                                   const std::vector<bool>& missing_mask);

// Max-min rescaling over all entries (imputed zeros included) to [0, 1];
// constant vectors map to all zeros.
inline Eigen::VectorXd minmax_normalize(const Eigen::VectorXd& values) {
  if (values.size() == 0) return values;
  const double lo = values.minCoeff();
  const double hi = values.maxCoeff();
  if (hi == lo) return Eigen::VectorXd::Zero(values.size());
  return (values.array() - lo) / (hi - lo);
}

inline FeatureVector minmax_normalize(const FeatureVector& v) {
  return {v.measure, minmax_normalize(v.values)};
}

inline FeatureVector brain_size_normalize(const FeatureVector& v,
                                          const std::vector<bool>& missing_mask) {
  if (static_cast<Eigen::Index>(missing_mask.size()) != v.values.size())
    fail(Errc::dimension_mismatch, "mask length differs from vector length");
  const MeasureCategory cat = category_of(v.measure);
  if (cat == MeasureCategory::Microstructure || is_normalized(v.measure))
    fail(Errc::invalid_input,
         "brain-size normalization applies to raw connectivity/shape "
         "measures only");

  double sum = 0;
  Eigen::Index count = 0;
  for (Eigen::Index i = 0; i < v.values.size(); ++i) {
    if (missing_mask[static_cast<std::size_t>(i)]) continue;
    sum += v.values[i];
    ++count;
  }
  if (count == 0)
    fail(Errc::no_reference, "all clusters are missing");
  const double reference = sum / static_cast<double>(count);

  FeatureVector out;
  out.measure = normalized_kind(v.measure);
  out.values = Eigen::VectorXd::Zero(v.values.size());
  if (reference <= 0.0) {
    if ((v.values.array() != 0.0).any())
      fail(Errc::degenerate_reference,
           "non-positive reference mean for a nonzero vector");
    return out;  // identically zero vector normalizes to zero
  }
  for (Eigen::Index i = 0; i < v.values.size(); ++i)
    if (!missing_mask[static_cast<std::size_t>(i)])
      out.values[i] = v.values[i] / reference;
  return out;
}

}  // namespace tractshape
