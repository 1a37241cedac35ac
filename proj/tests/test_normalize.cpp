#include <doctest.h>

#include "tractshape/error.hpp"
#include "tractshape/normalize.hpp"
#include "tractshape/rng.hpp"

using namespace tractshape;

namespace {
FeatureVector fv(MeasureKind kind, std::initializer_list<double> v) {
  FeatureVector out;
  out.measure = kind;
  out.values.resize(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out.values[i++] = x;
  return out;
}
}  // namespace

TEST_CASE("brain-size normalization divides by the non-missing mean") {
  // reference = mean(2, 4) = 3; the missing slot stays zero
  const FeatureVector out = brain_size_normalize(
      fv(MeasureKind::Length, {2, 4, 0}), {false, false, true});
  CHECK(out.measure == MeasureKind::Length_N);
  CHECK(out.values[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(out.values[1] == doctest::Approx(4.0 / 3.0).epsilon(1e-15));
  CHECK(out.values[2] == 0.0);

  SUBCASE("constant vector maps to ones on non-missing entries") {
    const FeatureVector ones = brain_size_normalize(
        fv(MeasureKind::NoS, {7, 7, 0, 7}), {false, false, true, false});
    CHECK(ones.measure == MeasureKind::NoS_N);
    CHECK(ones.values[0] == doctest::Approx(1.0));
    CHECK(ones.values[1] == doctest::Approx(1.0));
    CHECK(ones.values[2] == 0.0);
    CHECK(ones.values[3] == doctest::Approx(1.0));
  }
  SUBCASE("output mean over non-missing entries is one") {
    Rng rng(12);
    for (int rep = 0; rep < 30; ++rep) {
      const int n = 5 + static_cast<int>(rng.uniform_index(20));
      FeatureVector v;
      v.measure = MeasureKind::Diameter;
      v.values.resize(n);
      std::vector<bool> mask(n, false);
      for (int i = 0; i < n; ++i) {
        if (rng.uniform() < 0.2 && i > 0) {
          mask[i] = true;
          v.values[i] = 0;
        } else {
          v.values[i] = rng.uniform(0.5, 10.0);
        }
      }
      const FeatureVector out2 = brain_size_normalize(v, mask);
      double sum = 0;
      int count = 0;
      for (int i = 0; i < n; ++i)
        if (!mask[i]) sum += out2.values[i], ++count;
      CHECK(sum / count == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
  SUBCASE("scale invariance") {
    Rng rng(13);
    FeatureVector v;
    v.measure = MeasureKind::Elongation;
    v.values.resize(9);
    for (int i = 0; i < 9; ++i) v.values[i] = rng.uniform(0.1, 5.0);
    const std::vector<bool> mask(9, false);
    const FeatureVector base = brain_size_normalize(v, mask);
    FeatureVector scaled = v;
    scaled.values *= 5.0;
    const FeatureVector out5 = brain_size_normalize(scaled, mask);
    CHECK(out5.values.isApprox(base.values, 1e-12));
  }
}

TEST_CASE("brain-size normalization error cases") {
  CHECK_THROWS_AS(brain_size_normalize(fv(MeasureKind::Length, {1, 2}),
                                       {true, true}),
                  Error);  // everything missing
  CHECK_THROWS_AS(brain_size_normalize(fv(MeasureKind::FA, {1, 2}),
                                       {false, false}),
                  Error);  // microstructure has no -N variant
  CHECK_THROWS_AS(brain_size_normalize(fv(MeasureKind::Length_N, {1, 2}),
                                       {false, false}),
                  Error);  // already normalized
  CHECK_THROWS_AS(brain_size_normalize(fv(MeasureKind::Length, {1, 2}),
                                       {false, false, false}),
                  Error);  // mask length mismatch
  // non-positive reference with signal present
  CHECK_THROWS_AS(brain_size_normalize(fv(MeasureKind::Length, {2, -2}),
                                       {false, false}),
                  Error);
  // an identically zero vector stays zero rather than erroring
  const FeatureVector zero = brain_size_normalize(
      fv(MeasureKind::Diameter, {0, 0}), {false, false});
  CHECK(zero.values.isZero(0.0));
}

TEST_CASE("max-min normalization") {
  const FeatureVector out = minmax_normalize(fv(MeasureKind::Length, {1, 3, 5}));
  CHECK(out.measure == MeasureKind::Length);
  CHECK(out.values[0] == 0.0);
  CHECK(out.values[1] == doctest::Approx(0.5));
  CHECK(out.values[2] == 1.0);

  CHECK(minmax_normalize(fv(MeasureKind::FA, {2, 2, 2})).values.isZero(0.0));
  CHECK(minmax_normalize(Eigen::VectorXd()).size() == 0);

  SUBCASE("range property and idempotence") {
    Rng rng(14);
    for (int rep = 0; rep < 30; ++rep) {
      Eigen::VectorXd v(12);
      for (int i = 0; i < 12; ++i) v[i] = rng.normal(0, 100);
      const Eigen::VectorXd n1 = minmax_normalize(v);
      CHECK(n1.minCoeff() == 0.0);
      CHECK(n1.maxCoeff() == 1.0);
      CHECK((n1.array() >= 0.0).all());
      CHECK((n1.array() <= 1.0).all());
      const Eigen::VectorXd n2 = minmax_normalize(n1);
      CHECK(n2.isApprox(n1, 1e-12));
    }
  }
}
