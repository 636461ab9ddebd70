#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <random>
#include <vector>

#include "vtc/errors.hpp"
#include "vtc/pca.hpp"

using namespace vtc;

namespace {

std::vector<Vec> random_points(int n, int d, uint64_t seed, double scale = 1.0) {
  Rng rng = make_rng(seed, 0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<Vec> pts;
  for (int i = 0; i < n; ++i) {
    Vec v(d);
    for (int j = 0; j < d; ++j) v[j] = scale * gauss(rng);
    pts.push_back(v);
  }
  return pts;
}

}  // namespace

TEST_CASE("pca: a planar cloud is explained exactly by two components") {
  // Points = mean + random combinations of two fixed orthogonal directions.
  Vec a = Vec::Zero(5), b = Vec::Zero(5), mean = Vec::Constant(5, 2.0);
  a[0] = 1.0;
  a[3] = 1.0;
  b[1] = 1.0;
  b[4] = -1.0;
  Rng rng = make_rng(5, 0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<Vec> pts;
  for (int i = 0; i < 40; ++i) pts.push_back(mean + gauss(rng) * a + 0.3 * gauss(rng) * b);

  PcaResult res = pca_project(pts, 2, 1);
  REQUIRE(res.dims_found() == 2);
  CHECK(res.warnings.empty());
  CHECK(res.explained_ratio[0] + res.explained_ratio[1] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(res.explained_ratio[0] >= res.explained_ratio[1]);
  CHECK(std::abs(res.components.row(0).norm() - 1.0) < 1e-10);
  CHECK(std::abs(res.components.row(1).norm() - 1.0) < 1e-10);
  CHECK(std::abs(res.components.row(0).dot(res.components.row(1))) < 1e-8);
  CHECK((res.mean - mean).norm() < 0.5);  // sample mean of a centered cloud
}

TEST_CASE("pca: power iteration matches a dense eigensolver") {
  std::vector<Vec> pts = random_points(50, 8, 9);
  PcaResult res = pca_project(pts, 3, 2);
  REQUIRE(res.dims_found() == 3);

  Mat x(50, 8);
  for (int i = 0; i < 50; ++i) x.row(i) = pts[i].transpose();
  Mat centered = x.rowwise() - x.colwise().mean();
  Mat cov = centered.transpose() * centered / 49.0;
  Eigen::SelfAdjointEigenSolver<Mat> eig(cov);
  // The solver sorts ascending; compare against the top of its spectrum.
  for (int k = 0; k < 3; ++k) {
    const double ref_val = eig.eigenvalues()[7 - k];
    CHECK(res.eigenvalues[k] == doctest::Approx(ref_val).epsilon(1e-8));
    const Vec ref_vec = eig.eigenvectors().col(7 - k);
    CHECK(std::abs(res.components.row(k).dot(ref_vec)) == doctest::Approx(1.0).epsilon(1e-6));
    // Projections agree up to each component's sign.
    const double sign = res.components.row(k).dot(ref_vec) > 0 ? 1.0 : -1.0;
    const Vec ref_proj = centered * ref_vec * sign;
    CHECK((res.projected.col(k) - ref_proj).cwiseAbs().maxCoeff() < 1e-5);
  }
  double ratio_sum = 0.0;
  for (size_t k = 0; k + 1 < res.explained_ratio.size(); ++k)
    CHECK(res.explained_ratio[k] >= res.explained_ratio[k + 1]);
  for (double r : res.explained_ratio) ratio_sum += r;
  CHECK(ratio_sum <= 1.0 + 1e-6);

  SUBCASE("same seed, same bits") {
    PcaResult again = pca_project(pts, 3, 2);
    CHECK((res.projected - again.projected).norm() == 0.0);
    CHECK((res.components - again.components).norm() == 0.0);
  }
}

TEST_CASE("pca: rank-deficient data yields fewer components and a warning") {
  SUBCASE("identical points have no principal directions") {
    std::vector<Vec> pts(10, Vec::Constant(4, 1.5));
    PcaResult res = pca_project(pts, 2, 0);
    CHECK(res.dims_found() == 0);
    REQUIRE(res.warnings.size() == 1);
    CHECK(res.warnings[0].find("rank deficient") != std::string::npos);
    CHECK(res.projected.cols() == 0);
    CHECK(res.projected.rows() == 10);
  }
  SUBCASE("a line in space has exactly one") {
    Vec dir = Vec::Zero(6);
    dir[2] = 3.0;
    dir[5] = 4.0;
    std::vector<Vec> pts;
    for (int i = 0; i < 12; ++i) pts.push_back(i * 0.5 * dir);
    PcaResult res = pca_project(pts, 3, 0);
    REQUIRE(res.dims_found() == 1);
    CHECK(res.warnings.size() == 1);
    CHECK(res.explained_ratio[0] == doctest::Approx(1.0).epsilon(1e-9));
    // The component is the line's direction (up to sign).
    CHECK(std::abs(res.components.row(0).dot(dir.normalized())) ==
          doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("pca: contract violations are refused") {
  std::vector<Vec> pts = random_points(5, 3, 1);
  CHECK_THROWS_AS(pca_project(pts, 0, 0), ConfigInvalid);
  CHECK_THROWS_AS(pca_project(pts, 5, 0), ConfigInvalid);  // needs dims+1 points
  CHECK_THROWS_AS(pca_project(pts, 4, 0), ConfigInvalid);  // dims exceeds width
  std::vector<Vec> mixed = pts;
  mixed[2] = Vec::Zero(4);
  CHECK_THROWS_AS(pca_project(mixed, 2, 0), DimensionMismatch);
  std::vector<Vec> withnan = pts;
  withnan[1][0] = std::nan("");
  CHECK_THROWS_AS(pca_project(withnan, 2, 0), NonFiniteInput);
}

TEST_CASE("pca: csv export pads to three axes") {
  std::vector<Vec> pts;
  Vec dir = Vec::Unit(4, 1);
  for (int i = 0; i < 8; ++i) pts.push_back(i * dir);
  PcaResult res = pca_project(pts, 2, 0);  // rank 1: one component found
  REQUIRE(res.dims_found() == 1);

  std::vector<std::string> ids, classes;
  for (int i = 0; i < 8; ++i) {
    ids.push_back("s" + std::to_string(i));
    classes.push_back(i % 2 ? "odd" : "even");
  }
  std::string csv = pca_csv(res, ids, classes);
  CHECK(csv.rfind("id,class,x,y,z\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 9);
  CHECK(csv.find("s0,even,") != std::string::npos);
  CHECK(csv.find(",0.000000,0.000000\n") != std::string::npos);  // padded y,z
  CHECK_THROWS_AS(pca_csv(res, {"one"}, classes), ShapeMismatch);
}
