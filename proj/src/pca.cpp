#include "vtc/pca.hpp"

#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include "vtc/errors.hpp"

namespace vtc {
namespace {

constexpr int kMaxIters = 5000;
constexpr double kConvergence = 1e-14;

// Removes the projections onto previously found components; keeps power
// iteration from drifting back toward dominant directions.
void deflate(Vec& v, const Mat& components, int found) {
  for (int k = 0; k < found; ++k) v -= components.row(k).dot(v) * components.row(k).transpose();
}

}  // namespace

PcaResult pca_project(const std::vector<Vec>& embeddings, int dims, uint64_t seed) {
  const int n = static_cast<int>(embeddings.size());
  if (dims < 1) throw ConfigInvalid("pca_project: dims must be >= 1");
  if (n < dims + 1)
    throw ConfigInvalid("pca_project: need at least dims+1 points, have " + std::to_string(n));
  const int d = static_cast<int>(embeddings[0].size());
  for (const auto& e : embeddings)
    if (e.size() != d) throw DimensionMismatch("pca_project: mixed embedding widths");
  if (dims > d)
    throw ConfigInvalid("pca_project: dims " + std::to_string(dims) + " exceeds width " +
                        std::to_string(d));

  Mat x(n, d);
  for (int i = 0; i < n; ++i) x.row(i) = embeddings[i].transpose();
  if (!all_finite(x)) throw NonFiniteInput("pca_project: non-finite embedding");

  PcaResult res;
  res.mean = x.colwise().mean().transpose();
  Mat centered = x.rowwise() - res.mean.transpose();
  const Mat cov = centered.transpose() * centered / (n - 1);
  const double total_var = cov.trace();

  res.components = Mat::Zero(dims, d);
  res.eigenvalues = Vec::Zero(dims);
  Rng rng = make_rng(seed, 0x70636131ULL);  // component-start stream
  std::normal_distribution<double> gauss(0.0, 1.0);
  int found = 0;
  for (int k = 0; k < dims; ++k) {
    Vec v(d);
    for (int j = 0; j < d; ++j) v[j] = gauss(rng);
    deflate(v, res.components, found);
    double vn = v.norm();
    if (vn < 1e-12) break;  // start vector collapsed: nothing left to find
    v /= vn;
    double lambda = 0.0;
    for (int it = 0; it < kMaxIters; ++it) {
      Vec next = cov * v;
      deflate(next, res.components, found);
      const double norm = next.norm();
      if (norm < 1e-300) {
        lambda = 0.0;
        break;
      }
      next /= norm;
      const double delta = (next - v).norm();
      v = next;
      lambda = v.dot(cov * v);
      if (delta < kConvergence) break;
    }
    // Rank ran out: the leftover variance is numerically zero.
    if (lambda <= total_var * 1e-12 || !std::isfinite(lambda)) break;
    res.components.row(found) = v.transpose();
    res.eigenvalues[found] = lambda;
    ++found;
  }
  if (found < dims) {
    res.warnings.push_back("rank deficient: found " + std::to_string(found) + " of " +
                           std::to_string(dims) + " requested components");
    res.components.conservativeResize(found, d);
    res.eigenvalues.conservativeResize(found);
  }
  for (int k = 0; k < found; ++k)
    res.explained_ratio.push_back(total_var > 0.0 ? res.eigenvalues[k] / total_var : 0.0);
  res.projected = centered * res.components.transpose();
  return res;
}

std::string pca_csv(const PcaResult& result, const std::vector<std::string>& ids,
                    const std::vector<std::string>& classes) {
  const int n = static_cast<int>(result.projected.rows());
  if (static_cast<int>(ids.size()) != n || static_cast<int>(classes.size()) != n)
    throw ShapeMismatch("pca_csv: ids/classes must match the projected point count");
  const int dims = result.dims_found();
  std::ostringstream out;
  out << "id,class";
  const char* axis_names[] = {"x", "y", "z"};
  for (int k = 0; k < std::max(dims, 3); ++k) {
    if (k < 3)
      out << "," << axis_names[k];
    else
      out << ",c" << k;
  }
  out << "\n";
  char buf[64];
  for (int i = 0; i < n; ++i) {
    out << ids[i] << "," << classes[i];
    for (int k = 0; k < std::max(dims, 3); ++k) {
      const double v = k < dims ? result.projected(i, k) : 0.0;
      std::snprintf(buf, sizeof(buf), "%.6f", v);
      out << "," << buf;
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace vtc
