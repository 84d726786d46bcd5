// Copyright 2026 The vitdae Authors
// SPDX-License-Identifier: Apache-2.0

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>

#include "vitdae/error.hpp"
#include "vitdae/eval.hpp"

namespace vitdae {

namespace {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void check_matrix(const FeatureMatrix& m, const char* what) {
  check(m.values.size() == m.rows * m.dim, ErrorCode::kShape,
        std::string(what) + ": matrix size does not match rows x dim");
  for (double v : m.values)
    check(std::isfinite(v), ErrorCode::kInvalidArgument, std::string(what) + ": non-finite value");
}

double squared_distance(const double* a, const double* b, std::size_t dim) {
  double s = 0;
  for (std::size_t j = 0; j < dim; ++j) {
    const double r = a[j] - b[j];
    s += r * r;
  }
  return s;
}

Mat to_matrix(const std::vector<double>& v, std::size_t dim) {
  return Eigen::Map<const Mat>(v.data(), static_cast<Eigen::Index>(dim),
                               static_cast<Eigen::Index>(dim));
}

}  // namespace

FeatureStats feature_stats(const FeatureMatrix& features) {
  check_matrix(features, "feature stats");
  check(features.rows >= 2 && features.dim >= 1, ErrorCode::kInvalidArgument,
        "feature stats: need at least 2 samples");
  const std::size_t n = features.rows, d = features.dim;
  FeatureStats s;
  s.dim = d;
  s.n = n;
  s.mean.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) s.mean[j] += features.row(i)[j];
  for (auto& m : s.mean) m /= static_cast<double>(n);
  s.cov.assign(d * d, 0.0);
  std::vector<double> r(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) r[j] = features.row(i)[j] - s.mean[j];
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = a; b < d; ++b) s.cov[a * d + b] += r[a] * r[b];
  }
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = a; b < d; ++b) {
      s.cov[a * d + b] /= static_cast<double>(n - 1);
      s.cov[b * d + a] = s.cov[a * d + b];
    }
  return s;
}

double frechet_distance(const FeatureStats& a, const FeatureStats& b, double reg) {
  check(a.dim == b.dim && a.dim > 0, ErrorCode::kShape,
        "frechet: dimension mismatch " + std::to_string(a.dim) + " vs " + std::to_string(b.dim));
  const std::size_t d = a.dim;
  check(a.mean.size() == d && b.mean.size() == d && a.cov.size() == d * d &&
            b.cov.size() == d * d,
        ErrorCode::kShape, "frechet: malformed stats");
  for (const auto* s : {&a, &b}) {
    for (double v : s->mean)
      check(std::isfinite(v), ErrorCode::kInvalidArgument, "frechet: non-finite mean");
    for (double v : s->cov)
      check(std::isfinite(v), ErrorCode::kInvalidArgument, "frechet: non-finite covariance");
  }
  double mean_term = 0;
  for (std::size_t j = 0; j < d; ++j) mean_term += (a.mean[j] - b.mean[j]) * (a.mean[j] - b.mean[j]);

  Mat ca = to_matrix(a.cov, d), cb = to_matrix(b.cov, d);
  ca = 0.5 * (ca + ca.transpose()).eval();
  cb = 0.5 * (cb + cb.transpose()).eval();
  ca.diagonal().array() += reg;
  cb.diagonal().array() += reg;

  Eigen::SelfAdjointEigenSolver<Mat> eig_a(ca);
  const Eigen::VectorXd root = eig_a.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Mat sqrt_a = eig_a.eigenvectors() * root.asDiagonal() * eig_a.eigenvectors().transpose();
  Mat inner = sqrt_a * cb * sqrt_a;
  inner = 0.5 * (inner + inner.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Mat> eig_inner(inner, Eigen::EigenvaluesOnly);
  const double trace_sqrt = eig_inner.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double value = mean_term + ca.trace() + cb.trace() - 2.0 * trace_sqrt;
  return std::max(value, 0.0);
}

ManifoldEstimate estimate_manifold(const FeatureMatrix& points, std::size_t k) {
  check_matrix(points, "manifold");
  check(k >= 1 && k < points.rows, ErrorCode::kInvalidArgument,
        "manifold: need k < n (k=" + std::to_string(k) + ", n=" + std::to_string(points.rows) + ")");
  ManifoldEstimate m;
  m.points = points;
  m.k = k;
  m.radii_sq.resize(points.rows);
  std::vector<double> dist(points.rows - 1);
  for (std::size_t i = 0; i < points.rows; ++i) {
    std::size_t w = 0;
    for (std::size_t j = 0; j < points.rows; ++j)
      if (j != i) dist[w++] = squared_distance(points.row(i), points.row(j), points.dim);
    std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k - 1), dist.end());
    m.radii_sq[i] = dist[k - 1];
  }
  return m;
}

double manifold_coverage(const ManifoldEstimate& support, const FeatureMatrix& queries) {
  check_matrix(queries, "manifold coverage");
  check(queries.dim == support.points.dim, ErrorCode::kShape,
        "manifold coverage: dimension mismatch");
  if (queries.rows == 0) return 0.0;
  std::size_t inside = 0;
  for (std::size_t q = 0; q < queries.rows; ++q) {
    for (std::size_t i = 0; i < support.points.rows; ++i) {
      if (squared_distance(queries.row(q), support.points.row(i), queries.dim) <=
          support.radii_sq[i]) {
        ++inside;
        break;
      }
    }
  }
  return static_cast<double>(inside) / static_cast<double>(queries.rows);
}

PrecisionRecall improved_pr(const ManifoldEstimate& real, const ManifoldEstimate& gen) {
  check(real.points.dim == gen.points.dim, ErrorCode::kShape,
        "improved precision/recall: feature dimensions differ");
  return {manifold_coverage(real, gen.points), manifold_coverage(gen, real.points)};
}

PcaFit pca_fit(const FeatureMatrix& points) {
  const FeatureStats s = feature_stats(points);
  const std::size_t d = s.dim;
  Eigen::SelfAdjointEigenSolver<Mat> eig(to_matrix(s.cov, d));
  check(eig.info() == Eigen::Success, ErrorCode::kInternal, "pca: eigensolver failed");
  PcaFit fit;
  fit.dim = d;
  fit.mean = s.mean;
  // Eigen returns ascending order.
  for (std::size_t c = d; c-- > 0;) {
    const auto ci = static_cast<Eigen::Index>(c);
    fit.eigenvalues.push_back(eig.eigenvalues()(ci));
    Eigen::VectorXd v = eig.eigenvectors().col(ci);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    fit.components.insert(fit.components.end(), v.data(), v.data() + d);
  }
  return fit;
}

FeatureMatrix pca_project(const PcaFit& fit, const FeatureMatrix& points, std::size_t components) {
  check(points.dim == fit.dim && components <= fit.dim, ErrorCode::kShape,
        "pca: projection dimension mismatch");
  FeatureMatrix out{points.rows, components, std::vector<double>(points.rows * components)};
  for (std::size_t i = 0; i < points.rows; ++i)
    for (std::size_t c = 0; c < components; ++c) {
      double s = 0;
      for (std::size_t j = 0; j < fit.dim; ++j)
        s += (points.row(i)[j] - fit.mean[j]) * fit.components[c * fit.dim + j];
      out.values[i * components + c] = s;
    }
  return out;
}

ManifoldPlot manifold_plot(const FeatureMatrix& real, const FeatureMatrix& gen, std::size_t k) {
  check_matrix(real, "manifold plot");
  check_matrix(gen, "manifold plot");
  check(real.dim == gen.dim, ErrorCode::kShape, "manifold plot: feature dimensions differ");
  check(real.dim >= 2, ErrorCode::kInvalidArgument, "manifold plot: need at least 2 features");
  check(real.rows >= 3 && gen.rows >= 3, ErrorCode::kInvalidArgument,
        "manifold plot: need at least 3 points per set");
  FeatureMatrix both{real.rows + gen.rows, real.dim, real.values};
  both.values.insert(both.values.end(), gen.values.begin(), gen.values.end());
  const PcaFit fit = pca_fit(both);
  const double top = fit.eigenvalues.front();
  check(top > 1e-12 * std::max(1.0, std::abs(fit.mean.front())), ErrorCode::kInvalidArgument,
        "manifold plot: degenerate covariance (all points identical)");
  ManifoldPlot plot;
  plot.eigenvalues = fit.eigenvalues;
  plot.real_xy = pca_project(fit, real, 2);
  plot.gen_xy = pca_project(fit, gen, 2);
  const std::size_t kr = std::min(k, real.rows - 1), kg = std::min(k, gen.rows - 1);
  for (double r : estimate_manifold(plot.real_xy, kr).radii_sq) plot.real_radius.push_back(std::sqrt(r));
  for (double r : estimate_manifold(plot.gen_xy, kg).radii_sq) plot.gen_radius.push_back(std::sqrt(r));
  return plot;
}

void write_manifold_csv(const std::filesystem::path& path, const ManifoldPlot& plot) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  check(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path.string());
  out << "x,y,r,set\n" << std::setprecision(17);
  auto emit = [&](const FeatureMatrix& xy, const std::vector<double>& r, const char* label) {
    for (std::size_t i = 0; i < xy.rows; ++i)
      out << xy.row(i)[0] << ',' << xy.row(i)[1] << ',' << r[i] << ',' << label << '\n';
  };
  emit(plot.real_xy, plot.real_radius, "real");
  emit(plot.gen_xy, plot.gen_radius, "generated");
}

void write_manifold_svg(const std::filesystem::path& path, const ManifoldPlot& plot) {
  double lo_x = 1e300, hi_x = -1e300, lo_y = 1e300, hi_y = -1e300;
  auto extend = [&](const FeatureMatrix& xy, const std::vector<double>& r) {
    for (std::size_t i = 0; i < xy.rows; ++i) {
      lo_x = std::min(lo_x, xy.row(i)[0] - r[i]);
      hi_x = std::max(hi_x, xy.row(i)[0] + r[i]);
      lo_y = std::min(lo_y, xy.row(i)[1] - r[i]);
      hi_y = std::max(hi_y, xy.row(i)[1] + r[i]);
    }
  };
  extend(plot.real_xy, plot.real_radius);
  extend(plot.gen_xy, plot.gen_radius);
  const double size = 600, margin = 20;
  const double span = std::max({hi_x - lo_x, hi_y - lo_y, 1e-12});
  const double s = (size - 2 * margin) / span;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  check(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path.string());
  out << std::setprecision(6);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size
      << "\" viewBox=\"0 0 " << size << ' ' << size << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  auto emit = [&](const FeatureMatrix& xy, const std::vector<double>& r, const char* color) {
    out << "<g fill=\"" << color << "\" fill-opacity=\"0.15\" stroke=\"" << color
        << "\" stroke-opacity=\"0.6\" stroke-width=\"0.5\">\n";
    for (std::size_t i = 0; i < xy.rows; ++i)
      out << "<circle cx=\"" << margin + (xy.row(i)[0] - lo_x) * s << "\" cy=\""
          << size - margin - (xy.row(i)[1] - lo_y) * s << "\" r=\"" << std::max(r[i] * s, 0.5)
          << "\"/>\n";
    out << "</g>\n";
  };
  emit(plot.real_xy, plot.real_radius, "#1f77b4");
  emit(plot.gen_xy, plot.gen_radius, "#d62728");
  out << "<text x=\"" << margin << "\" y=\"14\" font-family=\"sans-serif\" font-size=\"12\">"
      << "blue: real, red: generated</text>\n</svg>\n";
}

ClassMetrics metrics_from_confusion(const Confusion& confusion) {
  const std::size_t k = confusion.size();
  check(k >= 1, ErrorCode::kInvalidArgument, "metrics: empty confusion matrix");
  for (const auto& row : confusion)
    check(row.size() == k, ErrorCode::kShape, "metrics: confusion matrix must be square");
  ClassMetrics m;
  m.confusion = confusion;
  long total = 0, correct = 0;
  for (std::size_t i = 0; i < k; ++i) {
    long tp = confusion[i][i], actual = 0, predicted = 0;
    for (std::size_t j = 0; j < k; ++j) {
      actual += confusion[i][j];
      predicted += confusion[j][i];
    }
    total += actual;
    correct += tp;
    const long denom = actual + predicted;
    m.f1.push_back(denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom));
  }
  m.accuracy = total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
  return m;
}

}  // namespace vitdae
