// Copyright 2026 The vitdae Authors
// SPDX-License-Identifier: Apache-2.0

// Generative-model metrics over feature vectors: Frechet distance, improved
// precision/recall and a PCA manifold plot. All computed in 64-bit.

#pragma once

#include <filesystem>
#include <vector>

namespace vitdae {

// Row-major n x dim feature matrix.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::vector<double> values;

  const double* row(std::size_t i) const { return values.data() + i * dim; }
};

struct FeatureStats {
  std::size_t dim = 0;
  std::size_t n = 0;
  std::vector<double> mean;
  std::vector<double> cov;  // dim x dim, unbiased (n - 1) normalization
};

FeatureStats feature_stats(const FeatureMatrix& features);

// ||mu_a - mu_b||^2 + Tr(A + B - 2 (A B)^(1/2)) with A = cov_a + reg I and
// B = cov_b + reg I. The trace of the square root is taken from the
// eigenvalues of A^(1/2) B A^(1/2), clipped at zero.
double frechet_distance(const FeatureStats& a, const FeatureStats& b, double reg = 1e-6);

// Points with the squared distance to their k-th nearest neighbour (self
// excluded).
struct ManifoldEstimate {
  FeatureMatrix points;
  std::size_t k = 0;
  std::vector<double> radii_sq;
};

ManifoldEstimate estimate_manifold(const FeatureMatrix& points, std::size_t k = 3);

struct PrecisionRecall {
  double precision = 0;
  double recall = 0;
};

// Fraction of points of one set inside the union of the other set's
// k-NN balls (boundary inclusive).
double manifold_coverage(const ManifoldEstimate& support, const FeatureMatrix& queries);
PrecisionRecall improved_pr(const ManifoldEstimate& real, const ManifoldEstimate& gen);

struct PcaFit {
  std::vector<double> mean;        // dim
  std::vector<double> components;  // rows: unit eigenvectors, descending eigenvalue
  std::vector<double> eigenvalues; // all, descending
  std::size_t dim = 0;
};

// Principal axes of the (n - 1)-normalized covariance. Each axis is signed
// so that its largest-magnitude entry is positive.
PcaFit pca_fit(const FeatureMatrix& points);
FeatureMatrix pca_project(const PcaFit& fit, const FeatureMatrix& points, std::size_t components);

struct ManifoldPlot {
  FeatureMatrix real_xy, gen_xy;
  std::vector<double> real_radius, gen_radius;
  std::vector<double> eigenvalues;
};

// PCA on the union of both sets, then k-NN radii recomputed in 2-D.
ManifoldPlot manifold_plot(const FeatureMatrix& real, const FeatureMatrix& gen, std::size_t k = 3);
void write_manifold_csv(const std::filesystem::path& path, const ManifoldPlot& plot);
void write_manifold_svg(const std::filesystem::path& path, const ManifoldPlot& plot);

// confusion[i][j] counts samples of true class i predicted as j.
using Confusion = std::vector<std::vector<long>>;

struct ClassMetrics {
  double accuracy = 0;
  std::vector<double> f1;
  Confusion confusion;
};

// F1 is 0 for a class that is never predicted and never present.
ClassMetrics metrics_from_confusion(const Confusion& confusion);

}  // namespace vitdae
