#pragma once
#include <cstdint>
#include <optional>
#include <vector>

#include "stlctl/dynamics.hpp"
#include "stlctl/tensor.hpp"
#include "stlctl/trajectory.hpp"

namespace stlctl {

// Pairwise cumulative weighted distances D(n,m) = sum_k ||x_k^n - x_k^m||_M.
// Returned as a full symmetric {N,N} tensor with zero diagonal. The
// norm reading defaults to sqrt(e'Me); rows are computed in parallel
// but stored by index, so the result is thread-count independent.
Tensor similarity_matrix(const std::vector<Trajectory>& trajectories, const Tensor& M,
                         CostNorm norm = CostNorm::Sqrt, int threads = 1);

// Row n of D as the feature vector z^n. With anchor_cap in (0, N), each
// feature keeps only the distances to a seeded random anchor subset of
// that size (memory bound for large N; off by default).
std::vector<Vec> feature_vectors(const Tensor& similarity, int anchor_cap = 0,
                                 std::uint64_t seed = 0);

// Hard-assignment spherical-Gaussian log-likelihood of a k-way
// partition. Per-cluster MLE variance, floored at 1e-9 so duplicate
// points cannot produce -inf.
double log_likelihood(const std::vector<Vec>& points, const std::vector<int>& labels, int k);

// gamma_c = V_b / (V_b + V_w); 0 when both variances vanish.
double variance_weight(const std::vector<Vec>& points, const std::vector<int>& labels, int k);

// Free parameter count of the k-cluster spherical mixture:
// k centers, k variances, k-1 mixing weights.
int mic_free_params(int k, int dim);

// Mixed information criterion Psi = -L + gamma_c (d/2) log R + (1-gamma_c) d.
// gamma_c comes from the partition under evaluation unless overridden
// (override 1 gives BIC exactly, 0 gives AIC).
double mic(const std::vector<Vec>& points, const std::vector<int>& labels, int k,
           std::optional<double> gamma_override = std::nullopt);

struct KMeansResult {
  std::vector<int> labels;
  std::vector<Vec> centroids;
  std::vector<int> sizes;
};

// Seeded k-means++ initialization followed by Lloyd iterations; empty
// clusters are reseeded at the point farthest from its centroid.
KMeansResult kmeans(const std::vector<Vec>& points, int k, std::uint64_t seed,
                    int max_iters = 100);

struct ClusterModel {
  int n_c = 0;
  std::vector<int> labels;  // 1-based cluster labels
  std::vector<Vec> centroids;
  std::vector<int> sizes;
  double mic_value = 0.0;
  // One row per attempted split: cluster index, parent MIC, split MIC,
  // whether the split was accepted.
  struct SplitTrial {
    int cluster;
    double parent_mic;
    double split_mic;
    bool accepted;
  };
  std::vector<SplitTrial> trace;
};

// X-means: start from k_min clusters, repeatedly 2-means-split any
// cluster whose split lowers MIC, refine globally, stop at fixed point
// or k_max.
ClusterModel xmeans(const std::vector<Vec>& features, int k_min, int k_max, std::uint64_t seed);

// Fraction of point pairs on which two partitions agree (same-cluster
// vs different-cluster); 1.0 iff identical up to relabeling.
double pair_agreement(const std::vector<int>& a, const std::vector<int>& b);

}  // namespace stlctl
