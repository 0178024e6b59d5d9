#include "stlctl/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "stlctl/parallel.hpp"
#include "stlctl/rng.hpp"

namespace stlctl {

Tensor similarity_matrix(const std::vector<Trajectory>& trajectories, const Tensor& M,
                         CostNorm norm, int threads) {
  const std::size_t N = trajectories.size();
  if (N == 0) throw Error("similarity_matrix: no trajectories");
  const int T = trajectories[0].horizon();
  const std::size_t nx = trajectories[0].states[0].size();
  for (std::size_t i = 0; i < N; ++i) {
    trajectories[i].check_consistent();
    if (trajectories[i].horizon() != T || trajectories[i].states[0].size() != nx)
      throw Error("similarity_matrix: trajectory " + std::to_string(i) +
                  " does not match trajectory 0 in horizon or state dimension");
  }
  if (M.shape.size() != 2 || M.shape[0] != nx || M.shape[1] != nx)
    throw ShapeError("similarity weight matrix must be " + std::to_string(nx) + "x" +
                     std::to_string(nx));

  Tensor D = Tensor::zeros({N, N});
  // Upper triangle by row, mirrored afterwards.
  parallel_for(N, threads, [&](std::size_t n) {
    for (std::size_t m = n + 1; m < N; ++m) {
      double acc = 0.0;
      for (int k = 0; k <= T; ++k)
        acc += weighted_distance(trajectories[n].states[static_cast<std::size_t>(k)],
                                 trajectories[m].states[static_cast<std::size_t>(k)], M, norm);
      D.data[n * N + m] = acc;
    }
  });
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t m = 0; m < n; ++m) D.data[n * N + m] = D.data[m * N + n];
  return D;
}

std::vector<Vec> feature_vectors(const Tensor& similarity, int anchor_cap, std::uint64_t seed) {
  if (similarity.shape.size() != 2 || similarity.shape[0] != similarity.shape[1])
    throw ShapeError("similarity matrix must be square");
  const std::size_t N = similarity.shape[0];
  std::vector<std::size_t> anchors;
  if (anchor_cap > 0 && static_cast<std::size_t>(anchor_cap) < N) {
    // Seeded anchor subset, kept in ascending index order.
    std::vector<std::size_t> idx(N);
    for (std::size_t i = 0; i < N; ++i) idx[i] = i;
    Rng rng(seed);
    for (std::size_t i = N - 1; i > 0; --i) std::swap(idx[i], idx[rng.below(i + 1)]);
    anchors.assign(idx.begin(), idx.begin() + anchor_cap);
    std::sort(anchors.begin(), anchors.end());
  } else {
    anchors.resize(N);
    for (std::size_t i = 0; i < N; ++i) anchors[i] = i;
  }
  std::vector<Vec> out(N, Vec(anchors.size()));
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t j = 0; j < anchors.size(); ++j) out[n][j] = similarity.data[n * N + anchors[j]];
  return out;
}

namespace {

constexpr double kVarianceFloor = 1e-9;

double sq_dist(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

struct ClusterStats {
  std::vector<Vec> centroids;
  std::vector<int> sizes;
  std::vector<double> sse;  // per-cluster sum of squared distances
};

ClusterStats cluster_stats(const std::vector<Vec>& points, const std::vector<int>& labels, int k) {
  const std::size_t dim = points[0].size();
  ClusterStats st;
  st.centroids.assign(static_cast<std::size_t>(k), Vec(dim, 0.0));
  st.sizes.assign(static_cast<std::size_t>(k), 0);
  st.sse.assign(static_cast<std::size_t>(k), 0.0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const int c = labels[i];
    st.sizes[static_cast<std::size_t>(c)] += 1;
    for (std::size_t d = 0; d < dim; ++d) st.centroids[static_cast<std::size_t>(c)][d] += points[i][d];
  }
  for (int c = 0; c < k; ++c)
    if (st.sizes[static_cast<std::size_t>(c)] > 0)
      for (std::size_t d = 0; d < dim; ++d) st.centroids[static_cast<std::size_t>(c)][d] /= st.sizes[static_cast<std::size_t>(c)];
  for (std::size_t i = 0; i < points.size(); ++i)
    st.sse[static_cast<std::size_t>(labels[i])] += sq_dist(points[i], st.centroids[static_cast<std::size_t>(labels[i])]);
  return st;
}

}  // namespace

double log_likelihood(const std::vector<Vec>& points, const std::vector<int>& labels, int k) {
  if (points.empty()) throw Error("log_likelihood: empty point set");
  const double R = static_cast<double>(points.size());
  const double dim = static_cast<double>(points[0].size());
  auto st = cluster_stats(points, labels, k);
  double L = 0.0;
  for (int c = 0; c < k; ++c) {
    const double n = static_cast<double>(st.sizes[static_cast<std::size_t>(c)]);
    if (n == 0.0) continue;
    const double variance = std::max(st.sse[static_cast<std::size_t>(c)] / (n * dim), kVarianceFloor);
    // sum over members of log( (n/R) * N(x; mu_c, variance * I) )
    L += n * std::log(n / R) - 0.5 * n * dim * std::log(2.0 * std::numbers::pi * variance) -
         st.sse[static_cast<std::size_t>(c)] / (2.0 * variance);
  }
  return L;
}

double variance_weight(const std::vector<Vec>& points, const std::vector<int>& labels, int k) {
  if (points.empty()) throw Error("variance_weight: empty point set");
  const std::size_t dim = points[0].size();
  auto st = cluster_stats(points, labels, k);
  Vec mean_all(dim, 0.0);
  for (const Vec& p : points)
    for (std::size_t d = 0; d < dim; ++d) mean_all[d] += p[d];
  for (std::size_t d = 0; d < dim; ++d) mean_all[d] /= static_cast<double>(points.size());
  double vw = 0.0, vb = 0.0;
  for (int c = 0; c < k; ++c) {
    vw += st.sse[static_cast<std::size_t>(c)];
    vb += st.sizes[static_cast<std::size_t>(c)] * sq_dist(st.centroids[static_cast<std::size_t>(c)], mean_all);
  }
  if (vb + vw == 0.0) return 0.0;
  return vb / (vb + vw);
}

int mic_free_params(int k, int dim) { return k * (dim + 1) + k - 1; }

double mic(const std::vector<Vec>& points, const std::vector<int>& labels, int k,
           std::optional<double> gamma_override) {
  const double L = log_likelihood(points, labels, k);
  const double gamma = gamma_override ? *gamma_override : variance_weight(points, labels, k);
  const double d = static_cast<double>(mic_free_params(k, static_cast<int>(points[0].size())));
  const double R = static_cast<double>(points.size());
  return -L + gamma * (d / 2.0) * std::log(R) + (1.0 - gamma) * d;
}

namespace {

void repair_empty_clusters(const std::vector<Vec>& points, std::vector<int>& labels,
                           ClusterStats& st, int k) {
  for (int c = 0; c < k; ++c) {
    if (st.sizes[static_cast<std::size_t>(c)] > 0) continue;
    // Reseed at the point farthest from its current centroid, among
    // clusters that can spare a point.
    std::size_t far_idx = 0;
    double far_d = -1.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const int li = labels[i];
      if (st.sizes[static_cast<std::size_t>(li)] <= 1) continue;
      const double d = sq_dist(points[i], st.centroids[static_cast<std::size_t>(li)]);
      if (d > far_d) {
        far_d = d;
        far_idx = i;
      }
    }
    st.sizes[static_cast<std::size_t>(labels[far_idx])] -= 1;
    labels[far_idx] = c;
    st.sizes[static_cast<std::size_t>(c)] = 1;
    st.centroids[static_cast<std::size_t>(c)] = points[far_idx];
  }
}

std::vector<Vec> kmeanspp_init(const std::vector<Vec>& points, int k, Rng& rng) {
  std::vector<Vec> centers;
  centers.reserve(static_cast<std::size_t>(k));
  centers.push_back(points[rng.below(points.size())]);
  Vec dist2(points.size());
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const Vec& ctr : centers) best = std::min(best, sq_dist(points[i], ctr));
      dist2[i] = best;
      total += best;
    }
    if (total == 0.0) {
      // all remaining points coincide with chosen centers
      centers.push_back(points[rng.below(points.size())]);
      continue;
    }
    double pick = rng.uniform() * total;
    std::size_t chosen = points.size() - 1;
    for (std::size_t i = 0; i < points.size(); ++i) {
      pick -= dist2[i];
      if (pick <= 0.0) {
        chosen = i;
        break;
      }
    }
    centers.push_back(points[chosen]);
  }
  return centers;
}

// Lloyd iterations from given centers until assignments stabilize.
KMeansResult lloyd(const std::vector<Vec>& points, std::vector<Vec> centers, int k, int max_iters) {
  std::vector<int> labels(points.size(), 0);
  for (int iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < points.size(); ++i) {
      int best = 0;
      double best_d = sq_dist(points[i], centers[0]);
      for (int c = 1; c < k; ++c) {
        const double d = sq_dist(points[i], centers[static_cast<std::size_t>(c)]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (labels[i] != best) {
        labels[i] = best;
        changed = true;
      }
    }
    auto st = cluster_stats(points, labels, k);
    repair_empty_clusters(points, labels, st, k);
    st = cluster_stats(points, labels, k);
    centers = st.centroids;
    if (!changed && iter > 0) break;
  }
  auto st = cluster_stats(points, labels, k);
  return {std::move(labels), std::move(st.centroids), std::move(st.sizes)};
}

}  // namespace

KMeansResult kmeans(const std::vector<Vec>& points, int k, std::uint64_t seed, int max_iters) {
  if (k < 1) throw Error("kmeans: k must be >= 1");
  if (points.size() < static_cast<std::size_t>(k))
    throw Error("kmeans: fewer points (" + std::to_string(points.size()) + ") than clusters (" +
                std::to_string(k) + ")");
  Rng rng(seed);
  return lloyd(points, kmeanspp_init(points, k, rng), k, max_iters);
}

ClusterModel xmeans(const std::vector<Vec>& features, int k_min, int k_max, std::uint64_t seed) {
  if (k_min < 1 || k_max < k_min) throw Error("xmeans: need 1 <= k_min <= k_max");
  if (features.size() < static_cast<std::size_t>(k_min))
    throw Error("xmeans: fewer points than k_min");
  ClusterModel model;
  auto km = kmeans(features, k_min, derive_seed(seed, 0));
  int k = k_min;
  std::vector<int> labels = km.labels;

  int round = 1;
  bool changed = true;
  while (changed && k < k_max) {
    changed = false;
    const int k_before = k;
    for (int c = 0; c < k_before && k < k_max; ++c) {
      std::vector<Vec> members;
      std::vector<std::size_t> member_idx;
      for (std::size_t i = 0; i < features.size(); ++i)
        if (labels[i] == c) {
          members.push_back(features[i]);
          member_idx.push_back(i);
        }
      if (members.size() < 2) continue;
      const std::vector<int> one(members.size(), 0);
      const double parent = mic(members, one, 1);
      auto split = kmeans(members, 2, derive_seed(seed, static_cast<std::uint64_t>(round) * 1024 +
                                                            static_cast<std::uint64_t>(c)));
      if (split.sizes[0] == 0 || split.sizes[1] == 0) continue;
      const double split_mic = mic(members, split.labels, 2);
      const bool accept = split_mic < parent;
      model.trace.push_back({c, parent, split_mic, accept});
      if (!accept) continue;
      for (std::size_t j = 0; j < member_idx.size(); ++j)
        if (split.labels[j] == 1) labels[member_idx[j]] = k;
      ++k;
      changed = true;
    }
    // Global refinement from the current partition's centroids.
    auto st = cluster_stats(features, labels, k);
    repair_empty_clusters(features, labels, st, k);
    st = cluster_stats(features, labels, k);
    auto refined = lloyd(features, st.centroids, k, 100);
    labels = refined.labels;
    ++round;
  }

  auto st = cluster_stats(features, labels, k);
  model.n_c = k;
  model.labels.resize(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) model.labels[i] = labels[i] + 1;
  model.centroids = st.centroids;
  model.sizes = st.sizes;
  model.mic_value = mic(features, labels, k);
  return model;
}

double pair_agreement(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw Error("pair_agreement: partitions must label the same points");
  const std::size_t n = a.size();
  if (n < 2) return 1.0;
  std::size_t agree = 0, total = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      ++total;
      if ((a[i] == a[j]) == (b[i] == b[j])) ++agree;
    }
  return static_cast<double>(agree) / static_cast<double>(total);
}

}  // namespace stlctl
