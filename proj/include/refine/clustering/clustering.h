#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "refine/paper/extraction.h"
#include "refine/retrieval/retrieval.h"
#include "refine/translation/action_item.h"

namespace refine::clustering {

inline constexpr std::size_t kDefaultMaxClusters = 10;

/// Symmetric n x n cosine distances, row-major.
struct DistanceMatrix {
  std::size_t n = 0;
  std::vector<double> values;

  double at(std::size_t i, std::size_t j) const { return values[i * n + j]; }
};

/// d(i,j) = 1 - cos(e_i, e_j); diagonal forced to 0. Throws ZeroNormError.
DistanceMatrix cosine_distance_matrix(const std::vector<std::vector<float>>& embeddings);

/// Average-linkage agglomeration down to k clusters. On equal linkage the pair
/// whose (lowest member index, lowest member index) is lexicographically
/// smallest merges first. Labels are numbered in order of each cluster's
/// lowest member index.
std::vector<int> agglomerative_cluster(const DistanceMatrix& dist, std::size_t k);

/// Mean silhouette; singleton members and a_i = b_i = 0 contribute 0.
/// Throws SingleClusterError with fewer than two distinct labels.
double mean_silhouette(const std::vector<int>& labels, const DistanceMatrix& dist);

struct ClusteringResult {
  std::vector<int> labels;
  std::size_t n_best = 0;
  std::map<std::size_t, double> silhouette_by_k;
};

/// Chooses k in {2..min(n_max, n-1)} maximizing mean silhouette, smallest k
/// on ties. n = 1 yields one cluster, n = 2 two singletons.
ClusteringResult select_cluster_count(const DistanceMatrix& dist,
                                      std::size_t n_max = kDefaultMaxClusters);
ClusteringResult select_cluster_count(const std::vector<std::vector<float>>& embeddings,
                                      std::size_t n_max = kDefaultMaxClusters);

struct ClusterStatus {
  static constexpr const char* kPending = "pending";
  static constexpr const char* kTranslated = "translated";
  static constexpr const char* kFailed = "failed";
};

struct InsightCluster {
  std::string cluster_id;  // "c<n>"
  std::vector<paper::DesignImplication> implications;
  std::optional<std::string> title;
  std::optional<std::string> compare_contrast;
  std::optional<std::string> key_insights;
  std::optional<std::string> tailored_insight;
  std::vector<std::string> relations;
  std::vector<translation::ActionItem> action_items;
  std::string status = ClusterStatus::kPending;
  std::optional<std::string> error;

  bool operator==(const InsightCluster&) const = default;
};

nlohmann::json to_json(const InsightCluster& cluster);
InsightCluster cluster_from_json(const nlohmann::json& j);

/// Pools the implications of all ranked papers (rank order), clusters their
/// embeddings and orders clusters by size (descending), then by smallest
/// implication_id. Throws NoImplicationsError when the pool is empty.
std::vector<InsightCluster> build_clusters(const std::vector<retrieval::RankedPaper>& ranked,
                                           std::size_t n_max = kDefaultMaxClusters,
                                           ClusteringResult* result = nullptr);

}  // namespace refine::clustering
