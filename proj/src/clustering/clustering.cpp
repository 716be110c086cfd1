#include "refine/clustering/clustering.h"

#include <algorithm>
#include <limits>
#include <set>

#include <fmt/format.h>

#include "refine/common/error.h"

namespace refine::clustering {

using nlohmann::json;

DistanceMatrix cosine_distance_matrix(const std::vector<std::vector<float>>& embeddings) {
  DistanceMatrix m;
  m.n = embeddings.size();
  m.values.assign(m.n * m.n, 0.0);
  for (std::size_t i = 0; i < m.n; ++i) {
    for (std::size_t j = i + 1; j < m.n; ++j) {
      double d = 1.0 - retrieval::cosine_similarity(std::span<const float>(embeddings[i]),
                                                    std::span<const float>(embeddings[j]));
      m.values[i * m.n + j] = d;
      m.values[j * m.n + i] = d;
    }
  }
  if (m.n == 1) {
    // Still validate the lone vector so callers get the same error surface.
    (void)retrieval::cosine_similarity(std::span<const float>(embeddings[0]),
                                       std::span<const float>(embeddings[0]));
  }
  return m;
}

namespace {

// Runs average-linkage merges from n singletons down to `k_min` clusters and
// calls `snapshot(k, labels)` each time the cluster count reaches a value
// <= k_max.
template <typename Snapshot>
void agglomerate(const DistanceMatrix& dist, std::size_t k_min, std::size_t k_max,
                 Snapshot&& snapshot) {
  const std::size_t n = dist.n;
  // cluster slot i is identified by its lowest member index, which never
  // changes when merging j > i into i.
  std::vector<std::vector<std::size_t>> members(n);
  std::vector<bool> active(n, true);
  std::vector<double> sums(dist.values);  // sum of pairwise distances between slots
  for (std::size_t i = 0; i < n; ++i) members[i] = {i};

  auto labels_now = [&] {
    std::vector<int> labels(n, -1);
    int next = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i]) continue;
      for (std::size_t m : members[i]) labels[m] = next;
      ++next;
    }
    return labels;
  };

  std::size_t count = n;
  if (count <= k_max && count >= k_min) snapshot(count, labels_now());
  while (count > k_min) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 0;
    // Scanning i < j in ascending order and replacing only on strict
    // improvement implements the lexicographic tie-break.
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i]) continue;
      for (std::size_t j = i + 1; j < n; ++j) {
        if (!active[j]) continue;
        double avg = sums[i * n + j] /
                     static_cast<double>(members[i].size() * members[j].size());
        if (avg < best) {
          best = avg;
          bi = i;
          bj = j;
        }
      }
    }
    for (std::size_t c = 0; c < n; ++c) {
      if (!active[c] || c == bi || c == bj) continue;
      double s = sums[bi * n + c] + sums[bj * n + c];
      sums[bi * n + c] = s;
      sums[c * n + bi] = s;
    }
    members[bi].insert(members[bi].end(), members[bj].begin(), members[bj].end());
    std::sort(members[bi].begin(), members[bi].end());
    members[bj].clear();
    active[bj] = false;
    --count;
    if (count <= k_max && count >= k_min) snapshot(count, labels_now());
  }
}

}  // namespace

std::vector<int> agglomerative_cluster(const DistanceMatrix& dist, std::size_t k) {
  if (k < 1 || k > dist.n) {
    throw PreconditionError(fmt::format("cluster count {} outside [1, {}]", k, dist.n));
  }
  std::vector<int> out;
  agglomerate(dist, k, k, [&](std::size_t, std::vector<int> labels) { out = std::move(labels); });
  return out;
}

double mean_silhouette(const std::vector<int>& labels, const DistanceMatrix& dist) {
  if (labels.size() != dist.n) {
    throw LengthMismatchError(fmt::format("{} labels for {} points", labels.size(), dist.n));
  }
  std::map<int, std::size_t> sizes;
  for (int l : labels) ++sizes[l];
  if (sizes.size() < 2) throw SingleClusterError("silhouette needs at least two clusters");

  const std::size_t n = dist.n;
  double total = 0.0;
  std::map<int, double> to_cluster;
  for (std::size_t i = 0; i < n; ++i) {
    if (sizes[labels[i]] == 1) continue;  // contributes 0
    to_cluster.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) to_cluster[labels[j]] += dist.at(i, j);
    }
    double a = to_cluster[labels[i]] / static_cast<double>(sizes[labels[i]] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (const auto& [label, sum] : to_cluster) {
      if (label == labels[i]) continue;
      b = std::min(b, sum / static_cast<double>(sizes[label]));
    }
    double denom = std::max(a, b);
    if (denom > 0.0) total += (b - a) / denom;
  }
  return total / static_cast<double>(n);
}

ClusteringResult select_cluster_count(const DistanceMatrix& dist, std::size_t n_max) {
  const std::size_t n = dist.n;
  if (n == 0) throw PreconditionError("nothing to cluster");
  ClusteringResult result;
  if (n <= 2) {
    result.n_best = n;
    result.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) result.labels[i] = static_cast<int>(i);
    return result;
  }
  const std::size_t k_max = std::min(std::max<std::size_t>(n_max, 2), n - 1);
  double best = -std::numeric_limits<double>::infinity();
  std::map<std::size_t, std::vector<int>> by_k;
  agglomerate(dist, 2, k_max, [&](std::size_t k, std::vector<int> labels) {
    result.silhouette_by_k[k] = mean_silhouette(labels, dist);
    by_k[k] = std::move(labels);
  });
  for (const auto& [k, s] : result.silhouette_by_k) {
    if (s > best) {
      best = s;
      result.n_best = k;
    }
  }
  result.labels = std::move(by_k[result.n_best]);
  return result;
}

ClusteringResult select_cluster_count(const std::vector<std::vector<float>>& embeddings,
                                      std::size_t n_max) {
  return select_cluster_count(cosine_distance_matrix(embeddings), n_max);
}

json to_json(const InsightCluster& c) {
  auto opt = [](const std::optional<std::string>& v) { return v ? json(*v) : json(nullptr); };
  json imps = json::array();
  for (const auto& imp : c.implications) imps.push_back(paper::to_json(imp));
  json items = json::array();
  for (const auto& item : c.action_items) items.push_back(translation::to_json(item));
  json j = {{"cluster_id", c.cluster_id},
            {"status", c.status},
            {"implications", imps},
            {"title", opt(c.title)},
            {"compare_contrast", opt(c.compare_contrast)},
            {"key_insights", opt(c.key_insights)},
            {"tailored_insight", opt(c.tailored_insight)},
            {"relations", c.relations},
            {"action_items", items}};
  if (c.error) j["error"] = *c.error;
  return j;
}

InsightCluster cluster_from_json(const json& j) {
  auto opt = [&](const char* key) -> std::optional<std::string> {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return it->get<std::string>();
  };
  try {
    InsightCluster c;
    c.cluster_id = j.at("cluster_id").get<std::string>();
    c.status = j.value("status", std::string(ClusterStatus::kPending));
    for (const auto& imp : j.at("implications")) {
      c.implications.push_back(paper::implication_from_json(imp));
    }
    c.title = opt("title");
    c.compare_contrast = opt("compare_contrast");
    c.key_insights = opt("key_insights");
    c.tailored_insight = opt("tailored_insight");
    c.relations = j.value("relations", std::vector<std::string>{});
    for (const auto& item : j.value("action_items", json::array())) {
      c.action_items.push_back(translation::action_item_from_json(item));
    }
    c.error = opt("error");
    return c;
  } catch (const json::exception& e) {
    throw SchemaError(fmt::format("malformed insight cluster: {}", e.what()));
  }
}

std::vector<InsightCluster> build_clusters(const std::vector<retrieval::RankedPaper>& ranked,
                                           std::size_t n_max, ClusteringResult* result_out) {
  std::vector<const paper::DesignImplication*> pool;
  std::vector<std::vector<float>> embeddings;
  for (const auto& paper : ranked) {
    if (paper.implication_embeddings.size() != paper.implications.size()) {
      throw LengthMismatchError(fmt::format("{}: implications and embeddings are misaligned",
                                            paper.paper_id));
    }
    for (std::size_t i = 0; i < paper.implications.size(); ++i) {
      pool.push_back(&paper.implications[i]);
      embeddings.push_back(paper.implication_embeddings[i]);
    }
  }
  if (pool.empty()) throw NoImplicationsError("the retrieved papers carry no design implications");

  ClusteringResult result = select_cluster_count(embeddings, n_max);
  std::vector<InsightCluster> clusters(result.n_best);
  for (std::size_t i = 0; i < pool.size(); ++i) {
    clusters[static_cast<std::size_t>(result.labels[i])].implications.push_back(*pool[i]);
  }
  auto smallest_id = [](const InsightCluster& c) {
    std::string best = c.implications.front().implication_id;
    for (const auto& imp : c.implications) best = std::min(best, imp.implication_id);
    return best;
  };
  std::stable_sort(clusters.begin(), clusters.end(),
                   [&](const InsightCluster& a, const InsightCluster& b) {
                     if (a.implications.size() != b.implications.size()) {
                       return a.implications.size() > b.implications.size();
                     }
                     return smallest_id(a) < smallest_id(b);
                   });
  for (std::size_t i = 0; i < clusters.size(); ++i) clusters[i].cluster_id = fmt::format("c{}", i);
  if (result_out) *result_out = std::move(result);
  return clusters;
}

}  // namespace refine::clustering
