#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "refine/clustering/clustering.h"
#include "refine/index/paper_index.h"
#include "refine/mockup/edits.h"
#include "refine/provider/provider.h"

namespace refine::testing {

std::filesystem::path data_dir();
std::filesystem::path golden_dir();

/// The four committed mockup screens, in screen order.
std::vector<std::string> mockup_pngs();

/// Smallest byte string read_png_info accepts; `salt` varies the digest.
std::string make_png(std::uint32_t width, std::uint32_t height, std::uint8_t salt = 0);

class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Deterministic hashed bag-of-words embedding, unit length.
std::vector<float> hash_embedding(const std::string& text, std::size_t dim = 32);

/// Provider answering through a callback; embeddings default to
/// hash_embedding. Counts calls per stage tag.
class ScriptedProvider : public provider::Provider {
 public:
  using Handler = std::function<std::string(const std::string& stage,
                                            const provider::ProviderRequest& request)>;

  explicit ScriptedProvider(Handler chat, std::size_t embed_dim = 32)
      : chat_(std::move(chat)), embed_dim_(embed_dim) {}

  provider::ProviderResponse complete(const provider::ProviderRequest& request) override;

  std::size_t calls(const std::string& stage) const;
  std::size_t total_calls() const;

 private:
  Handler chat_;
  std::size_t embed_dim_;
  mutable std::mutex mu_;
  std::map<std::string, std::size_t> calls_;
};

/// Text of the first text part of a request.
std::string first_text(const provider::ProviderRequest& request);

/// Provider replaying the committed golden fixtures (replay_strict).
std::shared_ptr<provider::Provider> golden_provider();

/// Random unit vector with the given dimension.
std::vector<float> random_unit(std::mt19937_64& rng, std::size_t dim);

/// Random index: every entry has at least one present dimension, each present
/// with probability `p_present`; all vectors are random unit vectors.
index::PaperIndex synthetic_index(std::mt19937_64& rng, std::size_t entries, std::size_t dim,
                                  double p_present = 0.7, std::size_t implications = 2);

/// Random context over the six dimensions with at least one present.
DesignContext random_context(std::mt19937_64& rng, double p_present);

struct OracleHit {
  std::string paper_id;
  double similarity;
};

/// Brute-force ranking: long double sums over dimensions present on both
/// sides, full sort, first k.
std::vector<OracleHit> oracle_rank(const DesignContext& query_context,
                                   const index::DimensionEmbeddings& query,
                                   const index::PaperIndex& index, std::size_t k);

/// Mean silhouette written straight from the per-point definition:
/// a = mean distance to own cluster, b = smallest mean distance to another
/// cluster, s = (b - a) / max(a, b); singletons score 0.
double oracle_silhouette(const std::vector<int>& labels, const clustering::DistanceMatrix& dist);

/// Naive average-linkage clustering that recomputes every inter-cluster mean
/// from scratch each step. Labels numbered by lowest member index.
std::vector<int> oracle_upgma(const clustering::DistanceMatrix& dist, std::size_t k);

/// Points drawn around `k` orthogonal centers with small noise, shuffled.
/// `truth` receives the planted group of each point.
std::vector<std::vector<float>> planted_clusters(std::mt19937_64& rng, std::size_t k,
                                                 std::size_t per_cluster, std::size_t dim,
                                                 double noise, std::vector<int>* truth);

/// True when two labelings describe the same partition.
bool same_partition(const std::vector<int>& a, const std::vector<int>& b);

/// Edit corpus items (tests/data/edits/*.json), sorted by file name.
std::vector<nlohmann::json> edit_corpus();

/// Applies one corpus item and compares the result with its expectations.
/// Returns the list of mismatches; empty means the item passed.
std::vector<std::string> check_edit_item(const nlohmann::json& item);

/// Applies a replace or remove edit and lists elements outside the target
/// subtree whose serialization changed. Ancestors of the target must keep
/// their tag and attributes and every other child subtree.
std::vector<std::string> locality_violations(const std::string& html, const mockup::DomEdit& edit);

/// Random replace/remove edit against an element of `html` (never the root).
mockup::DomEdit random_local_edit(std::mt19937_64& rng, const std::string& html);

/// Well-formed answers for every prompt stage, enough to drive a session from
/// creation to previews. Reconstructed screens carry ids root/title/go and
/// plan_edits replaces "go"; action items target s1.
std::string pipeline_answer(const std::string& stage, const provider::ProviderRequest& request);

/// Small synthetic index (dim 32, matching ScriptedProvider embeddings).
std::shared_ptr<const index::PaperIndex> small_index(std::size_t entries = 12);

}  // namespace refine::testing
