#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "refine/common/util.h"
#include "refine/paper/design_context.h"
#include "refine/paper/extraction.h"
#include "refine/provider/provider.h"

namespace refine::index {

inline constexpr int kIndexSchemaVersion = 1;

struct DimensionEmbedding {
  Dimension dimension = Dimension::kTargetUser;
  std::vector<float> vector;
  bool is_present = false;  // false: vector is the empty-string embedding

  bool operator==(const DimensionEmbedding&) const = default;
};

using DimensionEmbeddings = std::array<DimensionEmbedding, 6>;

struct IndexEntry {
  std::string paper_id;
  std::string title;
  DesignContext context;
  DimensionEmbeddings embeddings;  // canonical dimension order
  std::vector<paper::DesignImplication> implications;
  std::vector<std::vector<float>> implication_embeddings;  // aligned with implications

  bool operator==(const IndexEntry&) const = default;
};

struct PaperIndex {
  int schema_version = kIndexSchemaVersion;
  std::size_t embedding_dim = 0;
  std::string created_at;
  std::vector<float> empty_embedding;
  std::vector<IndexEntry> entries;  // ordered by paper_id

  const IndexEntry* find(std::string_view paper_id) const;
  bool operator==(const PaperIndex&) const = default;
};

/// Embeds text through a provider, caching by text digest. The vector for ""
/// is computed at most once and shared by every absent dimension. All vectors
/// must share one length (DimMismatchError otherwise). Thread-safe.
class Embedder {
 public:
  explicit Embedder(provider::Provider& provider) : provider_(provider) {}

  /// Seeds the cache, e.g. with an index's stored empty-string embedding.
  void seed(const std::string& text, std::vector<float> vector);

  std::vector<float> embed(const std::string& text);
  const std::vector<float>& empty_embedding();

  /// 0 until the first vector is seen.
  std::size_t dim() const;
  std::size_t provider_calls() const;

 private:
  provider::Provider& provider_;
  mutable std::mutex mu_;
  std::map<std::string, std::vector<float>> cache_;
  std::size_t dim_ = 0;
  std::size_t calls_ = 0;
  std::optional<std::vector<float>> empty_;
};

/// Embeds every present dimension (absent ones get the empty-string vector)
/// and every implication text. Returns nullopt when no dimension is present.
std::optional<IndexEntry> build_entry(const paper::PaperRecord& record, Embedder& embedder);

/// Six embeddings for a context, absent dimensions filled with the
/// empty-string vector.
DimensionEmbeddings embed_context(const DesignContext& context, Embedder& embedder);

/// Builds an index from ingested records. Excluded records are skipped.
PaperIndex build_index(const std::vector<paper::PaperRecord>& records,
                       provider::Provider& provider, std::size_t workers = 4,
                       Diagnostics* diag = nullptr);

/// JSON Lines text: header line then one entry per line.
std::string serialize_index(const PaperIndex& index);
PaperIndex parse_index(std::string_view text);

/// Atomic write (temp file + rename).
void save_index(const PaperIndex& index, const std::filesystem::path& path);
/// Throws IoError, SchemaVersionError, DimMismatchError, SchemaError.
PaperIndex load_index(const std::filesystem::path& path);

}  // namespace refine::index
