#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "refine/index/paper_index.h"

namespace refine::retrieval {

inline constexpr std::size_t kDefaultTopK = 8;

/// dot(a,b) / (|a| |b|) in double precision, clamped to [-1, 1].
/// Throws LengthMismatchError or ZeroNormError.
double cosine_similarity(std::span<const double> a, std::span<const double> b);
double cosine_similarity(std::span<const float> a, std::span<const float> b);

struct MockupQuery {
  DesignContext context;
  index::DimensionEmbeddings embeddings;
};

/// Embeds a mockup context. Throws AllAbsentError when no dimension is present.
MockupQuery build_query(const DesignContext& context, index::Embedder& embedder);

struct ValidSums {
  std::vector<double> s_m;
  std::vector<double> s_p;
  std::vector<Dimension> valid;  // present in both, canonical order
};

/// Sums query and entry vectors over dimensions present in both. Vectors are
/// accumulated in canonical dimension order. Empty `valid` leaves both sums
/// empty.
ValidSums sum_valid_dimensions(const MockupQuery& query, const index::IndexEntry& entry);

struct RankedPaper {
  std::string paper_id;
  std::string title;
  double similarity = 0.0;
  std::vector<Dimension> valid_dimensions;
  DesignContext context;
  std::vector<paper::DesignImplication> implications;
  std::vector<std::vector<float>> implication_embeddings;

  bool operator==(const RankedPaper&) const = default;
};

/// Scores every entry sharing at least one present dimension with the query,
/// sorts by similarity (descending, ties by ascending paper_id) and returns
/// the first k. Throws NoEligiblePapersError when nothing is eligible and
/// PreconditionError for an empty index or k == 0.
std::vector<RankedPaper> rank_papers(const MockupQuery& query, const index::PaperIndex& index,
                                     std::size_t k = kDefaultTopK);

/// Omits implication embeddings unless asked for.
nlohmann::json to_json(const RankedPaper& paper, bool with_embeddings = false);
RankedPaper ranked_paper_from_json(const nlohmann::json& j);

}  // namespace refine::retrieval
