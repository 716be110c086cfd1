#include "refine/retrieval/retrieval.h"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "refine/common/encoding.h"
#include "refine/common/error.h"

namespace refine::retrieval {

using nlohmann::json;

namespace {

template <typename T>
double cosine_impl(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size()) {
    throw LengthMismatchError(fmt::format("cannot compare vectors of length {} and {}", a.size(),
                                          b.size()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a[i], y = b[i];
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  if (na == 0.0 || nb == 0.0) throw ZeroNormError("cosine similarity of a zero vector");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

}  // namespace

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  return cosine_impl(a, b);
}

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
  return cosine_impl(a, b);
}

MockupQuery build_query(const DesignContext& context, index::Embedder& embedder) {
  if (context.present_count() == 0) {
    throw AllAbsentError("the mockup context has no dimension to match papers against");
  }
  return MockupQuery{context, index::embed_context(context, embedder)};
}

ValidSums sum_valid_dimensions(const MockupQuery& query, const index::IndexEntry& entry) {
  ValidSums out;
  for (std::size_t i = 0; i < kDimensions.size(); ++i) {
    const auto& q = query.embeddings[i];
    const auto& p = entry.embeddings[i];
    if (!q.is_present || !p.is_present) continue;
    if (q.vector.size() != p.vector.size()) {
      throw LengthMismatchError(fmt::format("{}: {} has {} dims, query has {}", entry.paper_id,
                                            dimension_name(kDimensions[i]), p.vector.size(),
                                            q.vector.size()));
    }
    if (out.valid.empty()) {
      out.s_m.assign(q.vector.size(), 0.0);
      out.s_p.assign(p.vector.size(), 0.0);
    }
    for (std::size_t j = 0; j < q.vector.size(); ++j) {
      out.s_m[j] += static_cast<double>(q.vector[j]);
      out.s_p[j] += static_cast<double>(p.vector[j]);
    }
    out.valid.push_back(kDimensions[i]);
  }
  return out;
}

std::vector<RankedPaper> rank_papers(const MockupQuery& query, const index::PaperIndex& index,
                                     std::size_t k) {
  if (index.entries.empty()) throw PreconditionError("the paper index is empty");
  if (k == 0) throw PreconditionError("top-k must be positive");

  struct Scored {
    const index::IndexEntry* entry;
    double similarity;
    std::vector<Dimension> valid;
  };
  std::vector<Scored> scored;
  scored.reserve(index.entries.size());
  for (const auto& entry : index.entries) {
    ValidSums sums = sum_valid_dimensions(query, entry);
    if (sums.valid.empty()) continue;
    scored.push_back({&entry, cosine_similarity(std::span<const double>(sums.s_m),
                                                std::span<const double>(sums.s_p)),
                      std::move(sums.valid)});
  }
  if (scored.empty()) {
    throw NoEligiblePapersError("no indexed paper shares a present dimension with the mockup");
  }
  auto before = [](const Scored& a, const Scored& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.entry->paper_id < b.entry->paper_id;
  };
  const std::size_t n = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(),
                    before);

  std::vector<RankedPaper> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& e = *scored[i].entry;
    out.push_back({e.paper_id, e.title, scored[i].similarity, std::move(scored[i].valid), e.context,
                   e.implications, e.implication_embeddings});
  }
  return out;
}

json to_json(const RankedPaper& paper, bool with_embeddings) {
  json valid = json::array();
  for (Dimension d : paper.valid_dimensions) valid.push_back(dimension_name(d));
  json imps = json::array();
  for (const auto& imp : paper.implications) imps.push_back(paper::to_json(imp));
  json j = {{"paper_id", paper.paper_id},
            {"title", paper.title},
            {"similarity", paper.similarity},
            {"valid_dimensions", valid},
            {"context", to_json(paper.context)},
            {"implications", imps}};
  if (with_embeddings) {
    json vecs = json::array();
    for (const auto& v : paper.implication_embeddings) vecs.push_back(encode_f32_base64(v));
    j["implication_embeddings"] = vecs;
  }
  return j;
}

RankedPaper ranked_paper_from_json(const json& j) {
  try {
    RankedPaper p;
    p.paper_id = j.at("paper_id").get<std::string>();
    p.title = j.at("title").get<std::string>();
    p.similarity = j.at("similarity").get<double>();
    for (const auto& d : j.at("valid_dimensions")) {
      auto dim = dimension_from_name(d.get<std::string>());
      if (!dim) throw SchemaError(fmt::format("unknown dimension {}", d.dump()));
      p.valid_dimensions.push_back(*dim);
    }
    p.context = context_from_json(j.at("context"));
    for (const auto& imp : j.at("implications")) {
      p.implications.push_back(paper::implication_from_json(imp));
    }
    if (auto it = j.find("implication_embeddings"); it != j.end()) {
      for (const auto& v : *it) p.implication_embeddings.push_back(decode_f32_base64(v.get<std::string>()));
    }
    return p;
  } catch (const json::exception& e) {
    throw SchemaError(fmt::format("malformed ranked paper: {}", e.what()));
  }
}

}  // namespace refine::retrieval
