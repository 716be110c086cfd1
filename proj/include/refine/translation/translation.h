#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "refine/clustering/clustering.h"
#include "refine/common/util.h"
#include "refine/mockup/bundle.h"
#include "refine/provider/provider.h"
#include "refine/retrieval/retrieval.h"
#include "refine/translation/action_item.h"

namespace refine::translation {

inline constexpr std::size_t kMaxActionItems = 3;
inline constexpr std::size_t kMaxTitleLength = 80;  // code points

/// What the translation prompts need to know about a retrieved paper.
/// `closeness` is the paper's retrieval similarity to the designer's context.
struct PaperInfo {
  std::string title;
  DesignContext context;
  double closeness = 0.0;
};

using PaperInfoMap = std::map<std::string, PaperInfo>;

PaperInfoMap paper_info(const std::vector<retrieval::RankedPaper>& ranked);

struct TranslationBundle {
  std::string cluster_id;
  std::string compare_contrast;
  std::string key_insights;
  std::string tailored_insight;
  std::string title;
  std::vector<std::string> relations;  // one per implication, in order
};

std::string compare_and_contrast(const clustering::InsightCluster& cluster,
                                 const DesignContext& designer, const PaperInfoMap& papers,
                                 provider::Provider& provider);

struct RelationsAndInsights {
  std::vector<std::string> relations;
  std::string key_insights;
  std::string tailored_insight;
};

/// Three sequential calls: per-implication relations, their summary, and the
/// summary applied to the designer's context. The papers' closeness values
/// travel with the last two so the model can settle conflicts in favor of
/// the closer paper.
RelationsAndInsights derive_relations_and_insights(const clustering::InsightCluster& cluster,
                                                   const DesignContext& designer,
                                                   const PaperInfoMap& papers,
                                                   provider::Provider& provider);

std::string generate_title(const std::string& key_insights, const std::string& tailored_insight,
                           provider::Provider& provider);

/// First non-blank line, surrounding quotes removed, cut to at most 80 code
/// points at a word boundary with a trailing "…". Throws SchemaError when
/// nothing remains.
std::string enforce_title(std::string_view raw);

/// One vision call with every screen image.
std::vector<ActionItem> generate_action_items(const mockup::MockupBundle& mockup,
                                              const clustering::InsightCluster& cluster,
                                              const TranslationBundle& bundle,
                                              provider::Provider& provider,
                                              Diagnostics* diag = nullptr);

/// Drops unknown screen ids (and representable items left without a screen),
/// keeps the first three items and numbers them "<cluster_id>-a<n>".
/// Throws NoActionItemsError when nothing survives.
std::vector<ActionItem> repair_action_items(const nlohmann::json& answer,
                                            const std::string& cluster_id,
                                            const std::vector<std::string>& screen_ids,
                                            Diagnostics* diag = nullptr);

TranslationBundle translate_cluster(const clustering::InsightCluster& cluster,
                                    const DesignContext& designer, const PaperInfoMap& papers,
                                    provider::Provider& provider);

/// Translates every cluster and generates its action items, clusters running
/// concurrently. A cluster whose chain fails is marked failed with the error
/// text; the others are unaffected.
void translate_clusters(std::vector<clustering::InsightCluster>& clusters,
                        const mockup::MockupBundle& mockup, const DesignContext& designer,
                        const PaperInfoMap& papers, provider::Provider& provider,
                        std::size_t workers, Diagnostics* diag = nullptr);

}  // namespace refine::translation
