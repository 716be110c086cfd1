#include "refine/translation/translation.h"

#include <algorithm>
#include <set>

#include <fmt/format.h>

#include "refine/common/encoding.h"
#include "refine/common/error.h"
#include "refine/provider/prompts.h"

namespace refine::translation {

using clustering::InsightCluster;
using nlohmann::json;
using provider::ImagePart;
using provider::ProviderRequest;
using provider::RequestKind;
using provider::TextPart;

PaperInfoMap paper_info(const std::vector<retrieval::RankedPaper>& ranked) {
  PaperInfoMap out;
  for (const auto& p : ranked) out[p.paper_id] = PaperInfo{p.title, p.context, p.similarity};
  return out;
}

namespace {

json dimensions_json(const DesignContext& ctx) {
  json j = to_json(ctx);
  j.erase("origin");
  return j;
}

const PaperInfo& info_for(const PaperInfoMap& papers, const std::string& paper_id) {
  auto it = papers.find(paper_id);
  if (it == papers.end()) {
    throw PreconditionError(fmt::format("paper {} is not among the retrieved papers", paper_id));
  }
  return it->second;
}

json implications_json(const InsightCluster& cluster, const PaperInfoMap& papers,
                       bool with_context) {
  json arr = json::array();
  for (const auto& imp : cluster.implications) {
    const PaperInfo& info = info_for(papers, imp.paper_id);
    json j = {{"implication_id", imp.implication_id},
              {"paper_id", imp.paper_id},
              {"paper_title", info.title},
              {"text", imp.text},
              {"source_paragraph", imp.source_paragraph}};
    if (with_context) j["paper_context"] = dimensions_json(info.context);
    arr.push_back(std::move(j));
  }
  return arr;
}

json cluster_papers(const InsightCluster& cluster, const PaperInfoMap& papers,
                    bool closeness) {
  json out = json::object();
  for (const auto& imp : cluster.implications) {
    const PaperInfo& info = info_for(papers, imp.paper_id);
    out[imp.paper_id] = closeness ? json(info.closeness) : dimensions_json(info.context);
  }
  return out;
}

ProviderRequest text_request(std::string_view stage, const json& payload) {
  const auto& tmpl = provider::prompt(stage);
  ProviderRequest req;
  req.kind = RequestKind::kChat;
  req.system_instruction = tmpl.render();
  req.response_schema_hint = tmpl.schema;
  req.user_parts.push_back(TextPart{payload.dump(2)});
  return req;
}

std::string plain_text(std::string_view stage, const json& payload, provider::Provider& provider) {
  provider::ProviderResponse response = provider::call(text_request(stage, payload), provider);
  std::string text = trim(*response.text);
  if (text.empty()) throw SchemaError(fmt::format("stage '{}' returned empty text", stage));
  return text;
}

void require_cluster(const InsightCluster& cluster, const DesignContext& designer) {
  if (cluster.implications.empty()) {
    throw PreconditionError(fmt::format("cluster {} has no implications", cluster.cluster_id));
  }
  if (designer.present_count() == 0) {
    throw AllAbsentError("the designer context has no present dimension");
  }
}

}  // namespace

std::string compare_and_contrast(const InsightCluster& cluster, const DesignContext& designer,
                                 const PaperInfoMap& papers, provider::Provider& provider) {
  require_cluster(cluster, designer);
  json payload = {{"designer_context", dimensions_json(designer)},
                  {"implications", implications_json(cluster, papers, false)},
                  {"paper_contexts", cluster_papers(cluster, papers, false)}};
  return plain_text("compare_contrast", payload, provider);
}

RelationsAndInsights derive_relations_and_insights(const InsightCluster& cluster,
                                                   const DesignContext& designer,
                                                   const PaperInfoMap& papers,
                                                   provider::Provider& provider) {
  require_cluster(cluster, designer);
  RelationsAndInsights out;

  json rel_payload = {{"implications", implications_json(cluster, papers, true)}};
  json answer = provider::call_structured(text_request("relations", rel_payload), provider);
  for (const auto& r : answer.at("relations")) {
    std::string s = r.is_string() ? collapse_whitespace(r.get<std::string>()) : std::string();
    if (s.empty()) throw SchemaError("relations contains an empty or non-text entry");
    out.relations.push_back(std::move(s));
  }
  if (out.relations.size() != cluster.implications.size()) {
    throw SchemaError(fmt::format("expected {} relations, got {}", cluster.implications.size(),
                                  out.relations.size()));
  }

  json closeness = cluster_papers(cluster, papers, true);
  json key_payload = {{"implications", implications_json(cluster, papers, false)},
                      {"relations", out.relations},
                      {"closeness", closeness}};
  out.key_insights = plain_text("key_insights", key_payload, provider);

  json tailored_payload = {{"key_insights", out.key_insights},
                           {"relations", out.relations},
                           {"implications", implications_json(cluster, papers, true)},
                           {"designer_context", dimensions_json(designer)},
                           {"closeness", closeness}};
  out.tailored_insight = plain_text("tailored_insight", tailored_payload, provider);
  return out;
}

std::string enforce_title(std::string_view raw) {
  std::string line;
  std::size_t pos = 0;
  while (pos <= raw.size() && line.empty()) {
    std::size_t eol = raw.find('\n', pos);
    if (eol == std::string_view::npos) eol = raw.size();
    line = collapse_whitespace(raw.substr(pos, eol - pos));
    pos = eol + 1;
  }
  // Markdown heading markers and surrounding quotes are presentation noise.
  while (!line.empty() && line.front() == '#') line.erase(0, 1);
  line = trim(line);
  static const std::vector<std::pair<std::string, std::string>> kQuotes = {
      {"\"", "\""}, {"'", "'"}, {"“", "”"}, {"‘", "’"}, {"*", "*"}};
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& [open, close] : kQuotes) {
      if (line.size() >= open.size() + close.size() && line.rfind(open, 0) == 0 &&
          line.compare(line.size() - close.size(), close.size(), close) == 0) {
        line = trim(line.substr(open.size(), line.size() - open.size() - close.size()));
        changed = true;
      }
    }
  }
  if (line.empty()) throw SchemaError("cluster title is empty");
  if (utf8_length(line) <= kMaxTitleLength) return line;

  const std::string ellipsis = "…";
  std::string head = line.substr(0, utf8_offset(line, kMaxTitleLength - 1));
  std::size_t space = head.rfind(' ');
  if (space != std::string::npos && space > 0) head.resize(space);
  while (!head.empty() && std::string_view(" ,;:-.").find(head.back()) != std::string_view::npos) {
    head.pop_back();
  }
  return head + ellipsis;
}

std::string generate_title(const std::string& key_insights, const std::string& tailored_insight,
                           provider::Provider& provider) {
  if (trim(key_insights).empty() || trim(tailored_insight).empty()) {
    throw PreconditionError("a title needs key insights and tailored insight");
  }
  json payload = {{"key_insights", key_insights}, {"tailored_insight", tailored_insight}};
  provider::ProviderResponse response =
      provider::call(text_request("cluster_title", payload), provider);
  return enforce_title(*response.text);
}

std::vector<ActionItem> repair_action_items(const json& answer, const std::string& cluster_id,
                                            const std::vector<std::string>& screen_ids,
                                            Diagnostics* diag) {
  json items = answer.is_object() ? json::array({answer}) : answer;
  if (!items.is_array()) throw SchemaError("action items must be a JSON array");
  const std::set<std::string> known(screen_ids.begin(), screen_ids.end());

  std::vector<ActionItem> out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const json& raw = items[i];
    if (!raw.is_object()) throw SchemaError(fmt::format("action item [{}] is not an object", i));
    ActionItem item;
    item.cluster_id = cluster_id;
    item.text = raw.contains("text") && raw["text"].is_string()
                    ? collapse_whitespace(raw["text"].get<std::string>())
                    : std::string();
    if (item.text.empty()) {
      warn(diag, fmt::format("{}: action item [{}] dropped: empty text", cluster_id, i));
      continue;
    }
    item.visually_representable = raw.value("visually_representable", false);
    std::set<std::string> added;
    for (const auto& sid : raw.value("target_screen_ids", json::array())) {
      if (!sid.is_string()) continue;
      std::string id = trim(sid.get<std::string>());
      if (!known.count(id)) {
        warn(diag, fmt::format("{}: action item [{}] targets unknown screen \"{}\", dropped",
                               cluster_id, i, id));
        continue;
      }
      if (added.insert(id).second) item.target_screen_ids.push_back(id);
    }
    if (item.visually_representable && item.target_screen_ids.empty()) {
      warn(diag, fmt::format("{}: action item [{}] dropped: representable but no known screen",
                             cluster_id, i));
      continue;
    }
    out.push_back(std::move(item));
  }
  if (out.size() > kMaxActionItems) {
    warn(diag, fmt::format("{}: {} action items returned, keeping the first {}", cluster_id,
                           out.size(), kMaxActionItems));
    out.resize(kMaxActionItems);
  }
  if (out.empty()) throw NoActionItemsError(fmt::format("{}: no usable action item", cluster_id));
  for (std::size_t i = 0; i < out.size(); ++i) out[i].item_id = fmt::format("{}-a{}", cluster_id, i);
  return out;
}

std::vector<ActionItem> generate_action_items(const mockup::MockupBundle& mockup,
                                              const InsightCluster& cluster,
                                              const TranslationBundle& bundle,
                                              provider::Provider& provider, Diagnostics* diag) {
  if (mockup.screens.empty()) throw PreconditionError("the mockup has no screens");
  const auto& tmpl = provider::prompt("action_items");
  ProviderRequest req;
  req.kind = RequestKind::kVisionChat;
  req.system_instruction = tmpl.render();
  req.response_schema_hint = tmpl.schema;
  json implications = json::array();
  for (const auto& imp : cluster.implications) {
    implications.push_back({{"paper_id", imp.paper_id}, {"text", imp.text}});
  }
  json payload = {{"screen_ids", mockup.screen_ids()},
                  {"implications", implications},
                  {"compare_contrast", bundle.compare_contrast},
                  {"key_insights", bundle.key_insights},
                  {"tailored_insight", bundle.tailored_insight},
                  {"title", bundle.title}};
  req.user_parts.push_back(TextPart{payload.dump(2)});
  for (const auto& s : mockup.screens) req.user_parts.push_back(ImagePart{s.png_bytes});
  return repair_action_items(provider::call_structured(req, provider), cluster.cluster_id,
                             mockup.screen_ids(), diag);
}

TranslationBundle translate_cluster(const InsightCluster& cluster, const DesignContext& designer,
                                    const PaperInfoMap& papers, provider::Provider& provider) {
  TranslationBundle b;
  b.cluster_id = cluster.cluster_id;
  b.compare_contrast = compare_and_contrast(cluster, designer, papers, provider);
  RelationsAndInsights r = derive_relations_and_insights(cluster, designer, papers, provider);
  b.relations = std::move(r.relations);
  b.key_insights = std::move(r.key_insights);
  b.tailored_insight = std::move(r.tailored_insight);
  b.title = generate_title(b.key_insights, b.tailored_insight, provider);
  return b;
}

void translate_clusters(std::vector<InsightCluster>& clusters, const mockup::MockupBundle& mockup,
                        const DesignContext& designer, const PaperInfoMap& papers,
                        provider::Provider& provider, std::size_t workers, Diagnostics* diag) {
  std::vector<Diagnostics> local(clusters.size());
  parallel_for(clusters.size(), workers, [&](std::size_t i) {
    InsightCluster& c = clusters[i];
    try {
      TranslationBundle b = translate_cluster(c, designer, papers, provider);
      c.compare_contrast = b.compare_contrast;
      c.key_insights = b.key_insights;
      c.tailored_insight = b.tailored_insight;
      c.title = b.title;
      c.relations = b.relations;
      c.action_items = generate_action_items(mockup, c, b, provider, &local[i]);
      c.status = clustering::ClusterStatus::kTranslated;
      c.error.reset();
    } catch (const Error& e) {
      c.status = clustering::ClusterStatus::kFailed;
      c.error = fmt::format("{}: {}", error_code_name(e.code()), e.what());
      local[i].warn(fmt::format("cluster {} translation failed: {}", c.cluster_id, e.what()));
    }
  });
  if (diag) {
    for (const auto& d : local) diag->append(d);
  }
}

}  // namespace refine::translation
