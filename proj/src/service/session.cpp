#include "refine/service/session.h"

#include <fmt/format.h>

#include "refine/common/error.h"
#include "refine/common/util.h"

namespace refine::service {

using nlohmann::json;

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::kCreated: return "created";
    case Stage::kContextReady: return "context_ready";
    case Stage::kRetrieved: return "retrieved";
    case Stage::kClustered: return "clustered";
    case Stage::kTranslated: return "translated";
  }
  return "created";
}

Stage stage_from_string(std::string_view text) {
  for (Stage s : {Stage::kCreated, Stage::kContextReady, Stage::kRetrieved, Stage::kClustered,
                  Stage::kTranslated}) {
    if (to_string(s) == text) return s;
  }
  throw SchemaError(fmt::format("unknown session stage '{}'", text));
}

const clustering::InsightCluster* Session::find_cluster(std::string_view cluster_id) const {
  for (const auto& c : clusters) {
    if (c.cluster_id == cluster_id) return &c;
  }
  return nullptr;
}

const translation::ActionItem* Session::find_item(std::string_view item_id) const {
  for (const auto& c : clusters) {
    for (const auto& item : c.action_items) {
      if (item.item_id == item_id) return &item;
    }
  }
  return nullptr;
}

translation::ActionItem* Session::find_item(std::string_view item_id) {
  return const_cast<translation::ActionItem*>(std::as_const(*this).find_item(item_id));
}

void Session::invalidate_downstream() {
  ranked.clear();
  clusters.clear();
  previews.clear();
  bookmarks.clear();
  for (const char* key : {"retrieval_and_clustering", "translation"}) timings.erase(key);
  for (auto it = timings.begin(); it != timings.end();) {
    it = it->first.rfind("preview:", 0) == 0 ? timings.erase(it) : std::next(it);
  }
  stage = confirmed_context ? Stage::kContextReady : Stage::kCreated;
}

json to_json(const Session& s, bool with_images) {
  json ranked = json::array();
  for (const auto& p : s.ranked) ranked.push_back(retrieval::to_json(p));
  json clusters = json::array();
  for (const auto& c : s.clusters) clusters.push_back(clustering::to_json(c));
  json previews = json::object();
  for (const auto& [item_id, list] : s.previews) {
    json arr = json::array();
    for (const auto& p : list) arr.push_back(mockup::to_json(p));
    previews[item_id] = arr;
  }
  return {{"schema_version", kSessionSchemaVersion},
          {"session_id", s.session_id},
          {"created_at", s.created_at},
          {"stage", to_string(s.stage)},
          {"mockup", mockup::to_json(s.mockup, with_images)},
          {"confirmed_context", s.confirmed_context ? to_json(*s.confirmed_context) : json(nullptr)},
          {"top_k", s.top_k},
          {"ranked", ranked},
          {"clusters", clusters},
          {"previews", previews},
          {"bookmarks", s.bookmarks},
          {"timings", s.timings},
          {"warnings", s.warnings}};
}

Session session_from_json(const json& j) {
  int version = j.value("schema_version", 0);
  if (version != kSessionSchemaVersion) {
    throw SchemaVersionError(fmt::format("session schema_version {} is not supported", version));
  }
  try {
    Session s;
    s.session_id = j.at("session_id").get<std::string>();
    s.created_at = j.value("created_at", "");
    s.stage = stage_from_string(j.at("stage").get<std::string>());
    s.mockup = mockup::bundle_from_json(j.at("mockup"));
    if (const json& ctx = j.at("confirmed_context"); !ctx.is_null()) {
      s.confirmed_context = context_from_json(ctx);
      s.confirmed_context->set_origin(ContextOrigin::kMockup);
    }
    s.top_k = j.value("top_k", std::size_t{8});
    for (const auto& p : j.at("ranked")) s.ranked.push_back(retrieval::ranked_paper_from_json(p));
    for (const auto& c : j.at("clusters")) s.clusters.push_back(clustering::cluster_from_json(c));
    for (const auto& [item_id, list] : j.at("previews").items()) {
      auto& out = s.previews[item_id];
      for (const auto& p : list) out.push_back(mockup::preview_from_json(p));
    }
    s.bookmarks = j.value("bookmarks", std::set<std::string>{});
    s.timings = j.value("timings", std::map<std::string, double>{});
    s.warnings = j.value("warnings", std::vector<std::string>{});
    return s;
  } catch (const json::exception& e) {
    throw SchemaError(fmt::format("malformed session: {}", e.what()));
  }
}

std::string serialize_session(const Session& session) {
  return to_json(session, true).dump(2) + "\n";
}

SessionStore::SessionStore(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw IoError(fmt::format("cannot create {}: {}", dir_.string(), ec.message()));
}

std::filesystem::path SessionStore::path_for(const std::string& session_id) const {
  // Ids come from URLs; only accept plain tokens.
  if (session_id.empty() || session_id.find_first_not_of(
                                "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789-_") !=
                                std::string::npos) {
    throw UnknownSession(fmt::format("unknown session '{}'", session_id));
  }
  return dir_ / (session_id + ".json");
}

void SessionStore::save(const Session& session) const {
  write_file_atomic(path_for(session.session_id), serialize_session(session));
}

Session SessionStore::load(const std::string& session_id) const {
  auto path = path_for(session_id);
  if (!std::filesystem::exists(path)) {
    throw UnknownSession(fmt::format("unknown session '{}'", session_id));
  }
  return session_from_json(json::parse(read_file(path)));
}

bool SessionStore::exists(const std::string& session_id) const {
  try {
    return std::filesystem::exists(path_for(session_id));
  } catch (const UnknownSession&) {
    return false;
  }
}

}  // namespace refine::service
