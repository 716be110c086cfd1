#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "refine/clustering/clustering.h"
#include "refine/mockup/bundle.h"
#include "refine/paper/design_context.h"
#include "refine/retrieval/retrieval.h"

namespace refine::service {

inline constexpr int kSessionSchemaVersion = 1;

enum class Stage { kCreated, kContextReady, kRetrieved, kClustered, kTranslated };

std::string_view to_string(Stage stage);
Stage stage_from_string(std::string_view text);

struct Session {
  std::string session_id;
  std::string created_at;
  Stage stage = Stage::kCreated;
  mockup::MockupBundle mockup;
  std::optional<DesignContext> confirmed_context;
  std::size_t top_k = 8;
  std::vector<retrieval::RankedPaper> ranked;
  std::vector<clustering::InsightCluster> clusters;
  std::map<std::string, std::vector<mockup::PreviewResult>> previews;  // by item_id
  std::set<std::string> bookmarks;
  std::map<std::string, double> timings;  // seconds per stage
  std::vector<std::string> warnings;

  const clustering::InsightCluster* find_cluster(std::string_view cluster_id) const;
  const translation::ActionItem* find_item(std::string_view item_id) const;
  translation::ActionItem* find_item(std::string_view item_id);

  /// Drops ranked papers, clusters and previews and returns to context_ready.
  void invalidate_downstream();
};

/// `with_images` keeps the PNGs so the session can be restored from the JSON
/// alone; API views leave them out.
nlohmann::json to_json(const Session& session, bool with_images = true);
Session session_from_json(const nlohmann::json& j);

/// Canonical file form: to_json(session).dump(2) plus a trailing newline.
std::string serialize_session(const Session& session);

/// One JSON file per session under a directory, written atomically.
class SessionStore {
 public:
  explicit SessionStore(std::filesystem::path dir);

  void save(const Session& session) const;
  /// Throws UnknownSession when no file exists.
  Session load(const std::string& session_id) const;
  bool exists(const std::string& session_id) const;

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path path_for(const std::string& session_id) const;

  std::filesystem::path dir_;
};

}  // namespace refine::service
