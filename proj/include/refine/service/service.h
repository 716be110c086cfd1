#pragma once

#include <condition_variable>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "refine/index/paper_index.h"
#include "refine/provider/provider.h"
#include "refine/service/config.h"
#include "refine/service/session.h"

namespace refine::service {

struct CreateResult {
  std::string session_id;
  /// Extracted context, or nullopt when every dimension came back absent and
  /// the designer has to enter it by hand.
  std::optional<DesignContext> context;
  std::string message;
};

struct SourceGroup {
  std::string paper_id;
  std::string title;
  double similarity = 0.0;
  std::vector<paper::DesignImplication> implications;
};

nlohmann::json to_json(const SourceGroup& group);

/// What a session is currently doing, for polling clients.
struct Progress {
  Stage stage = Stage::kCreated;
  std::optional<std::string> running;  // operation in flight
  std::string step;                    // latest sub-step description
  std::vector<std::string> completed_steps;
  std::size_t screens_total = 0;
  std::size_t screens_ready = 0;
  std::size_t screens_failed = 0;
};

nlohmann::json to_json(const Progress& progress);

enum class ReconstructionMode {
  kBackground,   // create_session returns before screens are reconstructed
  kSynchronous,  // create_session waits, for headless runs
};

/// Orchestrates the pipeline over persisted sessions. Runs on one session are
/// serialized: a second request for a stage that is in flight waits and then
/// returns the finished result. Distinct sessions run concurrently.
class Service {
 public:
  Service(Config config, std::shared_ptr<provider::Provider> provider,
          std::shared_ptr<const index::PaperIndex> index,
          ReconstructionMode reconstruction = ReconstructionMode::kBackground);
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Validates the PNGs (BadImageError), stores the bundle, starts screen
  /// reconstruction and extracts the design context. An explicit id replaces
  /// the random one.
  CreateResult create_session(std::vector<std::string> pngs,
                              std::optional<std::string> session_id = std::nullopt);

  /// Stores the edited context and clears everything downstream of it, even
  /// when the edit changes nothing. Throws AllAbsentError.
  Session confirm_context(const std::string& session_id, DesignContext context);

  /// Ranks the top-k papers and clusters their implications. Re-running with
  /// the same k returns the stored result.
  Session run_retrieval_and_clustering(const std::string& session_id,
                                       std::optional<std::size_t> top_k = std::nullopt);

  /// Translates pending and failed clusters; translated ones are kept as is.
  /// Throws TranslationFailedError when no cluster ends up translated.
  Session run_translation(const std::string& session_id);

  Session get_session(const std::string& session_id) const;
  std::vector<clustering::InsightCluster> clusters(const std::string& session_id) const;
  std::vector<SourceGroup> get_sources(const std::string& session_id,
                                       const std::string& cluster_id) const;

  /// Cached per item after the first successful computation.
  std::vector<mockup::PreviewResult> get_preview(const std::string& session_id,
                                                 const std::string& item_id);

  /// Returns the new bookmark state.
  bool toggle_bookmark(const std::string& session_id, const std::string& item_id);
  std::vector<translation::ActionItem> list_bookmarks(const std::string& session_id) const;

  Progress progress(const std::string& session_id) const;

  /// Blocks until background reconstruction of the session has finished.
  void wait_for_reconstruction(const std::string& session_id);

  const Config& config() const { return config_; }
  const SessionStore& store() const { return store_; }
  const index::PaperIndex& index() const { return *index_; }

 private:
  struct Slot {
    std::mutex run_mu;  // held for the whole of a pipeline run
    mutable std::mutex state_mu;
    std::condition_variable reconstruction_done;
    bool reconstructing = false;
    std::optional<std::string> running;
    std::string step;
    std::vector<std::string> completed_steps;
  };

  /// Times `fn` by wall clock or by the provider latency it accumulates.
  double timed(const std::function<void(provider::Provider&)>& fn);

  std::shared_ptr<Slot> slot(const std::string& session_id) const;
  void begin(Slot& slot, std::string op);
  void step(Slot& slot, std::string text);
  void end(Slot& slot);

  std::string new_session_id();
  std::string now() const;
  void reconstruct(const std::string& session_id, mockup::MockupBundle bundle);

  Config config_;
  std::shared_ptr<provider::Provider> provider_;
  std::shared_ptr<const index::PaperIndex> index_;
  ReconstructionMode reconstruction_mode_;
  SessionStore store_;

  mutable std::mutex slots_mu_;
  mutable std::map<std::string, std::shared_ptr<Slot>> slots_;

  std::mutex threads_mu_;
  std::vector<std::thread> threads_;
};

}  // namespace refine::service
