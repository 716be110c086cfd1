#include "refine/service/service.h"

#include <algorithm>
#include <chrono>
#include <random>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "refine/clustering/clustering.h"
#include "refine/common/encoding.h"
#include "refine/common/error.h"
#include "refine/common/util.h"
#include "refine/retrieval/retrieval.h"
#include "refine/translation/translation.h"

namespace refine::service {

using nlohmann::json;

json to_json(const SourceGroup& g) {
  json imps = json::array();
  for (const auto& imp : g.implications) imps.push_back(paper::to_json(imp));
  return {{"paper_id", g.paper_id},
          {"title", g.title},
          {"similarity", g.similarity},
          {"implications", imps}};
}

json to_json(const Progress& p) {
  return {{"stage", to_string(p.stage)},
          {"running", p.running ? json(*p.running) : json(nullptr)},
          {"step", p.step},
          {"completed_steps", p.completed_steps},
          {"screens",
           {{"total", p.screens_total}, {"ready", p.screens_ready}, {"failed", p.screens_failed}}}};
}

namespace {

void require_stage(const Session& s, Stage at_least, std::string_view next_action) {
  if (s.stage < at_least) {
    throw PreconditionError(fmt::format("session {} is at stage {}; {} first", s.session_id,
                                        to_string(s.stage), next_action));
  }
}

// Worker threads report warnings in completion order; sorting keeps the
// session file independent of scheduling.
void append_sorted(Session& s, const Diagnostics& diag) {
  std::vector<std::string> w = diag.warnings();
  std::sort(w.begin(), w.end());
  s.warnings.insert(s.warnings.end(), w.begin(), w.end());
}

}  // namespace

Service::Service(Config config, std::shared_ptr<provider::Provider> provider,
                 std::shared_ptr<const index::PaperIndex> index, ReconstructionMode reconstruction)
    : config_(std::move(config)),
      provider_(std::move(provider)),
      index_(std::move(index)),
      reconstruction_mode_(reconstruction),
      store_(config_.data_dir) {
  if (!provider_) throw PreconditionError("service needs a provider");
  if (!index_) throw PreconditionError("service needs a loaded index");
}

Service::~Service() {
  std::vector<std::thread> threads;
  {
    std::lock_guard lock(threads_mu_);
    threads.swap(threads_);
  }
  for (auto& t : threads) {
    if (t.joinable()) t.join();
  }
}

double Service::timed(const std::function<void(provider::Provider&)>& fn) {
  if (config_.use_provider_timing()) {
    provider::MeteredProvider meter(*provider_);
    fn(meter);
    return meter.total_latency();
  }
  auto start = std::chrono::steady_clock::now();
  fn(*provider_);
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::shared_ptr<Service::Slot> Service::slot(const std::string& session_id) const {
  std::lock_guard lock(slots_mu_);
  auto& s = slots_[session_id];
  if (!s) s = std::make_shared<Slot>();
  return s;
}

void Service::begin(Slot& slot, std::string op) {
  std::lock_guard lock(slot.state_mu);
  slot.running = std::move(op);
  slot.step.clear();
  slot.completed_steps.clear();
}

void Service::step(Slot& slot, std::string text) {
  std::lock_guard lock(slot.state_mu);
  if (!slot.step.empty()) slot.completed_steps.push_back(slot.step);
  slot.step = std::move(text);
}

void Service::end(Slot& slot) {
  std::lock_guard lock(slot.state_mu);
  if (!slot.step.empty()) slot.completed_steps.push_back(slot.step);
  slot.step.clear();
  slot.running.reset();
}

namespace {

// Clears the in-flight marker however the run ends.
struct RunGuard {
  std::function<void()> done;
  ~RunGuard() { done(); }
};

}  // namespace

std::string Service::new_session_id() {
  std::random_device rd;
  std::mt19937_64 rng((static_cast<std::uint64_t>(rd()) << 32) ^ rd());
  for (;;) {
    std::string id = fmt::format("{:016x}", rng());
    if (!store_.exists(id)) return id;
  }
}

std::string Service::now() const {
  return config_.deterministic() ? deterministic_timestamp() : reproducible_timestamp();
}

CreateResult Service::create_session(std::vector<std::string> pngs,
                                     std::optional<std::string> session_id) {
  mockup::MockupBundle bundle = mockup::make_bundle(std::move(pngs));
  std::string id = session_id ? *session_id : new_session_id();
  auto sl = slot(id);

  std::unique_lock run(sl->run_mu);
  begin(*sl, "create");
  RunGuard guard{[&] { end(*sl); }};

  Session s;
  s.session_id = id;
  s.created_at = now();
  s.mockup = bundle;
  s.top_k = config_.top_k;
  store_.save(s);

  if (reconstruction_mode_ == ReconstructionMode::kBackground) {
    {
      std::lock_guard lock(sl->state_mu);
      sl->reconstructing = true;
    }
    std::lock_guard lock(threads_mu_);
    threads_.emplace_back([this, id, bundle] { reconstruct(id, bundle); });
  }

  step(*sl, fmt::format("extracting design context from {} screens", bundle.screens.size()));
  CreateResult result{id, std::nullopt, {}};
  std::optional<DesignContext> ctx;
  double seconds = 0.0;
  try {
    seconds = timed([&](provider::Provider& p) { ctx = mockup::extract_mockup_context(bundle, p); });
  } catch (const AllAbsentError& e) {
    result.message = e.what();
  }

  s = store_.load(id);
  s.timings["context_extraction"] = seconds;
  if (ctx) {
    s.confirmed_context = *ctx;
    s.mockup.context = *ctx;
    s.stage = Stage::kContextReady;
    result.context = *ctx;
  } else {
    s.warnings.push_back(fmt::format("no design context could be extracted: {}", result.message));
  }
  store_.save(s);
  run.unlock();

  if (reconstruction_mode_ == ReconstructionMode::kSynchronous) {
    {
      std::lock_guard lock(sl->state_mu);
      sl->reconstructing = true;
    }
    reconstruct(id, bundle);
  }
  return result;
}

void Service::reconstruct(const std::string& session_id, mockup::MockupBundle bundle) {
  auto sl = slot(session_id);
  try {
    Diagnostics diag;
    double seconds = timed([&](provider::Provider& p) {
      parallel_for(bundle.screens.size(), config_.reconstruction_workers, [&](std::size_t i) {
        mockup::MockupScreen& screen = bundle.screens[i];
        try {
          screen.reconstructed_html = mockup::reconstruct_screen(screen, p, &diag);
          screen.reconstruction_status = mockup::ReconstructionStatus::kReady;
        } catch (const Error& e) {
          screen.reconstruction_status = mockup::ReconstructionStatus::kFailed;
          screen.reconstruction_error = fmt::format("{}: {}", error_code_name(e.code()), e.what());
          diag.warn(fmt::format("screen {} reconstruction failed: {}", screen.screen_id, e.what()));
        }
        // Publish each screen as it lands so previews can start early.
        std::lock_guard run(sl->run_mu);
        Session s = store_.load(session_id);
        for (auto& stored : s.mockup.screens) {
          if (stored.screen_id == screen.screen_id) {
            stored.reconstructed_html = screen.reconstructed_html;
            stored.reconstruction_status = screen.reconstruction_status;
            stored.reconstruction_error = screen.reconstruction_error;
          }
        }
        store_.save(s);
      });
    });
    std::lock_guard run(sl->run_mu);
    Session s = store_.load(session_id);
    s.timings["reconstruction"] = seconds;
    append_sorted(s, diag);
    store_.save(s);
  } catch (const std::exception& e) {
    spdlog::error("reconstruction of session {} aborted: {}", session_id, e.what());
  }
  {
    std::lock_guard lock(sl->state_mu);
    sl->reconstructing = false;
  }
  sl->reconstruction_done.notify_all();
}

void Service::wait_for_reconstruction(const std::string& session_id) {
  auto sl = slot(session_id);
  std::unique_lock lock(sl->state_mu);
  sl->reconstruction_done.wait(lock, [&] { return !sl->reconstructing; });
}

Session Service::confirm_context(const std::string& session_id, DesignContext context) {
  if (context.present_count() == 0) {
    throw AllAbsentError("at least one design context dimension must be filled in");
  }
  auto sl = slot(session_id);
  std::lock_guard run(sl->run_mu);
  Session s = store_.load(session_id);
  context.set_origin(ContextOrigin::kMockup);
  s.confirmed_context = std::move(context);
  s.invalidate_downstream();
  store_.save(s);
  return s;
}

Session Service::run_retrieval_and_clustering(const std::string& session_id,
                                              std::optional<std::size_t> top_k) {
  auto sl = slot(session_id);
  std::lock_guard run(sl->run_mu);
  Session s = store_.load(session_id);
  require_stage(s, Stage::kContextReady, "confirm the design context");
  std::size_t k = top_k.value_or(s.top_k);
  if (k == 0) throw PreconditionError("top_k must be positive");
  if (s.stage >= Stage::kClustered && k == s.top_k) return s;
  if (s.stage >= Stage::kRetrieved) s.invalidate_downstream();

  begin(*sl, "retrieve");
  RunGuard guard{[&] { end(*sl); }};
  s.top_k = k;
  std::optional<std::exception_ptr> failure;
  double seconds = timed([&](provider::Provider& p) {
    index::Embedder embedder(p);
    if (!index_->empty_embedding.empty()) embedder.seed("", index_->empty_embedding);
    step(*sl, "embedding the design context");
    retrieval::MockupQuery query = retrieval::build_query(*s.confirmed_context, embedder);
    step(*sl, fmt::format("ranking {} papers", index_->entries.size()));
    s.ranked = retrieval::rank_papers(query, *index_, k);
    s.stage = Stage::kRetrieved;
    step(*sl, fmt::format("clustering implications from {} papers", s.ranked.size()));
    try {
      s.clusters = clustering::build_clusters(s.ranked, config_.n_max);
      s.stage = Stage::kClustered;
    } catch (const NoImplicationsError&) {
      failure = std::current_exception();
    }
  });
  s.timings["retrieval_and_clustering"] = seconds;
  store_.save(s);
  if (failure) std::rethrow_exception(*failure);
  return s;
}

Session Service::run_translation(const std::string& session_id) {
  auto sl = slot(session_id);
  std::lock_guard run(sl->run_mu);
  Session s = store_.load(session_id);
  require_stage(s, Stage::kClustered, "run retrieval");

  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < s.clusters.size(); ++i) {
    if (s.clusters[i].status != clustering::ClusterStatus::kTranslated) todo.push_back(i);
  }
  if (todo.empty()) return s;

  begin(*sl, "translate");
  RunGuard guard{[&] { end(*sl); }};
  step(*sl, fmt::format("translating {} clusters", todo.size()));

  std::vector<clustering::InsightCluster> batch;
  for (std::size_t i : todo) batch.push_back(s.clusters[i]);
  Diagnostics diag;
  auto papers = translation::paper_info(s.ranked);
  double seconds = timed([&](provider::Provider& p) {
    translation::translate_clusters(batch, s.mockup, *s.confirmed_context, papers, p,
                                    config_.translation_workers, &diag);
  });
  for (std::size_t j = 0; j < todo.size(); ++j) s.clusters[todo[j]] = std::move(batch[j]);
  append_sorted(s, diag);
  s.timings["translation"] += seconds;

  bool any_translated =
      std::any_of(s.clusters.begin(), s.clusters.end(), [](const clustering::InsightCluster& c) {
        return c.status == clustering::ClusterStatus::kTranslated;
      });
  if (any_translated) s.stage = Stage::kTranslated;
  store_.save(s);
  if (!any_translated) {
    throw TranslationFailedError(
        fmt::format("all {} clusters failed to translate", s.clusters.size()));
  }
  return s;
}

Session Service::get_session(const std::string& session_id) const {
  return store_.load(session_id);
}

std::vector<clustering::InsightCluster> Service::clusters(const std::string& session_id) const {
  Session s = store_.load(session_id);
  require_stage(s, Stage::kClustered, "run retrieval");
  return s.clusters;
}

std::vector<SourceGroup> Service::get_sources(const std::string& session_id,
                                              const std::string& cluster_id) const {
  Session s = store_.load(session_id);
  require_stage(s, Stage::kClustered, "run retrieval");
  const clustering::InsightCluster* cluster = s.find_cluster(cluster_id);
  if (!cluster) throw UnknownCluster(fmt::format("unknown cluster '{}'", cluster_id));

  std::vector<SourceGroup> groups;
  for (const auto& paper : s.ranked) {
    SourceGroup g{paper.paper_id, paper.title, paper.similarity, {}};
    for (const auto& imp : cluster->implications) {
      if (imp.paper_id == paper.paper_id) g.implications.push_back(imp);
    }
    if (!g.implications.empty()) groups.push_back(std::move(g));
  }
  return groups;
}

std::vector<mockup::PreviewResult> Service::get_preview(const std::string& session_id,
                                                        const std::string& item_id) {
  auto sl = slot(session_id);
  std::lock_guard run(sl->run_mu);
  Session s = store_.load(session_id);
  const translation::ActionItem* item = s.find_item(item_id);
  if (!item) throw UnknownItem(fmt::format("unknown action item '{}'", item_id));
  if (!item->visually_representable) {
    throw NotRepresentableError(
        fmt::format("action item {} is not visually representable", item_id));
  }
  if (auto it = s.previews.find(item_id); it != s.previews.end()) {
    bool any_failed = std::any_of(it->second.begin(), it->second.end(),
                                  [](const mockup::PreviewResult& p) { return p.failed; });
    if (!any_failed) return it->second;
  }

  begin(*sl, "preview");
  RunGuard guard{[&] { end(*sl); }};
  step(*sl, fmt::format("editing {} screens for {}", item->target_screen_ids.size(), item_id));
  std::vector<mockup::PreviewResult> previews;
  double seconds = timed(
      [&](provider::Provider& p) { previews = mockup::build_preview(s.mockup, *item, p); });
  s.previews[item_id] = previews;
  s.timings["preview:" + item_id] = seconds;
  store_.save(s);
  return previews;
}

bool Service::toggle_bookmark(const std::string& session_id, const std::string& item_id) {
  auto sl = slot(session_id);
  std::lock_guard run(sl->run_mu);
  Session s = store_.load(session_id);
  translation::ActionItem* item = s.find_item(item_id);
  if (!item) throw UnknownItem(fmt::format("unknown action item '{}'", item_id));
  bool on = !s.bookmarks.count(item_id);
  if (on) {
    s.bookmarks.insert(item_id);
  } else {
    s.bookmarks.erase(item_id);
  }
  item->bookmark = on;
  store_.save(s);
  return on;
}

std::vector<translation::ActionItem> Service::list_bookmarks(const std::string& session_id) const {
  Session s = store_.load(session_id);
  std::vector<translation::ActionItem> out;
  for (const auto& c : s.clusters) {
    for (const auto& item : c.action_items) {
      if (s.bookmarks.count(item.item_id)) out.push_back(item);
    }
  }
  return out;
}

Progress Service::progress(const std::string& session_id) const {
  Session s = store_.load(session_id);
  Progress p;
  p.stage = s.stage;
  p.screens_total = s.mockup.screens.size();
  for (const auto& screen : s.mockup.screens) {
    if (screen.reconstruction_status == mockup::ReconstructionStatus::kReady) ++p.screens_ready;
    if (screen.reconstruction_status == mockup::ReconstructionStatus::kFailed) ++p.screens_failed;
  }
  auto sl = slot(session_id);
  std::lock_guard lock(sl->state_mu);
  p.running = sl->running;
  p.step = sl->step;
  p.completed_steps = sl->completed_steps;
  if (sl->reconstructing && !p.running) p.running = "reconstruct";
  return p;
}

}  // namespace refine::service
