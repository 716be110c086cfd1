#include <atomic>
#include <future>
#include <set>
#include <thread>

#include <gtest/gtest.h>
#include <json.hpp>

#include "refine/common/error.h"
#include "refine/service/service.h"
#include "test_support.h"

using namespace refine;
using namespace refine::service;
using nlohmann::json;
namespace rt = refine::testing;

namespace {

struct Harness {
  explicit Harness(rt::ScriptedProvider::Handler handler = rt::pipeline_answer,
                   ReconstructionMode mode = ReconstructionMode::kSynchronous,
                   std::size_t top_k = 4)
      : provider(std::make_shared<rt::ScriptedProvider>(std::move(handler))) {
    config.data_dir = dir.path().string();
    config.top_k = top_k;
    config.translation_workers = 1;
    service = std::make_unique<Service>(config, provider, rt::small_index(), mode);
  }

  std::string create(const std::string& id = "s") {
    service->create_session({rt::make_png(40, 80, 1), rt::make_png(40, 80, 2)}, id);
    return id;
  }

  rt::TempDir dir;
  Config config;
  std::shared_ptr<rt::ScriptedProvider> provider;
  std::unique_ptr<Service> service;
};

DesignContext travel() {
  DesignContext ctx;
  ctx.set(Dimension::kDomain, "flight booking");
  ctx.set(Dimension::kModality, "mobile app");
  return ctx;
}

std::string first_visual_item(const Session& s) {
  for (const auto& c : s.clusters) {
    for (const auto& item : c.action_items) {
      if (item.visually_representable) return item.item_id;
    }
  }
  return {};
}

}  // namespace

TEST(Service, WalksTheStagesInOrder) {
  Harness h;
  auto created = h.service->create_session({rt::make_png(40, 80, 1)});
  EXPECT_EQ(created.session_id.size(), 16u);
  ASSERT_TRUE(created.context.has_value());
  EXPECT_EQ(*created.context->get(Dimension::kDomain), "flight booking");
  const std::string id = created.session_id;

  Session s = h.service->get_session(id);
  EXPECT_EQ(s.stage, Stage::kContextReady);
  EXPECT_EQ(s.mockup.screens[0].reconstruction_status, mockup::ReconstructionStatus::kReady);
  EXPECT_THROW(h.service->clusters(id), PreconditionError);
  EXPECT_THROW(h.service->run_translation(id), PreconditionError);

  s = h.service->run_retrieval_and_clustering(id);
  EXPECT_EQ(s.stage, Stage::kClustered);
  EXPECT_EQ(s.ranked.size(), 4u);
  EXPECT_GE(s.clusters.size(), 2u);
  for (const auto& c : s.clusters) EXPECT_EQ(c.status, clustering::ClusterStatus::kPending);

  s = h.service->run_translation(id);
  EXPECT_EQ(s.stage, Stage::kTranslated);
  for (const auto& c : s.clusters) {
    EXPECT_EQ(c.status, clustering::ClusterStatus::kTranslated);
    EXPECT_EQ(c.title, "Price clarity");
  }
  EXPECT_EQ(h.service->clusters(id), s.clusters);
  EXPECT_THROW(h.service->get_session("missing"), UnknownSession);
}

TEST(Service, ConfirmingContextClearsDownstreamEvenWhenUnchanged) {
  Harness h;
  std::string id = h.create();
  h.service->run_retrieval_and_clustering(id);
  Session s = h.service->run_translation(id);
  std::string item = first_visual_item(s);
  h.service->get_preview(id, item);
  h.service->toggle_bookmark(id, item);

  s = h.service->confirm_context(id, *s.confirmed_context);
  EXPECT_EQ(s.stage, Stage::kContextReady);
  EXPECT_TRUE(s.ranked.empty());
  EXPECT_TRUE(s.clusters.empty());
  EXPECT_TRUE(s.previews.empty());
  EXPECT_TRUE(s.bookmarks.empty());
  EXPECT_EQ(h.service->get_session(id).stage, Stage::kContextReady);
  EXPECT_THROW(h.service->confirm_context(id, DesignContext{}), AllAbsentError);
}

TEST(Service, RetrievalWithTheSameKIsReused) {
  Harness h;
  std::string id = h.create();
  Session a = h.service->run_retrieval_and_clustering(id);
  std::size_t calls = h.provider->total_calls();
  Session b = h.service->run_retrieval_and_clustering(id, 4);
  EXPECT_EQ(h.provider->total_calls(), calls);
  // Session files keep ranked papers without their implication embeddings.
  EXPECT_EQ(to_json(a, false).dump(), to_json(b, false).dump());

  Session c = h.service->run_retrieval_and_clustering(id, 6);
  EXPECT_GT(h.provider->total_calls(), calls);
  EXPECT_EQ(c.top_k, 6u);
  EXPECT_EQ(c.ranked.size(), 6u);
  // The top four are unchanged when k grows.
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(c.ranked[i].paper_id, a.ranked[i].paper_id);
  EXPECT_THROW(h.service->run_retrieval_and_clustering(id, 0), PreconditionError);
}

TEST(Service, ConcurrentRetrievalRequestsRunOnce) {
  Harness h;
  std::string id = h.create();
  std::size_t before = h.provider->total_calls();
  std::vector<std::future<Session>> runs;
  for (int i = 0; i < 4; ++i) {
    runs.push_back(std::async(std::launch::async, [&] { return h.service->run_retrieval_and_clustering(id); }));
  }
  std::vector<Session> results;
  for (auto& f : runs) results.push_back(f.get());
  for (const auto& r : results) EXPECT_EQ(r.clusters, results[0].clusters);
  Harness fresh;
  std::string other = fresh.create();
  std::size_t single_before = fresh.provider->total_calls();
  fresh.service->run_retrieval_and_clustering(other);
  EXPECT_EQ(h.provider->total_calls() - before, fresh.provider->total_calls() - single_before);
}

TEST(Service, BookmarkToggleIsAnInvolutionAndPersists) {
  Harness h;
  std::string id = h.create();
  h.service->run_retrieval_and_clustering(id);
  Session s = h.service->run_translation(id);
  std::string item = s.clusters.front().action_items.front().item_id;

  EXPECT_TRUE(h.service->toggle_bookmark(id, item));
  ASSERT_EQ(h.service->list_bookmarks(id).size(), 1u);
  EXPECT_TRUE(h.service->list_bookmarks(id)[0].bookmark);

  // A second service over the same directory sees the bookmark.
  Service reopened(h.config, h.provider, rt::small_index());
  EXPECT_EQ(reopened.list_bookmarks(id).size(), 1u);
  EXPECT_FALSE(reopened.toggle_bookmark(id, item));
  EXPECT_TRUE(h.service->list_bookmarks(id).empty());
  EXPECT_FALSE(h.service->get_session(id).find_item(item)->bookmark);
  EXPECT_THROW(h.service->toggle_bookmark(id, "c0-a99"), UnknownItem);
}

TEST(Service, PreviewWaitsForReconstructionThenCaches) {
  std::promise<void> gate;
  std::shared_future<void> open = gate.get_future().share();
  Harness h(
      [open](const std::string& stage, const provider::ProviderRequest& req) {
        if (stage == "reconstruct_screen") open.wait();
        return rt::pipeline_answer(stage, req);
      },
      ReconstructionMode::kBackground);
  std::string id = h.create();
  h.service->run_retrieval_and_clustering(id);
  Session s = h.service->run_translation(id);
  std::string item = first_visual_item(s);
  ASSERT_FALSE(item.empty());

  Progress p = h.service->progress(id);
  EXPECT_EQ(p.running, "reconstruct");
  EXPECT_EQ(p.screens_total, 2u);
  EXPECT_EQ(p.screens_ready, 0u);
  try {
    h.service->get_preview(id, item);
    FAIL() << "expected ReconstructionPendingError";
  } catch (const ReconstructionPendingError& e) {
    EXPECT_GT(e.retry_after_seconds(), 0);
  }

  gate.set_value();
  h.service->wait_for_reconstruction(id);
  p = h.service->progress(id);
  EXPECT_FALSE(p.running.has_value());
  EXPECT_EQ(p.screens_ready, 2u);

  auto previews = h.service->get_preview(id, item);
  ASSERT_EQ(previews.size(), 1u);
  EXPECT_FALSE(previews[0].failed);
  EXPECT_NE(previews[0].after_html.find("Book for 240 EUR"), std::string::npos);
  std::size_t calls = h.provider->calls("plan_edits");
  EXPECT_EQ(h.service->get_preview(id, item), previews);
  EXPECT_EQ(h.provider->calls("plan_edits"), calls);
  EXPECT_EQ(h.service->get_session(id).previews.at(item), previews);
}

TEST(Service, PreviewRejectsUnknownAndNonVisualItems) {
  Harness h;
  std::string id = h.create();
  h.service->run_retrieval_and_clustering(id);
  Session s = h.service->run_translation(id);
  std::string non_visual;
  for (const auto& item : s.clusters.front().action_items) {
    if (!item.visually_representable) non_visual = item.item_id;
  }
  ASSERT_FALSE(non_visual.empty());
  EXPECT_THROW(h.service->get_preview(id, non_visual), NotRepresentableError);
  EXPECT_THROW(h.service->get_preview(id, "nope"), UnknownItem);
}

TEST(Service, AllAbsentContextWaitsForManualEntry) {
  Harness h([](const std::string& stage, const provider::ProviderRequest& req) {
    if (stage == "mockup_context") return std::string(R"({"domain":"not specified","metric":null})");
    return rt::pipeline_answer(stage, req);
  });
  auto created = h.service->create_session({rt::make_png(40, 80, 1)}, "blank");
  EXPECT_FALSE(created.context.has_value());
  EXPECT_FALSE(created.message.empty());
  Session s = h.service->get_session("blank");
  EXPECT_EQ(s.stage, Stage::kCreated);
  EXPECT_FALSE(s.warnings.empty());
  EXPECT_THROW(h.service->run_retrieval_and_clustering("blank"), PreconditionError);

  s = h.service->confirm_context("blank", travel());
  EXPECT_EQ(s.stage, Stage::kContextReady);
  EXPECT_EQ(h.service->run_retrieval_and_clustering("blank").stage, Stage::kClustered);
}

TEST(Service, TranslationRerunOnlyRetriesFailedClusters) {
  std::atomic<int> title_calls{0};
  Harness h([&](const std::string& stage, const provider::ProviderRequest& req) {
    if (stage == "cluster_title" && title_calls++ == 0) throw TransportError("upstream reset");
    return rt::pipeline_answer(stage, req);
  });
  std::string id = h.create();
  Session s = h.service->run_retrieval_and_clustering(id);
  ASSERT_GE(s.clusters.size(), 2u);

  s = h.service->run_translation(id);
  EXPECT_EQ(s.stage, Stage::kTranslated);
  std::size_t failed = 0;
  for (const auto& c : s.clusters) {
    if (c.status == clustering::ClusterStatus::kFailed) {
      ++failed;
      ASSERT_TRUE(c.error.has_value());
      EXPECT_NE(c.error->find("upstream reset"), std::string::npos);
      EXPECT_TRUE(c.action_items.empty());
    } else {
      EXPECT_EQ(c.status, clustering::ClusterStatus::kTranslated);
    }
  }
  EXPECT_EQ(failed, 1u);

  std::size_t compare_calls = h.provider->calls("compare_contrast");
  s = h.service->run_translation(id);
  EXPECT_EQ(h.provider->calls("compare_contrast"), compare_calls + 1);
  for (const auto& c : s.clusters) EXPECT_EQ(c.status, clustering::ClusterStatus::kTranslated);

  std::size_t total = h.provider->total_calls();
  Session again = h.service->run_translation(id);
  EXPECT_EQ(h.provider->total_calls(), total);
  EXPECT_EQ(again.clusters, s.clusters);
}

TEST(Service, TranslationFailsWhenEveryClusterFails) {
  Harness h([](const std::string& stage, const provider::ProviderRequest& req) {
    if (stage == "key_insights") throw TransportError("down");
    return rt::pipeline_answer(stage, req);
  });
  std::string id = h.create();
  h.service->run_retrieval_and_clustering(id);
  EXPECT_THROW(h.service->run_translation(id), TranslationFailedError);
  Session s = h.service->get_session(id);
  EXPECT_EQ(s.stage, Stage::kClustered);
  for (const auto& c : s.clusters) EXPECT_EQ(c.status, clustering::ClusterStatus::kFailed);
}

TEST(Service, SourcesGroupImplicationsByPaperInRankOrder) {
  Harness h(rt::pipeline_answer, ReconstructionMode::kSynchronous, 3);
  std::string id = h.create();
  Session s = h.service->run_retrieval_and_clustering(id);
  ASSERT_EQ(s.ranked.size(), 3u);
  std::size_t seen = 0;
  for (const auto& c : s.clusters) {
    auto groups = h.service->get_sources(id, c.cluster_id);
    std::size_t last_rank = 0;
    std::set<std::string> ids;
    for (const auto& g : groups) {
      std::size_t rank = 0;
      while (s.ranked[rank].paper_id != g.paper_id) ++rank;
      EXPECT_GE(rank, last_rank);
      last_rank = rank;
      EXPECT_EQ(g.similarity, s.ranked[rank].similarity);
      EXPECT_EQ(g.title, s.ranked[rank].title);
      for (const auto& imp : g.implications) {
        EXPECT_EQ(imp.paper_id, g.paper_id);
        ids.insert(imp.implication_id);
      }
    }
    EXPECT_EQ(ids.size(), c.implications.size());
    seen += ids.size();
  }
  EXPECT_EQ(seen, 6u);  // 3 papers x 2 implications
  EXPECT_THROW(h.service->get_sources(id, "c99"), UnknownCluster);
}

TEST(Service, TimingsAndProgressAfterARun) {
  Harness h;
  std::string id = h.create();
  h.service->run_retrieval_and_clustering(id);
  Session s = h.service->run_translation(id);
  for (const char* key : {"context_extraction", "reconstruction", "retrieval_and_clustering", "translation"}) {
    EXPECT_EQ(s.timings.count(key), 1u) << key;
  }
  Progress p = h.service->progress(id);
  EXPECT_EQ(p.stage, Stage::kTranslated);
  EXPECT_FALSE(p.running.has_value());
  EXPECT_FALSE(p.completed_steps.empty());
  json j = to_json(p);
  EXPECT_EQ(j["stage"], "translated");
  EXPECT_EQ(j["screens"]["ready"], 2);
}

TEST(Service, RejectsBadScreens) {
  Harness h;
  EXPECT_THROW(h.service->create_session({"not a png"}), BadImageError);
  EXPECT_THROW(h.service->create_session({}), BadImageError);
}
