#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>
#include <json.hpp>

#include "refine/common/encoding.h"
#include "refine/common/error.h"
#include "refine/common/util.h"
#include "refine/index/paper_index.h"
#include "refine/paper/extraction.h"
#include "refine/retrieval/retrieval.h"
#include "refine/service/api.h"
#include "refine/service/config.h"
#include "refine/service/service.h"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace refine;

namespace {

struct Globals {
  std::string config_path;
  std::string fixture_mode;
  std::string fixture_path;
  std::string log_level = "warn";
};

service::Config resolve_config(const Globals& g) {
  service::Config c;
  if (!g.config_path.empty()) c = service::load_config(g.config_path);
  c = service::apply_environment(std::move(c));
  if (!g.fixture_mode.empty()) c.fixture_mode = provider::fixture_mode_from_string(g.fixture_mode);
  if (!g.fixture_path.empty()) c.fixture_path = g.fixture_path;
  return c;
}

// Record runs append in completion order; rewrite sorted so the committed
// file does not depend on scheduling.
void finish_recording(const std::shared_ptr<provider::Provider>& p) {
  if (auto fp = std::dynamic_pointer_cast<provider::FixtureProvider>(p);
      fp && fp->mode() == provider::FixtureMode::kRecord) {
    fp->store()->compact();
  }
}

std::shared_ptr<const index::PaperIndex> index_from_dir(const fs::path& tei_dir,
                                                        const service::Config& c,
                                                        provider::Provider& p) {
  Diagnostics diag;
  auto records = paper::ingest_directory(tei_dir, p, c.ingest_workers, &diag, c.token_budget);
  auto idx = std::make_shared<index::PaperIndex>(index::build_index(records, p, c.ingest_workers, &diag));
  // Replayed builds must not depend on the clock.
  if (c.deterministic()) idx->created_at = deterministic_timestamp();
  return idx;
}

int cmd_index_build(const service::Config& c, const std::string& tei_dir, const std::string& out) {
  auto p = service::make_provider(c);
  auto idx = index_from_dir(tei_dir, c, *p);
  index::save_index(*idx, out);
  finish_recording(p);
  std::cout << fmt::format("wrote {} papers (dim {}) to {}\n", idx->entries.size(),
                           idx->embedding_dim, out);
  return 0;
}

int cmd_index_inspect(const std::string& path, bool as_json) {
  auto start = std::chrono::steady_clock::now();
  index::PaperIndex idx = index::load_index(path);
  double load_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (as_json) {
    json papers = json::array();
    for (const auto& e : idx.entries) {
      json dims = json::array();
      for (const auto& d : e.context.present_dimensions()) dims.push_back(dimension_name(d));
      papers.push_back({{"paper_id", e.paper_id},
                        {"title", e.title},
                        {"present_dimensions", dims},
                        {"implications", e.implications.size()}});
    }
    json out = {{"schema_version", idx.schema_version},
                {"embedding_dim", idx.embedding_dim},
                {"created_at", idx.created_at},
                {"count", idx.entries.size()},
                {"papers", papers}};
    std::cout << out.dump(2) << "\n";
    return 0;
  }
  std::size_t implications = 0;
  for (const auto& e : idx.entries) implications += e.implications.size();
  std::cout << fmt::format(
      "schema_version {}\nembedding_dim  {}\ncreated_at     {}\npapers         {}\n"
      "implications   {}\nload_seconds   {:.3f}\n",
      idx.schema_version, idx.embedding_dim, idx.created_at, idx.entries.size(), implications,
      load_s);
  return 0;
}

int cmd_retrieve(const service::Config& c, const std::string& index_path,
                 const std::string& context_arg, std::optional<std::size_t> top_k) {
  index::PaperIndex idx = index::load_index(index_path);
  std::string text = fs::exists(context_arg) ? read_file(context_arg) : context_arg;
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw SchemaError("--context must be a JSON object or a file holding one");
  DesignContext ctx = context_from_json(j);
  ctx.set_origin(ContextOrigin::kMockup);

  auto p = service::make_provider(c);
  index::Embedder embedder(*p);
  if (!idx.empty_embedding.empty()) embedder.seed("", idx.empty_embedding);
  auto query = retrieval::build_query(ctx, embedder);
  auto ranked = retrieval::rank_papers(query, idx, top_k.value_or(c.top_k));
  finish_recording(p);
  json out = json::array();
  for (const auto& r : ranked) {
    json dims = json::array();
    for (auto d : r.valid_dimensions) dims.push_back(dimension_name(d));
    out.push_back({{"paper_id", r.paper_id},
                   {"title", r.title},
                   {"similarity", r.similarity},
                   {"valid_dimensions", dims}});
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_analyze(service::Config c, const std::string& index_path, const std::string& tei_dir,
                const std::vector<std::string>& screens, const std::string& out,
                const std::string& data_dir) {
  auto p = service::make_provider(c);
  std::shared_ptr<const index::PaperIndex> idx;
  if (!index_path.empty()) {
    idx = std::make_shared<index::PaperIndex>(index::load_index(index_path));
  } else {
    idx = index_from_dir(tei_dir, c, *p);
  }

  std::optional<fs::path> scratch;
  if (!data_dir.empty()) {
    c.data_dir = data_dir;
  } else {
    scratch = fs::temp_directory_path() /
              fmt::format("refine-analyze-{}", std::chrono::steady_clock::now().time_since_epoch().count());
    c.data_dir = scratch->string();
  }

  int status = 0;
  {
    service::Service svc(c, p, idx, service::ReconstructionMode::kSynchronous);
    std::vector<std::string> pngs;
    for (const auto& s : screens) pngs.push_back(read_file(s));
    // Headless ids come from the images so reruns produce the same file.
    mockup::MockupBundle probe = mockup::make_bundle(pngs);
    std::string id = "m-" + probe.mockup_id;
    auto created = svc.create_session(std::move(pngs), id);
    if (!created.context) throw AllAbsentError(created.message);

    std::vector<std::string> notes;
    try {
      svc.run_retrieval_and_clustering(id);
      svc.run_translation(id);
      for (const auto& cluster : svc.clusters(id)) {
        for (const auto& item : cluster.action_items) {
          if (!item.visually_representable) continue;
          try {
            svc.get_preview(id, item.item_id);
          } catch (const Error& e) {
            notes.push_back(fmt::format("preview for {} failed: {}: {}", item.item_id,
                                        error_code_name(e.code()), e.what()));
          }
        }
      }
    } catch (const Error& e) {
      std::cerr << fmt::format("error: {}: {}\n", error_code_name(e.code()), e.what());
      status = 1;
    }
    service::Session s = svc.get_session(id);
    s.warnings.insert(s.warnings.end(), notes.begin(), notes.end());
    for (const auto& n : notes) std::cerr << "warning: " << n << "\n";
    write_file_atomic(out, service::serialize_session(s));
    std::cout << fmt::format("session {} at stage {} written to {}\n", id,
                             service::to_string(s.stage), out);
  }
  if (scratch) fs::remove_all(*scratch);
  finish_recording(p);
  return status;
}

int cmd_serve(service::Config c, const std::string& index_path, const std::string& host, int port,
              const std::string& static_dir) {
  auto p = service::make_provider(c);
  auto idx = std::make_shared<index::PaperIndex>(index::load_index(index_path));
  service::Service svc(c, p, idx);
  std::optional<fs::path> assets;
  if (!static_dir.empty()) assets = static_dir;
  service::HttpServer server(svc, assets);
  int bound = server.bind(host, port);
  spdlog::warn("serving {} papers on http://{}:{}/v1", idx->entries.size(), host, bound);
  server.listen();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mockup refinement pipeline: paper index, retrieval, insights and previews"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--fixture-mode", g.fixture_mode, "record | replay | replay_strict")
      ->check(CLI::IsMember({"record", "replay", "replay_strict"}));
  app.add_option("--fixture-path", g.fixture_path, "Fixture JSON Lines file");
  app.add_option("--log-level", g.log_level, "trace | debug | info | warn | error | off");

  auto* index_cmd = app.add_subcommand("index", "Build or inspect a paper index");
  index_cmd->require_subcommand(1);
  std::string tei_dir, out, index_path;
  auto* build = index_cmd->add_subcommand("build", "Ingest a directory of TEI files");
  build->add_option("--tei-dir", tei_dir, "Directory of TEI XML files")
      ->required()
      ->check(CLI::ExistingDirectory);
  build->add_option("--out", out, "Index file to write")->required();

  bool inspect_json = false;
  auto* inspect = index_cmd->add_subcommand("inspect", "Summarize an index file");
  inspect->add_option("index", index_path, "Index file")->required()->check(CLI::ExistingFile);
  inspect->add_flag("--json", inspect_json, "Per-paper JSON listing");

  std::string context_arg;
  std::optional<std::size_t> top_k;
  auto* retrieve = app.add_subcommand("retrieve", "Rank papers for a design context");
  retrieve->add_option("--index", index_path, "Index file")->required()->check(CLI::ExistingFile);
  retrieve->add_option("--context", context_arg, "Context JSON or a file holding it")->required();
  retrieve->add_option("--top-k", top_k, "Number of papers")->check(CLI::PositiveNumber);

  std::vector<std::string> screens;
  std::string data_dir;
  auto* analyze = app.add_subcommand("analyze", "Run the full pipeline headless");
  auto* idx_opt =
      analyze->add_option("--index", index_path, "Index file")->check(CLI::ExistingFile);
  auto* tei_opt = analyze->add_option("--tei-dir", tei_dir, "Build the index from TEI files")
                      ->check(CLI::ExistingDirectory);
  idx_opt->excludes(tei_opt);
  analyze->add_option("--screens", screens, "Mockup screen PNGs")
      ->required()
      ->check(CLI::ExistingFile);
  analyze->add_option("--out", out, "Session JSON to write")->required();
  analyze->add_option("--data-dir", data_dir, "Keep session files here");

  std::string host = "127.0.0.1";
  int port = 8080;
  std::string static_dir;
  auto* serve = app.add_subcommand("serve", "Serve the /v1 HTTP API");
  serve->add_option("--index", index_path, "Index file")->required()->check(CLI::ExistingFile);
  serve->add_option("--port", port, "Port (0 picks one)");
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--static", static_dir, "Directory served at /")
      ->check(CLI::ExistingDirectory);
  serve->add_option("--data-dir", data_dir, "Session directory");

  CLI11_PARSE(app, argc, argv);

  auto logger = spdlog::stderr_color_mt("refine");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::from_str(g.log_level));

  try {
    service::Config c = resolve_config(g);
    if (*index_cmd) {
      if (*build) return cmd_index_build(c, tei_dir, out);
      return cmd_index_inspect(index_path, inspect_json);
    }
    if (*retrieve) return cmd_retrieve(c, index_path, context_arg, top_k);
    if (*analyze) {
      if (index_path.empty() && tei_dir.empty()) {
        std::cerr << "error: analyze needs --index or --tei-dir\n";
        return 2;
      }
      return cmd_analyze(c, index_path, tei_dir, screens, out, data_dir);
    }
    if (!data_dir.empty()) c.data_dir = data_dir;
    return cmd_serve(c, index_path, host, port, static_dir);
  } catch (const Error& e) {
    std::cerr << fmt::format("error: {}: {}\n", error_code_name(e.code()), e.what());
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
