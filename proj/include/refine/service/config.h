#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "refine/provider/http_provider.h"
#include "refine/provider/provider.h"

namespace refine::service {

enum class TimingSource { kAuto, kWall, kProvider };

struct Config {
  std::string index_path;
  std::string data_dir = "refine-data";

  provider::HttpProviderConfig provider;
  int request_timeout_seconds = 120;

  // Fixture layer; without a mode every call goes to the live provider.
  std::optional<provider::FixtureMode> fixture_mode;
  std::string fixture_path;

  std::size_t top_k = 8;
  std::size_t n_max = 10;
  std::size_t token_budget = 24000;
  std::size_t ingest_workers = 4;
  std::size_t translation_workers = 4;
  std::size_t reconstruction_workers = 4;

  /// auto: summed provider latency under replay modes, wall clock otherwise.
  TimingSource timing = TimingSource::kAuto;

  bool deterministic() const;
  bool use_provider_timing() const;
};

/// Reads a JSON config file; unknown keys are rejected (SchemaError).
Config config_from_json(const nlohmann::json& j, Config base = {});
Config load_config(const std::filesystem::path& path, Config base = {});
nlohmann::json to_json(const Config& config);

/// Applies REFINE_PROVIDER_URL, REFINE_PROVIDER_KEY, REFINE_EMBED_URL,
/// REFINE_FIXTURE_MODE and REFINE_FIXTURE_PATH on top of `config`.
Config apply_environment(Config config);

/// Live HTTP provider, optionally wrapped by the fixture layer. In
/// replay_strict mode no upstream is constructed at all.
std::shared_ptr<provider::Provider> make_provider(const Config& config);

}  // namespace refine::service
