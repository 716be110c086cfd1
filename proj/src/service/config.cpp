#include "refine/service/config.h"

#include <cstdlib>
#include <set>

#include <fmt/format.h>

#include "refine/common/error.h"
#include "refine/common/util.h"

namespace refine::service {

using nlohmann::json;

bool Config::deterministic() const {
  return fixture_mode && *fixture_mode != provider::FixtureMode::kRecord;
}

bool Config::use_provider_timing() const {
  if (timing == TimingSource::kAuto) return deterministic();
  return timing == TimingSource::kProvider;
}

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed, std::string_view where) {
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw SchemaError(fmt::format("unknown config key {}{}", where, key));
  }
}

}  // namespace

Config config_from_json(const json& j, Config c) {
  if (!j.is_object()) throw SchemaError("config must be a JSON object");
  reject_unknown(j, {"index_path", "data_dir", "provider", "fixture", "top_k", "n_max",
                     "token_budget", "workers", "timing"}, "");
  try {
    c.index_path = j.value("index_path", c.index_path);
    c.data_dir = j.value("data_dir", c.data_dir);
    if (auto it = j.find("provider"); it != j.end()) {
      const json& p = *it;
      reject_unknown(p, {"url", "embed_url", "api_key", "chat_model", "vision_model", "embed_model",
                         "max_retries", "initial_backoff_ms", "timeout_seconds"},
                     "provider.");
      c.provider.chat_url = p.value("url", c.provider.chat_url);
      c.provider.embed_url = p.value("embed_url", c.provider.embed_url);
      c.provider.api_key = p.value("api_key", c.provider.api_key);
      c.provider.chat_model = p.value("chat_model", c.provider.chat_model);
      c.provider.vision_model = p.value("vision_model", c.provider.vision_model);
      c.provider.embed_model = p.value("embed_model", c.provider.embed_model);
      c.provider.max_retries = p.value("max_retries", c.provider.max_retries);
      c.provider.initial_backoff = std::chrono::milliseconds(
          p.value("initial_backoff_ms", static_cast<long>(c.provider.initial_backoff.count())));
      c.request_timeout_seconds = p.value("timeout_seconds", c.request_timeout_seconds);
    }
    if (auto it = j.find("fixture"); it != j.end()) {
      reject_unknown(*it, {"mode", "path"}, "fixture.");
      if (auto m = it->find("mode"); m != it->end() && !m->is_null()) {
        c.fixture_mode = provider::fixture_mode_from_string(m->get<std::string>());
      }
      c.fixture_path = it->value("path", c.fixture_path);
    }
    c.top_k = j.value("top_k", c.top_k);
    c.n_max = j.value("n_max", c.n_max);
    c.token_budget = j.value("token_budget", c.token_budget);
    if (auto it = j.find("workers"); it != j.end()) {
      reject_unknown(*it, {"ingest", "translation", "reconstruction"}, "workers.");
      c.ingest_workers = it->value("ingest", c.ingest_workers);
      c.translation_workers = it->value("translation", c.translation_workers);
      c.reconstruction_workers = it->value("reconstruction", c.reconstruction_workers);
    }
    if (auto it = j.find("timing"); it != j.end()) {
      std::string t = it->get<std::string>();
      if (t == "auto") c.timing = TimingSource::kAuto;
      else if (t == "wall") c.timing = TimingSource::kWall;
      else if (t == "provider") c.timing = TimingSource::kProvider;
      else throw SchemaError(fmt::format("unknown timing source '{}'", t));
    }
  } catch (const json::exception& e) {
    throw SchemaError(fmt::format("malformed config: {}", e.what()));
  }
  if (c.top_k == 0) throw SchemaError("top_k must be positive");
  if (c.n_max < 2) throw SchemaError("n_max must be at least 2");
  return c;
}

Config load_config(const std::filesystem::path& path, Config base) {
  json j = json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) throw SchemaError(fmt::format("{} is not valid JSON", path.string()));
  return config_from_json(j, std::move(base));
}

json to_json(const Config& c) {
  std::string_view timing = c.timing == TimingSource::kWall       ? "wall"
                            : c.timing == TimingSource::kProvider ? "provider"
                                                                  : "auto";
  return {{"index_path", c.index_path},
          {"data_dir", c.data_dir},
          {"provider",
           {{"url", c.provider.chat_url},
            {"embed_url", c.provider.embed_url},
            {"chat_model", c.provider.chat_model},
            {"vision_model", c.provider.vision_model},
            {"embed_model", c.provider.embed_model},
            {"max_retries", c.provider.max_retries},
            {"initial_backoff_ms", c.provider.initial_backoff.count()},
            {"timeout_seconds", c.request_timeout_seconds}}},
          {"fixture",
           {{"mode", c.fixture_mode ? json(provider::to_string(*c.fixture_mode)) : json(nullptr)},
            {"path", c.fixture_path}}},
          {"top_k", c.top_k},
          {"n_max", c.n_max},
          {"token_budget", c.token_budget},
          {"workers",
           {{"ingest", c.ingest_workers},
            {"translation", c.translation_workers},
            {"reconstruction", c.reconstruction_workers}}},
          {"timing", timing}};
}

Config apply_environment(Config c) {
  auto env = [](const char* name) -> std::optional<std::string> {
    const char* v = std::getenv(name);
    if (!v || !*v) return std::nullopt;
    return std::string(v);
  };
  if (auto v = env("REFINE_PROVIDER_URL")) c.provider.chat_url = *v;
  if (auto v = env("REFINE_PROVIDER_KEY")) c.provider.api_key = *v;
  if (auto v = env("REFINE_EMBED_URL")) c.provider.embed_url = *v;
  if (auto v = env("REFINE_FIXTURE_MODE")) c.fixture_mode = provider::fixture_mode_from_string(*v);
  if (auto v = env("REFINE_FIXTURE_PATH")) c.fixture_path = *v;
  return c;
}

std::shared_ptr<provider::Provider> make_provider(const Config& c) {
  std::shared_ptr<provider::Provider> upstream;
  const bool strict = c.fixture_mode == provider::FixtureMode::kReplayStrict;
  if (!strict && !c.provider.chat_url.empty()) {
    upstream = std::make_shared<provider::HttpProvider>(
        c.provider,
        provider::make_httplib_transport(std::chrono::seconds(c.request_timeout_seconds)));
  }
  if (!c.fixture_mode) {
    if (!upstream) {
      throw PreconditionError(
          "no provider configured: set REFINE_PROVIDER_URL or a fixture mode and path");
    }
    return upstream;
  }
  if (c.fixture_path.empty()) throw PreconditionError("fixture mode set without a fixture path");
  if (*c.fixture_mode == provider::FixtureMode::kRecord && !upstream) {
    throw PreconditionError("record mode needs a live provider URL");
  }
  return std::make_shared<provider::FixtureProvider>(provider::FixtureStore::load(c.fixture_path),
                                                     *c.fixture_mode, upstream);
}

}  // namespace refine::service
