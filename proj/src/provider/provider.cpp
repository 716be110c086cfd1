#include "refine/provider/provider.h"

#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "refine/common/error.h"
#include "refine/common/util.h"
#include "refine/provider/structured.h"

namespace refine::provider {

using nlohmann::json;

ProviderResponse call(const ProviderRequest& request, Provider& provider) {
  request.validate();
  ProviderResponse response = provider.complete(request);
  ResponseKind expected =
      request.kind == RequestKind::kEmbed ? ResponseKind::kVector : ResponseKind::kText;
  if (response.kind != expected || (expected == ResponseKind::kText && !response.text) ||
      (expected == ResponseKind::kVector && !response.vector)) {
    throw SchemaError(fmt::format("stage '{}' expected a {} response", request.stage(),
                                  to_string(expected)));
  }
  if (request.response_schema_hint) {
    // Surfaces malformed structured output at the gateway boundary.
    (void)parse_structured(*response.text, *request.response_schema_hint);
  }
  return response;
}

json call_structured(const ProviderRequest& request, Provider& provider) {
  ProviderResponse response = call(request, provider);
  return parse_structured(*response.text, request.response_schema_hint.value_or(""));
}

std::vector<float> call_embed(std::string text, Provider& provider) {
  return *call(ProviderRequest::embed(std::move(text)), provider).vector;
}

std::string_view to_string(FixtureMode mode) {
  switch (mode) {
    case FixtureMode::kRecord: return "record";
    case FixtureMode::kReplay: return "replay";
    case FixtureMode::kReplayStrict: return "replay_strict";
  }
  return "replay_strict";
}

FixtureMode fixture_mode_from_string(std::string_view text) {
  if (text == "record") return FixtureMode::kRecord;
  if (text == "replay") return FixtureMode::kReplay;
  if (text == "replay_strict") return FixtureMode::kReplayStrict;
  throw PreconditionError(fmt::format("unknown fixture mode '{}'", text));
}

std::shared_ptr<FixtureStore> FixtureStore::load(const std::filesystem::path& path) {
  auto store = std::make_shared<FixtureStore>();
  store->path_ = path;
  std::ifstream in(path, std::ios::binary);
  if (!in) return store;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("digest") || !j.contains("response")) {
      throw SchemaError(fmt::format("{}:{}: malformed fixture line", path.string(), line_no));
    }
    store->entries_[j["digest"].get<std::string>()] =
        Entry{j.value("request_summary", json::object()), response_from_json(j["response"])};
  }
  return store;
}

std::optional<ProviderResponse> FixtureStore::find(const std::string& digest) const {
  std::shared_lock lock(mu_);
  auto it = entries_.find(digest);
  if (it == entries_.end()) return std::nullopt;
  return it->second.response;
}

void FixtureStore::insert(const std::string& digest, Entry entry) {
  std::unique_lock lock(mu_);
  if (path_) {
    json line = {{"digest", digest},
                 {"request_summary", entry.request_summary},
                 {"response", response_to_json(entry.response)}};
    std::ofstream out(*path_, std::ios::binary | std::ios::app);
    if (!out) throw IoError(fmt::format("cannot append to fixture store {}", path_->string()));
    out << line.dump() << '\n';
  }
  entries_[digest] = std::move(entry);
}

std::size_t FixtureStore::size() const {
  std::shared_lock lock(mu_);
  return entries_.size();
}

std::string FixtureStore::serialize() const {
  std::shared_lock lock(mu_);
  std::string out;
  for (const auto& [digest, entry] : entries_) {
    json line = {{"digest", digest},
                 {"request_summary", entry.request_summary},
                 {"response", response_to_json(entry.response)}};
    out += line.dump();
    out += '\n';
  }
  return out;
}

void FixtureStore::compact() const {
  if (path_) save(*path_);
}

void FixtureStore::save(const std::filesystem::path& path) const {
  write_file_atomic(path, serialize());
}

FixtureProvider::FixtureProvider(std::shared_ptr<FixtureStore> store, FixtureMode mode,
                                 std::shared_ptr<Provider> upstream)
    : store_(std::move(store)), mode_(mode), upstream_(std::move(upstream)) {
  if (mode_ == FixtureMode::kReplayStrict) upstream_.reset();
  if (mode_ == FixtureMode::kRecord && !upstream_) {
    throw PreconditionError("record mode needs an upstream provider");
  }
}

ProviderResponse FixtureProvider::complete(const ProviderRequest& request) {
  std::string digest = request_digest(request);
  if (auto hit = store_->find(digest)) return *hit;
  if (mode_ == FixtureMode::kReplayStrict || !upstream_) {
    throw FixtureMiss(fmt::format("no fixture for {} request (stage '{}', digest {})",
                                  to_string(request.kind), request.stage(), digest));
  }
  ++upstream_calls_;
  ProviderResponse response = upstream_->complete(request);
  if (mode_ == FixtureMode::kRecord) {
    store_->insert(digest, FixtureStore::Entry{request_summary(request), response});
  }
  return response;
}

ProviderResponse MeteredProvider::complete(const ProviderRequest& request) {
  ProviderResponse response = inner_.complete(request);
  std::lock_guard lock(mu_);
  total_us_ += static_cast<std::int64_t>(std::llround(response.latency_seconds * 1e6));
  ++calls_;
  return response;
}

double MeteredProvider::total_latency() const {
  std::lock_guard lock(mu_);
  return static_cast<double>(total_us_) / 1e6;
}

std::size_t MeteredProvider::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

}  // namespace refine::provider
