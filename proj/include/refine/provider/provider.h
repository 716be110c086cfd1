#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>

#include <json.hpp>

#include "refine/provider/request.h"

namespace refine::provider {

/// A configured model endpoint. Implementations must be safe to call from
/// several pipeline tasks at once.
class Provider {
 public:
  virtual ~Provider() = default;
  virtual ProviderResponse complete(const ProviderRequest& request) = 0;
};

/// Validates the request, dispatches it, checks the response kind and, when a
/// schema hint is attached, that the text parses against it (SchemaError).
ProviderResponse call(const ProviderRequest& request, Provider& provider);

/// call() followed by parse_structured() on the response text.
nlohmann::json call_structured(const ProviderRequest& request, Provider& provider);

std::vector<float> call_embed(std::string text, Provider& provider);

enum class FixtureMode { kRecord, kReplay, kReplayStrict };

std::string_view to_string(FixtureMode mode);
/// Accepts "record", "replay", "replay_strict".
FixtureMode fixture_mode_from_string(std::string_view text);

/// Digest-keyed responses persisted as JSON Lines:
/// {"digest": ..., "request_summary": {...}, "response": {...}}.
class FixtureStore {
 public:
  struct Entry {
    nlohmann::json request_summary;
    ProviderResponse response;
  };

  FixtureStore() = default;
  /// Missing files load as an empty store; later lines win on duplicate digests.
  static std::shared_ptr<FixtureStore> load(const std::filesystem::path& path);

  std::optional<ProviderResponse> find(const std::string& digest) const;
  /// Inserts and, when the store is file-backed, appends the line to disk.
  void insert(const std::string& digest, Entry entry);
  std::size_t size() const;

  /// Rewrites the backing file sorted by digest, dropping superseded lines.
  void compact() const;
  void save(const std::filesystem::path& path) const;

  const std::optional<std::filesystem::path>& path() const { return path_; }

 private:
  std::string serialize() const;

  mutable std::shared_mutex mu_;
  std::map<std::string, Entry> entries_;
  std::optional<std::filesystem::path> path_;
};

/// Record/replay stand-in for a live provider.
/// - record: hits are served from the store; misses go upstream and are stored.
/// - replay: hits are served; misses go upstream (not stored) or raise
///   FixtureMiss when no upstream is configured.
/// - replay_strict: misses always raise FixtureMiss; upstream is never used.
class FixtureProvider : public Provider {
 public:
  FixtureProvider(std::shared_ptr<FixtureStore> store, FixtureMode mode,
                  std::shared_ptr<Provider> upstream = nullptr);

  ProviderResponse complete(const ProviderRequest& request) override;

  FixtureMode mode() const { return mode_; }
  const std::shared_ptr<FixtureStore>& store() const { return store_; }
  std::size_t upstream_calls() const { return upstream_calls_.load(); }

 private:
  std::shared_ptr<FixtureStore> store_;
  FixtureMode mode_;
  std::shared_ptr<Provider> upstream_;
  std::atomic<std::size_t> upstream_calls_{0};
};

/// Pass-through that sums the latency reported by every response it sees.
/// Used to attribute model time to pipeline stages. Sums whole microseconds so
/// the total does not depend on the completion order of concurrent calls.
class MeteredProvider : public Provider {
 public:
  explicit MeteredProvider(Provider& inner) : inner_(inner) {}

  ProviderResponse complete(const ProviderRequest& request) override;

  double total_latency() const;
  std::size_t calls() const;

 private:
  Provider& inner_;
  mutable std::mutex mu_;
  std::int64_t total_us_ = 0;
  std::size_t calls_ = 0;
};

}  // namespace refine::provider
