#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "refine/common/util.h"
#include "refine/paper/design_context.h"
#include "refine/paper/paper_doc.h"
#include "refine/provider/provider.h"

namespace refine::paper {

inline constexpr std::size_t kDefaultTokenBudget = 24000;
inline constexpr int kPaperRecordSchemaVersion = 1;

struct DesignImplication {
  std::string implication_id;  // "<paper_id>#<n>"
  std::string paper_id;
  std::string text;
  std::string source_paragraph;
  std::vector<std::string> rationale_tags;
  std::optional<std::string> para_key;

  bool operator==(const DesignImplication&) const = default;
};

nlohmann::json to_json(const DesignImplication& imp);
DesignImplication implication_from_json(const nlohmann::json& j);

/// Text normalization used for containment checks: NFC, whitespace collapsed.
std::string normalize_for_match(std::string_view text);

/// Asks the model for the six dimensions of the paper. An all-absent context
/// is a valid answer.
DesignContext extract_paper_context(const PaperDoc& doc, provider::Provider& provider,
                                    std::size_t token_budget = kDefaultTokenBudget);

/// Asks the model for the paper's design implications and keeps only those
/// whose source paragraph can be found in the document.
std::vector<DesignImplication> extract_implications(const PaperDoc& doc,
                                                    provider::Provider& provider,
                                                    Diagnostics* diag = nullptr,
                                                    std::size_t token_budget = kDefaultTokenBudget);

/// Applies the source-paragraph filter to raw model output. Exposed for tests
/// and for re-filtering recorded answers.
std::vector<DesignImplication> filter_implications(const PaperDoc& doc,
                                                   const nlohmann::json& answer,
                                                   Diagnostics* diag = nullptr);

struct PaperRecord {
  PaperDoc doc;
  DesignContext context;
  std::vector<DesignImplication> implications;
  bool excluded_from_index = false;  // no dimension present
};

nlohmann::json to_json(const PaperRecord& record);
/// Throws SchemaVersionError for an unknown schema_version.
PaperRecord record_from_json(const nlohmann::json& j);

PaperRecord ingest_tei(std::string_view xml_bytes, std::string source_path,
                       provider::Provider& provider, Diagnostics* diag = nullptr,
                       std::size_t token_budget = kDefaultTokenBudget);

PaperRecord ingest_paper(const std::filesystem::path& xml_path, provider::Provider& provider,
                         Diagnostics* diag = nullptr,
                         std::size_t token_budget = kDefaultTokenBudget);

/// Records keyed by paper_id; ingesting the same content again replaces.
class RecordSet {
 public:
  /// Returns true when an existing record was replaced.
  bool upsert(PaperRecord record);
  const PaperRecord* find(const std::string& paper_id) const;
  std::size_t size() const { return records_.size(); }
  /// Records ordered by paper_id.
  std::vector<PaperRecord> records() const;

 private:
  std::map<std::string, PaperRecord> records_;
};

/// Ingests every *.xml file under `dir` (sorted by name) on up to `workers`
/// threads. Files that are not usable TEI are skipped with a warning; provider
/// failures propagate. Result is ordered by paper_id.
std::vector<PaperRecord> ingest_directory(const std::filesystem::path& dir,
                                          provider::Provider& provider, std::size_t workers,
                                          Diagnostics* diag = nullptr,
                                          std::size_t token_budget = kDefaultTokenBudget);

}  // namespace refine::paper
