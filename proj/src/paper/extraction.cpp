#include "refine/paper/extraction.h"

#include <algorithm>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "refine/common/encoding.h"
#include "refine/common/error.h"
#include "refine/provider/prompts.h"

namespace refine::paper {

using nlohmann::json;
using provider::ProviderRequest;
using provider::RequestKind;
using provider::TextPart;

json to_json(const DesignImplication& imp) {
  json j = {{"implication_id", imp.implication_id},
            {"paper_id", imp.paper_id},
            {"text", imp.text},
            {"source_paragraph", imp.source_paragraph},
            {"rationale_tags", imp.rationale_tags}};
  j["para_key"] = imp.para_key ? json(*imp.para_key) : json(nullptr);
  return j;
}

DesignImplication implication_from_json(const json& j) {
  try {
    DesignImplication imp;
    imp.implication_id = j.at("implication_id").get<std::string>();
    imp.paper_id = j.at("paper_id").get<std::string>();
    imp.text = j.at("text").get<std::string>();
    imp.source_paragraph = j.at("source_paragraph").get<std::string>();
    imp.rationale_tags = j.value("rationale_tags", std::vector<std::string>{});
    if (auto it = j.find("para_key"); it != j.end() && it->is_string()) {
      imp.para_key = it->get<std::string>();
    }
    return imp;
  } catch (const json::exception& e) {
    throw SchemaError(fmt::format("malformed design implication: {}", e.what()));
  }
}

std::string normalize_for_match(std::string_view text) {
  return collapse_whitespace(nfc(text));
}

namespace {

ProviderRequest paper_request(std::string_view stage, const PaperDoc& doc,
                              std::size_t token_budget) {
  const auto& tmpl = provider::prompt(stage);
  ProviderRequest req;
  req.kind = RequestKind::kChat;
  req.system_instruction = tmpl.render();
  req.user_parts.push_back(TextPart{render_document(doc, token_budget)});
  req.response_schema_hint = tmpl.schema;
  return req;
}

std::vector<std::string> string_list(const json& value) {
  std::vector<std::string> out;
  if (value.is_string()) {
    std::string s = collapse_whitespace(value.get<std::string>());
    if (!s.empty()) out.push_back(std::move(s));
  } else if (value.is_array()) {
    for (const auto& v : value) {
      if (!v.is_string()) continue;
      std::string s = collapse_whitespace(v.get<std::string>());
      if (!s.empty()) out.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace

DesignContext extract_paper_context(const PaperDoc& doc, provider::Provider& provider,
                                    std::size_t token_budget) {
  if (doc.body_paragraph_count() == 0) throw EmptyBodyError("paper has no body paragraphs");
  json answer = provider::call_structured(paper_request("paper_context", doc, token_budget),
                                          provider);
  return context_from_model_output(answer, ContextOrigin::kPaper);
}

std::vector<DesignImplication> filter_implications(const PaperDoc& doc, const json& answer,
                                                   Diagnostics* diag) {
  json items = answer;
  if (items.is_object()) items = json::array({answer});
  if (!items.is_array()) throw SchemaError("implication answer must be a JSON array");

  struct Candidate {
    const Paragraph* paragraph;
    std::string normalized;
  };
  std::vector<Candidate> paragraphs;
  std::string joined;
  for (const Paragraph* p : doc.all_paragraphs()) {
    paragraphs.push_back({p, normalize_for_match(p->text)});
    if (!joined.empty()) joined += ' ';
    joined += paragraphs.back().normalized;
  }

  std::vector<DesignImplication> out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const json& item = items[i];
    if (!item.is_object()) throw SchemaError(fmt::format("implication [{}] is not an object", i));
    std::string text = collapse_whitespace(nfc(item.value("design_implication", "")));
    std::string source = normalize_for_match(item.value("original_paragraph", ""));
    if (text.empty() || source.empty()) {
      warn(diag, fmt::format("{}: implication [{}] dropped: empty text or source paragraph",
                             doc.paper_id, i));
      continue;
    }

    std::optional<std::string> claimed;
    if (auto it = item.find("paragraph_key"); it != item.end() && it->is_string() &&
                                              !it->get<std::string>().empty()) {
      claimed = it->get<std::string>();
    }
    const Candidate* located = nullptr;
    if (claimed) {
      for (const auto& c : paragraphs) {
        if (c.paragraph->para_key == *claimed && c.normalized.find(source) != std::string::npos) {
          located = &c;
          break;
        }
      }
    }
    if (!located) {
      for (const auto& c : paragraphs) {
        if (c.normalized.find(source) != std::string::npos) {
          located = &c;
          break;
        }
      }
    }
    if (!located && joined.find(source) == std::string::npos) {
      warn(diag, fmt::format("{}: implication [{}] dropped: source paragraph not found in document",
                             doc.paper_id, i));
      continue;
    }

    DesignImplication imp;
    imp.paper_id = doc.paper_id;
    imp.implication_id = fmt::format("{}#{}", doc.paper_id, out.size());
    imp.text = std::move(text);
    imp.source_paragraph = std::move(source);
    imp.rationale_tags = string_list(item.value("rationale", json()));
    if (located) imp.para_key = located->paragraph->para_key;
    if (imp.source_paragraph.find(imp.text) == std::string::npos) {
      spdlog::info("{}: implication text edited from source; returned \"{}\"",
                   imp.implication_id, imp.text);
    }
    out.push_back(std::move(imp));
  }
  return out;
}

std::vector<DesignImplication> extract_implications(const PaperDoc& doc,
                                                    provider::Provider& provider,
                                                    Diagnostics* diag,
                                                    std::size_t token_budget) {
  if (doc.body_paragraph_count() == 0) throw EmptyBodyError("paper has no body paragraphs");
  json answer = provider::call_structured(paper_request("paper_implications", doc, token_budget),
                                          provider);
  return filter_implications(doc, answer, diag);
}

json to_json(const PaperRecord& record) {
  json imps = json::array();
  for (const auto& imp : record.implications) imps.push_back(to_json(imp));
  return {{"schema_version", kPaperRecordSchemaVersion},
          {"paper", to_json(record.doc)},
          {"context", to_json(record.context)},
          {"implications", imps},
          {"excluded_from_index", record.excluded_from_index}};
}

PaperRecord record_from_json(const json& j) {
  int version = j.value("schema_version", 0);
  if (version != kPaperRecordSchemaVersion) {
    throw SchemaVersionError(fmt::format("paper record schema_version {} is not supported", version));
  }
  PaperRecord record;
  try {
    record.doc = paper_doc_from_json(j.at("paper"));
    record.context = context_from_json(j.at("context"));
    for (const auto& imp : j.at("implications")) {
      record.implications.push_back(implication_from_json(imp));
    }
    record.excluded_from_index = j.value("excluded_from_index", false);
  } catch (const json::exception& e) {
    throw SchemaError(fmt::format("malformed paper record: {}", e.what()));
  }
  return record;
}

PaperRecord ingest_tei(std::string_view xml_bytes, std::string source_path,
                       provider::Provider& provider, Diagnostics* diag,
                       std::size_t token_budget) {
  PaperRecord record;
  record.doc = parse_tei(xml_bytes, std::move(source_path));
  record.context = extract_paper_context(record.doc, provider, token_budget);
  record.implications = extract_implications(record.doc, provider, diag, token_budget);
  record.excluded_from_index = record.context.present_count() == 0;
  return record;
}

PaperRecord ingest_paper(const std::filesystem::path& xml_path, provider::Provider& provider,
                         Diagnostics* diag, std::size_t token_budget) {
  return ingest_tei(read_file(xml_path), xml_path.string(), provider, diag, token_budget);
}

bool RecordSet::upsert(PaperRecord record) {
  std::string id = record.doc.paper_id;
  auto [it, inserted] = records_.insert_or_assign(std::move(id), std::move(record));
  return !inserted;
}

const PaperRecord* RecordSet::find(const std::string& paper_id) const {
  auto it = records_.find(paper_id);
  return it == records_.end() ? nullptr : &it->second;
}

std::vector<PaperRecord> RecordSet::records() const {
  std::vector<PaperRecord> out;
  out.reserve(records_.size());
  for (const auto& [id, r] : records_) out.push_back(r);
  return out;
}

std::vector<PaperRecord> ingest_directory(const std::filesystem::path& dir,
                                          provider::Provider& provider, std::size_t workers,
                                          Diagnostics* diag, std::size_t token_budget) {
  std::vector<std::filesystem::path> files;
  std::error_code ec;
  for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
    if (entry.is_regular_file() && entry.path().extension() == ".xml") files.push_back(entry.path());
  }
  if (ec) throw IoError(fmt::format("cannot list {}: {}", dir.string(), ec.message()));
  std::sort(files.begin(), files.end());

  std::vector<std::optional<PaperRecord>> results(files.size());
  std::vector<Diagnostics> local(files.size());
  parallel_for(files.size(), workers, [&](std::size_t i) {
    try {
      results[i] = ingest_paper(files[i], provider, &local[i], token_budget);
    } catch (const XmlParseError& e) {
      local[i].warn(fmt::format("{}: skipped, {}", files[i].string(), e.what()));
    } catch (const EmptyBodyError& e) {
      local[i].warn(fmt::format("{}: skipped, {}", files[i].string(), e.what()));
    }
  });

  RecordSet set;
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (diag) diag->append(local[i]);
    if (results[i]) set.upsert(std::move(*results[i]));
  }
  return set.records();
}

}  // namespace refine::paper
