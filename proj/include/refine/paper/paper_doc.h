#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace refine::paper {

/// Coarse role of a section, used to label paragraphs in prompts. Extraction
/// rules are enforced by the model; the parser only tags.
enum class SectionRole { kFrontMatter, kIntroduction, kRelatedWork, kCore };

std::string_view to_string(SectionRole role);

struct Paragraph {
  std::string para_key;
  std::string text;
};

struct Section {
  std::string heading;
  SectionRole role = SectionRole::kCore;
  std::vector<Paragraph> paragraphs;
};

struct PaperDoc {
  std::string paper_id;
  std::string title;
  std::vector<Section> front_matter;  // abstract
  std::vector<Section> sections;      // body, in document order
  std::vector<std::string> captions;  // figure and table captions
  std::vector<std::string> references;
  std::string source_path;

  std::size_t body_paragraph_count() const;
  const Paragraph* find_paragraph(std::string_view para_key) const;
  /// Front matter then body paragraphs, in document order.
  std::vector<const Paragraph*> all_paragraphs() const;
};

/// Stable id for TEI content: first 16 hex chars of its SHA-256.
std::string paper_id_for(std::string_view tei_bytes);

/// Parses GROBID TEI output. Paragraphs without xml:id get "<section>.<para>"
/// keys (body) or "abstract.<para>" keys (front matter).
/// Throws XmlParseError for malformed XML and EmptyBodyError when the body
/// holds no paragraphs.
PaperDoc parse_tei(std::string_view xml_bytes, std::string source_path = "");

/// Renders the document as labeled plain text for prompts, shrinking it to
/// `token_budget` (approx. 4 bytes per token) by dropping references, then
/// captions, then trailing body paragraphs.
std::string render_document(const PaperDoc& doc, std::size_t token_budget);

nlohmann::json to_json(const PaperDoc& doc);
PaperDoc paper_doc_from_json(const nlohmann::json& j);

}  // namespace refine::paper
