#include <expat.h>

#include <memory>
#include <set>

#include <fmt/format.h>

#include "refine/common/encoding.h"
#include "refine/common/error.h"
#include "refine/paper/paper_doc.h"

namespace refine::paper {

using nlohmann::json;

namespace {

constexpr std::string_view kXmlNamespace = "http://www.w3.org/XML/1998/namespace";

struct XmlNode {
  std::string name;  // local name; empty for text nodes
  std::string text;  // text nodes only
  std::vector<std::pair<std::string, std::string>> attrs;
  std::vector<std::unique_ptr<XmlNode>> children;
  XmlNode* parent = nullptr;

  bool is_text() const { return name.empty(); }

  const std::string* attr(std::string_view key) const {
    for (const auto& [k, v] : attrs) {
      if (k == key) return &v;
    }
    return nullptr;
  }

  const XmlNode* child(std::string_view local) const {
    for (const auto& c : children) {
      if (c->name == local) return c.get();
    }
    return nullptr;
  }

  std::vector<const XmlNode*> children_named(std::string_view local) const {
    std::vector<const XmlNode*> out;
    for (const auto& c : children) {
      if (c->name == local) out.push_back(c.get());
    }
    return out;
  }
};

// Expat reports namespaced names as "<uri> <local>" with our separator.
std::pair<std::string, std::string> split_name(const XML_Char* raw) {
  std::string_view s(raw);
  auto sep = s.rfind(' ');
  if (sep == std::string_view::npos) return {"", std::string(s)};
  return {std::string(s.substr(0, sep)), std::string(s.substr(sep + 1))};
}

struct TreeBuilder {
  std::unique_ptr<XmlNode> root;
  XmlNode* current = nullptr;

  static void on_start(void* user, const XML_Char* name, const XML_Char** attrs) {
    auto* self = static_cast<TreeBuilder*>(user);
    auto node = std::make_unique<XmlNode>();
    node->name = split_name(name).second;
    for (int i = 0; attrs[i]; i += 2) {
      auto [ns, local] = split_name(attrs[i]);
      std::string key = ns == kXmlNamespace ? "xml:" + local : local;
      node->attrs.emplace_back(std::move(key), attrs[i + 1]);
    }
    XmlNode* raw = node.get();
    if (!self->current) {
      self->root = std::move(node);
    } else {
      raw->parent = self->current;
      self->current->children.push_back(std::move(node));
    }
    self->current = raw;
  }

  static void on_end(void* user, const XML_Char*) {
    auto* self = static_cast<TreeBuilder*>(user);
    self->current = self->current->parent;
  }

  static void on_text(void* user, const XML_Char* s, int len) {
    auto* self = static_cast<TreeBuilder*>(user);
    if (!self->current) return;
    auto& kids = self->current->children;
    if (!kids.empty() && kids.back()->is_text()) {
      kids.back()->text.append(s, static_cast<std::size_t>(len));
      return;
    }
    auto node = std::make_unique<XmlNode>();
    node->text.assign(s, static_cast<std::size_t>(len));
    node->parent = self->current;
    kids.push_back(std::move(node));
  }
};

std::unique_ptr<XmlNode> parse_xml(std::string_view bytes) {
  std::unique_ptr<XML_ParserStruct, decltype(&XML_ParserFree)> parser(
      XML_ParserCreateNS("UTF-8", ' '), &XML_ParserFree);
  TreeBuilder builder;
  XML_SetUserData(parser.get(), &builder);
  XML_SetElementHandler(parser.get(), &TreeBuilder::on_start, &TreeBuilder::on_end);
  XML_SetCharacterDataHandler(parser.get(), &TreeBuilder::on_text);
  if (XML_Parse(parser.get(), bytes.data(), static_cast<int>(bytes.size()), XML_TRUE) ==
      XML_STATUS_ERROR) {
    throw XmlParseError(fmt::format("line {}, column {}: {}",
                                    XML_GetCurrentLineNumber(parser.get()),
                                    XML_GetCurrentColumnNumber(parser.get()),
                                    XML_ErrorString(XML_GetErrorCode(parser.get()))));
  }
  if (!builder.root) throw XmlParseError("document has no root element");
  return std::move(builder.root);
}

void append_text(const XmlNode& node, std::string& out) {
  if (node.is_text()) {
    out += node.text;
    return;
  }
  for (const auto& c : node.children) {
    append_text(*c, out);
    // Block-ish children (list items, table cells) need a separator.
    if (!c->is_text() && (c->name == "item" || c->name == "cell" || c->name == "lb")) out += ' ';
  }
}

std::string text_of(const XmlNode* node) {
  if (!node) return "";
  std::string raw;
  append_text(*node, raw);
  return nfc(collapse_whitespace(raw));
}

const XmlNode* find_path(const XmlNode* node, std::initializer_list<std::string_view> path) {
  for (auto step : path) {
    if (!node) return nullptr;
    node = node->child(step);
  }
  return node;
}

void collect_descendants(const XmlNode& node, std::string_view local,
                         std::vector<const XmlNode*>& out) {
  for (const auto& c : node.children) {
    if (c->name == local) {
      out.push_back(c.get());
    } else if (!c->is_text()) {
      collect_descendants(*c, local, out);
    }
  }
}

SectionRole role_for_heading(const std::string& heading) {
  std::string h = to_lower_ascii(heading);
  if (h.find("introduction") != std::string::npos) return SectionRole::kIntroduction;
  for (std::string_view marker : {"related work", "background", "prior work", "literature review"}) {
    if (h.find(marker) != std::string::npos) return SectionRole::kRelatedWork;
  }
  return SectionRole::kCore;
}

class DocBuilder {
 public:
  explicit DocBuilder(PaperDoc& doc) : doc_(doc) {}

  void add_abstract(const XmlNode& abstract) {
    std::vector<const XmlNode*> ps;
    collect_descendants(abstract, "p", ps);
    Section section{"Abstract", SectionRole::kFrontMatter, {}};
    for (const XmlNode* p : ps) {
      std::string text = text_of(p);
      if (text.empty()) continue;
      std::string key = key_for(p, fmt::format("abstract.{}", section.paragraphs.size()));
      section.paragraphs.push_back({std::move(key), std::move(text)});
    }
    if (!section.paragraphs.empty()) doc_.front_matter.push_back(std::move(section));
  }

  // Walks a <body> or <back> container in document order. Each <div> opens a
  // section; nested divs become their own sections after their parent.
  void add_container(const XmlNode& container) {
    Section loose{"", SectionRole::kCore, {}};
    for (const auto& c : container.children) {
      if (c->name == "div") {
        flush(loose);
        add_div(*c);
      } else if (c->name == "p") {
        add_paragraph(loose, *c);
      } else if (c->name == "figure") {
        add_caption(*c);
      }
    }
    flush(loose);
  }

 private:
  void add_div(const XmlNode& div) {
    if (const std::string* type = div.attr("type")) {
      if (*type == "references") {
        std::vector<const XmlNode*> bibls;
        collect_descendants(div, "biblStruct", bibls);
        for (const XmlNode* b : bibls) {
          std::string t = text_of(b);
          if (!t.empty()) doc_.references.push_back(std::move(t));
        }
        return;
      }
    }
    const XmlNode* head = div.child("head");
    std::string heading = text_of(head);
    if (head) {
      if (const std::string* n = head->attr("n"); n && !n->empty()) {
        heading = fmt::format("{} {}", *n, heading);
      }
    }
    Section section{heading, role_for_heading(heading), {}};
    std::vector<const XmlNode*> nested;
    for (const auto& c : div.children) {
      if (c->name == "p") {
        add_paragraph(section, *c);
      } else if (c->name == "figure") {
        add_caption(*c);
      } else if (c->name == "div") {
        nested.push_back(c.get());
      }
    }
    flush(section);
    for (const XmlNode* n : nested) add_div(*n);
  }

  void add_paragraph(Section& section, const XmlNode& p) {
    std::string text = text_of(&p);
    if (text.empty()) return;
    std::string key = key_for(&p, fmt::format("{}.{}", doc_.sections.size(),
                                              section.paragraphs.size()));
    section.paragraphs.push_back({std::move(key), std::move(text)});
  }

  void add_caption(const XmlNode& figure) {
    std::string head = text_of(figure.child("head"));
    std::string desc = text_of(figure.child("figDesc"));
    std::string caption = collapse_whitespace(head + " " + desc);
    if (!caption.empty()) doc_.captions.push_back(std::move(caption));
  }

  void flush(Section& section) {
    if (!section.paragraphs.empty()) doc_.sections.push_back(std::move(section));
    section = Section{"", SectionRole::kCore, {}};
  }

  std::string key_for(const XmlNode* p, std::string synthetic) {
    std::string key = synthetic;
    if (const std::string* id = p->attr("xml:id"); id && !id->empty()) key = *id;
    std::string unique = key;
    for (int n = 1; used_.count(unique); ++n) unique = fmt::format("{}~{}", key, n);
    used_.insert(unique);
    return unique;
  }

  PaperDoc& doc_;
  std::set<std::string> used_;
};

}  // namespace

std::string_view to_string(SectionRole role) {
  switch (role) {
    case SectionRole::kFrontMatter: return "front-matter";
    case SectionRole::kIntroduction: return "introduction";
    case SectionRole::kRelatedWork: return "related-work";
    case SectionRole::kCore: return "core";
  }
  return "core";
}

std::size_t PaperDoc::body_paragraph_count() const {
  std::size_t n = 0;
  for (const auto& s : sections) n += s.paragraphs.size();
  return n;
}

const Paragraph* PaperDoc::find_paragraph(std::string_view para_key) const {
  for (const Paragraph* p : all_paragraphs()) {
    if (p->para_key == para_key) return p;
  }
  return nullptr;
}

std::vector<const Paragraph*> PaperDoc::all_paragraphs() const {
  std::vector<const Paragraph*> out;
  for (const auto* group : {&front_matter, &sections}) {
    for (const auto& s : *group) {
      for (const auto& p : s.paragraphs) out.push_back(&p);
    }
  }
  return out;
}

std::string paper_id_for(std::string_view tei_bytes) {
  return sha256_hex(tei_bytes).substr(0, 16);
}

PaperDoc parse_tei(std::string_view xml_bytes, std::string source_path) {
  std::unique_ptr<XmlNode> root = parse_xml(xml_bytes);
  PaperDoc doc;
  doc.paper_id = paper_id_for(xml_bytes);
  doc.source_path = std::move(source_path);

  const XmlNode* header = root->child("teiHeader");
  if (const XmlNode* stmt = find_path(header, {"fileDesc", "titleStmt"})) {
    const XmlNode* chosen = nullptr;
    for (const XmlNode* t : stmt->children_named("title")) {
      const std::string* type = t->attr("type");
      if (!chosen || (type && *type == "main")) chosen = t;
      if (type && *type == "main") break;
    }
    doc.title = text_of(chosen);
  }
  if (doc.title.empty()) {
    doc.title = text_of(find_path(header, {"fileDesc", "sourceDesc", "biblStruct", "analytic", "title"}));
  }

  DocBuilder builder(doc);
  if (const XmlNode* abstract = find_path(header, {"profileDesc", "abstract"})) {
    builder.add_abstract(*abstract);
  }
  const XmlNode* text = root->name == "text" ? root.get() : root->child("text");
  if (text) {
    if (const XmlNode* body = text->child("body")) builder.add_container(*body);
    if (const XmlNode* back = text->child("back")) builder.add_container(*back);
  }
  if (doc.body_paragraph_count() == 0) {
    throw EmptyBodyError(fmt::format("no body paragraphs in {}",
                                     doc.source_path.empty() ? "TEI input" : doc.source_path));
  }
  return doc;
}

std::string render_document(const PaperDoc& doc, std::size_t token_budget) {
  const std::size_t byte_budget = token_budget * 4;
  auto render_sections = [](const std::vector<Section>& sections, std::size_t keep_paragraphs,
                            std::string& out) -> std::size_t {
    std::size_t emitted = 0;
    for (const auto& s : sections) {
      if (emitted >= keep_paragraphs) break;
      out += fmt::format("\n## {} [{}]\n", s.heading.empty() ? "(untitled)" : s.heading,
                         to_string(s.role));
      for (const auto& p : s.paragraphs) {
        if (emitted >= keep_paragraphs) break;
        out += fmt::format("[para_key={}] {}\n", p.para_key, p.text);
        ++emitted;
      }
    }
    return emitted;
  };

  const std::size_t total_body = doc.body_paragraph_count();
  // level 0 keeps everything, 1 drops references, 2 also drops captions.
  auto render = [&](int level, std::size_t keep) {
    std::string out = fmt::format("Title: {}\n", doc.title);
    render_sections(doc.front_matter, SIZE_MAX, out);
    std::size_t emitted = render_sections(doc.sections, keep, out);
    if (emitted < total_body) {
      out += fmt::format("\n[{} trailing paragraphs omitted for length]\n", total_body - emitted);
    }
    if (level < 2 && !doc.captions.empty()) {
      out += "\n## Figures and tables\n";
      for (const auto& c : doc.captions) out += "- " + c + "\n";
    }
    if (level < 1 && !doc.references.empty()) {
      out += "\n## References\n";
      for (const auto& r : doc.references) out += "- " + r + "\n";
    }
    return out;
  };

  for (int level = 0; level < 2; ++level) {
    std::string out = render(level, total_body);
    if (out.size() <= byte_budget) return out;
  }
  std::size_t keep = total_body;
  std::string out = render(2, keep);
  while (out.size() > byte_budget && keep > 1) out = render(2, --keep);
  return out;
}

json to_json(const PaperDoc& doc) {
  auto sections_json = [](const std::vector<Section>& sections) {
    json arr = json::array();
    for (const auto& s : sections) {
      json paras = json::array();
      for (const auto& p : s.paragraphs) paras.push_back({{"para_key", p.para_key}, {"text", p.text}});
      arr.push_back({{"heading", s.heading}, {"role", to_string(s.role)}, {"paragraphs", paras}});
    }
    return arr;
  };
  return {{"paper_id", doc.paper_id},
          {"title", doc.title},
          {"source_path", doc.source_path},
          {"front_matter", sections_json(doc.front_matter)},
          {"sections", sections_json(doc.sections)},
          {"captions", doc.captions},
          {"references", doc.references}};
}

PaperDoc paper_doc_from_json(const json& j) {
  auto role_from = [](const std::string& s) {
    if (s == "front-matter") return SectionRole::kFrontMatter;
    if (s == "introduction") return SectionRole::kIntroduction;
    if (s == "related-work") return SectionRole::kRelatedWork;
    return SectionRole::kCore;
  };
  auto sections_from = [&](const json& arr) {
    std::vector<Section> out;
    for (const auto& s : arr) {
      Section sec{s.at("heading").get<std::string>(), role_from(s.value("role", "core")), {}};
      for (const auto& p : s.at("paragraphs")) {
        sec.paragraphs.push_back({p.at("para_key").get<std::string>(), p.at("text").get<std::string>()});
      }
      out.push_back(std::move(sec));
    }
    return out;
  };
  try {
    PaperDoc doc;
    doc.paper_id = j.at("paper_id").get<std::string>();
    doc.title = j.at("title").get<std::string>();
    doc.source_path = j.value("source_path", "");
    doc.front_matter = sections_from(j.value("front_matter", json::array()));
    doc.sections = sections_from(j.at("sections"));
    doc.captions = j.value("captions", std::vector<std::string>{});
    doc.references = j.value("references", std::vector<std::string>{});
    return doc;
  } catch (const json::exception& e) {
    throw SchemaError(fmt::format("malformed paper document: {}", e.what()));
  }
}

}  // namespace refine::paper
