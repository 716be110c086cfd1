#pragma once

#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "refine/common/util.h"

namespace refine::mockup::html {

enum class NodeKind { kElement, kText, kDoctype };

struct Node {
  NodeKind kind = NodeKind::kElement;
  std::string name;  // lowercase tag name (elements)
  std::string text;  // text content, raw-text element body, or doctype
  std::vector<std::pair<std::string, std::string>> attrs;  // first occurrence wins
  std::vector<std::unique_ptr<Node>> children;
  Node* parent = nullptr;

  bool is_element() const { return kind == NodeKind::kElement; }
  const std::string* attr(std::string_view key) const;
  void set_attr(std::string_view key, std::string value);
  bool remove_attr(std::string_view key);
  /// Empty when the element has no id attribute.
  std::string id() const;

  std::unique_ptr<Node> clone() const;
};

/// The root container; its children are the top-level nodes.
struct Document {
  Node root;

  Document();
  Document(Document&&) noexcept;
  Document& operator=(Document&&) noexcept;
};

bool is_void_element(std::string_view tag);
/// script, style, textarea, title: content kept verbatim.
bool is_raw_text_element(std::string_view tag);

/// Lenient document parser: unclosed elements are closed at end of input and
/// stray end tags are ignored. Throws HtmlParseError for an unterminated tag
/// or quote, or when the input holds no element.
Document parse_document(std::string_view html);

/// Strict parser for edit payloads: every element must be closed (or be void
/// or self-closing) and no end tag may be stray. Throws FragmentParseError.
std::vector<std::unique_ptr<Node>> parse_fragment(std::string_view html);

/// Canonical form: lowercase tags, id first then attributes by name, 2-space
/// indentation, whitespace-collapsed text, comments dropped. Elements whose
/// only child is text are written on one line.
std::string serialize(const Document& doc);
/// One node in canonical form at indentation 0, without a trailing newline.
std::string serialize_node(const Node& node);

/// serialize(parse_document(html)).
std::string canonicalize(std::string_view html);

/// Elements in document (pre-)order.
std::vector<Node*> elements(Node& root);
std::vector<const Node*> elements(const Node& root);

Node* find_by_id(Node& root, std::string_view id);
std::set<std::string> collect_ids(const Node& root);

/// Removes script and base elements, refresh meta tags, event-handler
/// attributes, javascript: URLs and references to external resources in URL
/// attributes and CSS. Returns the number of removals.
std::size_t sanitize(Node& root);

/// Gives every element without an id the id "e<preorder index>", taking the
/// next free index when that id is taken. Later duplicates of an id are
/// re-assigned the same way with a warning. `reserved` ids are treated as
/// taken. Returns the number of ids written.
std::size_t assign_ids(Node& root, Diagnostics* diag = nullptr,
                       const std::set<std::string>& reserved = {});

}  // namespace refine::mockup::html
