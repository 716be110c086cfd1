#include "refine/mockup/html.h"

#include <algorithm>
#include <array>
#include <cctype>

#include <fmt/format.h>

#include "refine/common/encoding.h"
#include "refine/common/error.h"

namespace refine::mockup::html {

const std::string* Node::attr(std::string_view key) const {
  for (const auto& [k, v] : attrs) {
    if (k == key) return &v;
  }
  return nullptr;
}

void Node::set_attr(std::string_view key, std::string value) {
  for (auto& [k, v] : attrs) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  attrs.emplace_back(std::string(key), std::move(value));
}

bool Node::remove_attr(std::string_view key) {
  auto it = std::find_if(attrs.begin(), attrs.end(), [&](const auto& a) { return a.first == key; });
  if (it == attrs.end()) return false;
  attrs.erase(it);
  return true;
}

std::string Node::id() const {
  const std::string* v = attr("id");
  return v ? trim(*v) : std::string();
}

std::unique_ptr<Node> Node::clone() const {
  auto copy = std::make_unique<Node>();
  copy->kind = kind;
  copy->name = name;
  copy->text = text;
  copy->attrs = attrs;
  for (const auto& c : children) {
    auto child = c->clone();
    child->parent = copy.get();
    copy->children.push_back(std::move(child));
  }
  return copy;
}

Document::Document() { root.name = "#document"; }

Document::Document(Document&& other) noexcept : root(std::move(other.root)) {
  for (auto& c : root.children) c->parent = &root;
}

Document& Document::operator=(Document&& other) noexcept {
  root = std::move(other.root);
  for (auto& c : root.children) c->parent = &root;
  return *this;
}

bool is_void_element(std::string_view tag) {
  static constexpr std::array<std::string_view, 14> kVoid = {
      "area", "base", "br", "col", "embed", "hr", "img", "input", "link", "meta", "param",
      "source", "track", "wbr"};
  return std::find(kVoid.begin(), kVoid.end(), tag) != kVoid.end();
}

bool is_raw_text_element(std::string_view tag) {
  return tag == "script" || tag == "style" || tag == "textarea" || tag == "title";
}

namespace {

bool is_name_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f'; }

bool starts_with_ci(std::string_view s, std::size_t pos, std::string_view prefix) {
  if (s.size() - pos < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(s[pos + i])) !=
        std::tolower(static_cast<unsigned char>(prefix[i]))) {
      return false;
    }
  }
  return true;
}

// Start tags that implicitly close an open element of the given name.
bool closes_implicitly(std::string_view open, std::string_view incoming) {
  if (open == "li") return incoming == "li";
  if (open == "option") return incoming == "option";
  if (open == "p") return incoming == "p";
  if (open == "td" || open == "th") return incoming == "td" || incoming == "th" || incoming == "tr";
  if (open == "tr") return incoming == "tr";
  return false;
}

class Parser {
 public:
  Parser(std::string_view input, bool strict) : in_(input), strict_(strict) {}

  void run(Node& root) {
    current_ = &root;
    root_ = &root;
    while (pos_ < in_.size()) {
      if (in_[pos_] == '<') {
        if (starts_with_ci(in_, pos_, "<!--")) {
          comment();
        } else if (pos_ + 1 < in_.size() && (in_[pos_ + 1] == '!' || in_[pos_ + 1] == '?')) {
          declaration();
        } else if (pos_ + 2 < in_.size() && in_[pos_ + 1] == '/' && is_name_start(in_[pos_ + 2])) {
          end_tag();
        } else if (pos_ + 1 < in_.size() && is_name_start(in_[pos_ + 1])) {
          start_tag();
        } else {
          text_run(pos_ + 1);
        }
      } else {
        text_run(pos_);
      }
    }
    if (current_ != root_ && strict_) {
      fail(fmt::format("element <{}> is not closed", current_->name));
    }
  }

  std::size_t element_count() const { return elements_; }

 private:
  [[noreturn]] void fail(const std::string& message) const {
    if (strict_) throw FragmentParseError(message);
    throw HtmlParseError(message);
  }

  void append_text(std::string_view s) {
    if (s.empty()) return;
    auto& kids = current_->children;
    if (!kids.empty() && kids.back()->kind == NodeKind::kText) {
      kids.back()->text.append(s);
      return;
    }
    auto node = std::make_unique<Node>();
    node->kind = NodeKind::kText;
    node->text.assign(s);
    node->parent = current_;
    kids.push_back(std::move(node));
  }

  // Text from pos_ up to the next '<' at or after `from`.
  void text_run(std::size_t from) {
    std::size_t next = in_.find('<', from);
    if (next == std::string_view::npos) next = in_.size();
    append_text(in_.substr(pos_, next - pos_));
    pos_ = next;
  }

  void comment() {
    std::size_t end = in_.find("-->", pos_ + 4);
    if (end == std::string_view::npos) {
      if (strict_) fail("unterminated comment");
      pos_ = in_.size();
      return;
    }
    pos_ = end + 3;
  }

  void declaration() {
    std::size_t end = in_.find('>', pos_);
    if (end == std::string_view::npos) fail("unterminated markup declaration");
    std::string_view body = in_.substr(pos_ + 2, end - pos_ - 2);
    if (in_[pos_ + 1] == '!' && starts_with_ci(body, 0, "doctype") && current_ == root_) {
      auto node = std::make_unique<Node>();
      node->kind = NodeKind::kDoctype;
      node->text = collapse_whitespace(body.substr(7));
      node->parent = current_;
      current_->children.push_back(std::move(node));
    }
    pos_ = end + 1;
  }

  std::string read_name() {
    std::size_t start = pos_;
    while (pos_ < in_.size() && !is_space(in_[pos_]) && in_[pos_] != '>' && in_[pos_] != '/' &&
           in_[pos_] != '=' && in_[pos_] != '<') {
      ++pos_;
    }
    return to_lower_ascii(in_.substr(start, pos_ - start));
  }

  void skip_space() {
    while (pos_ < in_.size() && is_space(in_[pos_])) ++pos_;
  }

  void end_tag() {
    pos_ += 2;
    std::string name = read_name();
    std::size_t end = in_.find('>', pos_);
    if (end == std::string_view::npos) fail(fmt::format("unterminated end tag </{}", name));
    pos_ = end + 1;
    for (Node* n = current_; n != root_; n = n->parent) {
      if (n->name == name) {
        if (strict_ && n != current_) fail(fmt::format("element <{}> is not closed", current_->name));
        current_ = n->parent;
        return;
      }
    }
    if (strict_) fail(fmt::format("stray end tag </{}>", name));
  }

  void start_tag() {
    ++pos_;
    auto node = std::make_unique<Node>();
    node->name = read_name();
    bool self_closing = false;
    while (true) {
      skip_space();
      if (pos_ >= in_.size()) fail(fmt::format("unterminated start tag <{}", node->name));
      char c = in_[pos_];
      if (c == '>') {
        ++pos_;
        break;
      }
      if (c == '/') {
        ++pos_;
        if (pos_ < in_.size() && in_[pos_] == '>') {
          self_closing = true;
          ++pos_;
          break;
        }
        continue;
      }
      if (c == '<') fail(fmt::format("unterminated start tag <{}", node->name));
      std::string attr_name = read_name();
      if (attr_name.empty()) {
        ++pos_;  // stray '=' or similar
        continue;
      }
      std::string value;
      skip_space();
      if (pos_ < in_.size() && in_[pos_] == '=') {
        ++pos_;
        skip_space();
        if (pos_ < in_.size() && (in_[pos_] == '"' || in_[pos_] == '\'')) {
          char quote = in_[pos_];
          std::size_t close = in_.find(quote, pos_ + 1);
          if (close == std::string_view::npos) {
            fail(fmt::format("unterminated attribute value in <{}>", node->name));
          }
          value.assign(in_.substr(pos_ + 1, close - pos_ - 1));
          pos_ = close + 1;
        } else {
          std::size_t start = pos_;
          while (pos_ < in_.size() && !is_space(in_[pos_]) && in_[pos_] != '>') ++pos_;
          value.assign(in_.substr(start, pos_ - start));
        }
      }
      if (!node->attr(attr_name)) node->attrs.emplace_back(std::move(attr_name), std::move(value));
    }

    while (current_ != root_ && closes_implicitly(current_->name, node->name)) {
      current_ = current_->parent;
    }
    ++elements_;
    Node* raw = node.get();
    raw->parent = current_;
    current_->children.push_back(std::move(node));
    if (self_closing || is_void_element(raw->name)) return;
    if (is_raw_text_element(raw->name)) {
      std::string closer = "</" + raw->name;
      std::size_t end = pos_;
      while (true) {
        end = in_.find("</", end);
        if (end == std::string_view::npos || starts_with_ci(in_, end, closer)) break;
        end += 2;
      }
      if (end == std::string_view::npos) {
        if (strict_) fail(fmt::format("element <{}> is not closed", raw->name));
        raw->text.assign(in_.substr(pos_));
        pos_ = in_.size();
        return;
      }
      raw->text.assign(in_.substr(pos_, end - pos_));
      std::size_t gt = in_.find('>', end);
      if (gt == std::string_view::npos) fail(fmt::format("unterminated end tag </{}", raw->name));
      pos_ = gt + 1;
      return;
    }
    current_ = raw;
  }

  std::string_view in_;
  bool strict_;
  std::size_t pos_ = 0;
  std::size_t elements_ = 0;
  Node* root_ = nullptr;
  Node* current_ = nullptr;
};

void write_indent(std::string& out, int indent) { out.append(static_cast<std::size_t>(indent) * 2, ' '); }

std::string escape_attr(std::string_view value) {
  std::string out;
  out.reserve(value.size());
  for (char c : value) {
    if (c == '"') {
      out += "&quot;";
    } else if (c == '\n' || c == '\r' || c == '\t') {
      out += ' ';
    } else {
      out += c;
    }
  }
  return out;
}

void write_open_tag(const Node& n, std::string& out) {
  out += '<';
  out += n.name;
  std::vector<const std::pair<std::string, std::string>*> sorted;
  for (const auto& a : n.attrs) sorted.push_back(&a);
  std::sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) {
    if ((a->first == "id") != (b->first == "id")) return a->first == "id";
    return a->first < b->first;
  });
  for (const auto* a : sorted) {
    out += fmt::format(" {}=\"{}\"", a->first, escape_attr(a->second));
  }
  out += '>';
}

// Children as the serializer sees them: adjacent text merged and collapsed,
// blank text dropped.
struct Item {
  const Node* element = nullptr;
  std::string text;
};

std::vector<Item> visible_children(const Node& n) {
  std::vector<Item> items;
  std::string pending;
  auto flush = [&] {
    std::string t = collapse_whitespace(pending);
    if (!t.empty()) items.push_back({nullptr, std::move(t)});
    pending.clear();
  };
  for (const auto& c : n.children) {
    if (c->kind == NodeKind::kText) {
      pending += ' ';
      pending += c->text;
    } else {
      flush();
      items.push_back({c.get(), {}});
    }
  }
  flush();
  return items;
}

void write_node(const Node& n, int indent, std::string& out);

void write_element(const Node& n, int indent, std::string& out) {
  write_indent(out, indent);
  write_open_tag(n, out);
  if (is_void_element(n.name)) return;
  if (is_raw_text_element(n.name)) {
    out += trim(n.text);
    out += "</" + n.name + ">";
    return;
  }
  std::vector<Item> items = visible_children(n);
  if (items.empty()) {
    out += "</" + n.name + ">";
    return;
  }
  if (items.size() == 1 && !items[0].element) {
    out += items[0].text;
    out += "</" + n.name + ">";
    return;
  }
  for (const auto& item : items) {
    out += '\n';
    if (item.element) {
      write_node(*item.element, indent + 1, out);
    } else {
      write_indent(out, indent + 1);
      out += item.text;
    }
  }
  out += '\n';
  write_indent(out, indent);
  out += "</" + n.name + ">";
}

void write_node(const Node& n, int indent, std::string& out) {
  switch (n.kind) {
    case NodeKind::kElement:
      write_element(n, indent, out);
      break;
    case NodeKind::kDoctype:
      write_indent(out, indent);
      out += "<!DOCTYPE " + n.text + ">";
      break;
    case NodeKind::kText:
      write_indent(out, indent);
      out += collapse_whitespace(n.text);
      break;
  }
}

template <typename NodeT, typename Out>
void collect_elements(NodeT& n, Out& out) {
  for (auto& c : n.children) {
    if (c->is_element()) {
      out.push_back(c.get());
      collect_elements(*c, out);
    }
  }
}

}  // namespace

Document parse_document(std::string_view html) {
  Document doc;
  Parser parser(html, false);
  parser.run(doc.root);
  if (parser.element_count() == 0) throw HtmlParseError("input contains no HTML element");
  return doc;
}

std::vector<std::unique_ptr<Node>> parse_fragment(std::string_view html) {
  Node holder;
  Parser parser(html, true);
  parser.run(holder);
  std::vector<std::unique_ptr<Node>> out;
  for (auto& c : holder.children) {
    if (c->kind == NodeKind::kDoctype) continue;
    if (c->kind == NodeKind::kText && collapse_whitespace(c->text).empty()) continue;
    c->parent = nullptr;
    out.push_back(std::move(c));
  }
  if (out.empty()) throw FragmentParseError("fragment is empty");
  return out;
}

std::string serialize(const Document& doc) {
  std::string out;
  for (const auto& item : visible_children(doc.root)) {
    if (item.element) {
      write_node(*item.element, 0, out);
    } else {
      out += item.text;
    }
    out += '\n';
  }
  return out;
}

std::string serialize_node(const Node& node) {
  std::string out;
  write_node(node, 0, out);
  return out;
}

std::string canonicalize(std::string_view html) { return serialize(parse_document(html)); }

std::vector<Node*> elements(Node& root) {
  std::vector<Node*> out;
  collect_elements(root, out);
  return out;
}

std::vector<const Node*> elements(const Node& root) {
  std::vector<const Node*> out;
  collect_elements(root, out);
  return out;
}

Node* find_by_id(Node& root, std::string_view id) {
  for (Node* n : elements(root)) {
    if (n->id() == id) return n;
  }
  return nullptr;
}

std::set<std::string> collect_ids(const Node& root) {
  std::set<std::string> out;
  for (const Node* n : elements(root)) {
    std::string id = n->id();
    if (!id.empty()) out.insert(std::move(id));
  }
  return out;
}

namespace {

// Decodes the character references attackers use to hide URL schemes.
std::string decode_for_check(std::string_view value) {
  std::string out;
  for (std::size_t i = 0; i < value.size(); ++i) {
    if (value[i] == '&' && i + 2 < value.size() && value[i + 1] == '#') {
      std::size_t semi = value.find(';', i);
      std::string_view num = value.substr(i + 2, semi == std::string_view::npos
                                                     ? std::string_view::npos
                                                     : semi - i - 2);
      try {
        long cp = (num.size() > 1 && (num[0] == 'x' || num[0] == 'X'))
                      ? std::stol(std::string(num.substr(1)), nullptr, 16)
                      : std::stol(std::string(num), nullptr, 10);
        if (cp > 0 && cp < 128) {
          out += static_cast<char>(cp);
          i = semi == std::string_view::npos ? value.size() : semi;
          continue;
        }
      } catch (const std::exception&) {
      }
    }
    unsigned char c = static_cast<unsigned char>(value[i]);
    if (c > 0x20) out += static_cast<char>(std::tolower(c));
  }
  return out;
}

bool is_unsafe_url(std::string_view raw) {
  std::string v = decode_for_check(raw);
  if (v.rfind("javascript:", 0) == 0 || v.rfind("vbscript:", 0) == 0) return true;
  if (v.rfind("data:", 0) == 0) return v.rfind("data:image/", 0) != 0;
  if (v.rfind("//", 0) == 0) return true;
  return v.find("://") != std::string::npos;
}

bool is_url_attr(std::string_view name) {
  static constexpr std::array<std::string_view, 11> kUrlAttrs = {
      "src", "href", "srcset", "poster", "data", "action", "formaction", "xlink:href",
      "background", "manifest", "ping"};
  return std::find(kUrlAttrs.begin(), kUrlAttrs.end(), name) != kUrlAttrs.end();
}

// Rewrites url(...) references to external resources as "none" and removes
// @import rules.
std::pair<std::string, std::size_t> sanitize_css(std::string_view css) {
  std::string out;
  std::size_t removed = 0;
  std::size_t i = 0;
  while (i < css.size()) {
    if (starts_with_ci(css, i, "@import")) {
      std::size_t semi = css.find(';', i);
      i = semi == std::string_view::npos ? css.size() : semi + 1;
      ++removed;
      continue;
    }
    if (starts_with_ci(css, i, "url(")) {
      std::size_t close = css.find(')', i);
      if (close == std::string_view::npos) close = css.size() - 1;
      std::string_view target = css.substr(i + 4, close - i - 4);
      std::string t = trim(target);
      if (!t.empty() && (t.front() == '"' || t.front() == '\'')) t = t.substr(1);
      if (!t.empty() && (t.back() == '"' || t.back() == '\'')) t.pop_back();
      if (is_unsafe_url(t)) {
        out += "none";
        ++removed;
      } else {
        out.append(css.substr(i, close - i + 1));
      }
      i = close + 1;
      continue;
    }
    if (starts_with_ci(css, i, "expression(")) {
      out += "none";
      std::size_t close = css.find(')', i);
      i = close == std::string_view::npos ? css.size() : close + 1;
      ++removed;
      continue;
    }
    out += css[i++];
  }
  return {out, removed};
}

bool drop_element(const Node& n) {
  if (n.name == "script" || n.name == "base") return true;
  if (n.name == "meta") {
    const std::string* equiv = n.attr("http-equiv");
    return equiv && to_lower_ascii(*equiv) == "refresh";
  }
  return false;
}

std::size_t sanitize_node(Node& n) {
  std::size_t removed = 0;
  auto& kids = n.children;
  for (auto it = kids.begin(); it != kids.end();) {
    if ((*it)->is_element() && drop_element(**it)) {
      it = kids.erase(it);
      ++removed;
    } else {
      ++it;
    }
  }
  if (n.is_element()) {
    for (auto it = n.attrs.begin(); it != n.attrs.end();) {
      const std::string& name = it->first;
      if (name.size() > 2 && name[0] == 'o' && name[1] == 'n') {
        it = n.attrs.erase(it);
        ++removed;
        continue;
      }
      if (is_url_attr(name) && is_unsafe_url(it->second)) {
        it = n.attrs.erase(it);
        ++removed;
        continue;
      }
      if (name == "style") {
        auto [css, count] = sanitize_css(it->second);
        it->second = std::move(css);
        removed += count;
      }
      ++it;
    }
    if (n.name == "style") {
      auto [css, count] = sanitize_css(n.text);
      n.text = std::move(css);
      removed += count;
    }
  }
  for (auto& c : kids) removed += sanitize_node(*c);
  return removed;
}

}  // namespace

std::size_t sanitize(Node& root) { return sanitize_node(root); }

std::size_t assign_ids(Node& root, Diagnostics* diag, const std::set<std::string>& reserved) {
  std::vector<Node*> all = elements(root);
  std::set<std::string> taken = reserved;
  for (Node* n : all) {
    std::string id = n->id();
    if (!id.empty()) taken.insert(id);
  }
  std::set<std::string> seen = reserved;
  std::size_t written = 0;
  for (std::size_t i = 0; i < all.size(); ++i) {
    Node* n = all[i];
    std::string id = n->id();
    if (!id.empty()) {
      if (seen.insert(id).second) {
        if (*n->attr("id") != id) n->set_attr("id", id);
        continue;
      }
    }
    std::size_t k = i;
    std::string fresh = fmt::format("e{}", k);
    while (taken.count(fresh)) fresh = fmt::format("e{}", ++k);
    if (!id.empty()) {
      warn(diag, fmt::format("duplicate id \"{}\" on <{}> re-assigned as \"{}\"", id, n->name, fresh));
    }
    n->set_attr("id", fresh);
    taken.insert(fresh);
    seen.insert(fresh);
    ++written;
  }
  return written;
}

}  // namespace refine::mockup::html
