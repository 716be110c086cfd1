#include "refine/mockup/edits.h"

#include <algorithm>
#include <set>

#include <fmt/format.h>

#include "refine/common/encoding.h"
#include "refine/common/error.h"
#include "refine/mockup/html.h"

namespace refine::mockup {

using nlohmann::json;

std::string_view to_string(EditOp op) {
  switch (op) {
    case EditOp::kAdd: return "add";
    case EditOp::kRemove: return "remove";
    case EditOp::kReplace: return "replace";
  }
  return "replace";
}

std::string_view to_string(EditPosition position) {
  switch (position) {
    case EditPosition::kBefore: return "before";
    case EditPosition::kAfter: return "after";
    case EditPosition::kFirstChild: return "first_child";
    case EditPosition::kLastChild: return "last_child";
  }
  return "after";
}

std::optional<EditOp> edit_op_from_string(std::string_view text) {
  std::string t = to_lower_ascii(trim(text));
  if (t == "add") return EditOp::kAdd;
  if (t == "remove") return EditOp::kRemove;
  if (t == "replace") return EditOp::kReplace;
  return std::nullopt;
}

std::optional<EditPosition> edit_position_from_string(std::string_view text) {
  std::string t = to_lower_ascii(trim(text));
  if (t == "before") return EditPosition::kBefore;
  if (t == "after") return EditPosition::kAfter;
  if (t == "first_child") return EditPosition::kFirstChild;
  if (t == "last_child") return EditPosition::kLastChild;
  return std::nullopt;
}

json to_json(const DomEdit& edit) {
  json j = {{"op", to_string(edit.op)},
            {"reference_element_id", edit.reference_element_id},
            {"rationale", edit.rationale}};
  if (edit.edited_element) j["edited_element"] = *edit.edited_element;
  if (edit.position) j["position"] = to_string(*edit.position);
  return j;
}

DomEdit dom_edit_from_json(const json& j) {
  if (!j.is_object()) throw SchemaError("an edit must be a JSON object");
  auto string_field = [&](const char* key) -> std::optional<std::string> {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw SchemaError(fmt::format("edit field '{}' must be a string", key));
    return it->get<std::string>();
  };
  DomEdit edit;
  if (auto op = string_field("op")) {
    auto parsed = edit_op_from_string(*op);
    if (!parsed) throw SchemaError(fmt::format("unknown edit op '{}'", *op));
    edit.op = *parsed;
  }
  auto ref = string_field("reference_element_id");
  if (!ref || trim(*ref).empty()) throw SchemaError("edit lacks reference_element_id");
  edit.reference_element_id = trim(*ref);
  edit.rationale = string_field("rationale").value_or("");
  if (edit.op != EditOp::kRemove) {
    edit.edited_element = string_field("edited_element");
    if (!edit.edited_element || trim(*edit.edited_element).empty()) {
      throw SchemaError(fmt::format("{} edit lacks edited_element", to_string(edit.op)));
    }
  }
  if (edit.op == EditOp::kAdd) {
    auto pos = string_field("position");
    if (!pos) throw SchemaError("add edit lacks position");
    edit.position = edit_position_from_string(*pos);
    if (!edit.position) throw SchemaError(fmt::format("unknown edit position '{}'", *pos));
  }
  return edit;
}

std::vector<DomEdit> dom_edits_from_json(const json& j) {
  std::vector<DomEdit> out;
  if (j.is_object()) {
    out.push_back(dom_edit_from_json(j));
    return out;
  }
  if (!j.is_array()) throw SchemaError("edits must be a JSON array");
  for (const auto& e : j) out.push_back(dom_edit_from_json(e));
  return out;
}

namespace {

using html::Node;

void collect_subtree_ids(const Node& n, std::multiset<std::string>& out) {
  if (n.is_element()) {
    std::string id = n.id();
    if (!id.empty()) out.insert(id);
  }
  for (const auto& c : n.children) collect_subtree_ids(*c, out);
}

std::vector<std::unique_ptr<Node>> prepare_fragment(const DomEdit& edit, std::size_t index) {
  std::vector<std::unique_ptr<Node>> nodes;
  try {
    nodes = html::parse_fragment(*edit.edited_element);
  } catch (const FragmentParseError& e) {
    throw FragmentParseError(fmt::format("edit {}: {}", index, e.what()));
  }
  Node holder;
  for (auto& n : nodes) {
    n->parent = &holder;
    holder.children.push_back(std::move(n));
  }
  html::sanitize(holder);
  nodes.clear();
  for (auto& n : holder.children) {
    n->parent = nullptr;
    nodes.push_back(std::move(n));
  }
  if (nodes.empty()) throw FragmentParseError(fmt::format("edit {}: fragment is empty after sanitizing", index));
  return nodes;
}

// Drops fragment ids that clash with `taken` or repeat within the fragment.
void release_colliding_ids(std::vector<std::unique_ptr<Node>>& nodes, std::set<std::string> taken,
                           std::size_t index, Diagnostics* diag) {
  for (auto& top : nodes) {
    std::vector<Node*> all;
    if (top->is_element()) all.push_back(top.get());
    for (Node* n : html::elements(*top)) all.push_back(n);
    for (Node* n : all) {
      std::string id = n->id();
      if (id.empty()) {
        n->remove_attr("id");
        continue;
      }
      if (!taken.insert(id).second) {
        warn(diag, fmt::format("edit {}: id \"{}\" already in use, re-assigned", index, id));
        n->remove_attr("id");
      }
    }
  }
}

// Assigns "e<preorder index>" ids to the inserted elements that lack one.
void assign_fragment_ids(Node& root, const std::set<const Node*>& inserted) {
  std::vector<Node*> all = html::elements(root);
  std::set<std::string> taken = html::collect_ids(root);
  for (std::size_t i = 0; i < all.size(); ++i) {
    Node* n = all[i];
    if (!n->id().empty()) continue;
    bool is_new = false;
    for (const Node* p = n; p; p = p->parent) {
      if (inserted.count(p)) {
        is_new = true;
        break;
      }
    }
    if (!is_new) continue;
    std::size_t k = i;
    std::string fresh = fmt::format("e{}", k);
    while (taken.count(fresh)) fresh = fmt::format("e{}", ++k);
    n->set_attr("id", fresh);
    taken.insert(fresh);
  }
}

std::size_t index_in_parent(const Node& n) {
  const auto& kids = n.parent->children;
  for (std::size_t i = 0; i < kids.size(); ++i) {
    if (kids[i].get() == &n) return i;
  }
  return kids.size();
}

void insert_at(Node& parent, std::size_t at, std::vector<std::unique_ptr<Node>>& nodes,
               std::set<const Node*>& inserted) {
  for (auto& n : nodes) {
    n->parent = &parent;
    inserted.insert(n.get());
    parent.children.insert(parent.children.begin() + static_cast<std::ptrdiff_t>(at++), std::move(n));
  }
  nodes.clear();
}

}  // namespace

std::string apply_edits(std::string_view source, const std::vector<DomEdit>& edits,
                        Diagnostics* diag) {
  html::Document doc = html::parse_document(source);
  for (std::size_t i = 0; i < edits.size(); ++i) {
    const DomEdit& edit = edits[i];
    const int index = static_cast<int>(i);
    Node* ref = html::find_by_id(doc.root, edit.reference_element_id);
    if (!ref) {
      throw InvalidReferenceError(
          fmt::format("edit {}: no element with id \"{}\"", i, edit.reference_element_id), index,
          {edit.reference_element_id});
    }
    if (edit.op == EditOp::kRemove) {
      Node* parent = ref->parent;
      parent->children.erase(parent->children.begin() +
                             static_cast<std::ptrdiff_t>(index_in_parent(*ref)));
      continue;
    }
    if (!edit.edited_element) {
      throw SchemaError(fmt::format("edit {}: {} needs edited_element", i, to_string(edit.op)));
    }
    auto nodes = prepare_fragment(edit, i);
    std::set<const Node*> inserted;

    if (edit.op == EditOp::kReplace) {
      std::multiset<std::string> all_ids, removed_ids;
      collect_subtree_ids(doc.root, all_ids);
      collect_subtree_ids(*ref, removed_ids);
      std::set<std::string> taken;
      for (const auto& id : all_ids) {
        if (all_ids.count(id) > removed_ids.count(id)) taken.insert(id);
      }
      std::size_t element_roots = 0;
      bool loose_text = false;
      for (const auto& n : nodes) {
        if (n->is_element()) ++element_roots;
        else loose_text = true;
      }
      if (element_roots == 1 && !loose_text && nodes.front()->id().empty()) {
        nodes.front()->set_attr("id", edit.reference_element_id);
      }
      release_colliding_ids(nodes, taken, i, diag);
      Node* parent = ref->parent;
      std::size_t at = index_in_parent(*ref);
      parent->children.erase(parent->children.begin() + static_cast<std::ptrdiff_t>(at));
      insert_at(*parent, at, nodes, inserted);
    } else {
      if (!edit.position) throw SchemaError(fmt::format("edit {}: add needs a position", i));
      release_colliding_ids(nodes, html::collect_ids(doc.root), i, diag);
      switch (*edit.position) {
        case EditPosition::kBefore:
          insert_at(*ref->parent, index_in_parent(*ref), nodes, inserted);
          break;
        case EditPosition::kAfter:
          insert_at(*ref->parent, index_in_parent(*ref) + 1, nodes, inserted);
          break;
        case EditPosition::kFirstChild:
        case EditPosition::kLastChild:
          if (html::is_void_element(ref->name) || html::is_raw_text_element(ref->name)) {
            throw InvalidReferenceError(
                fmt::format("edit {}: <{} id=\"{}\"> cannot hold children", i, ref->name,
                            edit.reference_element_id),
                index, {edit.reference_element_id});
          }
          insert_at(*ref, *edit.position == EditPosition::kFirstChild ? 0 : ref->children.size(),
                    nodes, inserted);
          break;
      }
    }
    assign_fragment_ids(doc.root, inserted);
  }
  // A tree the parser cannot produce (a <p> inside a <p>) is read back the
  // way a browser would, so the result is always a canonical fixed point.
  return html::canonicalize(html::serialize(doc));
}

void validate_references(std::string_view source, const std::vector<DomEdit>& edits) {
  html::Document doc = html::parse_document(source);
  std::set<std::string> known = html::collect_ids(doc.root);
  std::vector<std::string> bad;
  int first_bad = -1;
  for (std::size_t i = 0; i < edits.size(); ++i) {
    const DomEdit& edit = edits[i];
    if (!known.count(edit.reference_element_id)) {
      if (first_bad < 0) first_bad = static_cast<int>(i);
      bad.push_back(edit.reference_element_id);
    }
    if (edit.edited_element) {
      try {
        for (const auto& n : html::parse_fragment(*edit.edited_element)) {
          if (n->is_element() && !n->id().empty()) known.insert(n->id());
          for (const Node* c : html::elements(*n)) {
            if (!c->id().empty()) known.insert(c->id());
          }
        }
      } catch (const FragmentParseError&) {
        // Reported when the edit is applied.
      }
    }
  }
  if (!bad.empty()) {
    std::string list;
    for (const auto& id : bad) list += (list.empty() ? "" : ", ") + ("\"" + id + "\"");
    throw InvalidReferenceError(fmt::format("edits reference unknown ids: {}", list), first_bad,
                                std::move(bad));
  }
}

}  // namespace refine::mockup
