#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "refine/common/util.h"

namespace refine::mockup {

enum class EditOp { kAdd, kRemove, kReplace };
enum class EditPosition { kBefore, kAfter, kFirstChild, kLastChild };

std::string_view to_string(EditOp op);
std::string_view to_string(EditPosition position);
std::optional<EditOp> edit_op_from_string(std::string_view text);
std::optional<EditPosition> edit_position_from_string(std::string_view text);

struct DomEdit {
  EditOp op = EditOp::kReplace;
  std::string reference_element_id;
  std::optional<std::string> edited_element;  // HTML fragment (add, replace)
  std::optional<EditPosition> position;       // add only
  std::string rationale;

  bool operator==(const DomEdit&) const = default;
};

/// Wire form: {"op", "reference_element_id", "edited_element", "position",
/// "rationale"}; absent optional fields are omitted.
nlohmann::json to_json(const DomEdit& edit);
/// A missing "op" reads as "replace". Throws SchemaError for unknown op or
/// position values, missing fields required by the op, or wrong types.
DomEdit dom_edit_from_json(const nlohmann::json& j);
/// Accepts an array of edits or a single edit object.
std::vector<DomEdit> dom_edits_from_json(const nlohmann::json& j);

/// Applies edits in order, each against the result of the previous one, and
/// returns the canonical serialization. Fragment elements are sanitized;
/// those without an id (or whose id is already used elsewhere) receive a
/// synthetic one, and a replacement with a single id-less root element
/// inherits the id it replaces. The result is re-read once, so nesting the
/// parser would split (a <p> inside a <p>) comes back as a browser reads it.
/// Throws HtmlParseError, FragmentParseError and InvalidReferenceError (with
/// the index of the failing edit).
std::string apply_edits(std::string_view html, const std::vector<DomEdit>& edits,
                        Diagnostics* diag = nullptr);

/// Checks that each edit references an id present in the document or created
/// by an earlier edit's fragment. Throws InvalidReferenceError listing every
/// unresolved id; the edit index is that of the first bad edit.
void validate_references(std::string_view html, const std::vector<DomEdit>& edits);

}  // namespace refine::mockup
