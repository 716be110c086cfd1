#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace refine::translation {

struct ActionItem {
  std::string item_id;  // "<cluster_id>-a<n>"
  std::string cluster_id;
  std::string text;
  std::vector<std::string> target_screen_ids;
  bool visually_representable = false;
  bool bookmark = false;

  bool operator==(const ActionItem&) const = default;
};

nlohmann::json to_json(const ActionItem& item);
ActionItem action_item_from_json(const nlohmann::json& j);

}  // namespace refine::translation
