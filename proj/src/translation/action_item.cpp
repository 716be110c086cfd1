#include "refine/translation/action_item.h"

#include <fmt/format.h>

#include "refine/common/error.h"

namespace refine::translation {

using nlohmann::json;

json to_json(const ActionItem& item) {
  return {{"item_id", item.item_id},
          {"cluster_id", item.cluster_id},
          {"text", item.text},
          {"target_screen_ids", item.target_screen_ids},
          {"visually_representable", item.visually_representable},
          {"bookmark", item.bookmark}};
}

ActionItem action_item_from_json(const json& j) {
  try {
    ActionItem item;
    item.item_id = j.at("item_id").get<std::string>();
    item.cluster_id = j.at("cluster_id").get<std::string>();
    item.text = j.at("text").get<std::string>();
    item.target_screen_ids = j.at("target_screen_ids").get<std::vector<std::string>>();
    item.visually_representable = j.at("visually_representable").get<bool>();
    item.bookmark = j.value("bookmark", false);
    return item;
  } catch (const json::exception& e) {
    throw SchemaError(fmt::format("malformed action item: {}", e.what()));
  }
}

}  // namespace refine::translation
