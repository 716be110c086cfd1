#include "refine/paper/design_context.h"

#include <algorithm>

#include "refine/common/encoding.h"
#include "refine/common/error.h"

namespace refine {

using nlohmann::json;

std::string_view dimension_name(Dimension d) {
  switch (d) {
    case Dimension::kTargetUser: return "target_user";
    case Dimension::kDomain: return "domain";
    case Dimension::kModality: return "modality";
    case Dimension::kPainPoint: return "pain_point";
    case Dimension::kClient: return "client";
    case Dimension::kMetric: return "metric";
  }
  return "";
}

std::optional<Dimension> dimension_from_name(std::string_view name) {
  for (Dimension d : kDimensions) {
    if (dimension_name(d) == name) return d;
  }
  return std::nullopt;
}

void DesignContext::set(Dimension d, std::optional<std::string> value) {
  auto& slot = values_[static_cast<std::size_t>(d)];
  if (!value) {
    slot.reset();
    return;
  }
  std::string cleaned = collapse_whitespace(*value);
  if (cleaned.empty()) {
    slot.reset();
  } else {
    slot = std::move(cleaned);
  }
}

std::vector<Dimension> DesignContext::present_dimensions() const {
  std::vector<Dimension> out;
  for (Dimension d : kDimensions) {
    if (is_present(d)) out.push_back(d);
  }
  return out;
}

std::size_t DesignContext::present_count() const {
  return static_cast<std::size_t>(
      std::count_if(values_.begin(), values_.end(), [](const auto& v) { return v.has_value(); }));
}

json to_json(const DesignContext& ctx) {
  json j = json::object();
  for (Dimension d : kDimensions) {
    const auto& v = ctx.get(d);
    j[std::string(dimension_name(d))] = v ? json(*v) : json(nullptr);
  }
  j["origin"] = ctx.origin() == ContextOrigin::kMockup ? "mockup" : "paper";
  return j;
}

DesignContext context_from_json(const json& j) {
  if (!j.is_object()) throw SchemaError("design context must be a JSON object");
  DesignContext ctx(j.value("origin", std::string("paper")) == "mockup" ? ContextOrigin::kMockup
                                                                        : ContextOrigin::kPaper);
  for (Dimension d : kDimensions) {
    auto it = j.find(std::string(dimension_name(d)));
    if (it == j.end() || it->is_null()) continue;
    if (!it->is_string()) {
      throw SchemaError(std::string("dimension '") + std::string(dimension_name(d)) +
                        "' must be a string or null");
    }
    ctx.set(d, it->get<std::string>());
  }
  return ctx;
}

namespace {

bool is_abstention(const std::string& text) {
  static constexpr std::array<std::string_view, 10> kPhrases = {
      "n/a", "na", "none", "null", "unknown", "not specified", "not mentioned",
      "not applicable", "absent", "-"};
  std::string lowered = to_lower_ascii(collapse_whitespace(text));
  while (!lowered.empty() && (lowered.back() == '.')) lowered.pop_back();
  return std::find(kPhrases.begin(), kPhrases.end(), lowered) != kPhrases.end();
}

}  // namespace

DesignContext context_from_model_output(const json& j, ContextOrigin origin) {
  if (!j.is_object()) throw SchemaError("design context answer must be a JSON object");
  DesignContext ctx(origin);
  for (Dimension d : kDimensions) {
    auto it = j.find(std::string(dimension_name(d)));
    if (it == j.end() || !it->is_string()) continue;
    std::string value = it->get<std::string>();
    if (is_abstention(value)) continue;
    ctx.set(d, nfc(value));
  }
  return ctx;
}

}  // namespace refine
