#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace refine {

/// The six facets used to match papers to mockups, in canonical order.
enum class Dimension { kTargetUser, kDomain, kModality, kPainPoint, kClient, kMetric };

inline constexpr std::array<Dimension, 6> kDimensions = {
    Dimension::kTargetUser, Dimension::kDomain, Dimension::kModality,
    Dimension::kPainPoint,  Dimension::kClient, Dimension::kMetric};

std::string_view dimension_name(Dimension d);
std::optional<Dimension> dimension_from_name(std::string_view name);

enum class ContextOrigin { kPaper, kMockup };

/// Per-dimension text, each either a non-blank phrase or absent.
class DesignContext {
 public:
  DesignContext() = default;
  explicit DesignContext(ContextOrigin origin) : origin_(origin) {}

  const std::optional<std::string>& get(Dimension d) const {
    return values_[static_cast<std::size_t>(d)];
  }
  /// Trims `value`; blank text is stored as absent.
  void set(Dimension d, std::optional<std::string> value);

  std::vector<Dimension> present_dimensions() const;
  std::size_t present_count() const;
  bool is_present(Dimension d) const { return get(d).has_value(); }

  ContextOrigin origin() const { return origin_; }
  void set_origin(ContextOrigin origin) { origin_ = origin; }

  bool operator==(const DesignContext&) const = default;

 private:
  std::array<std::optional<std::string>, 6> values_{};
  ContextOrigin origin_ = ContextOrigin::kPaper;
};

/// {"target_user": "...", ..., "metric": null, "origin": "paper"}
nlohmann::json to_json(const DesignContext& ctx);
DesignContext context_from_json(const nlohmann::json& j);

/// Reads a model's six-key answer. Unknown keys are ignored; null, non-string
/// and abstention phrases ("n/a", "none", "not specified", ...) mean absent.
DesignContext context_from_model_output(const nlohmann::json& j, ContextOrigin origin);

}  // namespace refine
