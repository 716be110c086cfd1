#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "refine/common/util.h"
#include "refine/mockup/edits.h"
#include "refine/paper/design_context.h"
#include "refine/provider/provider.h"
#include "refine/translation/action_item.h"

namespace refine::mockup {

inline constexpr std::size_t kMaxScreens = 10;

struct PngInfo {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
};

/// Checks the PNG signature and IHDR chunk. Throws BadImageError.
PngInfo read_png_info(std::string_view bytes);

enum class ReconstructionStatus { kPending, kReady, kFailed };
std::string_view to_string(ReconstructionStatus status);

struct MockupScreen {
  std::string screen_id;
  std::string png_bytes;
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::optional<std::string> reconstructed_html;
  ReconstructionStatus reconstruction_status = ReconstructionStatus::kPending;
  std::optional<std::string> reconstruction_error;

  bool operator==(const MockupScreen&) const = default;
};

struct MockupBundle {
  std::string mockup_id;
  std::vector<MockupScreen> screens;
  DesignContext context{ContextOrigin::kMockup};

  const MockupScreen* find_screen(std::string_view screen_id) const;
  MockupScreen* find_screen(std::string_view screen_id);
  std::vector<std::string> screen_ids() const;

  bool operator==(const MockupBundle&) const = default;
};

/// Validates each PNG and assigns screen ids "s1".."sN". The mockup id is
/// derived from the image contents. Throws BadImageError, also for zero or
/// more than kMaxScreens images.
MockupBundle make_bundle(std::vector<std::string> png_images);

/// `with_images` embeds the PNGs as base64; otherwise only their SHA-256.
nlohmann::json to_json(const MockupScreen& screen, bool with_images);
nlohmann::json to_json(const MockupBundle& bundle, bool with_images);
MockupBundle bundle_from_json(const nlohmann::json& j);

/// One vision call over all screens. Throws AllAbsentError when the answer
/// has no present dimension.
DesignContext extract_mockup_context(const MockupBundle& bundle, provider::Provider& provider);

/// Strips code fences, parses, sanitizes and assigns ids, returning
/// canonical HTML. Throws HtmlParseError.
std::string postprocess_reconstruction(std::string_view model_output, Diagnostics* diag = nullptr);

/// One vision call for the screen followed by postprocess_reconstruction.
std::string reconstruct_screen(const MockupScreen& screen, provider::Provider& provider,
                               Diagnostics* diag = nullptr);

/// Reconstructs every pending screen concurrently; failures mark the screen
/// failed with the error text.
void reconstruct_all(MockupBundle& bundle, provider::Provider& provider, std::size_t workers,
                     Diagnostics* diag = nullptr);

/// Asks the model for edits realizing the item on one screen, then checks
/// their references. Throws SchemaError, InvalidReferenceError, and
/// NotRepresentableError for items flagged not visually representable.
std::vector<DomEdit> plan_edits(std::string_view screen_html, const translation::ActionItem& item,
                                provider::Provider& provider);

struct PreviewResult {
  std::string item_id;
  std::string screen_id;
  std::string before_html;
  std::string after_html;
  std::vector<DomEdit> edits_applied;
  std::vector<std::string> warnings;
  bool failed = false;

  bool operator==(const PreviewResult&) const = default;
};

nlohmann::json to_json(const PreviewResult& preview);
PreviewResult preview_from_json(const nlohmann::json& j);

/// One result per target screen. A failing screen yields a failed result
/// carrying the reason, before_html == after_html. Throws
/// NotRepresentableError before any provider call for non-representable
/// items, ReconstructionPendingError when a target screen is still pending,
/// and PreviewFailedError when every target screen fails.
std::vector<PreviewResult> build_preview(const MockupBundle& bundle,
                                         const translation::ActionItem& item,
                                         provider::Provider& provider);

}  // namespace refine::mockup
