#include "refine/mockup/bundle.h"

#include <algorithm>

#include <fmt/format.h>

#include "refine/common/encoding.h"
#include "refine/common/error.h"
#include "refine/mockup/html.h"
#include "refine/provider/prompts.h"
#include "refine/provider/structured.h"

namespace refine::mockup {

using nlohmann::json;
using provider::ImagePart;
using provider::ProviderRequest;
using provider::RequestKind;
using provider::TextPart;

PngInfo read_png_info(std::string_view bytes) {
  static constexpr unsigned char kSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (bytes.size() < 33 || !std::equal(kSignature, kSignature + 8,
                                       reinterpret_cast<const unsigned char*>(bytes.data()))) {
    throw BadImageError("not a PNG image");
  }
  auto be32 = [&](std::size_t at) {
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + at;
    return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) |
           std::uint32_t{p[3]};
  };
  if (be32(8) != 13 || bytes.substr(12, 4) != "IHDR") throw BadImageError("PNG lacks an IHDR chunk");
  PngInfo info{be32(16), be32(20)};
  if (info.width == 0 || info.height == 0) throw BadImageError("PNG has zero width or height");
  return info;
}

std::string_view to_string(ReconstructionStatus status) {
  switch (status) {
    case ReconstructionStatus::kPending: return "pending";
    case ReconstructionStatus::kReady: return "ready";
    case ReconstructionStatus::kFailed: return "failed";
  }
  return "pending";
}

const MockupScreen* MockupBundle::find_screen(std::string_view screen_id) const {
  for (const auto& s : screens) {
    if (s.screen_id == screen_id) return &s;
  }
  return nullptr;
}

MockupScreen* MockupBundle::find_screen(std::string_view screen_id) {
  for (auto& s : screens) {
    if (s.screen_id == screen_id) return &s;
  }
  return nullptr;
}

std::vector<std::string> MockupBundle::screen_ids() const {
  std::vector<std::string> out;
  for (const auto& s : screens) out.push_back(s.screen_id);
  return out;
}

MockupBundle make_bundle(std::vector<std::string> png_images) {
  if (png_images.empty()) throw BadImageError("a mockup needs at least one screen");
  if (png_images.size() > kMaxScreens) {
    throw BadImageError(fmt::format("a mockup holds at most {} screens", kMaxScreens));
  }
  MockupBundle bundle;
  std::string digests;
  for (std::size_t i = 0; i < png_images.size(); ++i) {
    PngInfo info;
    try {
      info = read_png_info(png_images[i]);
    } catch (const BadImageError& e) {
      throw BadImageError(fmt::format("screen {}: {}", i + 1, e.what()));
    }
    MockupScreen screen;
    screen.screen_id = fmt::format("s{}", i + 1);
    screen.width = info.width;
    screen.height = info.height;
    digests += sha256_hex(png_images[i]);
    screen.png_bytes = std::move(png_images[i]);
    bundle.screens.push_back(std::move(screen));
  }
  bundle.mockup_id = sha256_hex(digests).substr(0, 16);
  return bundle;
}

json to_json(const MockupScreen& s, bool with_images) {
  json j = {{"screen_id", s.screen_id},
            {"width", s.width},
            {"height", s.height},
            {"png_sha256", sha256_hex(s.png_bytes)},
            {"reconstruction_status", to_string(s.reconstruction_status)}};
  j["reconstructed_html"] = s.reconstructed_html ? json(*s.reconstructed_html) : json(nullptr);
  if (s.reconstruction_error) j["reconstruction_error"] = *s.reconstruction_error;
  if (with_images) j["png_base64"] = base64_encode(s.png_bytes);
  return j;
}

json to_json(const MockupBundle& b, bool with_images) {
  json screens = json::array();
  for (const auto& s : b.screens) screens.push_back(to_json(s, with_images));
  return {{"mockup_id", b.mockup_id}, {"screens", screens}, {"context", to_json(b.context)}};
}

MockupBundle bundle_from_json(const json& j) {
  try {
    MockupBundle b;
    b.mockup_id = j.at("mockup_id").get<std::string>();
    for (const auto& s : j.at("screens")) {
      MockupScreen screen;
      screen.screen_id = s.at("screen_id").get<std::string>();
      screen.width = s.at("width").get<std::uint32_t>();
      screen.height = s.at("height").get<std::uint32_t>();
      if (auto it = s.find("png_base64"); it != s.end()) {
        screen.png_bytes = base64_decode(it->get<std::string>());
      }
      if (auto it = s.find("reconstructed_html"); it != s.end() && it->is_string()) {
        screen.reconstructed_html = it->get<std::string>();
      }
      if (auto it = s.find("reconstruction_error"); it != s.end() && it->is_string()) {
        screen.reconstruction_error = it->get<std::string>();
      }
      std::string status = s.value("reconstruction_status", "pending");
      screen.reconstruction_status = status == "ready"    ? ReconstructionStatus::kReady
                                     : status == "failed" ? ReconstructionStatus::kFailed
                                                          : ReconstructionStatus::kPending;
      b.screens.push_back(std::move(screen));
    }
    b.context = context_from_json(j.at("context"));
    b.context.set_origin(ContextOrigin::kMockup);
    return b;
  } catch (const json::exception& e) {
    throw SchemaError(fmt::format("malformed mockup bundle: {}", e.what()));
  }
}

DesignContext extract_mockup_context(const MockupBundle& bundle, provider::Provider& provider) {
  if (bundle.screens.empty()) throw PreconditionError("a mockup needs at least one screen");
  const auto& tmpl = provider::prompt("mockup_context");
  ProviderRequest req;
  req.kind = RequestKind::kVisionChat;
  req.system_instruction = tmpl.render();
  req.response_schema_hint = tmpl.schema;
  std::string listing = "Screens, in the order of the images:";
  for (const auto& s : bundle.screens) {
    listing += fmt::format("\n- {} ({} x {} px)", s.screen_id, s.width, s.height);
  }
  req.user_parts.push_back(TextPart{listing});
  for (const auto& s : bundle.screens) req.user_parts.push_back(ImagePart{s.png_bytes});
  DesignContext ctx =
      context_from_model_output(provider::call_structured(req, provider), ContextOrigin::kMockup);
  if (ctx.present_count() == 0) {
    throw AllAbsentError("no design-context dimension could be read from the mockup");
  }
  return ctx;
}

std::string postprocess_reconstruction(std::string_view model_output, Diagnostics* diag) {
  std::string text = provider::strip_code_fence(model_output);
  // Drop any prose before the markup.
  std::size_t start = text.find('<');
  if (start == std::string::npos) throw HtmlParseError("model output contains no HTML");
  html::Document doc = html::parse_document(std::string_view(text).substr(start));
  std::size_t removed = html::sanitize(doc.root);
  if (removed > 0) warn(diag, fmt::format("sanitizer removed {} unsafe constructs", removed));
  html::assign_ids(doc.root, diag);
  return html::serialize(doc);
}

std::string reconstruct_screen(const MockupScreen& screen, provider::Provider& provider,
                               Diagnostics* diag) {
  ProviderRequest req;
  req.kind = RequestKind::kVisionChat;
  req.system_instruction = provider::prompt("reconstruct_screen").render();
  req.user_parts.push_back(TextPart{fmt::format("Screen {}: {} x {} px.", screen.screen_id,
                                                screen.width, screen.height)});
  req.user_parts.push_back(ImagePart{screen.png_bytes});
  provider::ProviderResponse response = provider::call(req, provider);
  return postprocess_reconstruction(*response.text, diag);
}

void reconstruct_all(MockupBundle& bundle, provider::Provider& provider, std::size_t workers,
                     Diagnostics* diag) {
  std::vector<MockupScreen*> pending;
  for (auto& s : bundle.screens) {
    if (s.reconstruction_status == ReconstructionStatus::kPending) pending.push_back(&s);
  }
  std::vector<Diagnostics> local(pending.size());
  parallel_for(pending.size(), workers, [&](std::size_t i) {
    MockupScreen& s = *pending[i];
    try {
      s.reconstructed_html = reconstruct_screen(s, provider, &local[i]);
      s.reconstruction_status = ReconstructionStatus::kReady;
      s.reconstruction_error.reset();
    } catch (const Error& e) {
      s.reconstruction_status = ReconstructionStatus::kFailed;
      s.reconstruction_error = fmt::format("{}: {}", error_code_name(e.code()), e.what());
      local[i].warn(fmt::format("screen {} reconstruction failed: {}", s.screen_id, e.what()));
    }
  });
  if (diag) {
    for (const auto& d : local) diag->append(d);
  }
}

std::vector<DomEdit> plan_edits(std::string_view screen_html, const translation::ActionItem& item,
                                provider::Provider& provider) {
  if (!item.visually_representable) {
    throw NotRepresentableError(fmt::format("action item {} is not visually representable",
                                            item.item_id));
  }
  const auto& tmpl = provider::prompt("plan_edits");
  ProviderRequest req;
  req.kind = RequestKind::kChat;
  req.system_instruction = tmpl.render();
  req.response_schema_hint = tmpl.schema;
  json payload = {{"action_item", item.text}, {"screen_html", std::string(screen_html)}};
  req.user_parts.push_back(TextPart{payload.dump(2)});
  std::vector<DomEdit> edits = dom_edits_from_json(provider::call_structured(req, provider));
  validate_references(screen_html, edits);
  return edits;
}

json to_json(const PreviewResult& p) {
  json edits = json::array();
  for (const auto& e : p.edits_applied) edits.push_back(to_json(e));
  return {{"item_id", p.item_id},       {"screen_id", p.screen_id},
          {"before_html", p.before_html}, {"after_html", p.after_html},
          {"edits_applied", edits},     {"warnings", p.warnings},
          {"failed", p.failed}};
}

PreviewResult preview_from_json(const json& j) {
  try {
    PreviewResult p;
    p.item_id = j.at("item_id").get<std::string>();
    p.screen_id = j.at("screen_id").get<std::string>();
    p.before_html = j.at("before_html").get<std::string>();
    p.after_html = j.at("after_html").get<std::string>();
    p.edits_applied = dom_edits_from_json(j.at("edits_applied"));
    p.warnings = j.value("warnings", std::vector<std::string>{});
    p.failed = j.value("failed", false);
    return p;
  } catch (const json::exception& e) {
    throw SchemaError(fmt::format("malformed preview: {}", e.what()));
  }
}

std::vector<PreviewResult> build_preview(const MockupBundle& bundle,
                                         const translation::ActionItem& item,
                                         provider::Provider& provider) {
  if (!item.visually_representable) {
    throw NotRepresentableError(fmt::format("action item {} is not visually representable",
                                            item.item_id));
  }
  if (item.target_screen_ids.empty()) {
    throw PreconditionError(fmt::format("action item {} targets no screen", item.item_id));
  }
  for (const auto& id : item.target_screen_ids) {
    const MockupScreen* s = bundle.find_screen(id);
    if (s && s->reconstruction_status == ReconstructionStatus::kPending) {
      throw ReconstructionPendingError(fmt::format("screen {} is still being reconstructed", id), 5);
    }
  }

  std::vector<PreviewResult> out;
  std::size_t failures = 0;
  for (const auto& id : item.target_screen_ids) {
    PreviewResult r;
    r.item_id = item.item_id;
    r.screen_id = id;
    const MockupScreen* s = bundle.find_screen(id);
    auto fail = [&](std::string reason) {
      r.after_html = r.before_html;
      r.failed = true;
      r.warnings.push_back(std::move(reason));
      ++failures;
    };
    if (!s) {
      fail(fmt::format("unknown screen {}", id));
    } else if (s->reconstruction_status != ReconstructionStatus::kReady || !s->reconstructed_html) {
      fail(fmt::format("screen {} has no reconstruction: {}", id,
                       s->reconstruction_error.value_or("reconstruction failed")));
    } else {
      r.before_html = *s->reconstructed_html;
      try {
        Diagnostics diag;
        std::vector<DomEdit> edits = plan_edits(r.before_html, item, provider);
        r.after_html = apply_edits(r.before_html, edits, &diag);
        r.edits_applied = std::move(edits);
        r.warnings = diag.warnings();
      } catch (const InvalidReferenceError& e) {
        fail(fmt::format("{} (edit {})", e.what(), e.edit_index()));
      } catch (const Error& e) {
        fail(fmt::format("{}: {}", error_code_name(e.code()), e.what()));
      }
    }
    out.push_back(std::move(r));
  }
  if (failures == out.size()) {
    std::string reasons;
    for (const auto& r : out) reasons += (reasons.empty() ? "" : "; ") + r.warnings.front();
    throw PreviewFailedError(fmt::format("no preview could be built for {}: {}", item.item_id, reasons));
  }
  return out;
}

}  // namespace refine::mockup
