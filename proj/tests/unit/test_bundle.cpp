#include <gtest/gtest.h>
#include <json.hpp>

#include "refine/common/encoding.h"
#include "refine/common/error.h"
#include "refine/mockup/bundle.h"
#include "refine/mockup/html.h"
#include "test_support.h"

using namespace refine;
using namespace refine::mockup;
using nlohmann::json;
namespace rt = refine::testing;

namespace {

const char* kScreenHtml =
    "<main id=\"root\"><h1 id=\"t\">Trips</h1><ul id=\"l\"><li id=\"a\">One</li>"
    "<li id=\"b\">Two</li></ul><button id=\"go\">Book</button></main>";

translation::ActionItem item_for(std::vector<std::string> screens, bool visual = true) {
  translation::ActionItem item;
  item.item_id = "c1-a1";
  item.cluster_id = "c1";
  item.text = "Show the total price on the book button.";
  item.target_screen_ids = std::move(screens);
  item.visually_representable = visual;
  return item;
}

MockupBundle ready_bundle(std::size_t screens) {
  std::vector<std::string> pngs;
  for (std::size_t i = 0; i < screens; ++i) pngs.push_back(rt::make_png(100, 200, static_cast<std::uint8_t>(i)));
  MockupBundle b = make_bundle(pngs);
  for (auto& s : b.screens) {
    s.reconstructed_html = html::canonicalize(kScreenHtml);
    s.reconstruction_status = ReconstructionStatus::kReady;
  }
  return b;
}

std::string replace_button(const std::string&, const provider::ProviderRequest&) {
  return R"([{"op":"replace","reference_element_id":"go","edited_element":"<button>Book for 240 EUR</button>","rationale":"price"}])";
}

}  // namespace

TEST(Png, ReadsHeaderDimensions) {
  PngInfo info = read_png_info(rt::make_png(640, 1136));
  EXPECT_EQ(info.width, 640u);
  EXPECT_EQ(info.height, 1136u);
  for (const auto& png : rt::mockup_pngs()) {
    EXPECT_GT(read_png_info(png).width, 0u);
  }
}

TEST(Png, RejectsBadImages) {
  EXPECT_THROW(read_png_info(""), BadImageError);
  EXPECT_THROW(read_png_info("GIF89a this is not a png at all, no"), BadImageError);
  std::string png = rt::make_png(10, 10);
  std::string zero = png;
  zero[16] = zero[17] = zero[18] = zero[19] = '\0';
  EXPECT_THROW(read_png_info(zero), BadImageError);
  std::string wrong_chunk = png;
  wrong_chunk[12] = 'X';
  EXPECT_THROW(read_png_info(wrong_chunk), BadImageError);
  EXPECT_THROW(read_png_info(png.substr(0, 20)), BadImageError);
}

TEST(Bundle, AssignsScreenIdsInOrder) {
  MockupBundle b = make_bundle({rt::make_png(1, 2, 0), rt::make_png(3, 4, 1), rt::make_png(5, 6, 2)});
  EXPECT_EQ(b.screen_ids(), (std::vector<std::string>{"s1", "s2", "s3"}));
  EXPECT_EQ(b.find_screen("s2")->width, 3u);
  EXPECT_EQ(b.find_screen("s4"), nullptr);
  EXPECT_EQ(b.mockup_id.size(), 16u);
  for (const auto& s : b.screens) EXPECT_EQ(s.reconstruction_status, ReconstructionStatus::kPending);
}

TEST(Bundle, MockupIdDependsOnImagesAndOrder) {
  auto a = rt::make_png(10, 10, 1);
  auto b = rt::make_png(10, 10, 2);
  EXPECT_EQ(make_bundle({a, b}).mockup_id, make_bundle({a, b}).mockup_id);
  EXPECT_NE(make_bundle({a, b}).mockup_id, make_bundle({b, a}).mockup_id);
  EXPECT_NE(make_bundle({a}).mockup_id, make_bundle({a, b}).mockup_id);
}

TEST(Bundle, ScreenCountLimits) {
  EXPECT_THROW(make_bundle({}), BadImageError);
  std::vector<std::string> ten, eleven;
  for (int i = 0; i < 11; ++i) {
    auto png = rt::make_png(8, 8, static_cast<std::uint8_t>(i));
    if (i < 10) ten.push_back(png);
    eleven.push_back(png);
  }
  EXPECT_EQ(make_bundle(ten).screens.size(), 10u);
  EXPECT_THROW(make_bundle(eleven), BadImageError);
  try {
    make_bundle({rt::make_png(8, 8), "junk"});
    FAIL() << "expected BadImageError";
  } catch (const BadImageError& e) {
    EXPECT_NE(std::string(e.what()).find("screen 2"), std::string::npos);
  }
}

TEST(Bundle, JsonRoundTrip) {
  MockupBundle b = ready_bundle(2);
  b.screens[1].reconstruction_status = ReconstructionStatus::kFailed;
  b.screens[1].reconstructed_html.reset();
  b.screens[1].reconstruction_error = "TransportError: reset";
  b.context.set(Dimension::kDomain, "travel");
  json with = to_json(b, true);
  EXPECT_EQ(bundle_from_json(with), b);
  EXPECT_EQ(to_json(bundle_from_json(with), true).dump(), with.dump());

  json without = to_json(b, false);
  EXPECT_FALSE(without["screens"][0].contains("png_base64"));
  EXPECT_EQ(without["screens"][0]["png_sha256"], sha256_hex(b.screens[0].png_bytes));
  EXPECT_EQ(without["screens"][1]["reconstruction_status"], "failed");
  EXPECT_THROW(bundle_from_json(json{{"mockup_id", "x"}}), SchemaError);
}

TEST(MockupContext, OneVisionCallWithEveryScreen) {
  MockupBundle b = ready_bundle(3);
  std::size_t images = 0;
  rt::ScriptedProvider p([&](const std::string& stage, const provider::ProviderRequest& req) {
    EXPECT_EQ(stage, "mockup_context");
    EXPECT_EQ(req.kind, provider::RequestKind::kVisionChat);
    for (const auto& part : req.user_parts) images += std::holds_alternative<provider::ImagePart>(part);
    EXPECT_NE(rt::first_text(req).find("s3 (100 x 200 px)"), std::string::npos);
    return R"({"domain":"travel","target_user":"not specified","modality":"mobile app"})";
  });
  DesignContext ctx = extract_mockup_context(b, p);
  EXPECT_EQ(images, 3u);
  EXPECT_EQ(ctx.present_count(), 2u);
  EXPECT_EQ(ctx.origin(), ContextOrigin::kMockup);

  rt::ScriptedProvider empty([](const std::string&, const provider::ProviderRequest&) {
    return R"({"domain":"unknown"})";
  });
  EXPECT_THROW(extract_mockup_context(b, empty), AllAbsentError);
}

TEST(Reconstruction, PostprocessStripsFenceSanitizesAndAssignsIds) {
  Diagnostics diag;
  std::string out = postprocess_reconstruction(
      "Here is the screen:\n```html\n<div><p onclick=\"x()\">Hi</p><script>bad()</script></div>\n```",
      &diag);
  EXPECT_EQ(out.find("script"), std::string::npos);
  EXPECT_EQ(out.find("onclick"), std::string::npos);
  EXPECT_NE(out.find("Hi"), std::string::npos);
  EXPECT_EQ(out, html::canonicalize(out));
  html::Document doc = html::parse_document(out);
  std::size_t without_id = 0;
  for (const html::Node* n : html::elements(doc.root)) {
    if (!n->attr("id")) ++without_id;
  }
  EXPECT_EQ(without_id, 0u);
  EXPECT_FALSE(diag.warnings().empty());
  EXPECT_THROW(postprocess_reconstruction("no markup here"), HtmlParseError);
}

TEST(Reconstruction, FailuresMarkOnlyTheirScreen) {
  MockupBundle b = make_bundle({rt::make_png(10, 10, 1), rt::make_png(10, 10, 2), rt::make_png(10, 10, 3)});
  rt::ScriptedProvider p([](const std::string& stage, const provider::ProviderRequest& req) -> std::string {
    EXPECT_EQ(stage, "reconstruct_screen");
    std::string text = rt::first_text(req);
    if (text.find("Screen s2") != std::string::npos) throw TransportError("upstream reset");
    if (text.find("Screen s3") != std::string::npos) return "I cannot see the image.";
    return "<section><h2>Ok</h2></section>";
  });
  Diagnostics diag;
  reconstruct_all(b, p, 3, &diag);
  EXPECT_EQ(b.screens[0].reconstruction_status, ReconstructionStatus::kReady);
  EXPECT_TRUE(b.screens[0].reconstructed_html.has_value());
  EXPECT_EQ(b.screens[1].reconstruction_status, ReconstructionStatus::kFailed);
  EXPECT_EQ(b.screens[1].reconstruction_error, "TransportError: upstream reset");
  EXPECT_EQ(b.screens[2].reconstruction_status, ReconstructionStatus::kFailed);
  EXPECT_EQ(b.screens[2].reconstruction_error->rfind("HtmlParseError", 0), 0u);
  EXPECT_EQ(diag.warnings().size(), 2u);

  // Only pending screens are attempted again.
  b.screens[1].reconstruction_status = ReconstructionStatus::kPending;
  std::size_t before = p.total_calls();
  reconstruct_all(b, p, 2);
  EXPECT_EQ(p.total_calls(), before + 1);
}

TEST(PlanEdits, ValidatesAgainstTheScreen) {
  std::string screen = html::canonicalize(kScreenHtml);
  rt::ScriptedProvider good(replace_button);
  auto edits = plan_edits(screen, item_for({"s1"}), good);
  ASSERT_EQ(edits.size(), 1u);
  EXPECT_EQ(edits[0].reference_element_id, "go");

  rt::ScriptedProvider bad([](const std::string&, const provider::ProviderRequest&) {
    return R"([{"op":"remove","reference_element_id":"nope"}])";
  });
  EXPECT_THROW(plan_edits(screen, item_for({"s1"}), bad), InvalidReferenceError);

  rt::ScriptedProvider malformed([](const std::string&, const provider::ProviderRequest&) {
    return R"([{"op":"explode","reference_element_id":"go"}])";
  });
  EXPECT_THROW(plan_edits(screen, item_for({"s1"}), malformed), SchemaError);

  rt::ScriptedProvider unused(replace_button);
  EXPECT_THROW(plan_edits(screen, item_for({"s1"}, false), unused), NotRepresentableError);
  EXPECT_EQ(unused.total_calls(), 0u);
}

TEST(Preview, AppliesPlannedEditsPerScreen) {
  MockupBundle b = ready_bundle(2);
  rt::ScriptedProvider p(replace_button);
  auto results = build_preview(b, item_for({"s1", "s2"}), p);
  ASSERT_EQ(results.size(), 2u);
  for (const auto& r : results) {
    EXPECT_FALSE(r.failed);
    EXPECT_EQ(r.before_html, html::canonicalize(kScreenHtml));
    EXPECT_NE(r.after_html.find("<button id=\"go\">Book for 240 EUR</button>"), std::string::npos);
    EXPECT_EQ(r.edits_applied.size(), 1u);
  }
  EXPECT_EQ(p.calls("plan_edits"), 2u);
  EXPECT_EQ(preview_from_json(to_json(results[0])), results[0]);
}

TEST(Preview, PartialAndTotalFailure) {
  MockupBundle b = ready_bundle(3);
  b.screens[1].reconstruction_status = ReconstructionStatus::kFailed;
  b.screens[1].reconstructed_html.reset();
  b.screens[1].reconstruction_error = "TransportError: reset";

  rt::ScriptedProvider p(replace_button);
  auto results = build_preview(b, item_for({"s1", "s2", "s9"}), p);
  ASSERT_EQ(results.size(), 3u);
  EXPECT_FALSE(results[0].failed);
  EXPECT_TRUE(results[1].failed);
  EXPECT_NE(results[1].warnings[0].find("TransportError: reset"), std::string::npos);
  EXPECT_TRUE(results[2].failed);
  EXPECT_EQ(results[2].warnings[0], "unknown screen s9");
  for (const auto& r : results) {
    if (r.failed) {
      EXPECT_EQ(r.before_html, r.after_html);
    }
  }

  rt::ScriptedProvider wrong_ids([](const std::string&, const provider::ProviderRequest&) {
    return R"([{"op":"remove","reference_element_id":"ghost"}])";
  });
  try {
    build_preview(b, item_for({"s1", "s3"}), wrong_ids);
    FAIL() << "expected PreviewFailedError";
  } catch (const PreviewFailedError& e) {
    EXPECT_NE(std::string(e.what()).find("ghost"), std::string::npos);
  }
}

TEST(Preview, Preconditions) {
  MockupBundle b = ready_bundle(2);
  rt::ScriptedProvider p(replace_button);
  EXPECT_THROW(build_preview(b, item_for({"s1"}, false), p), NotRepresentableError);
  EXPECT_THROW(build_preview(b, item_for({}), p), PreconditionError);
  b.screens[1].reconstruction_status = ReconstructionStatus::kPending;
  try {
    build_preview(b, item_for({"s1", "s2"}), p);
    FAIL() << "expected ReconstructionPendingError";
  } catch (const ReconstructionPendingError& e) {
    EXPECT_GT(e.retry_after_seconds(), 0);
  }
  EXPECT_EQ(p.total_calls(), 0u);
}
