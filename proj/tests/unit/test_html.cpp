#include <random>

#include <gtest/gtest.h>

#include "refine/common/error.h"
#include "refine/mockup/html.h"
#include "test_support.h"

using namespace refine;
using namespace refine::mockup::html;

namespace {

// Random, loosely formatted markup: nested containers, void and raw-text
// elements, comments, uneven whitespace and mixed-case tags.
class MarkupGen {
 public:
  explicit MarkupGen(std::uint64_t seed) : rng_(seed) {}

  std::string document() {
    std::string out = pick(3) == 0 ? "<!doctype html>\n" : "";
    out += element(0);
    return out;
  }

 private:
  std::size_t pick(std::size_t n) { return rng_() % n; }

  std::string space() {
    static const char* kSpaces[] = {"", " ", "\n  ", "\t", "  \n"};
    return kSpaces[pick(5)];
  }

  std::string text() {
    static const char* kWords[] = {"Book", "flight", "  now ", "caf\xC3\xA9", "a&amp;b", "x > y", "\n"};
    std::string t;
    for (std::size_t i = 0, n = 1 + pick(4); i < n; ++i) t += kWords[pick(7)] + std::string(" ");
    return t;
  }

  std::string attrs() {
    static const char* kNames[] = {"class", "ID", "data-x", "aria-label", "type", "href", "style"};
    std::string out;
    for (std::size_t i = 0, n = pick(4); i < n; ++i) {
      std::string name = kNames[pick(7)];
      std::string value = name == "ID" || name == "id" ? "n" + std::to_string(counter_++)
                                                       : "v" + std::to_string(pick(100));
      switch (pick(3)) {
        case 0: out += " " + name + "=\"" + value + "\""; break;
        case 1: out += " " + name + "='" + value + "'"; break;
        default: out += " " + name + "=" + value; break;
      }
    }
    return out;
  }

  std::string element(int depth) {
    static const char* kContainers[] = {"div", "section", "UL", "li", "form", "span", "button", "nav"};
    static const char* kVoids[] = {"img", "input", "br", "hr"};
    std::size_t kind = depth > 4 ? 1 + pick(3) : pick(5);
    if (kind == 1) return "<" + std::string(kVoids[pick(4)]) + attrs() + (pick(2) ? "/>" : ">");
    if (kind == 2) return space() + text();
    if (kind == 3) return "<!-- note " + std::to_string(pick(9)) + " -->";
    if (kind == 4 && pick(3) == 0) return "<style>  .a { color: red; }  </style>";
    std::string tag = kContainers[pick(8)];
    std::string out = "<" + tag + attrs() + ">";
    for (std::size_t i = 0, n = pick(5); i < n; ++i) out += space() + element(depth + 1);
    out += space() + "</" + tag + ">";
    return out;
  }

  std::mt19937_64 rng_;
  int counter_ = 0;
};

}  // namespace

TEST(Html, CanonicalFormExample) {
  std::string in = R"(<!DOCTYPE html><DIV class="b" id="main" data-a='1'>
      <H1>  Hello
         world </H1><!-- gone --><p>one <b>two</b> three</p><img src="x.png" alt="">
      <script>  var a = "<b>";  </script></DIV>)";
  std::string expected =
      "<!DOCTYPE html>\n"
      "<div id=\"main\" class=\"b\" data-a=\"1\">\n"
      "  <h1>Hello world</h1>\n"
      "  <p>\n"
      "    one\n"
      "    <b>two</b>\n"
      "    three\n"
      "  </p>\n"
      "  <img alt=\"\" src=\"x.png\">\n"
      "  <script>var a = \"<b>\";</script>\n"
      "</div>\n";
  EXPECT_EQ(canonicalize(in), expected);
}

TEST(Html, CanonicalizationIsIdempotent) {
  for (std::uint64_t seed = 0; seed < 400; ++seed) {
    MarkupGen gen(seed);
    std::string doc = gen.document();
    std::string once;
    try {
      once = canonicalize(doc);
    } catch (const HtmlParseError&) {
      continue;  // a generated document may consist of text only
    }
    EXPECT_EQ(canonicalize(once), once) << doc;
    Document a = parse_document(doc);
    Document b = parse_document(once);
    EXPECT_EQ(elements(a.root).size(), elements(b.root).size());
    EXPECT_EQ(collect_ids(a.root), collect_ids(b.root));
  }
}

TEST(Html, AttributesFirstOccurrenceWinsAndQuotesEscape) {
  EXPECT_EQ(canonicalize("<a href=x HREF=y title='say \"hi\"'>t</a>"),
            "<a href=\"x\" title=\"say &quot;hi&quot;\">t</a>\n");
  EXPECT_EQ(canonicalize("<input disabled value=3>"), "<input disabled=\"\" value=\"3\">\n");
}

TEST(Html, LenientRecovery) {
  EXPECT_EQ(canonicalize("<ul><li>a<li>b</ul></span>"),
            "<ul>\n  <li>a</li>\n  <li>b</li>\n</ul>\n");
  EXPECT_EQ(canonicalize("<div><p>open"), "<div>\n  <p>open</p>\n</div>\n");
  EXPECT_EQ(canonicalize("<p>1 < 2</p>"), "<p>1 < 2</p>\n");
  EXPECT_THROW(parse_document("<div class=\"x>text"), HtmlParseError);
  EXPECT_THROW(parse_document("<div"), HtmlParseError);
  EXPECT_THROW(parse_document("just text <!-- c -->"), HtmlParseError);
  EXPECT_THROW(parse_document(""), HtmlParseError);
}

TEST(Html, StrictFragments) {
  auto nodes = parse_fragment("  <span>a</span> tail <br> ");
  ASSERT_EQ(nodes.size(), 3u);
  EXPECT_EQ(nodes[0]->name, "span");
  EXPECT_EQ(nodes[1]->kind, NodeKind::kText);
  EXPECT_EQ(nodes[2]->name, "br");
  EXPECT_EQ(nodes[0]->parent, nullptr);
  EXPECT_THROW(parse_fragment("<div><span></div>"), FragmentParseError);
  EXPECT_THROW(parse_fragment("<div>"), FragmentParseError);
  EXPECT_THROW(parse_fragment("a</b>"), FragmentParseError);
  EXPECT_THROW(parse_fragment("   "), FragmentParseError);
  EXPECT_THROW(parse_fragment("<!-- x"), FragmentParseError);
  EXPECT_NO_THROW(parse_fragment("<button/>"));
}

TEST(Html, RawTextKeepsMarkupVerbatim) {
  Document d = parse_document("<textarea>  <b>not a tag</b> </textarea><title>T &amp; </title>");
  auto els = elements(d.root);
  ASSERT_EQ(els.size(), 2u);
  EXPECT_EQ(els[0]->text, "  <b>not a tag</b> ");
  EXPECT_TRUE(els[0]->children.empty());
  EXPECT_EQ(serialize_node(*els[1]), "<title>T &amp;</title>");
}

TEST(Html, SanitizeRemovesActiveContent) {
  Document d = parse_document(
      "<div onclick=\"x()\" style=\"background: url(https://evil/x.png); color: red\">"
      "<script>alert(1)</script><base href=\"http://x/\">"
      "<meta http-equiv=\"Refresh\" content=\"0\"><meta charset=\"utf-8\">"
      "<a href=\"jav&#x61;script:alert(1)\">a</a><a href=\"/local\">b</a>"
      "<img src=\"data:image/png;base64,AAAA\"><img src=\"//cdn/x.png\">"
      "<iframe src=\"data:text/html,hi\"></iframe>"
      "<style>@import url(http://x/a.css); .a { background: url('/ok.png') }</style></div>");
  EXPECT_EQ(sanitize(d.root), 9u);
  std::string out = serialize(d);
  EXPECT_EQ(out.find("script"), std::string::npos);
  EXPECT_EQ(out.find("onclick"), std::string::npos);
  EXPECT_EQ(out.find("http"), std::string::npos);
  EXPECT_EQ(out.find("@import"), std::string::npos);
  EXPECT_NE(out.find("charset"), std::string::npos);
  EXPECT_NE(out.find("href=\"/local\""), std::string::npos);
  EXPECT_NE(out.find("data:image/png"), std::string::npos);
  EXPECT_NE(out.find("url('/ok.png')"), std::string::npos);
  EXPECT_NE(out.find("background: none; color: red"), std::string::npos);
  EXPECT_EQ(sanitize(d.root), 0u);
}

TEST(Html, AssignIdsUsesPreorderIndexAndResolvesDuplicates) {
  Document d = parse_document(
      "<main><h1 id=\"e2\">x</h1><p id=\"dup\">a</p><p id=\"dup\">b</p><span></span></main>");
  refine::Diagnostics diag;
  EXPECT_EQ(assign_ids(d.root, &diag), 3u);
  auto els = elements(d.root);
  EXPECT_EQ(els[0]->id(), "e0");
  EXPECT_EQ(els[1]->id(), "e2");
  EXPECT_EQ(els[2]->id(), "dup");
  EXPECT_EQ(els[3]->id(), "e3");
  EXPECT_EQ(els[4]->id(), "e4");
  EXPECT_EQ(diag.warnings().size(), 1u);
  EXPECT_EQ(assign_ids(d.root), 0u);

  Document r = parse_document("<div><b id=\"keep\"></b></div>");
  assign_ids(r.root, nullptr, {"e0", "keep"});
  EXPECT_EQ(elements(r.root)[0]->id(), "e1");
  EXPECT_EQ(elements(r.root)[1]->id(), "e2");
}

TEST(Html, AssignIdsGivesEveryElementAUniqueId) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    MarkupGen gen(seed);
    Document d;
    try {
      d = parse_document(gen.document());
    } catch (const HtmlParseError&) {
      continue;
    }
    assign_ids(d.root);
    auto els = elements(d.root);
    std::set<std::string> ids;
    for (const Node* n : els) {
      EXPECT_FALSE(n->id().empty());
      ids.insert(n->id());
    }
    EXPECT_EQ(ids.size(), els.size());
  }
}

TEST(Html, CloneIsDeep) {
  Document d = parse_document("<div id=\"a\"><p>x<b>y</b></p></div>");
  auto copy = d.root.children[0]->clone();
  EXPECT_EQ(serialize_node(*copy), serialize_node(*d.root.children[0]));
  copy->children[0]->children[0]->text = "changed";
  EXPECT_NE(serialize_node(*copy), serialize_node(*d.root.children[0]));
  EXPECT_EQ(copy->children[0]->parent, copy.get());
}
