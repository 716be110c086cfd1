#include <filesystem>
#include <random>

#include <gtest/gtest.h>
#include <json.hpp>

#include "refine/common/error.h"
#include "refine/common/util.h"
#include "refine/paper/extraction.h"
#include "test_support.h"

using namespace refine;
using namespace refine::paper;
using nlohmann::json;
namespace rt = refine::testing;
namespace fs = std::filesystem;

namespace {

const json& ground_truth() {
  static const json gt = json::parse(read_file(rt::data_dir() / "corpus" / "ground_truth.json"));
  return gt;
}

// Answers from the corpus ground truth, keyed by the title line of the rendered document.
rt::ScriptedProvider::Handler oracle() {
  return [](const std::string& stage, const provider::ProviderRequest& req) -> std::string {
    std::string text = rt::first_text(req);
    std::string title = text.substr(7, text.find('\n') - 7);
    for (const auto& paper : ground_truth()) {
      if (paper["title"] != title) continue;
      if (stage == "paper_context") return paper["context"].dump();
      if (stage == "paper_implications") return paper["implications"].dump();
    }
    throw std::runtime_error("unexpected request for " + stage + " / " + title);
  };
}

PaperDoc corpus_doc(const std::string& name) {
  return parse_tei(read_file(rt::data_dir() / "corpus" / "tei" / (name + ".xml")), name);
}

}  // namespace

TEST(Extraction, IngestsTheCorpusAgainstGroundTruth) {
  rt::ScriptedProvider provider(oracle());
  Diagnostics diag;
  auto records = ingest_directory(rt::data_dir() / "corpus" / "tei", provider, 4, &diag);
  ASSERT_EQ(records.size(), ground_truth().size());
  EXPECT_TRUE(diag.warnings().empty());
  EXPECT_EQ(provider.calls("paper_context"), records.size());

  std::size_t excluded = 0;
  for (std::size_t i = 1; i < records.size(); ++i) {
    EXPECT_LT(records[i - 1].doc.paper_id, records[i].doc.paper_id);
  }
  for (const auto& record : records) {
    const json* truth = nullptr;
    for (const auto& p : ground_truth()) {
      if (p["title"] == record.doc.title) truth = &p;
    }
    ASSERT_NE(truth, nullptr);
    excluded += record.excluded_from_index;
    EXPECT_EQ(record.excluded_from_index, record.context.present_count() == 0);
    for (Dimension d : kDimensions) {
      const json& v = (*truth)["context"][std::string(dimension_name(d))];
      EXPECT_EQ(record.context.is_present(d), v.is_string()) << record.doc.title;
    }
    const json& imps = (*truth)["implications"];
    ASSERT_EQ(record.implications.size(), imps.size());
    for (std::size_t k = 0; k < imps.size(); ++k) {
      const auto& imp = record.implications[k];
      EXPECT_EQ(imp.implication_id, record.doc.paper_id + "#" + std::to_string(k));
      EXPECT_EQ(imp.text, imps[k]["design_implication"]);
      EXPECT_EQ(imp.para_key, imps[k]["paragraph_key"].get<std::string>());
      const Paragraph* p = record.doc.find_paragraph(*imp.para_key);
      ASSERT_NE(p, nullptr);
      EXPECT_NE(normalize_for_match(p->text).find(imp.source_paragraph), std::string::npos);
    }
  }
  EXPECT_EQ(excluded, 1u);
}

TEST(Extraction, FabricatedSourceParagraphsAreDropped) {
  PaperDoc doc = corpus_doc("p03");
  const Paragraph* real = doc.find_paragraph("p03-f0");
  ASSERT_NE(real, nullptr);
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::string source = real->text;
    bool fabricate = trial % 2 == 0;
    if (fabricate) {
      source.insert(rng() % source.size(), "zq");
    } else {
      // Whitespace changes and substrings still locate the paragraph.
      std::size_t cut = rng() % (source.size() / 2);
      source = "  " + source.substr(cut, source.size() / 3) + " \n";
    }
    json answer = json::array({{{"design_implication", "Do the thing."},
                                {"original_paragraph", source}}});
    Diagnostics diag;
    auto kept = filter_implications(doc, answer, &diag);
    if (fabricate) {
      EXPECT_TRUE(kept.empty()) << source;
      EXPECT_EQ(diag.warnings().size(), 1u);
    } else {
      ASSERT_EQ(kept.size(), 1u) << source;
      EXPECT_EQ(kept[0].para_key, "p03-f0");
    }
  }
}

TEST(Extraction, FilterHandlesClaimedKeysAndEmptyItems) {
  PaperDoc doc = corpus_doc("p03");
  std::string shared = "Participants repeatedly described friction around this topic.";
  json answer = json::array({
      {{"design_implication", "A."}, {"original_paragraph", shared}, {"paragraph_key", "p03-f1"}},
      {{"design_implication", ""}, {"original_paragraph", shared}},
      {{"design_implication", "B."}, {"original_paragraph", shared}, {"rationale", "one"}},
  });
  Diagnostics diag;
  auto kept = filter_implications(doc, answer, &diag);
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_EQ(kept[0].para_key, "p03-f1");
  EXPECT_EQ(kept[1].para_key, "p03-f0");
  EXPECT_EQ(kept[1].implication_id, doc.paper_id + "#1");
  EXPECT_EQ(kept[1].rationale_tags, std::vector<std::string>{"one"});
  EXPECT_EQ(diag.warnings().size(), 1u);
  EXPECT_THROW(filter_implications(doc, json("text"), nullptr), SchemaError);
  EXPECT_THROW(filter_implications(doc, json::array({1}), nullptr), SchemaError);
}

TEST(Extraction, RecordJsonRoundTripAndVersioning) {
  rt::ScriptedProvider provider(oracle());
  PaperRecord record = ingest_paper(rt::data_dir() / "corpus" / "tei" / "p10.xml", provider);
  json j = to_json(record);
  EXPECT_EQ(to_json(record_from_json(j)).dump(), j.dump());
  j["schema_version"] = 99;
  EXPECT_THROW(record_from_json(j), SchemaVersionError);
}

TEST(Extraction, RecordSetReplacesSameContent) {
  rt::ScriptedProvider provider(oracle());
  RecordSet set;
  auto path = rt::data_dir() / "corpus" / "tei" / "p10.xml";
  EXPECT_FALSE(set.upsert(ingest_paper(path, provider)));
  EXPECT_TRUE(set.upsert(ingest_paper(path, provider)));
  EXPECT_EQ(set.size(), 1u);
}

TEST(Extraction, DirectorySkipsUnusableFilesButNotProviderFailures) {
  rt::TempDir dir;
  fs::copy_file(rt::data_dir() / "corpus" / "tei" / "p01.xml", dir / "a.xml");
  write_file_atomic(dir / "b.xml", "<TEI><oops></TEI>");
  write_file_atomic(dir / "notes.txt", "ignored");
  rt::ScriptedProvider provider(oracle());
  Diagnostics diag;
  auto records = ingest_directory(dir.path(), provider, 2, &diag);
  EXPECT_EQ(records.size(), 1u);
  ASSERT_EQ(diag.warnings().size(), 1u);
  EXPECT_NE(diag.warnings()[0].find("b.xml: skipped"), std::string::npos);

  rt::ScriptedProvider broken([](const std::string&, const provider::ProviderRequest&) -> std::string {
    throw TransportError("down");
  });
  EXPECT_THROW(ingest_directory(dir.path(), broken, 2), TransportError);
}
