#include "refine/index/paper_index.h"

#include <algorithm>
#include <set>

#include <fmt/format.h>

#include "refine/common/encoding.h"
#include "refine/common/error.h"

namespace refine::index {

using nlohmann::json;

const IndexEntry* PaperIndex::find(std::string_view paper_id) const {
  auto it = std::lower_bound(entries.begin(), entries.end(), paper_id,
                             [](const IndexEntry& e, std::string_view id) { return e.paper_id < id; });
  if (it != entries.end() && it->paper_id == paper_id) return &*it;
  for (const auto& e : entries) {
    if (e.paper_id == paper_id) return &e;
  }
  return nullptr;
}

void Embedder::seed(const std::string& text, std::vector<float> vector) {
  std::lock_guard lock(mu_);
  if (dim_ == 0) dim_ = vector.size();
  if (vector.size() != dim_) {
    throw DimMismatchError(fmt::format("seed vector has {} dims, expected {}", vector.size(), dim_));
  }
  if (text.empty()) empty_ = vector;
  cache_[sha256_hex(text)] = std::move(vector);
}

std::vector<float> Embedder::embed(const std::string& text) {
  const std::string key = sha256_hex(text);
  {
    std::lock_guard lock(mu_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  }
  std::vector<float> v = provider::call_embed(text, provider_);
  std::lock_guard lock(mu_);
  ++calls_;
  if (v.empty()) throw SchemaError("provider returned an empty embedding");
  if (dim_ == 0) dim_ = v.size();
  if (v.size() != dim_) {
    throw DimMismatchError(fmt::format("embedding has {} dims, expected {}", v.size(), dim_));
  }
  // A concurrent miss on the same text may have landed first; keep that one.
  auto [it, inserted] = cache_.emplace(key, std::move(v));
  if (text.empty() && !empty_) empty_ = it->second;
  return it->second;
}

const std::vector<float>& Embedder::empty_embedding() {
  {
    std::lock_guard lock(mu_);
    if (empty_) return *empty_;
  }
  embed("");
  std::lock_guard lock(mu_);
  return *empty_;
}

std::size_t Embedder::dim() const {
  std::lock_guard lock(mu_);
  return dim_;
}

std::size_t Embedder::provider_calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

DimensionEmbeddings embed_context(const DesignContext& context, Embedder& embedder) {
  DimensionEmbeddings out;
  for (std::size_t i = 0; i < kDimensions.size(); ++i) {
    Dimension d = kDimensions[i];
    out[i].dimension = d;
    if (const auto& value = context.get(d)) {
      out[i].vector = embedder.embed(*value);
      out[i].is_present = true;
    } else {
      out[i].vector = embedder.empty_embedding();
      out[i].is_present = false;
    }
  }
  return out;
}

std::optional<IndexEntry> build_entry(const paper::PaperRecord& record, Embedder& embedder) {
  if (record.context.present_count() == 0) return std::nullopt;
  IndexEntry entry;
  entry.paper_id = record.doc.paper_id;
  entry.title = record.doc.title;
  entry.context = record.context;
  entry.embeddings = embed_context(record.context, embedder);
  entry.implications = record.implications;
  for (const auto& imp : record.implications) {
    entry.implication_embeddings.push_back(embedder.embed(imp.text));
  }
  return entry;
}

PaperIndex build_index(const std::vector<paper::PaperRecord>& records,
                       provider::Provider& provider, std::size_t workers, Diagnostics* diag) {
  std::vector<const paper::PaperRecord*> eligible;
  std::set<std::string> seen;
  for (const auto& r : records) {
    if (!seen.insert(r.doc.paper_id).second) {
      warn(diag, fmt::format("{}: duplicate record ignored", r.doc.paper_id));
      continue;
    }
    if (r.excluded_from_index || r.context.present_count() == 0) {
      warn(diag, fmt::format("{}: no design-context dimension present, excluded from index",
                             r.doc.paper_id));
      continue;
    }
    eligible.push_back(&r);
  }
  std::sort(eligible.begin(), eligible.end(), [](const auto* a, const auto* b) {
    return a->doc.paper_id < b->doc.paper_id;
  });

  Embedder embedder(provider);
  PaperIndex index;
  index.created_at = reproducible_timestamp();
  index.empty_embedding = embedder.empty_embedding();
  index.embedding_dim = index.empty_embedding.size();

  std::vector<std::optional<IndexEntry>> built(eligible.size());
  parallel_for(eligible.size(), workers,
               [&](std::size_t i) { built[i] = build_entry(*eligible[i], embedder); });
  for (auto& e : built) {
    if (e) index.entries.push_back(std::move(*e));
  }
  return index;
}

namespace {

json entry_to_json(const IndexEntry& e) {
  json dims = json::array();
  for (const auto& emb : e.embeddings) {
    json d = {{"dimension", dimension_name(emb.dimension)}, {"present", emb.is_present}};
    if (emb.is_present) d["vector"] = encode_f32_base64(emb.vector);
    dims.push_back(std::move(d));
  }
  json imps = json::array();
  for (const auto& imp : e.implications) imps.push_back(paper::to_json(imp));
  json imp_vecs = json::array();
  for (const auto& v : e.implication_embeddings) imp_vecs.push_back(encode_f32_base64(v));
  return {{"paper_id", e.paper_id},
          {"title", e.title},
          {"context", to_json(e.context)},
          {"embeddings", dims},
          {"implications", imps},
          {"implication_embeddings", imp_vecs}};
}

std::vector<float> decode_checked(const json& j, std::size_t dim, std::string_view what,
                                  std::size_t line) {
  std::vector<float> v = decode_f32_base64(j.get<std::string>());
  if (v.size() != dim) {
    throw DimMismatchError(fmt::format("line {}: {} has {} dims, index declares {}", line, what,
                                       v.size(), dim));
  }
  return v;
}

IndexEntry entry_from_json(const json& j, const PaperIndex& index, std::size_t line) {
  IndexEntry e;
  e.paper_id = j.at("paper_id").get<std::string>();
  e.title = j.at("title").get<std::string>();
  e.context = context_from_json(j.at("context"));
  const json& dims = j.at("embeddings");
  if (!dims.is_array() || dims.size() != kDimensions.size()) {
    throw SchemaError(fmt::format("line {}: expected six dimension embeddings", line));
  }
  bool any_present = false;
  for (std::size_t i = 0; i < kDimensions.size(); ++i) {
    const json& d = dims[i];
    auto& slot = e.embeddings[i];
    slot.dimension = kDimensions[i];
    if (d.at("dimension").get<std::string>() != dimension_name(kDimensions[i])) {
      throw SchemaError(fmt::format("line {}: dimensions out of canonical order", line));
    }
    slot.is_present = d.at("present").get<bool>();
    if (slot.is_present) {
      slot.vector = decode_checked(d.at("vector"), index.embedding_dim, dimension_name(slot.dimension),
                                   line);
      any_present = true;
    } else {
      slot.vector = index.empty_embedding;
    }
  }
  if (!any_present) {
    throw SchemaError(fmt::format("line {}: entry {} has no present dimension", line, e.paper_id));
  }
  for (const auto& imp : j.at("implications")) {
    e.implications.push_back(paper::implication_from_json(imp));
  }
  for (const auto& v : j.at("implication_embeddings")) {
    e.implication_embeddings.push_back(decode_checked(v, index.embedding_dim, "implication", line));
  }
  if (e.implication_embeddings.size() != e.implications.size()) {
    throw SchemaError(fmt::format("line {}: {} implications but {} implication embeddings", line,
                                  e.implications.size(), e.implication_embeddings.size()));
  }
  return e;
}

}  // namespace

std::string serialize_index(const PaperIndex& index) {
  for (const auto& e : index.entries) {
    for (const auto& emb : e.embeddings) {
      if (emb.is_present && emb.vector.size() != index.embedding_dim) {
        throw DimMismatchError(fmt::format("{}: {} has {} dims, index declares {}", e.paper_id,
                                           dimension_name(emb.dimension), emb.vector.size(),
                                           index.embedding_dim));
      }
    }
  }
  json header = {{"schema_version", index.schema_version},
                 {"embedding_dim", index.embedding_dim},
                 {"count", index.entries.size()},
                 {"created_at", index.created_at},
                 {"empty_embedding", encode_f32_base64(index.empty_embedding)}};
  std::string out = header.dump();
  out += '\n';
  for (const auto& e : index.entries) {
    out += entry_to_json(e).dump();
    out += '\n';
  }
  return out;
}

PaperIndex parse_index(std::string_view text) {
  PaperIndex index;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  std::size_t declared_count = 0;
  std::set<std::string> ids;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw SchemaError(fmt::format("line {}: not a JSON object", line_no));
    }
    try {
      if (line_no == 1) {
        index.schema_version = j.value("schema_version", 0);
        if (index.schema_version != kIndexSchemaVersion) {
          throw SchemaVersionError(fmt::format("index schema_version {} is not supported (expected {})",
                                               index.schema_version, kIndexSchemaVersion));
        }
        index.embedding_dim = j.at("embedding_dim").get<std::size_t>();
        declared_count = j.at("count").get<std::size_t>();
        index.created_at = j.value("created_at", "");
        index.empty_embedding = decode_checked(j.at("empty_embedding"), index.embedding_dim,
                                               "empty_embedding", line_no);
        if (index.embedding_dim == 0) throw SchemaError("embedding_dim must be positive");
        index.entries.reserve(declared_count);
        continue;
      }
      IndexEntry e = entry_from_json(j, index, line_no);
      if (!ids.insert(e.paper_id).second) {
        throw SchemaError(fmt::format("line {}: duplicate paper_id {}", line_no, e.paper_id));
      }
      index.entries.push_back(std::move(e));
    } catch (const json::exception& e) {
      throw SchemaError(fmt::format("line {}: {}", line_no, e.what()));
    }
  }
  if (line_no == 0) throw SchemaError("index file is empty");
  if (index.entries.size() != declared_count) {
    throw SchemaError(fmt::format("header declares {} entries, found {}", declared_count,
                                  index.entries.size()));
  }
  return index;
}

void save_index(const PaperIndex& index, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_index(index));
}

PaperIndex load_index(const std::filesystem::path& path) {
  return parse_index(read_file(path));
}

}  // namespace refine::index
