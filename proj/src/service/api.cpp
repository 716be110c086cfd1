#include "refine/service/api.h"

#include <charconv>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "refine/common/encoding.h"

namespace refine::service {

using nlohmann::json;

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnknownSession:
    case ErrorCode::kUnknownItem:
    case ErrorCode::kUnknownCluster:
      return 404;
    case ErrorCode::kPrecondition:
    case ErrorCode::kNotRepresentable:
      return 409;
    case ErrorCode::kReconstructionPending:
      return 503;
    case ErrorCode::kTransport:
    case ErrorCode::kFixtureMiss:
    case ErrorCode::kTranslationFailed:
    case ErrorCode::kPreviewFailed:
      return 502;
    case ErrorCode::kIo:
      return 500;
    default:
      return 422;
  }
}

namespace {

ApiResponse plain_error(int status, std::string_view code, std::string message) {
  return {status, {{"error", {{"code", code}, {"message", std::move(message)}}}}, {}};
}

struct BadRequest : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json parse_body(const ApiRequest& r, bool allow_empty) {
  if (r.body.empty() && allow_empty) return json::object();
  json j = json::parse(r.body, nullptr, false);
  if (j.is_discarded()) throw BadRequest("request body is not valid JSON");
  return j;
}

DesignContext context_from_body(const json& body) {
  const json& j = body.contains("context") ? body.at("context") : body;
  if (!j.is_object()) throw BadRequest("context must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key != "origin" && !dimension_from_name(key)) {
      throw SchemaError(fmt::format("unknown design context dimension '{}'", key));
    }
  }
  return context_from_json(j);
}

std::optional<std::size_t> query_size(const ApiRequest& r, std::initializer_list<const char*> names) {
  for (const char* name : names) {
    auto it = r.query.find(name);
    if (it == r.query.end()) continue;
    std::size_t value = 0;
    const std::string& s = it->second;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size() || value == 0) {
      throw BadRequest(fmt::format("query parameter {} must be a positive integer", name));
    }
    return value;
  }
  return std::nullopt;
}

std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> parts;
  std::size_t pos = 0;
  while (pos < path.size()) {
    std::size_t next = path.find('/', pos);
    if (next == std::string_view::npos) next = path.size();
    if (next > pos) parts.emplace_back(path.substr(pos, next - pos));
    pos = next + 1;
  }
  return parts;
}

json clusters_json(const std::vector<clustering::InsightCluster>& clusters) {
  json arr = json::array();
  for (const auto& c : clusters) arr.push_back(clustering::to_json(c));
  return arr;
}

json session_view(const Session& s) { return to_json(s, false); }

}  // namespace

ApiResponse error_response(const Error& e) {
  ApiResponse r = plain_error(http_status(e.code()), error_code_name(e.code()), e.what());
  if (auto* pending = dynamic_cast<const ReconstructionPendingError*>(&e)) {
    r.headers["Retry-After"] = std::to_string(pending->retry_after_seconds());
    r.body["error"]["retry_after_seconds"] = pending->retry_after_seconds();
  }
  if (auto* ref = dynamic_cast<const InvalidReferenceError*>(&e)) {
    r.body["error"]["edit_index"] = ref->edit_index();
    r.body["error"]["bad_ids"] = ref->bad_ids();
  }
  return r;
}

ApiResponse Api::handle(const ApiRequest& request) {
  try {
    std::vector<std::string> parts = split_path(request.path);
    if (parts.size() < 2 || parts[0] != "v1" || parts[1] != "sessions") {
      return plain_error(404, "NotFound", fmt::format("no endpoint at {}", request.path));
    }
    if (parts.size() == 2) {
      if (request.method != "POST") {
        return plain_error(405, "MethodNotAllowed", "use POST to create a session");
      }
      return create_session(request);
    }
    return route_session(request, parts);
  } catch (const BadRequest& e) {
    return plain_error(400, "BadRequest", e.what());
  } catch (const Error& e) {
    return error_response(e);
  } catch (const std::exception& e) {
    spdlog::error("{} {} failed: {}", request.method, request.path, e.what());
    return plain_error(500, "InternalError", e.what());
  }
}

ApiResponse Api::create_session(const ApiRequest& request) {
  std::vector<std::string> pngs = request.uploads;
  if (pngs.empty()) {
    json body = parse_body(request, false);
    auto it = body.find("screens");
    if (it == body.end() || !it->is_array()) {
      throw BadRequest("upload screens as multipart files or a JSON array 'screens' of base64 PNGs");
    }
    for (const auto& s : *it) {
      if (!s.is_string()) throw BadRequest("each screen must be a base64 string");
      try {
        pngs.push_back(base64_decode(s.get<std::string>()));
      } catch (const Error&) {
        throw BadImageError("screen is not valid base64");
      }
    }
  }
  CreateResult created = service_.create_session(std::move(pngs));
  Session s = service_.get_session(created.session_id);
  json screens = json::array();
  for (const auto& screen : s.mockup.screens) {
    screens.push_back({{"screen_id", screen.screen_id},
                       {"width", screen.width},
                       {"height", screen.height}});
  }
  if (!created.context) {
    ApiResponse r = plain_error(422, error_code_name(ErrorCode::kAllAbsent),
                                fmt::format("no design context could be extracted; enter it "
                                            "manually with PUT /v1/sessions/{}/context",
                                            created.session_id));
    r.body["session_id"] = created.session_id;
    r.body["screens"] = screens;
    return r;
  }
  return {201,
          {{"session_id", created.session_id},
           {"stage", to_string(s.stage)},
           {"context", to_json(*created.context)},
           {"screens", screens}},
          {}};
}

ApiResponse Api::route_session(const ApiRequest& r, const std::vector<std::string>& parts) {
  const std::string& id = parts[2];
  const std::string& m = r.method;
  auto not_allowed = [&] {
    return plain_error(405, "MethodNotAllowed", fmt::format("{} is not allowed on {}", m, r.path));
  };

  if (parts.size() == 3) {
    if (m != "GET") return not_allowed();
    return {200, session_view(service_.get_session(id)), {}};
  }
  const std::string& leaf = parts[3];
  if (parts.size() == 4) {
    if (leaf == "context") {
      if (m != "PUT") return not_allowed();
      DesignContext ctx = context_from_body(parse_body(r, false));
      return {200, session_view(service_.confirm_context(id, std::move(ctx))), {}};
    }
    if (leaf == "retrieve") {
      if (m != "POST") return not_allowed();
      std::optional<std::size_t> k = query_size(r, {"k", "top_k"});
      if (!k) {
        json body = parse_body(r, true);
        if (auto it = body.find("top_k"); it != body.end()) {
          if (!it->is_number_unsigned() || it->get<std::size_t>() == 0) {
            throw BadRequest("top_k must be a positive integer");
          }
          k = it->get<std::size_t>();
        }
      }
      Session s = service_.run_retrieval_and_clustering(id, k);
      json ranked = json::array();
      for (const auto& p : s.ranked) ranked.push_back(retrieval::to_json(p));
      return {200,
              {{"session_id", id},
               {"stage", to_string(s.stage)},
               {"top_k", s.top_k},
               {"ranked", ranked},
               {"clusters", clusters_json(s.clusters)}},
              {}};
    }
    if (leaf == "translate") {
      if (m != "POST") return not_allowed();
      Session s = service_.run_translation(id);
      return {200,
              {{"session_id", id},
               {"stage", to_string(s.stage)},
               {"clusters", clusters_json(s.clusters)}},
              {}};
    }
    if (leaf == "clusters") {
      if (m != "GET") return not_allowed();
      return {200, {{"session_id", id}, {"clusters", clusters_json(service_.clusters(id))}}, {}};
    }
    if (leaf == "bookmarks") {
      if (m != "GET") return not_allowed();
      json items = json::array();
      for (const auto& item : service_.list_bookmarks(id)) items.push_back(translation::to_json(item));
      return {200, {{"session_id", id}, {"items", items}}, {}};
    }
    if (leaf == "progress") {
      if (m != "GET") return not_allowed();
      json body = to_json(service_.progress(id));
      body["session_id"] = id;
      return {200, body, {}};
    }
  }
  if (parts.size() == 6 && leaf == "clusters" && parts[5] == "sources") {
    if (m != "GET") return not_allowed();
    json papers = json::array();
    for (const auto& g : service_.get_sources(id, parts[4])) papers.push_back(to_json(g));
    return {200, {{"session_id", id}, {"cluster_id", parts[4]}, {"papers", papers}}, {}};
  }
  if (parts.size() == 6 && leaf == "items") {
    const std::string& item_id = parts[4];
    if (parts[5] == "preview") {
      if (m != "GET") return not_allowed();
      json previews = json::array();
      for (const auto& p : service_.get_preview(id, item_id)) previews.push_back(mockup::to_json(p));
      return {200, {{"session_id", id}, {"item_id", item_id}, {"previews", previews}}, {}};
    }
    if (parts[5] == "bookmark") {
      if (m != "POST") return not_allowed();
      bool on = service_.toggle_bookmark(id, item_id);
      return {200, {{"session_id", id}, {"item_id", item_id}, {"bookmarked", on}}, {}};
    }
  }
  return plain_error(404, "NotFound", fmt::format("no endpoint at {}", r.path));
}

}  // namespace refine::service
