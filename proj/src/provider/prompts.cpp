#include "refine/provider/prompts.h"

#include <mutex>

#include <fmt/format.h>

#include "refine/common/encoding.h"
#include "refine/common/error.h"

namespace refine::provider {

// Generated at configure time from prompts/*.txt.
extern const std::map<std::string_view, std::string_view>& embedded_prompt_files();

PromptTemplate parse_prompt_template(std::string_view contents) {
  PromptTemplate t;
  std::size_t pos = 0;
  while (pos < contents.size() && contents[pos] == '#') {
    std::size_t eol = contents.find('\n', pos);
    if (eol == std::string_view::npos) eol = contents.size();
    std::string_view line = contents.substr(pos + 1, eol - pos - 1);
    auto colon = line.find(':');
    if (colon != std::string_view::npos) {
      std::string key = trim(line.substr(0, colon));
      std::string value = trim(line.substr(colon + 1));
      if (key == "stage") t.stage = value;
      else if (key == "version") t.version = std::stoi(value);
      else if (key == "schema") t.schema = value;
    }
    pos = eol + 1;
  }
  while (pos < contents.size() && contents[pos] == '\n') ++pos;
  t.body = std::string(contents.substr(std::min(pos, contents.size())));
  while (!t.body.empty() && t.body.back() == '\n') t.body.pop_back();
  if (t.stage.empty() || t.version <= 0) {
    throw PreconditionError("prompt template lacks stage/version header");
  }
  return t;
}

std::string PromptTemplate::render(const std::map<std::string, std::string>& vars) const {
  std::string out = fmt::format("[refine:{}@v{}]\n", stage, version);
  std::size_t pos = 0;
  while (true) {
    std::size_t open = body.find("{{", pos);
    if (open == std::string::npos) break;
    std::size_t close = body.find("}}", open + 2);
    if (close == std::string::npos) break;
    out.append(body, pos, open - pos);
    std::string name = body.substr(open + 2, close - open - 2);
    auto it = vars.find(name);
    if (it == vars.end()) {
      throw PreconditionError(fmt::format("prompt '{}' needs a value for {{{{{}}}}}", stage, name));
    }
    out += it->second;
    pos = close + 2;
  }
  out.append(body, pos);
  return out;
}

namespace {

const std::map<std::string, PromptTemplate, std::less<>>& registry() {
  static const auto* templates = [] {
    auto* m = new std::map<std::string, PromptTemplate, std::less<>>();
    for (const auto& [name, contents] : embedded_prompt_files()) {
      PromptTemplate t = parse_prompt_template(contents);
      m->emplace(t.stage, std::move(t));
    }
    return m;
  }();
  return *templates;
}

}  // namespace

const PromptTemplate& prompt(std::string_view stage) {
  const auto& reg = registry();
  auto it = reg.find(stage);
  if (it == reg.end()) throw PreconditionError(fmt::format("no prompt template for '{}'", stage));
  return it->second;
}

std::vector<std::string> prompt_stages() {
  std::vector<std::string> out;
  for (const auto& [stage, t] : registry()) out.push_back(stage);
  return out;
}

}  // namespace refine::provider
