#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace refine::provider {

/// A versioned prompt template compiled in from prompts/<stage>.txt.
///
/// File layout: `# key: value` header lines (stage, version, optional schema),
/// a blank line, then the body. `{{name}}` placeholders in the body are
/// substituted at render time.
struct PromptTemplate {
  std::string stage;
  int version = 0;
  std::optional<std::string> schema;  // JSON-Schema-subset hint
  std::string body;

  /// "[refine:<stage>@v<version>]\n" + body with placeholders filled.
  /// Throws PreconditionError on an unfilled placeholder.
  std::string render(const std::map<std::string, std::string>& vars = {}) const;
};

PromptTemplate parse_prompt_template(std::string_view file_contents);

/// Looks up a compiled-in template by stage; throws PreconditionError if absent.
const PromptTemplate& prompt(std::string_view stage);
std::vector<std::string> prompt_stages();

}  // namespace refine::provider
