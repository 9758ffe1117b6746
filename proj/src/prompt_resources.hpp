#pragma once

#include <string_view>

namespace cup::resources {

// Template text compiled in from resources/prompts/<version>/<name>.txt.
// Throws Error(kInternal) for unknown names.
std::string_view prompt_template(std::string_view name);

}  // namespace cup::resources
