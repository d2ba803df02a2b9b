#pragma once

#include <string>

namespace audioinv::exp {

// Renders a human-readable summary of one or more evaluation runs found
// under `results_dir` (any depth-2 results.json). Throws when nothing is
// found. The returned text is also what the CLI prints.
std::string render_report(const std::string& results_dir);

}  // namespace audioinv::exp
