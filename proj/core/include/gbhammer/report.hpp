#pragma once

#include <string>
#include <utility>
#include <vector>

#include "gbhammer/scenario.hpp"

namespace gbh {

/// Structured report: verdict, metrics, outputs, trace and the echoed
/// effective configuration.
std::string report_json(const RunResult& result);

/// The same facts, one `key: value` line each (keys are JSON paths).
std::string report_text(const RunResult& result);

using Fact = std::pair<std::string, std::string>;
std::vector<Fact> report_facts(const RunResult& result);

/// Short human summary for the terminal: outputs, outcome and verdict.
std::string report_summary(const RunResult& result);

}  // namespace gbh
