#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace gbh {

using TraceFields = std::vector<std::pair<std::string, std::string>>;

/// Receiver for model events; the scenario engine stamps them with tick and
/// actor and turns them into trace lines.
class TraceSink {
 public:
  virtual ~TraceSink() = default;
  virtual void emit(std::string_view event, TraceFields fields) = 0;
};

}  // namespace gbh
