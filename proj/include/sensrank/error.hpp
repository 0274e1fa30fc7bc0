#pragma once

#include <stdexcept>
#include <string>

namespace sensrank {

// Pipeline stage a failure originated in. The CLI uses it to tag diagnostics.
enum class Stage { parse, fit, estimate, serialize, usage };

inline const char* to_string(Stage s) {
  switch (s) {
    case Stage::parse: return "parse";
    case Stage::fit: return "fit";
    case Stage::estimate: return "estimate";
    case Stage::serialize: return "serialize";
    case Stage::usage: return "usage";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Stage stage, const std::string& what) : std::runtime_error(what), stage_(stage) {}
  Stage stage() const noexcept { return stage_; }

 private:
  Stage stage_;
};

}  // namespace sensrank
