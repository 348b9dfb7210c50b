#pragma once

#include <stdexcept>
#include <string>

namespace legodom {

/// Library error. `kind` is a short machine-readable tag (e.g. "config",
/// "workspace", "io") and `field` optionally names the offending input.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message, std::string field = {})
      : std::runtime_error(message), kind_(std::move(kind)), field_(std::move(field)) {}

  const std::string& kind() const noexcept { return kind_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::string kind_;
  std::string field_;
};

}  // namespace legodom
