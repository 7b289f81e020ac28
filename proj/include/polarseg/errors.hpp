#ifndef POLARSEG_ERRORS_HPP
#define POLARSEG_ERRORS_HPP

#include <cstdint>
#include <stdexcept>
#include <string>

namespace polarseg {

/// Violated precondition or broken invariant, reported to the caller.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Malformed input bytes (NIfTI volumes, PGM files, model files). Carries the
/// offending byte offset and field name when known.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, std::string field = {},
             std::int64_t offset = -1)
      : std::runtime_error(compose(message, field, offset)),
        field_(std::move(field)),
        offset_(offset) {}

  const std::string& field() const noexcept { return field_; }
  std::int64_t offset() const noexcept { return offset_; }

 private:
  static std::string compose(const std::string& message,
                             const std::string& field, std::int64_t offset) {
    std::string out = message;
    if (!field.empty()) out += " (field " + field;
    if (offset >= 0)
      out += (field.empty() ? " (offset " : ", offset ") + std::to_string(offset);
    if (!field.empty() || offset >= 0) out += ")";
    return out;
  }

  std::string field_;
  std::int64_t offset_;
};

/// Run configuration that cannot be honored (bad flag value, model/pipeline
/// shape mismatch, missing backend).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Filesystem-level failure; the message names the path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A segmentation backend misbehaved (NaN output, unsupported operator,
/// missing ground truth for an oracle request).
class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace polarseg

#endif  // POLARSEG_ERRORS_HPP
