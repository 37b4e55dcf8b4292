#pragma once

#include <stdexcept>
#include <string>

namespace fairtext {

// Bad inputs: malformed files, out-of-range config, contract violations the
// caller can fix. The CLI maps these to exit code 1.
class ValidationError : public std::runtime_error {
  public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Failures during an otherwise valid run (divergence, I/O loss). Exit code 2.
class RuntimeFailure : public std::runtime_error {
  public:
    explicit RuntimeFailure(const std::string& what) : std::runtime_error(what) {}
};

class OovError : public ValidationError {
  public:
    explicit OovError(const std::string& token)
        : ValidationError("token not in embedding vocabulary: '" + token + "'"),
          token_(token) {}
    const std::string& token() const { return token_; }

  private:
    std::string token_;
};

}  // namespace fairtext
