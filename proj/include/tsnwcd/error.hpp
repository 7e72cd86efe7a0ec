#pragma once

#include <stdexcept>
#include <string>

namespace tsnwcd {

// Base for every domain failure (bad input files, unstable ports, ...).
// The CLI maps these to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(std::string source, int line, std::string field, const std::string& message)
      : Error(format(source, line, field, message)),
        source_(std::move(source)),
        line_(line),
        field_(std::move(field)),
        message_(message) {}

  const std::string& source() const { return source_; }
  int line() const { return line_; }
  const std::string& field() const { return field_; }
  const std::string& message() const { return message_; }

 private:
  static std::string format(const std::string& source, int line, const std::string& field,
                            const std::string& message) {
    std::string out = source;
    if (line > 0) out += ":" + std::to_string(line);
    if (!field.empty()) out += " [" + field + "]";
    return out + ": " + message;
  }

  std::string source_;
  int line_;
  std::string field_;
  std::string message_;
};

}  // namespace tsnwcd
