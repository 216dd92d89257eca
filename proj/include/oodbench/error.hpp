#ifndef OODBENCH_ERROR_HPP
#define OODBENCH_ERROR_HPP

#include <stdexcept>
#include <string>

namespace oodbench {

/// Bad input: malformed files, unknown ids, out-of-range parameters.
/// The CLI maps it to exit code 1.
class UserError : public std::runtime_error {
 public:
  explicit UserError(const std::string& what) : std::runtime_error(what) {}
};

class ParseError : public UserError {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : UserError(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A broken internal invariant (a bug or a corrupted fixture). Exit code 2.
class InvariantError : public std::logic_error {
 public:
  explicit InvariantError(const std::string& what) : std::logic_error(what) {}
};

}  // namespace oodbench

#endif  // OODBENCH_ERROR_HPP
