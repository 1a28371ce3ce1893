#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace reach {

// Error taxonomy mapped onto CLI exit codes: invalid_input -> 1,
// parse/io -> 2, numerical -> 3.

class invalid_input_error : public std::runtime_error {
 public:
  explicit invalid_input_error(const std::string& what) : std::runtime_error(what) {}
};

class parse_error : public std::runtime_error {
 public:
  explicit parse_error(const std::string& what, long line = -1)
      : std::runtime_error(with_line(what, line)), line_(line) {}
  long line() const { return line_; }

 private:
  static std::string with_line(const std::string& what, long line) {
    return line < 0 ? what : what + " (line " + std::to_string(line) + ")";
  }
  long line_;
};

class io_error : public std::runtime_error {
 public:
  explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

// Carries the last simplex basis so a failed solve can be reproduced.
class numerical_error : public std::runtime_error {
 public:
  explicit numerical_error(const std::string& what, std::vector<int> basis = {})
      : std::runtime_error(what), basis_(std::move(basis)) {}
  const std::vector<int>& last_basis() const { return basis_; }

 private:
  std::vector<int> basis_;
};

}  // namespace reach
