#pragma once

#include <stdexcept>
#include <string>

namespace hbma {

/// Base class for every error raised by the library. Messages are prefixed
/// with the module that raised them ("regression: ...").
class Error : public std::runtime_error {
 public:
  enum class Category { input, numerical };

  Error(Category category, const std::string& module, const std::string& what)
      : std::runtime_error(module + ": " + what), category_(category) {}

  Category category() const noexcept { return category_; }

 private:
  Category category_;
};

/// Malformed or out-of-contract inputs.
class InputError : public Error {
 public:
  InputError(const std::string& module, const std::string& what)
      : Error(Category::input, module, what) {}
};

/// Band grids that cannot be reconciled.
class AlignmentError : public Error {
 public:
  AlignmentError(const std::string& module, const std::string& what)
      : Error(Category::input, module, what) {}
};

class BoundsError : public Error {
 public:
  BoundsError(const std::string& module, const std::string& what)
      : Error(Category::input, module, what) {}
};

/// File-format errors; the message names the offending key or line.
class ParseError : public Error {
 public:
  ParseError(const std::string& module, const std::string& what)
      : Error(Category::input, module, what) {}
};

class NumericalError : public Error {
 public:
  NumericalError(const std::string& module, const std::string& what)
      : Error(Category::numerical, module, what) {}
};

class SearchError : public Error {
 public:
  SearchError(const std::string& module, const std::string& what)
      : Error(Category::numerical, module, what) {}
};

}  // namespace hbma
