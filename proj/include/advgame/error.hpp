#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace advgame {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed caller input: dimension mismatch, bad label, value out of range.
class InputError : public Error {
 public:
  using Error::Error;
};

// A documented precondition of an operation does not hold.
class ContractError : public Error {
 public:
  using Error::Error;
};

// A model whose parameters make an operation undefined (e.g. zero weights).
class DegenerateModelError : public Error {
 public:
  using Error::Error;
};

// Region enumeration would exceed the configured cap.
class EnumerationCapError : public Error {
 public:
  EnumerationCapError(std::size_t cap, const std::string& what)
      : Error(what), cap_(cap) {}
  std::size_t cap() const noexcept { return cap_; }

 private:
  std::size_t cap_;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Synthetic data generation could not satisfy its constraints.
class GenerationError : public Error {
 public:
  using Error::Error;
};

}  // namespace advgame
