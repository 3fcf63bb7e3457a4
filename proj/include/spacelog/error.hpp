#pragma once

#include <stdexcept>
#include <string>

namespace spacelog {

// Base for every error thrown by the library. Callers that only want to
// report a diagnostic can catch this one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed scenario/model/surrogate document. `path()` is a JSON-pointer-like
// field path ("arcs[2].tof_days") or "line N" for syntax errors.
class ParseError : public Error {
 public:
  ParseError(std::string path, const std::string& what)
      : Error(path.empty() ? what : path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

// A cross reference (node, commodity, vehicle id) does not resolve.
class ReferenceError : public Error {
 public:
  ReferenceError(std::string id, const std::string& what)
      : Error(what), id_(std::move(id)) {}
  const std::string& id() const noexcept { return id_; }

 private:
  std::string id_;
};

// Value outside the domain of an operation (negative delta-v, lower > upper, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace spacelog
