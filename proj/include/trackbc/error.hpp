#pragma once

#include <stdexcept>
#include <string>

namespace trackbc {

// Base for every error raised by the library. Subclasses only exist so that
// callers (and tests) can tell the failure classes apart.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class AlignmentError : public Error {
 public:
  using Error::Error;
};

class BoundaryError : public Error {
 public:
  using Error::Error;
};

class JunctionError : public Error {
 public:
  JunctionError(std::size_t junction, const std::string& what)
      : Error(what), junction_(junction) {}
  std::size_t junction() const { return junction_; }

 private:
  std::size_t junction_;
};

class SizeError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace trackbc
