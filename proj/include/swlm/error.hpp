#pragma once

#include <stdexcept>
#include <string>

namespace swlm {

// Every failure surfaced by the library derives from Error. The CLI maps the
// three subclasses onto its exit codes (usage 1, data 2, numeric 3).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace swlm
