#pragma once

#include <stdexcept>
#include <string>

namespace l2h {

// Base of every error the library throws. name() is the stable identifier the
// CLI reports on failure.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* name() const noexcept { return "Error"; }
};

#define L2H_DEFINE_ERROR(Name)                                    \
  class Name : public Error {                                     \
   public:                                                        \
    using Error::Error;                                           \
    const char* name() const noexcept override { return #Name; }  \
  }

L2H_DEFINE_ERROR(FormatError);
L2H_DEFINE_ERROR(ShapeError);
L2H_DEFINE_ERROR(ConfigError);
L2H_DEFINE_ERROR(AlignmentError);
L2H_DEFINE_ERROR(StateError);
L2H_DEFINE_ERROR(EmptyMatrixError);
L2H_DEFINE_ERROR(IoError);

#undef L2H_DEFINE_ERROR

class UnknownClassError : public Error {
 public:
  explicit UnknownClassError(int value)
      : Error("unknown class value " + std::to_string(value)), value_(value) {}
  const char* name() const noexcept override { return "UnknownClassError"; }
  int value() const noexcept { return value_; }

 private:
  int value_;
};

}  // namespace l2h
