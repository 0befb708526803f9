// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace mpvqa {

/// Failure classes map onto CLI exit codes: config 2, data 3, numeric 4.
enum class ErrorClass { config = 2, data = 3, numeric = 4 };

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, const std::string& what) : std::runtime_error(what), cls_(cls) {}
  ErrorClass error_class() const noexcept { return cls_; }

 private:
  ErrorClass cls_;
};

#define MPVQA_DEFINE_ERROR(Name, Class)                                         \
  class Name : public Error {                                                   \
   public:                                                                      \
    explicit Name(const std::string& what) : Error(ErrorClass::Class, what) {} \
  };

MPVQA_DEFINE_ERROR(ConfigError, config)
MPVQA_DEFINE_ERROR(FormatError, data)
MPVQA_DEFINE_ERROR(UnsupportedDatatypeError, data)
MPVQA_DEFINE_ERROR(LengthMismatchError, data)
MPVQA_DEFINE_ERROR(CapacityError, data)
MPVQA_DEFINE_ERROR(GeometryError, data)
MPVQA_DEFINE_ERROR(EmptyMeshError, data)
MPVQA_DEFINE_ERROR(DegenerateHullError, numeric)
MPVQA_DEFINE_ERROR(TemplateError, data)
MPVQA_DEFINE_ERROR(BankCapacityError, data)
MPVQA_DEFINE_ERROR(ShapeError, numeric)
MPVQA_DEFINE_ERROR(TrainingError, numeric)
MPVQA_DEFINE_ERROR(UndefinedMetricError, numeric)

#undef MPVQA_DEFINE_ERROR

}  // namespace mpvqa
