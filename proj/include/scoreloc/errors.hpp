#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace scoreloc {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define SCORELOC_DEFINE_ERROR(Name)            \
  class Name : public Error {                  \
   public:                                     \
    using Error::Error;                        \
  };

SCORELOC_DEFINE_ERROR(InvalidDepth)
SCORELOC_DEFINE_ERROR(OutOfBounds)
SCORELOC_DEFINE_ERROR(BehindCamera)
SCORELOC_DEFINE_ERROR(FormatError)
SCORELOC_DEFINE_ERROR(MissingPose)
SCORELOC_DEFINE_ERROR(MissingPrediction)
SCORELOC_DEFINE_ERROR(DegenerateConfiguration)
SCORELOC_DEFINE_ERROR(EmptyOverlap)
SCORELOC_DEFINE_ERROR(AllFailed)
SCORELOC_DEFINE_ERROR(RelocalisationFailed)
SCORELOC_DEFINE_ERROR(ConfigError)

#undef SCORELOC_DEFINE_ERROR

/// Raised when hypothesis generation exhausts its attempt budget without
/// producing a single candidate.
class NoHypotheses : public Error {
 public:
  NoHypotheses(const std::string& what, std::size_t attempts)
      : Error(what), attempts_(attempts) {}
  std::size_t attempts() const { return attempts_; }

 private:
  std::size_t attempts_;
};

}  // namespace scoreloc
