#pragma once

#include <stdexcept>
#include <string>

namespace ngd {

// Base class for every domain error raised by the library. The CLI maps
// these to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define NGD_DEFINE_ERROR(Name)              \
  class Name : public Error {               \
   public:                                  \
    using Error::Error;                     \
  }

NGD_DEFINE_ERROR(ShapeMismatch);
NGD_DEFINE_ERROR(NonFiniteValue);
NGD_DEFINE_ERROR(EmptySequence);
NGD_DEFINE_ERROR(ParseError);
NGD_DEFINE_ERROR(EmptyCorpus);
NGD_DEFINE_ERROR(UnknownId);
NGD_DEFINE_ERROR(SelfRelation);
NGD_DEFINE_ERROR(NothingHeld);
NGD_DEFINE_ERROR(UnknownCategory);
NGD_DEFINE_ERROR(GenerationFailure);
NGD_DEFINE_ERROR(InsufficientData);
NGD_DEFINE_ERROR(IoError);
NGD_DEFINE_ERROR(FormatError);
NGD_DEFINE_ERROR(EmptyPairSet);
NGD_DEFINE_ERROR(NoParseableSegments);
NGD_DEFINE_ERROR(NoPlausiblePlacement);
NGD_DEFINE_ERROR(NoGoal);
NGD_DEFINE_ERROR(MissingDetector);
NGD_DEFINE_ERROR(KindMismatch);
NGD_DEFINE_ERROR(ConfigError);
NGD_DEFINE_ERROR(NoInstruction);

#undef NGD_DEFINE_ERROR

}  // namespace ngd
