#pragma once

#include <stdexcept>
#include <string>

namespace vtc {

// Base class for every error raised by this library. Each concrete type names
// the contract that was violated; the message carries the offending values.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define VTC_DEFINE_ERROR(NAME)              \
  struct NAME : Error {                     \
    using Error::Error;                     \
  }

// vector / matrix contracts
VTC_DEFINE_ERROR(DimensionMismatch);
VTC_DEFINE_ERROR(ShapeMismatch);
VTC_DEFINE_ERROR(ZeroVector);
VTC_DEFINE_ERROR(EmptyInput);
VTC_DEFINE_ERROR(EmptyClassSet);
VTC_DEFINE_ERROR(NonFiniteInput);
VTC_DEFINE_ERROR(NonFiniteActivation);
VTC_DEFINE_ERROR(NonFiniteLoss);

// model / config contracts
VTC_DEFINE_ERROR(ConfigInvalid);
VTC_DEFINE_ERROR(UnknownToken);
VTC_DEFINE_ERROR(EmptySequence);
VTC_DEFINE_ERROR(InsufficientData);

// registry contracts
VTC_DEFINE_ERROR(ParseError);
VTC_DEFINE_ERROR(UnknownSubset);
VTC_DEFINE_ERROR(AssetMissing);
VTC_DEFINE_ERROR(UnknownComponent);
VTC_DEFINE_ERROR(DuplicateName);

// evaluation contracts
VTC_DEFINE_ERROR(LabelOutOfRange);
VTC_DEFINE_ERROR(InvalidProbability);
VTC_DEFINE_ERROR(MissingMetadata);
VTC_DEFINE_ERROR(ClassNotInRegistry);
VTC_DEFINE_ERROR(UnknownScheme);
VTC_DEFINE_ERROR(DegenerateRange);

// storage contracts
VTC_DEFINE_ERROR(IoError);
VTC_DEFINE_ERROR(SchemaMismatch);
VTC_DEFINE_ERROR(CorruptPayload);
VTC_DEFINE_ERROR(DuplicateId);
VTC_DEFINE_ERROR(UnresolvedSource);
VTC_DEFINE_ERROR(EmptyVideo);

#undef VTC_DEFINE_ERROR

}  // namespace vtc
