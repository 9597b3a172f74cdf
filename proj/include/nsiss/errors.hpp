#pragma once

#include <stdexcept>
#include <string>

namespace nsiss {

/// Base class for all toolkit errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define NSISS_DEFINE_ERROR(Name)  \
  struct Name : Error {           \
    using Error::Error;           \
  }

NSISS_DEFINE_ERROR(NegativeArgument);
NSISS_DEFINE_ERROR(OutOfRange);
NSISS_DEFINE_ERROR(NotInvertible);
NSISS_DEFINE_ERROR(TagMismatch);
NSISS_DEFINE_ERROR(NonPositiveIntegrand);
NSISS_DEFINE_ERROR(EmptyGrid);
NSISS_DEFINE_ERROR(SmallGainViolated);
NSISS_DEFINE_ERROR(ConstructionFailed);
NSISS_DEFINE_ERROR(NoRegionContains);
NSISS_DEFINE_ERROR(NoCrossingFound);
NSISS_DEFINE_ERROR(DegenerateNormal);
NSISS_DEFINE_ERROR(StepSizeUnderflow);
NSISS_DEFINE_ERROR(DimensionMismatch);
NSISS_DEFINE_ERROR(PartitionMismatch);
NSISS_DEFINE_ERROR(UnverifiedDesign);
NSISS_DEFINE_ERROR(ParameterOrder);
NSISS_DEFINE_ERROR(RatioUnbounded);
NSISS_DEFINE_ERROR(NotSymmetric);
NSISS_DEFINE_ERROR(SchemaError);
NSISS_DEFINE_ERROR(IoError);

#undef NSISS_DEFINE_ERROR

}  // namespace nsiss
