#pragma once

#include <stdexcept>
#include <string>

namespace xemap {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define XEMAP_ERROR_TYPE(Name)                                                 \
    class Name : public Error {                                               \
    public:                                                                    \
        using Error::Error;                                                    \
    }

XEMAP_ERROR_TYPE(BadMagic);
XEMAP_ERROR_TYPE(ShapeOverflow);
XEMAP_ERROR_TYPE(NonFiniteValue);
XEMAP_ERROR_TYPE(SchemaError);
XEMAP_ERROR_TYPE(EmptyRegions);
XEMAP_ERROR_TYPE(DimensionMismatch);
XEMAP_ERROR_TYPE(ZeroMass);
XEMAP_ERROR_TYPE(OutOfRange);
XEMAP_ERROR_TYPE(EmptyInput);
XEMAP_ERROR_TYPE(NoGroundTruth);
XEMAP_ERROR_TYPE(QueryCountMismatch);
XEMAP_ERROR_TYPE(InvalidWeights);
XEMAP_ERROR_TYPE(IoError);
XEMAP_ERROR_TYPE(WriteFailure);

#undef XEMAP_ERROR_TYPE

} // namespace xemap
