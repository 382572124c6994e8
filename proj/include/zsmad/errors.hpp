#pragma once

#include <stdexcept>
#include <string>

namespace zsmad {

// Base of every error the engine raises on bad input or failed inference.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define ZSMAD_ERROR(Name)                  \
    class Name : public Error {            \
    public:                                \
        using Error::Error;                \
    }

ZSMAD_ERROR(ParseError);
ZSMAD_ERROR(SchemaError);
ZSMAD_ERROR(ConstraintError);
ZSMAD_ERROR(DecodeError);
ZSMAD_ERROR(VocabError);
ZSMAD_ERROR(BundleError);
ZSMAD_ERROR(InferenceError);
ZSMAD_ERROR(DegenerateError);
ZSMAD_ERROR(EmptyReferenceError);
ZSMAD_ERROR(SingularFitError);
ZSMAD_ERROR(IoError);

#undef ZSMAD_ERROR

}  // namespace zsmad
