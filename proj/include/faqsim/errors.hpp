#pragma once

#include <stdexcept>
#include <string>

namespace faqsim {

// Base of every error the library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define FAQSIM_DEFINE_ERROR(Name)                      \
    class Name : public Error {                        \
    public:                                            \
        using Error::Error;                            \
    };

FAQSIM_DEFINE_ERROR(RangeError)     // value outside the representable range
FAQSIM_DEFINE_ERROR(ShapeError)     // tensor shapes do not compose
FAQSIM_DEFINE_ERROR(IndexError)     // coordinate or table index out of bounds
FAQSIM_DEFINE_ERROR(CapacityError)  // request too large to materialise
FAQSIM_DEFINE_ERROR(ConfigError)    // inputs disagree with each other
FAQSIM_DEFINE_ERROR(KindError)      // unsupported layer kind or architecture
FAQSIM_DEFINE_ERROR(FormatError)    // malformed or corrupted file
FAQSIM_DEFINE_ERROR(InputError)     // invalid data set or argument value
FAQSIM_DEFINE_ERROR(UsageError)     // invalid command-line or config usage

#undef FAQSIM_DEFINE_ERROR

}  // namespace faqsim
