#pragma once

#include <stdexcept>
#include <string>

namespace earcanal {

// Base class for all recoverable pipeline errors. Subcommands map these to
// exit code 2 (numerical / data failures) as opposed to configuration errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define EARCANAL_DEFINE_ERROR(Name)                                   \
    class Name : public Error {                                       \
    public:                                                           \
        explicit Name(const std::string& what) : Error(#Name ": " + what) {} \
    }

// geometry
EARCANAL_DEFINE_ERROR(FileNotFound);
EARCANAL_DEFINE_ERROR(ParseError);
EARCANAL_DEFINE_ERROR(IndexOutOfRange);
EARCANAL_DEFINE_ERROR(NonSimpleLoop);
EARCANAL_DEFINE_ERROR(MeshNotClosed);
EARCANAL_DEFINE_ERROR(GridTooSmall);
EARCANAL_DEFINE_ERROR(EmptyLevelSet);
EARCANAL_DEFINE_ERROR(EmptyMesh);
EARCANAL_DEFINE_ERROR(InvalidSpec);
EARCANAL_DEFINE_ERROR(NotTubular);

// registration
EARCANAL_DEFINE_ERROR(EmptyNarrowband);
EARCANAL_DEFINE_ERROR(NoDescent);
EARCANAL_DEFINE_ERROR(Diverged);

// ssm
EARCANAL_DEFINE_ERROR(TooManyCoefficients);

// acoustics
EARCANAL_DEFINE_ERROR(InvalidRange);
EARCANAL_DEFINE_ERROR(OutOfRange);
EARCANAL_DEFINE_ERROR(NoResonance);
EARCANAL_DEFINE_ERROR(GridMismatch);
EARCANAL_DEFINE_ERROR(SingularSystem);

#undef EARCANAL_DEFINE_ERROR

} // namespace earcanal
