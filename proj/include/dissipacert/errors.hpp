#pragma once

#include <stdexcept>
#include <string>

namespace dissipacert {

// Root of every error raised by the library. Each subclass maps to a
// distinct CLI exit code (see cli.hpp).
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

// Malformed input: dimension mismatch, bad tolerances, ill-formed problem.
class SpecError : public Error
{
public:
    using Error::Error;
};

// Unreadable or malformed input file.
class ParseError : public SpecError
{
public:
    using SpecError::SpecError;
};

// Eigen- or singular-value decomposition did not converge, or a
// constructive search ran out of budget.
class NumericalError : public Error
{
public:
    using Error::Error;
};

// A block that has to be inverted is singular.
class SingularBlock : public Error
{
public:
    using Error::Error;
};

// Supply-rate matrix S is singular, so the dual supply rate is undefined.
class SingularSupply : public Error
{
public:
    using Error::Error;
};

// A standing assumption (inertia of S, boundedness of the noise set) fails.
class AssumptionError : public Error
{
public:
    using Error::Error;
};

// The operation's hypothesis does not hold for this input (e.g. no Slater
// point, or a rank-based construction requested on full-rank data).
class NotApplicable : public Error
{
public:
    using Error::Error;
};

// No linear system explains the data under the claimed noise model.
class DataInconsistent : public Error
{
public:
    using Error::Error;
};

// Accept-reject sampling found too few members of the target set.
class SamplingStarved : public Error
{
public:
    using Error::Error;
};

} // namespace dissipacert
