#ifndef COSSERAT_ERROR_HPP
#define COSSERAT_ERROR_HPP

#include <stdexcept>
#include <string>

namespace cosserat {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input outside the mathematical domain of an operation (zero quaternion,
/// orientation-reversing deformation gradient, non-rotation matrix).
class DomainError : public Error {
public:
    using Error::Error;
};

/// A documented precondition was violated by the caller.
class ContractViolation : public Error {
public:
    using Error::Error;
};

class ConfigurationError : public Error {
public:
    using Error::Error;
};

class IndexError : public Error {
public:
    using Error::Error;
};

/// Vector length or layout mismatch.
class StructuralError : public Error {
public:
    using Error::Error;
};

/// Energy or gradient evaluated on non-finite field values.
class EvaluationError : public Error {
public:
    using Error::Error;
};

class PreconditionerError : public Error {
public:
    using Error::Error;
};

class LineSearchError : public Error {
public:
    using Error::Error;
};

class BoundaryConditionError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(int line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line)
    {
    }

    int line() const noexcept { return line_; }

private:
    int line_;
};

} // namespace cosserat

#endif
