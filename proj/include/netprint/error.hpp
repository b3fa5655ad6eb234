#pragma once

#include <stdexcept>
#include <string>

namespace netprint {

/// Base for recoverable errors reported to the operator.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input does not match the expected file or record layout.
class FormatError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Caller broke a precondition (empty dataset, bad parameter, unknown label).
class ContractError : public Error {
public:
    using Error::Error;
};

}  // namespace netprint
