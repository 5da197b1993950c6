#pragma once

#include <stdexcept>
#include <string>

namespace rubricrl {

// Exit-code mapping lives in the CLI: DataError/ConfigError -> 1,
// BackendError -> 2, InvariantError -> 3.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct BackendError : Error {
    using Error::Error;
};

// Transient transport failure, eligible for retry.
struct TransportError : BackendError {
    using BackendError::BackendError;
};

struct InvariantError : Error {
    using Error::Error;
};

}  // namespace rubricrl
