#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rae {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed or invariant-violating input (exit code 1 at the CLI).
class InputError : public Error {
public:
    using Error::Error;
};

class ValidationError : public InputError {
public:
    using InputError::InputError;
};

class ParseError : public InputError {
public:
    using InputError::InputError;
};

// Two edits on the same (head, relation) with different new tails.
class ConflictError : public InputError {
public:
    using InputError::InputError;
};

// Broken tail-to-head linkage in a fact chain.
class ChainError : public InputError {
public:
    ChainError(const std::string& what, std::size_t index)
        : InputError(what), index_(index) {}
    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

class PreconditionError : public InputError {
public:
    using InputError::InputError;
};

class RetrievalError : public InputError {
public:
    using InputError::InputError;
};

// The exhaustive oracle refused to enumerate past its path bound.
class OracleError : public InputError {
public:
    using InputError::InputError;
};

// Scoring / generation backend failures (exit code 2 at the CLI).
class BackendError : public Error {
public:
    using Error::Error;
};

// A single transport failure; callers may retry.
class TransportError : public BackendError {
public:
    using BackendError::BackendError;
};

// Transport failures persisted through every retry.
class ConnectionError : public BackendError {
public:
    using BackendError::BackendError;
};

class ProtocolError : public BackendError {
public:
    using BackendError::BackendError;
};

class CredentialError : public BackendError {
public:
    using BackendError::BackendError;
};

}  // namespace rae
