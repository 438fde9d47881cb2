#pragma once

#include <stdexcept>
#include <string>

namespace dars {

/// Base class for every error thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Input that could not be parsed at all (files, wire payloads, model output).
struct ParseError : Error {
    using Error::Error;
};

/// Structurally valid input that breaks an invariant. Messages name the
/// offending field or row.
struct ValidationError : Error {
    using Error::Error;
};

/// Guidance extraction failures, one kind per contract violation.
struct GuidanceError : ParseError {
    enum class Kind { NoObject, MissingField, EmptyValue };
    Kind kind;
    GuidanceError(Kind k, const std::string& msg) : ParseError(msg), kind(k) {}
};

/// Score extraction failures.
struct ExtractionError : Error {
    enum class Kind { NoPattern, OutOfRange };
    Kind kind;
    ExtractionError(Kind k, const std::string& msg) : Error(msg), kind(k) {}
};

/// Gateway-side errors. `status` is the HTTP status when one applies, else 0.
struct GatewayError : Error {
    int status;
    explicit GatewayError(const std::string& msg, int status_code = 0)
        : Error(msg), status(status_code) {}
};

/// Credential rejected by the endpoint (401/403). Not retried.
struct AuthError : GatewayError {
    using GatewayError::GatewayError;
};

/// Response arrived but does not follow the chat-completion wire shape.
struct WireFormatError : GatewayError {
    using GatewayError::GatewayError;
};

/// Non-transient transport failure.
struct TransportError : GatewayError {
    using GatewayError::GatewayError;
};

/// Transient failure, retried by the gateway. Backends throw this; callers
/// normally only see TransportExhaustedError.
struct TransientGatewayError : GatewayError {
    using GatewayError::GatewayError;
};

/// All transport retries spent on transient failures.
struct TransportExhaustedError : TransportError {
    int attempts;
    TransportExhaustedError(const std::string& msg, int status_code, int attempts_used)
        : TransportError(msg, status_code), attempts(attempts_used) {}
};

/// Scripted backend has no reply left (or no rule matched the request).
struct ScriptExhaustedError : Error {
    using Error::Error;
};

}  // namespace dars
