#ifndef PECM_ERRORS_HPP
#define PECM_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace pecm {

/// Base class for every error raised by the engine. Catch this to handle
/// any domain failure; catch a subclass to react to a specific one.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// A vector with zero norm reached a similarity computation. Signals
/// degenerate prototype input (or a degenerate weight/prototype combination).
class ZeroNormVector : public Error {
public:
    using Error::Error;
};

/// Two embeddings (or files) disagree on dimension d.
class DimensionMismatch : public Error {
public:
    using Error::Error;
};

/// Two prototype sets (or a similarity/weight pair) disagree on K.
class MismatchedK : public Error {
public:
    using Error::Error;
};

/// Requested prototype count K is below the minimum of 2.
class InvalidK : public Error {
public:
    using Error::Error;
};

/// Recall was asked for with an empty relevant set.
class EmptyRelevance : public Error {
public:
    using Error::Error;
};

/// Macro aggregation was requested but class labels are missing.
class MissingLabels : public Error {
public:
    using Error::Error;
};

/// A training step produced a NaN/Inf loss, gradient, or parameter.
class NonFiniteLoss : public Error {
public:
    using Error::Error;
};

/// Embedding file does not start with the expected magic bytes.
class BadMagic : public Error {
public:
    using Error::Error;
};

/// Embedding file carries an unsupported format version.
class VersionMismatch : public Error {
public:
    using Error::Error;
};

/// Pairing references an item id that does not exist in the corpus.
class DanglingPairing : public Error {
public:
    using Error::Error;
};

/// An image id is claimed by more than one report.
class PairingConflict : public Error {
public:
    using Error::Error;
};

/// Malformed or truncated input; the message carries the offending
/// byte offset or line number.
class ParseError : public Error {
public:
    using Error::Error;
};

/// Weight checkpoint K does not match the corpus K.
class KMismatch : public Error {
public:
    using Error::Error;
};

/// Synthetic corpus specification violates its own invariants.
class InvalidSpec : public Error {
public:
    using Error::Error;
};

} // namespace pecm

#endif // PECM_ERRORS_HPP
