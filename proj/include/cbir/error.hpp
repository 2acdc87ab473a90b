#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace cbir {

/// Machine-readable failure categories shared by every module and surfaced
/// by the CLI as `error.code`.
enum class ErrorCode {
    InvalidArgument,
    MissingInput,
    Io,
    ParseError,
    ZeroVector,
    NonFiniteValue,
    MissingHash,
    MissingPatientId,
    DuplicateRecordId,
    DimensionMismatch,
    UnknownRecordId,
    UnknownClass,
    MultiLabelRecord,
    CorruptFile,
    NormViolation,
    EmptyIndex,
    InsufficientHits,
    EmptyQuerySet,
    KTooLarge,
    EmptyValidationSet,
    SingleClass,
    NonFiniteLoss,
    LengthMismatch,
    NoPositives,
    InsufficientQueries,
};

/// snake_case name used in error records, e.g. "zero_vector".
std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message,
          std::optional<std::uint64_t> record_id = std::nullopt)
        : std::runtime_error(message), code_(code), record_id_(record_id) {}

    ErrorCode code() const noexcept { return code_; }

    /// Offending record (query, embedding row) when one is known.
    std::optional<std::uint64_t> record_id() const noexcept { return record_id_; }

private:
    ErrorCode code_;
    std::optional<std::uint64_t> record_id_;
};

}  // namespace cbir
