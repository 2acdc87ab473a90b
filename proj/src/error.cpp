#include "cbir/error.hpp"

namespace cbir {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidArgument: return "invalid_argument";
        case ErrorCode::MissingInput: return "missing_input";
        case ErrorCode::Io: return "io_error";
        case ErrorCode::ParseError: return "parse_error";
        case ErrorCode::ZeroVector: return "zero_vector";
        case ErrorCode::NonFiniteValue: return "non_finite_value";
        case ErrorCode::MissingHash: return "missing_hash";
        case ErrorCode::MissingPatientId: return "missing_patient_id";
        case ErrorCode::DuplicateRecordId: return "duplicate_record_id";
        case ErrorCode::DimensionMismatch: return "dimension_mismatch";
        case ErrorCode::UnknownRecordId: return "unknown_record_id";
        case ErrorCode::UnknownClass: return "unknown_class";
        case ErrorCode::MultiLabelRecord: return "multi_label_record";
        case ErrorCode::CorruptFile: return "corrupt_file";
        case ErrorCode::NormViolation: return "norm_violation";
        case ErrorCode::EmptyIndex: return "empty_index";
        case ErrorCode::InsufficientHits: return "insufficient_hits";
        case ErrorCode::EmptyQuerySet: return "empty_query_set";
        case ErrorCode::KTooLarge: return "k_too_large";
        case ErrorCode::EmptyValidationSet: return "empty_validation_set";
        case ErrorCode::SingleClass: return "single_class";
        case ErrorCode::NonFiniteLoss: return "non_finite_loss";
        case ErrorCode::LengthMismatch: return "length_mismatch";
        case ErrorCode::NoPositives: return "no_positives";
        case ErrorCode::InsufficientQueries: return "insufficient_queries";
    }
    return "unknown";
}

}  // namespace cbir
