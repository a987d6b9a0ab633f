#pragma once

#include <stdexcept>
#include <string>

namespace tocseg {

// Error vocabulary shared across the library. Codes are stable strings so
// callers (and the CLI) can branch on them without string matching what().
enum class Errc {
    // structural
    InvalidToc,
    IndexOutOfRange,
    LevelOutOfRange,
    // parsing / io
    ParseError,
    InvariantViolation,
    Unparseable,
    AllEntriesInvalid,
    IoError,
    ConfigError,
    // metrics
    LengthMismatch,
    InvalidWindow,
    DimensionConflict,
    // ingestion
    EmptyIntervals,
    UnmappableInterval,
    MissingSpeakerId,
    TooFewSpeakers,
    // llm pipeline
    BudgetExceeded,
    NetworkError,
    AuthError,
    Timeout,
    RateLimited,
    GenerationFailed,
    EmptyOutput,
    ProviderFailed,
    // evaluation
    EmptyInput,
    TooFewFolds,
    MissingHypothesis,
};

inline const char* errc_name(Errc c) {
    switch (c) {
        case Errc::InvalidToc: return "invalid-toc";
        case Errc::IndexOutOfRange: return "index-out-of-range";
        case Errc::LevelOutOfRange: return "level-out-of-range";
        case Errc::ParseError: return "parse-error";
        case Errc::InvariantViolation: return "invariant-violation";
        case Errc::Unparseable: return "unparseable";
        case Errc::AllEntriesInvalid: return "all-entries-invalid";
        case Errc::IoError: return "io-error";
        case Errc::ConfigError: return "config-error";
        case Errc::LengthMismatch: return "length-mismatch";
        case Errc::InvalidWindow: return "invalid-window";
        case Errc::DimensionConflict: return "dimension-conflict";
        case Errc::EmptyIntervals: return "empty-intervals";
        case Errc::UnmappableInterval: return "unmappable-interval";
        case Errc::MissingSpeakerId: return "missing-speaker-id";
        case Errc::TooFewSpeakers: return "too-few-speakers";
        case Errc::BudgetExceeded: return "budget-exceeded";
        case Errc::NetworkError: return "network-error";
        case Errc::AuthError: return "auth-error";
        case Errc::Timeout: return "timeout";
        case Errc::RateLimited: return "rate-limited";
        case Errc::GenerationFailed: return "generation-failed";
        case Errc::EmptyOutput: return "empty-output";
        case Errc::ProviderFailed: return "provider-failed";
        case Errc::EmptyInput: return "empty-input";
        case Errc::TooFewFolds: return "too-few-folds";
        case Errc::MissingHypothesis: return "missing-hypothesis";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& msg)
        : std::runtime_error(std::string(errc_name(code)) + ": " + msg), code_(code) {}

    Errc code() const { return code_; }

private:
    Errc code_;
};

} // namespace tocseg
