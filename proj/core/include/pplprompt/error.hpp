#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pplprompt {

enum class ErrorCode {
    // prompt-core
    EmptyInput,
    NoMaskPresent,
    UnknownLabelWord,
    InvalidTemplate,
    InvalidVerbalizer,
    // scoring
    EmptySequence,
    ScorerFailure,
    MultiTokenLabelWord,
    MalformedTable,
    EmptyCorpus,
    // selection
    EmptyPool,
    MissingGoldLabels,
    GeneratorUnavailable,
    AllGenerationsInvalid,
    // diagnostics
    NotBinaryVerbalizer,
    UnlabeledExample,
    // datasets
    ParseError,
    DuplicateName,
    InsufficientExamples,
    // harness
    ConfigError,
    IoError,
    // bridge
    Transport,
    Protocol,
    ModelError,
};

/// Stable snake_case name used in machine-parsable error lines.
std::string_view error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// True for errors raised while talking to a model (local or remote).
bool is_scorer_error(ErrorCode code) noexcept;

}  // namespace pplprompt
