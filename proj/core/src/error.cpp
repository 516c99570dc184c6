#include "pplprompt/error.hpp"

namespace pplprompt {

std::string_view error_code_name(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::EmptyInput: return "empty_input";
        case ErrorCode::NoMaskPresent: return "no_mask_present";
        case ErrorCode::UnknownLabelWord: return "unknown_label_word";
        case ErrorCode::InvalidTemplate: return "invalid_template";
        case ErrorCode::InvalidVerbalizer: return "invalid_verbalizer";
        case ErrorCode::EmptySequence: return "empty_sequence";
        case ErrorCode::ScorerFailure: return "scorer_failure";
        case ErrorCode::MultiTokenLabelWord: return "multi_token_label_word";
        case ErrorCode::MalformedTable: return "malformed_table";
        case ErrorCode::EmptyCorpus: return "empty_corpus";
        case ErrorCode::EmptyPool: return "empty_pool";
        case ErrorCode::MissingGoldLabels: return "missing_gold_labels";
        case ErrorCode::GeneratorUnavailable: return "generator_unavailable";
        case ErrorCode::AllGenerationsInvalid: return "all_generations_invalid";
        case ErrorCode::NotBinaryVerbalizer: return "not_binary_verbalizer";
        case ErrorCode::UnlabeledExample: return "unlabeled_example";
        case ErrorCode::ParseError: return "parse_error";
        case ErrorCode::DuplicateName: return "duplicate_name";
        case ErrorCode::InsufficientExamples: return "insufficient_examples";
        case ErrorCode::ConfigError: return "config_error";
        case ErrorCode::IoError: return "io_error";
        case ErrorCode::Transport: return "transport";
        case ErrorCode::Protocol: return "protocol";
        case ErrorCode::ModelError: return "model_error";
    }
    return "unknown";
}

bool is_scorer_error(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::ScorerFailure:
        case ErrorCode::Transport:
        case ErrorCode::Protocol:
        case ErrorCode::ModelError:
            return true;
        default:
            return false;
    }
}

}  // namespace pplprompt
