#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pplprompt/prompt.hpp"
#include "pplprompt/scorer.hpp"

namespace pplprompt {

/// Per-token NLL is clamped to [0, kMaxTokenNll] before averaging.
inline constexpr double kMaxTokenNll = 50.0;

struct PseudoPerplexity {
    double value = 1.0;
    std::size_t token_count = 0;
    /// Clamped NLL per token, in nats.
    std::vector<double> per_token_nll;
    /// Positions whose raw NLL fell outside [0, kMaxTokenNll].
    std::size_t clamp_events = 0;
};

/// exp of the mean clamped NLL of already-scored token log-probabilities.
/// Throws EmptySequence for an empty vector and ScorerFailure for NaN input.
PseudoPerplexity perplexity_from_logprobs(std::span<const double> logprobs);

/// Masks every position in turn and returns exp(-(1/t) * sum log p(x_i | c)).
PseudoPerplexity pseudo_perplexity(std::string_view text, const MaskedTokenScorer& scorer);

struct LabelWordPerplexity {
    std::string label_word;
    PseudoPerplexity perplexity;
};

struct PromptPerplexity {
    /// Arithmetic mean of the per-word perplexity values.
    double mean = 0.0;
    /// In verbalizer order.
    std::vector<LabelWordPerplexity> per_word;

    std::size_t clamp_events() const noexcept;
};

/// Throws MultiTokenLabelWord unless every label word is one scorer token.
void require_single_token_label_words(const Verbalizer& verbalizer, const MaskedTokenScorer& scorer);

/// Fills the template's mask with each label word and averages the resulting
/// pseudo-perplexities.
PromptPerplexity prompt_perplexity(std::string_view input, const Template& tmpl,
                                   const Verbalizer& verbalizer, const MaskedTokenScorer& scorer);

/// Mask-position log-probabilities restricted to the verbalizer's label words.
std::map<std::string, double> mask_fill_logprobs(std::string_view input, const Template& tmpl,
                                                 const Verbalizer& verbalizer,
                                                 const MaskedTokenScorer& scorer);

}  // namespace pplprompt
