#include "pplprompt/perplexity.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "pplprompt/error.hpp"

namespace pplprompt {

std::vector<std::string> whitespace_tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        const auto start = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i > start) tokens.emplace_back(text.substr(start, i - start));
    }
    return tokens;
}

PseudoPerplexity perplexity_from_logprobs(std::span<const double> logprobs) {
    if (logprobs.empty()) throw Error(ErrorCode::EmptySequence, "sequence has no tokens");

    PseudoPerplexity out;
    out.token_count = logprobs.size();
    out.per_token_nll.reserve(logprobs.size());
    double total = 0.0;
    for (const double lp : logprobs) {
        if (std::isnan(lp)) throw Error(ErrorCode::ScorerFailure, "scorer returned NaN log-probability");
        double nll = -lp;
        if (nll < 0.0 || nll > kMaxTokenNll) {
            nll = std::clamp(nll, 0.0, kMaxTokenNll);
            ++out.clamp_events;
        }
        out.per_token_nll.push_back(nll);
        total += nll;
    }
    out.value = std::exp(total / static_cast<double>(out.token_count));
    return out;
}

PseudoPerplexity pseudo_perplexity(std::string_view text, const MaskedTokenScorer& scorer) {
    if (trim(text).empty()) throw Error(ErrorCode::EmptySequence, "sequence is empty");
    const auto logprobs = scorer.token_logprobs(text);
    return perplexity_from_logprobs(logprobs);
}

std::size_t PromptPerplexity::clamp_events() const noexcept {
    std::size_t total = 0;
    for (const auto& word : per_word) total += word.perplexity.clamp_events;
    return total;
}

void require_single_token_label_words(const Verbalizer& verbalizer, const MaskedTokenScorer& scorer) {
    for (const auto& entry : verbalizer.entries()) {
        const auto pieces = scorer.tokenize(entry.label_word);
        if (pieces.size() != 1) {
            throw Error(ErrorCode::MultiTokenLabelWord,
                        "label word \"" + entry.label_word + "\" is " + std::to_string(pieces.size()) +
                            " tokens under the active scorer");
        }
    }
}

PromptPerplexity prompt_perplexity(std::string_view input, const Template& tmpl,
                                   const Verbalizer& verbalizer, const MaskedTokenScorer& scorer) {
    require_single_token_label_words(verbalizer, scorer);
    const auto prompted = build_prompted_input(input, tmpl);

    std::vector<std::string> filled;
    filled.reserve(verbalizer.size());
    for (const auto& entry : verbalizer.entries()) {
        filled.push_back(fill_mask(prompted, entry.label_word).text);
    }
    const auto logprobs = scorer.token_logprobs_batch(filled);
    if (logprobs.size() != filled.size()) {
        throw Error(ErrorCode::ScorerFailure, "scorer returned a misaligned batch");
    }

    PromptPerplexity out;
    std::vector<double> values;
    for (std::size_t i = 0; i < filled.size(); ++i) {
        auto ppl = perplexity_from_logprobs(logprobs[i]);
        values.push_back(ppl.value);
        out.per_word.push_back({verbalizer.entries()[i].label_word, std::move(ppl)});
    }
    // Summing in sorted order makes the mean independent of verbalizer order.
    std::sort(values.begin(), values.end());
    double total = 0.0;
    for (const double v : values) total += v;
    out.mean = total / static_cast<double>(values.size());
    return out;
}

std::map<std::string, double> mask_fill_logprobs(std::string_view input, const Template& tmpl,
                                                 const Verbalizer& verbalizer,
                                                 const MaskedTokenScorer& scorer) {
    require_single_token_label_words(verbalizer, scorer);
    const auto prompted = build_prompted_input(input, tmpl);
    const auto words = verbalizer.label_words();
    const auto scores = scorer.mask_candidate_logprobs(prompted.text, words);
    if (scores.size() != words.size()) {
        throw Error(ErrorCode::ScorerFailure, "scorer returned a misaligned candidate list");
    }
    std::map<std::string, double> out;
    for (std::size_t i = 0; i < words.size(); ++i) out.emplace(words[i], scores[i]);
    return out;
}

}  // namespace pplprompt
