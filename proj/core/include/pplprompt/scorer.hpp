#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pplprompt {

/// The only model dependency of the toolkit. Implementations own tokenization
/// and must be deterministic and safe for concurrent const use.
///
/// All returned log-probabilities are natural logs, finite and <= 0.
class MaskedTokenScorer {
public:
    virtual ~MaskedTokenScorer() = default;

    virtual std::vector<std::string> tokenize(std::string_view text) const = 0;

    /// log p(x_i | c) for every position i, where c is the sequence with
    /// position i masked.
    virtual std::vector<double> token_logprobs(std::string_view text) const = 0;

    /// Log-probability of each candidate at the single mask position of
    /// `text_with_mask`, aligned with `candidates`. Unknown candidates throw
    /// UnknownLabelWord.
    virtual std::vector<double> mask_candidate_logprobs(std::string_view text_with_mask,
                                                        std::span<const std::string> candidates) const = 0;

    virtual std::size_t vocab_size() const = 0;

    /// token_logprobs over several texts, positionally aligned with `texts`.
    virtual std::vector<std::vector<double>> token_logprobs_batch(std::span<const std::string> texts) const {
        std::vector<std::vector<double>> out;
        out.reserve(texts.size());
        for (const auto& text : texts) out.push_back(token_logprobs(text));
        return out;
    }
};

/// Splits on ASCII whitespace. Shared by the toy scorers.
std::vector<std::string> whitespace_tokenize(std::string_view text);

}  // namespace pplprompt
