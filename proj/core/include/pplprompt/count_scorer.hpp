#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "pplprompt/scorer.hpp"

namespace pplprompt {

inline constexpr std::string_view kSentenceBegin = "<s>";
inline constexpr std::string_view kSentenceEnd = "</s>";

/// Desk-scale masked LM: p(w | left, right) from additive-smoothed counts of
/// the two neighbouring tokens, with boundary markers at sentence edges.
///
///   p(w | l, r) = (n(l, w, r) + alpha) / (n(l, *, r) + alpha * |V|)
///
/// |V| is the corpus vocabulary plus the mask and boundary markers, so every
/// context distribution sums to one. Tokens outside V receive the unseen mass
/// alpha / (n(l, *, r) + alpha * |V|).
class CountScorer final : public MaskedTokenScorer {
public:
    /// Throws EmptyCorpus when there are no tokens; ScorerFailure when alpha <= 0.
    CountScorer(const std::vector<std::vector<std::string>>& corpus, double alpha);

    /// One whitespace-tokenized sentence per line.
    static CountScorer from_text(std::string_view text, double alpha);
    static CountScorer load(const std::filesystem::path& path, double alpha);

    double probability(std::string_view left, std::string_view token, std::string_view right) const;
    const std::vector<std::string>& vocabulary() const noexcept { return vocabulary_; }
    double alpha() const noexcept { return alpha_; }

    std::vector<std::string> tokenize(std::string_view text) const override;
    std::vector<double> token_logprobs(std::string_view text) const override;
    std::vector<double> mask_candidate_logprobs(std::string_view text_with_mask,
                                                std::span<const std::string> candidates) const override;
    std::size_t vocab_size() const override { return vocabulary_.size(); }

private:
    struct ContextCounts {
        std::size_t total = 0;
        std::unordered_map<std::string, std::size_t> fillers;
    };

    static std::string context_key(std::string_view left, std::string_view right);

    double alpha_;
    std::vector<std::string> vocabulary_;
    std::unordered_map<std::string, ContextCounts> contexts_;
};

}  // namespace pplprompt
