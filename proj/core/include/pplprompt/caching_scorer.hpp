#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pplprompt/scorer.hpp"

namespace pplprompt {

/// Memoizes a scorer by exact text (and candidate) keys. Scorers are pure, so
/// cached and uncached results agree; concurrent fills are last-writer-wins.
class CachingScorer final : public MaskedTokenScorer {
public:
    explicit CachingScorer(std::shared_ptr<const MaskedTokenScorer> inner);

    std::vector<std::string> tokenize(std::string_view text) const override;
    std::vector<double> token_logprobs(std::string_view text) const override;
    std::vector<double> mask_candidate_logprobs(std::string_view text_with_mask,
                                                std::span<const std::string> candidates) const override;
    std::size_t vocab_size() const override;
    std::vector<std::vector<double>> token_logprobs_batch(std::span<const std::string> texts) const override;

    const MaskedTokenScorer& inner() const noexcept { return *inner_; }

private:
    std::shared_ptr<const MaskedTokenScorer> inner_;
    mutable std::mutex mutex_;
    mutable std::unordered_map<std::string, std::vector<std::string>> tokens_;
    mutable std::unordered_map<std::string, std::vector<double>> logprobs_;
    mutable std::map<std::pair<std::string, std::string>, double> candidates_;
};

}  // namespace pplprompt
