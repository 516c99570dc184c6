#include "pplprompt/caching_scorer.hpp"

#include "pplprompt/error.hpp"

namespace pplprompt {

CachingScorer::CachingScorer(std::shared_ptr<const MaskedTokenScorer> inner) : inner_(std::move(inner)) {
    if (!inner_) throw Error(ErrorCode::ScorerFailure, "caching scorer needs an inner scorer");
}

std::vector<std::string> CachingScorer::tokenize(std::string_view text) const {
    const std::string key(text);
    {
        std::lock_guard lock(mutex_);
        if (const auto it = tokens_.find(key); it != tokens_.end()) return it->second;
    }
    auto tokens = inner_->tokenize(text);
    std::lock_guard lock(mutex_);
    tokens_[key] = tokens;
    return tokens;
}

std::vector<double> CachingScorer::token_logprobs(std::string_view text) const {
    const std::string key(text);
    {
        std::lock_guard lock(mutex_);
        if (const auto it = logprobs_.find(key); it != logprobs_.end()) return it->second;
    }
    auto logprobs = inner_->token_logprobs(text);
    std::lock_guard lock(mutex_);
    logprobs_[key] = logprobs;
    return logprobs;
}

std::vector<std::vector<double>> CachingScorer::token_logprobs_batch(std::span<const std::string> texts) const {
    std::vector<std::vector<double>> out(texts.size());
    std::vector<std::string> misses;
    std::vector<std::size_t> miss_slots;
    {
        std::lock_guard lock(mutex_);
        for (std::size_t i = 0; i < texts.size(); ++i) {
            if (const auto it = logprobs_.find(texts[i]); it != logprobs_.end()) {
                out[i] = it->second;
            } else {
                misses.push_back(texts[i]);
                miss_slots.push_back(i);
            }
        }
    }
    if (misses.empty()) return out;

    auto fresh = inner_->token_logprobs_batch(misses);
    if (fresh.size() != misses.size()) throw Error(ErrorCode::ScorerFailure, "inner scorer returned a misaligned batch");
    std::lock_guard lock(mutex_);
    for (std::size_t j = 0; j < misses.size(); ++j) {
        logprobs_[misses[j]] = fresh[j];
        out[miss_slots[j]] = std::move(fresh[j]);
    }
    return out;
}

std::vector<double> CachingScorer::mask_candidate_logprobs(std::string_view text_with_mask,
                                                           std::span<const std::string> candidates) const {
    const std::string text(text_with_mask);
    std::vector<double> out(candidates.size());
    std::vector<std::string> misses;
    std::vector<std::size_t> miss_slots;
    {
        std::lock_guard lock(mutex_);
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            if (const auto it = candidates_.find({text, candidates[i]}); it != candidates_.end()) {
                out[i] = it->second;
            } else {
                misses.push_back(candidates[i]);
                miss_slots.push_back(i);
            }
        }
    }
    if (misses.empty()) return out;

    const auto fresh = inner_->mask_candidate_logprobs(text, misses);
    if (fresh.size() != misses.size()) {
        throw Error(ErrorCode::ScorerFailure, "inner scorer returned a misaligned candidate list");
    }
    std::lock_guard lock(mutex_);
    for (std::size_t j = 0; j < misses.size(); ++j) {
        candidates_[{text, misses[j]}] = fresh[j];
        out[miss_slots[j]] = fresh[j];
    }
    return out;
}

std::size_t CachingScorer::vocab_size() const { return inner_->vocab_size(); }

}  // namespace pplprompt
