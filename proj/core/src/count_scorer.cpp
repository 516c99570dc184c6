#include "pplprompt/count_scorer.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "pplprompt/error.hpp"
#include "pplprompt/prompt.hpp"

namespace pplprompt {

namespace {

std::string_view neighbour(const std::vector<std::string>& tokens, std::size_t i, int offset) {
    if (offset < 0) return i == 0 ? kSentenceBegin : std::string_view(tokens[i - 1]);
    return i + 1 >= tokens.size() ? kSentenceEnd : std::string_view(tokens[i + 1]);
}

}  // namespace

CountScorer::CountScorer(const std::vector<std::vector<std::string>>& corpus, double alpha)
    : alpha_(alpha) {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) {
        throw Error(ErrorCode::ScorerFailure, "smoothing alpha must be positive and finite");
    }
    std::set<std::string> vocab{std::string(kMaskToken), std::string(kSentenceBegin),
                                std::string(kSentenceEnd)};
    std::size_t token_total = 0;
    for (const auto& sentence : corpus) {
        for (std::size_t i = 0; i < sentence.size(); ++i) {
            vocab.insert(sentence[i]);
            auto& ctx = contexts_[context_key(neighbour(sentence, i, -1), neighbour(sentence, i, +1))];
            ++ctx.total;
            ++ctx.fillers[sentence[i]];
            ++token_total;
        }
    }
    if (token_total == 0) throw Error(ErrorCode::EmptyCorpus, "corpus contains no tokens");
    vocabulary_.assign(vocab.begin(), vocab.end());
}

CountScorer CountScorer::from_text(std::string_view text, double alpha) {
    std::vector<std::vector<std::string>> corpus;
    std::istringstream stream{std::string(text)};
    std::string line;
    while (std::getline(stream, line)) {
        auto tokens = whitespace_tokenize(line);
        if (!tokens.empty()) corpus.push_back(std::move(tokens));
    }
    return CountScorer(corpus, alpha);
}

CountScorer CountScorer::load(const std::filesystem::path& path, double alpha) {
    return from_text(read_text_file(path), alpha);
}

std::string CountScorer::context_key(std::string_view left, std::string_view right) {
    std::string key;
    key.reserve(left.size() + right.size() + 1);
    key.append(left).push_back('\x1f');
    key.append(right);
    return key;
}

double CountScorer::probability(std::string_view left, std::string_view token, std::string_view right) const {
    const double denom_smoothing = alpha_ * static_cast<double>(vocabulary_.size());
    const auto it = contexts_.find(context_key(left, right));
    if (it == contexts_.end()) return alpha_ / denom_smoothing;
    const auto& ctx = it->second;
    const auto filler = ctx.fillers.find(std::string(token));
    const double count = filler == ctx.fillers.end() ? 0.0 : static_cast<double>(filler->second);
    return (count + alpha_) / (static_cast<double>(ctx.total) + denom_smoothing);
}

std::vector<std::string> CountScorer::tokenize(std::string_view text) const {
    return whitespace_tokenize(text);
}

std::vector<double> CountScorer::token_logprobs(std::string_view text) const {
    const auto tokens = tokenize(text);
    std::vector<double> out;
    out.reserve(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        out.push_back(std::log(probability(neighbour(tokens, i, -1), tokens[i], neighbour(tokens, i, +1))));
    }
    return out;
}

std::vector<double> CountScorer::mask_candidate_logprobs(std::string_view text_with_mask,
                                                         std::span<const std::string> candidates) const {
    const auto tokens = tokenize(text_with_mask);
    const auto masks = std::count(tokens.begin(), tokens.end(), kMaskToken);
    if (masks != 1) {
        throw Error(ErrorCode::ScorerFailure, "text must contain exactly one whitespace-delimited mask token");
    }
    const auto position = static_cast<std::size_t>(
        std::find(tokens.begin(), tokens.end(), kMaskToken) - tokens.begin());
    const auto left = neighbour(tokens, position, -1);
    const auto right = neighbour(tokens, position, +1);

    std::vector<double> out;
    out.reserve(candidates.size());
    for (const auto& candidate : candidates) {
        if (!std::binary_search(vocabulary_.begin(), vocabulary_.end(), candidate)) {
            throw Error(ErrorCode::UnknownLabelWord, "candidate \"" + candidate + "\" is not in the vocabulary");
        }
        out.push_back(std::log(probability(left, candidate, right)));
    }
    return out;
}

}  // namespace pplprompt
