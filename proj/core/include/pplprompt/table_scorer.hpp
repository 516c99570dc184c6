#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pplprompt/scorer.hpp"

namespace pplprompt {

/// Context key matching any context.
inline constexpr std::string_view kAnyContext = "*";

/// One fixture row: log p(token | context), where context is the
/// whitespace-tokenized sequence with the scored position replaced by the mask.
struct TableEntry {
    std::string context;
    std::string token;
    double logprob = 0.0;
};

/// Deterministic scorer backed by an explicit log-probability table. Exact
/// context rows win over "*" rows; anything else is a lookup error.
///
/// The mask placeholder must be its own whitespace-delimited token.
class TableScorer final : public MaskedTokenScorer {
public:
    /// Throws MalformedTable on an empty table, a non-finite or positive
    /// log-probability, conflicting duplicates, or a context whose listed
    /// probabilities sum above one.
    explicit TableScorer(const std::vector<TableEntry>& entries);

    /// Line-delimited {"context", "token", "logprob"} records.
    static TableScorer parse(std::string_view jsonl);
    static TableScorer load(const std::filesystem::path& path);

    std::vector<std::string> tokenize(std::string_view text) const override;
    std::vector<double> token_logprobs(std::string_view text) const override;
    std::vector<double> mask_candidate_logprobs(std::string_view text_with_mask,
                                                std::span<const std::string> candidates) const override;
    std::size_t vocab_size() const override { return vocab_size_; }

private:
    const double* find(const std::string& context, const std::string& token) const;

    std::map<std::pair<std::string, std::string>, double> rows_;
    std::size_t vocab_size_ = 0;
};

/// Joins tokens with single spaces, replacing position `masked` with the mask.
std::string masked_context(const std::vector<std::string>& tokens, std::size_t masked);

}  // namespace pplprompt
