#pragma once

// Synthetic fixtures: a sentiment "world" whose corpus is made of gold-filled
// prompts under one template, plus uniform and table-scorer helpers.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "pplprompt/prompt.hpp"
#include "pplprompt/scorer.hpp"
#include "pplprompt/table_scorer.hpp"

namespace pplprompt::testing {

struct SentimentWorld {
    std::vector<LabeledExample> examples;
    /// Gold-filled prompts of every example under `matched`, one per line.
    std::vector<std::string> corpus;
    Template matched;
    Template unmatched;
    Verbalizer verbalizer;

    std::string corpus_text() const;
};

/// Balanced ++/-- examples of the shape "<det> <noun> <verb> <adverb> <adjective>";
/// the adjective carries the class.
SentimentWorld make_sentiment_world(std::size_t per_class, std::uint64_t seed);

/// An input absent from every world corpus whose last word is positive.
std::string held_out_positive_sentence();

/// Table rows assigning log(1/vocab) to tokens t0..t{vocab-1} in any context.
std::vector<TableEntry> uniform_table(std::size_t vocab);
std::string uniform_token(std::size_t i);

/// Table fixture for "a b c" with probabilities 0.5, 0.25 and 0.125.
std::vector<TableEntry> three_token_table();
std::string table_to_jsonl(const std::vector<TableEntry>& entries);

/// Wraps a scorer and applies fixed transforms to its log-probabilities.
class TransformedScorer : public MaskedTokenScorer {
public:
    using Transform = std::function<double(double)>;

    TransformedScorer(std::shared_ptr<const MaskedTokenScorer> inner, Transform token, Transform mask);

    std::vector<std::string> tokenize(std::string_view text) const override;
    std::vector<double> token_logprobs(std::string_view text) const override;
    std::vector<double> mask_candidate_logprobs(std::string_view text_with_mask,
                                                std::span<const std::string> candidates) const override;
    std::size_t vocab_size() const override;

private:
    std::shared_ptr<const MaskedTokenScorer> inner_;
    Transform token_;
    Transform mask_;
};

/// Writes `content` to a fresh file under a per-process temporary directory.
std::string write_temp_file(const std::string& name, const std::string& content);
std::string temp_dir(const std::string& name);

}  // namespace pplprompt::testing
