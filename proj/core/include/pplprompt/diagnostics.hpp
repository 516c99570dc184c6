#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pplprompt/prompt.hpp"
#include "pplprompt/scorer.hpp"

namespace pplprompt {

struct NamedTexts {
    std::string name;
    std::vector<std::string> texts;
};

struct LengthBucketing {
    /// Empty: one bucket per dataset. Otherwise fixed-width token buckets
    /// [1, w], [w+1, 2w], ... within each dataset.
    std::optional<std::size_t> width;
};

struct LengthBiasRow {
    std::string dataset;
    /// Inclusive token-length bounds of the bucket.
    std::size_t min_tokens = 0;
    std::size_t max_tokens = 0;
    double mean_tokens = 0.0;
    double mean_ppl = 0.0;
    std::size_t count = 0;
};

struct LengthBiasReport {
    std::vector<LengthBiasRow> rows;
    std::size_t clamp_events = 0;
};

/// Raw-text pseudo-perplexity (no prompting) against length in scorer tokens.
/// Empty buckets are omitted.
LengthBiasReport length_bias_report(std::span<const NamedTexts> datasets, const MaskedTokenScorer& scorer,
                                    const LengthBucketing& bucketing = {});

struct ReverseLabelRow {
    std::string dataset;
    std::string template_id;
    /// Mean PPL with the gold label word filled.
    double ppl_gold = 0.0;
    /// Mean PPL with the other label word filled.
    double ppl_reversed = 0.0;
    double diff = 0.0;
    std::size_t count = 0;
};

/// Throws NotBinaryVerbalizer, UnlabeledExample (also for labels the
/// verbalizer does not cover) or InsufficientExamples for an empty dataset.
ReverseLabelRow reverse_label_report(const std::string& dataset_name, std::span<const LabeledExample> examples,
                                     const Template& tmpl, const Verbalizer& verbalizer,
                                     const MaskedTokenScorer& scorer);

std::string length_bias_tsv(const LengthBiasReport& report);
std::string length_bias_jsonl(const LengthBiasReport& report);
std::string reverse_label_tsv(std::span<const ReverseLabelRow> rows);
std::string reverse_label_jsonl(std::span<const ReverseLabelRow> rows);

}  // namespace pplprompt
