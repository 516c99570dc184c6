#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pplprompt/prompt.hpp"
#include "pplprompt/scorer.hpp"

namespace pplprompt {

enum class PoolProvenance { Manual, AutoGenerated };

std::string_view provenance_name(PoolProvenance provenance) noexcept;

/// Non-empty ordered template list with unique ids. Order is the tie-break order.
class TemplatePool {
public:
    TemplatePool(std::vector<Template> templates, PoolProvenance provenance,
                 std::string generation_prompt = {});

    const std::vector<Template>& templates() const noexcept { return templates_; }
    PoolProvenance provenance() const noexcept { return provenance_; }
    /// Verbatim request format used to generate the pool; empty for manual pools.
    const std::string& generation_prompt() const noexcept { return generation_prompt_; }
    std::size_t size() const noexcept { return templates_.size(); }

    /// Throws InvalidTemplate for an unknown id.
    const Template& at(std::string_view id) const;
    std::size_t index_of(std::string_view id) const;

private:
    std::vector<Template> templates_;
    PoolProvenance provenance_;
    std::string generation_prompt_;
};

/// How a prediction is made once a template is fixed.
enum class ClassifyMode {
    /// argmax of mask-position label-word log-probabilities.
    MaskLogprob,
    /// Label word whose filled sequence has the lowest pseudo-perplexity (ablation).
    MinPplFill,
};

std::string_view classify_mode_name(ClassifyMode mode) noexcept;
ClassifyMode parse_classify_mode(std::string_view name);

struct TemplateScore {
    std::string template_id;
    double ppl = 0.0;

    friend bool operator==(const TemplateScore&, const TemplateScore&) = default;
};

struct SelectionTrace {
    std::size_t example_index = 0;
    std::string chosen_template_id;
    /// In pool order. Random selection only scores the chosen template.
    std::vector<TemplateScore> per_template_ppl;
    std::string predicted_class;
    std::optional<std::string> gold_class;
    /// Clamped-NLL events seen while scoring this example.
    std::size_t clamp_events = 0;

    bool correct() const noexcept { return gold_class && *gold_class == predicted_class; }

    friend bool operator==(const SelectionTrace&, const SelectionTrace&) = default;
};

/// Class of the label word with the highest score; ties go to the earlier
/// verbalizer entry.
std::string zero_shot_classify(std::string_view input, const Template& tmpl, const Verbalizer& verbalizer,
                               const MaskedTokenScorer& scorer, ClassifyMode mode = ClassifyMode::MaskLogprob);

/// Scores every pool template by verbalizer-averaged prompt perplexity, picks
/// the lowest (earliest on ties) and classifies with it.
SelectionTrace select_template_ppl(const LabeledExample& example, std::size_t example_index,
                                   const TemplatePool& pool, const Verbalizer& verbalizer,
                                   const MaskedTokenScorer& scorer,
                                   ClassifyMode mode = ClassifyMode::MaskLogprob);

/// Index drawn uniformly from [0, pool_size) by a generator keyed on (seed, example_index).
std::size_t random_template_index(std::uint64_t seed, std::size_t example_index, std::size_t pool_size);

SelectionTrace select_template_random(const LabeledExample& example, std::size_t example_index,
                                      const TemplatePool& pool, const Verbalizer& verbalizer,
                                      const MaskedTokenScorer& scorer, std::uint64_t seed,
                                      ClassifyMode mode = ClassifyMode::MaskLogprob);

/// Trace for a single fixed template; shares the trace format with selection.
SelectionTrace apply_fixed_template(const LabeledExample& example, std::size_t example_index,
                                    const Template& tmpl, const Verbalizer& verbalizer,
                                    const MaskedTokenScorer& scorer,
                                    ClassifyMode mode = ClassifyMode::MaskLogprob);

struct TemplateFrequency {
    std::string template_id;
    double frequency = 0.0;
    /// Accuracy of this template applied to every example (post-hoc quality).
    std::optional<double> accuracy;
};

struct PostHocInputs {
    std::span<const LabeledExample> examples;
    const Verbalizer& verbalizer;
    const MaskedTokenScorer& scorer;
    ClassifyMode mode = ClassifyMode::MaskLogprob;
};

/// Normalized selection frequency per pool template, in pool order.
std::vector<TemplateFrequency> selection_frequency_report(std::span<const SelectionTrace> traces,
                                                          const TemplatePool& pool);

/// As above, plus post-hoc accuracy per template. Throws MissingGoldLabels if
/// any example is unlabeled.
std::vector<TemplateFrequency> selection_frequency_report(std::span<const SelectionTrace> traces,
                                                          const TemplatePool& pool, const PostHocInputs& posthoc);

// ---------------------------------------------------------------------------
// Automatic template pools

struct GenerationRequest {
    std::string input;
    std::string filled_label_word;
    int num_return = 1;
    int max_new_tokens = 20;
};

/// Template-generation service. Returned strings are candidate patterns.
class TemplateGenerator {
public:
    virtual ~TemplateGenerator() = default;
    virtual std::vector<std::string> generate(const GenerationRequest& request) const = 0;
};

struct AutoPoolOptions {
    std::size_t n_examples = 50;
    std::uint64_t seed = 0;
    bool dedupe = true;
    int num_return = 1;
    int max_new_tokens = 20;
    Placement placement = Placement::Postfix;
    /// Attempts per (example, label word) cell beyond the first.
    int retries = 3;
    std::string id_prefix = "auto-";
};

/// Request format recorded as the pool's generation prompt.
std::string_view auto_pool_generation_prompt() noexcept;

/// Samples inputs, requests one template per label word, drops invalid
/// patterns, deduplicates exact strings and returns an AutoGenerated pool.
TemplatePool build_auto_pool(std::span<const LabeledExample> examples, const Verbalizer& verbalizer,
                             const TemplateGenerator& generator, const AutoPoolOptions& options = {});

}  // namespace pplprompt
