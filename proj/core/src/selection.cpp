#include "pplprompt/selection.hpp"

#include <map>
#include <set>

#include "pplprompt/error.hpp"
#include "pplprompt/perplexity.hpp"
#include "pplprompt/seeding.hpp"

namespace pplprompt {

std::string_view provenance_name(PoolProvenance provenance) noexcept {
    return provenance == PoolProvenance::Manual ? "manual" : "auto";
}

TemplatePool::TemplatePool(std::vector<Template> templates, PoolProvenance provenance,
                           std::string generation_prompt)
    : templates_(std::move(templates)),
      provenance_(provenance),
      generation_prompt_(std::move(generation_prompt)) {
    if (templates_.empty()) throw Error(ErrorCode::EmptyPool, "template pool is empty");
    std::set<std::string_view> ids;
    for (const auto& tmpl : templates_) {
        if (!ids.insert(tmpl.id()).second) {
            throw Error(ErrorCode::InvalidTemplate, "duplicate template id \"" + tmpl.id() + "\" in pool");
        }
    }
}

std::size_t TemplatePool::index_of(std::string_view id) const {
    for (std::size_t i = 0; i < templates_.size(); ++i) {
        if (templates_[i].id() == id) return i;
    }
    throw Error(ErrorCode::InvalidTemplate, "template \"" + std::string(id) + "\" is not in the pool");
}

const Template& TemplatePool::at(std::string_view id) const { return templates_[index_of(id)]; }

std::string_view classify_mode_name(ClassifyMode mode) noexcept {
    return mode == ClassifyMode::MaskLogprob ? "mask" : "min-ppl-fill";
}

ClassifyMode parse_classify_mode(std::string_view name) {
    if (name == "mask") return ClassifyMode::MaskLogprob;
    if (name == "min-ppl-fill") return ClassifyMode::MinPplFill;
    throw Error(ErrorCode::ConfigError, "classify mode must be \"mask\" or \"min-ppl-fill\"");
}

namespace {

std::string classify_from_perplexity(const PromptPerplexity& ppl, const Verbalizer& verbalizer) {
    const LabelWordPerplexity* best = &ppl.per_word.front();
    for (const auto& word : ppl.per_word) {
        if (word.perplexity.value < best->perplexity.value) best = &word;
    }
    return verbalizer.class_of(best->label_word);
}

std::string classify_with(std::string_view input, const Template& tmpl, const Verbalizer& verbalizer,
                          const MaskedTokenScorer& scorer, ClassifyMode mode,
                          const PromptPerplexity* known_ppl) {
    if (mode == ClassifyMode::MinPplFill) {
        if (known_ppl) return classify_from_perplexity(*known_ppl, verbalizer);
        return classify_from_perplexity(prompt_perplexity(input, tmpl, verbalizer, scorer), verbalizer);
    }
    return zero_shot_classify(input, tmpl, verbalizer, scorer, mode);
}

}  // namespace

std::string zero_shot_classify(std::string_view input, const Template& tmpl, const Verbalizer& verbalizer,
                               const MaskedTokenScorer& scorer, ClassifyMode mode) {
    if (mode == ClassifyMode::MinPplFill) {
        return classify_from_perplexity(prompt_perplexity(input, tmpl, verbalizer, scorer), verbalizer);
    }
    const auto scores = mask_fill_logprobs(input, tmpl, verbalizer, scorer);
    const VerbalizerEntry* best = nullptr;
    double best_score = 0.0;
    for (const auto& entry : verbalizer.entries()) {
        const double score = scores.at(entry.label_word);
        if (!best || score > best_score) {
            best = &entry;
            best_score = score;
        }
    }
    return best->class_label;
}

SelectionTrace select_template_ppl(const LabeledExample& example, std::size_t example_index,
                                   const TemplatePool& pool, const Verbalizer& verbalizer,
                                   const MaskedTokenScorer& scorer, ClassifyMode mode) {
    SelectionTrace trace;
    trace.example_index = example_index;
    trace.gold_class = example.label;

    std::size_t best = 0;
    std::vector<PromptPerplexity> scored;
    scored.reserve(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const auto& tmpl = pool.templates()[i];
        scored.push_back(prompt_perplexity(example.text, tmpl, verbalizer, scorer));
        trace.per_template_ppl.push_back({tmpl.id(), scored.back().mean});
        trace.clamp_events += scored.back().clamp_events();
        if (scored.back().mean < scored[best].mean) best = i;
    }
    const auto& chosen = pool.templates()[best];
    trace.chosen_template_id = chosen.id();
    trace.predicted_class = classify_with(example.text, chosen, verbalizer, scorer, mode, &scored[best]);
    return trace;
}

std::size_t random_template_index(std::uint64_t seed, std::size_t example_index, std::size_t pool_size) {
    SeededRng rng(seed, example_index);
    return static_cast<std::size_t>(rng.below(pool_size));
}

SelectionTrace apply_fixed_template(const LabeledExample& example, std::size_t example_index,
                                    const Template& tmpl, const Verbalizer& verbalizer,
                                    const MaskedTokenScorer& scorer, ClassifyMode mode) {
    SelectionTrace trace;
    trace.example_index = example_index;
    trace.gold_class = example.label;
    trace.chosen_template_id = tmpl.id();
    const auto ppl = prompt_perplexity(example.text, tmpl, verbalizer, scorer);
    trace.per_template_ppl.push_back({tmpl.id(), ppl.mean});
    trace.clamp_events = ppl.clamp_events();
    trace.predicted_class = classify_with(example.text, tmpl, verbalizer, scorer, mode, &ppl);
    return trace;
}

SelectionTrace select_template_random(const LabeledExample& example, std::size_t example_index,
                                      const TemplatePool& pool, const Verbalizer& verbalizer,
                                      const MaskedTokenScorer& scorer, std::uint64_t seed, ClassifyMode mode) {
    const auto index = random_template_index(seed, example_index, pool.size());
    return apply_fixed_template(example, example_index, pool.templates()[index], verbalizer, scorer, mode);
}

std::vector<TemplateFrequency> selection_frequency_report(std::span<const SelectionTrace> traces,
                                                          const TemplatePool& pool) {
    if (traces.empty()) throw Error(ErrorCode::InsufficientExamples, "frequency report needs at least one trace");
    std::vector<std::size_t> counts(pool.size(), 0);
    for (const auto& trace : traces) ++counts[pool.index_of(trace.chosen_template_id)];

    std::vector<TemplateFrequency> out;
    out.reserve(pool.size());
    const auto total = static_cast<double>(traces.size());
    for (std::size_t i = 0; i < pool.size(); ++i) {
        out.push_back({pool.templates()[i].id(), static_cast<double>(counts[i]) / total, std::nullopt});
    }
    return out;
}

std::vector<TemplateFrequency> selection_frequency_report(std::span<const SelectionTrace> traces,
                                                          const TemplatePool& pool, const PostHocInputs& posthoc) {
    auto out = selection_frequency_report(traces, pool);
    if (posthoc.examples.empty()) {
        throw Error(ErrorCode::MissingGoldLabels, "post-hoc accuracy needs labeled examples");
    }
    for (const auto& example : posthoc.examples) {
        if (!example.label) throw Error(ErrorCode::MissingGoldLabels, "post-hoc accuracy needs gold labels");
    }
    for (std::size_t t = 0; t < pool.size(); ++t) {
        std::size_t correct = 0;
        for (const auto& example : posthoc.examples) {
            const auto predicted = zero_shot_classify(example.text, pool.templates()[t], posthoc.verbalizer,
                                                      posthoc.scorer, posthoc.mode);
            if (predicted == *example.label) ++correct;
        }
        out[t].accuracy = static_cast<double>(correct) / static_cast<double>(posthoc.examples.size());
    }
    return out;
}

}  // namespace pplprompt
