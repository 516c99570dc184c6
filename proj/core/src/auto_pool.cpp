#include <cstdio>
#include <set>

#include <spdlog/spdlog.h>

#include "pplprompt/error.hpp"
#include "pplprompt/seeding.hpp"
#include "pplprompt/selection.hpp"

namespace pplprompt {

std::string_view auto_pool_generation_prompt() noexcept {
    return "POST /v1/generate {\"input\": <x>, \"filled_label_word\": <w>, \"num_return\": <n>, "
           "\"max_new_tokens\": <m>}; generator fills <x> <extra_id_0> <w> <extra_id_1> and the "
           "label word position becomes [MASK]";
}

namespace {

std::optional<std::vector<std::string>> request_with_retries(const TemplateGenerator& generator,
                                                             const GenerationRequest& request, int retries) {
    for (int attempt = 0; attempt <= retries; ++attempt) {
        try {
            return generator.generate(request);
        } catch (const Error& e) {
            if (e.code() == ErrorCode::Protocol) {
                spdlog::warn("generation for label word \"{}\" returned a malformed response: {}",
                             request.filled_label_word, e.what());
                break;
            }
            spdlog::warn("generation for label word \"{}\" failed (attempt {}/{}): {}", request.filled_label_word,
                         attempt + 1, retries + 1, e.what());
        }
    }
    return std::nullopt;
}

std::string make_id(const std::string& prefix, std::size_t n) {
    char digits[16];
    std::snprintf(digits, sizeof digits, "%03zu", n);
    return prefix + digits;
}

}  // namespace

TemplatePool build_auto_pool(std::span<const LabeledExample> examples, const Verbalizer& verbalizer,
                             const TemplateGenerator& generator, const AutoPoolOptions& options) {
    if (options.n_examples == 0) throw Error(ErrorCode::ConfigError, "n_examples must be at least 1");
    if (examples.empty()) throw Error(ErrorCode::InsufficientExamples, "no examples to generate templates from");

    const auto n = std::min(options.n_examples, examples.size());
    SeededRng rng(options.seed);
    const auto sampled = rng.sample_indices(examples.size(), n);

    std::vector<Template> templates;
    std::set<std::string> seen;
    std::size_t answered = 0;
    std::size_t dropped = 0;
    for (const auto index : sampled) {
        for (const auto& entry : verbalizer.entries()) {
            GenerationRequest request{examples[index].text, entry.label_word, options.num_return,
                                      options.max_new_tokens};
            const auto generated = request_with_retries(generator, request, options.retries);
            if (!generated) {
                spdlog::warn("skipping example {} / \"{}\" after {} attempts", index, entry.label_word,
                             options.retries + 1);
                continue;
            }
            ++answered;
            for (const auto& pattern : *generated) {
                if (options.dedupe && seen.count(pattern)) continue;
                try {
                    templates.emplace_back(make_id(options.id_prefix, templates.size()), pattern, options.placement);
                } catch (const Error& e) {
                    ++dropped;
                    spdlog::warn("dropping generated pattern \"{}\": {}", pattern, e.what());
                    continue;
                }
                seen.insert(pattern);
            }
        }
    }

    if (answered == 0) throw Error(ErrorCode::GeneratorUnavailable, "template generator never answered");
    if (templates.empty()) {
        throw Error(ErrorCode::AllGenerationsInvalid,
                    "no valid template among generations (" + std::to_string(dropped) + " dropped)");
    }
    spdlog::info("auto pool: {} templates from {} requests, {} invalid dropped", templates.size(), answered, dropped);
    return TemplatePool(std::move(templates), PoolProvenance::AutoGenerated, std::string(auto_pool_generation_prompt()));
}

}  // namespace pplprompt
