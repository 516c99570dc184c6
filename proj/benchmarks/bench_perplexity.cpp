#include <benchmark/benchmark.h>

#include <cmath>
#include <string>
#include <vector>

#include "pplprompt/count_scorer.hpp"
#include "pplprompt/perplexity.hpp"
#include "pplprompt/seeding.hpp"
#include "pplprompt/selection.hpp"
#include "pplprompt/table_scorer.hpp"

using namespace pplprompt;

namespace {

std::string sentence(SeededRng& rng, std::size_t length, std::size_t vocab) {
    std::string out;
    for (std::size_t i = 0; i < length; ++i) out += (i ? " t" : "t") + std::to_string(rng.below(vocab));
    return out;
}

TableScorer uniform(std::size_t vocab) {
    std::vector<TableEntry> rows;
    for (std::size_t i = 0; i < vocab; ++i) {
        rows.push_back({std::string(kAnyContext), "t" + std::to_string(i), -std::log(static_cast<double>(vocab))});
    }
    return TableScorer(rows);
}

// Pure reduction over precomputed log-probabilities.
void BM_PerplexityFromLogprobs(benchmark::State& state) {
    SeededRng rng(1);
    std::vector<double> logprobs(static_cast<std::size_t>(state.range(0)));
    for (auto& lp : logprobs) lp = -static_cast<double>(rng.below(1000)) / 100.0;
    for (auto _ : state) benchmark::DoNotOptimize(perplexity_from_logprobs(logprobs));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_PerplexityFromLogprobs)->Range(8, 4096);

void BM_TablePseudoPerplexity(benchmark::State& state) {
    const auto scorer = uniform(128);
    SeededRng rng(2);
    const auto text = sentence(rng, static_cast<std::size_t>(state.range(0)), 128);
    for (auto _ : state) benchmark::DoNotOptimize(pseudo_perplexity(text, scorer));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TablePseudoPerplexity)->Range(8, 256);

void BM_CountPseudoPerplexity(benchmark::State& state) {
    SeededRng rng(3);
    std::string corpus;
    for (int i = 0; i < 2000; ++i) corpus += sentence(rng, 12, 500) + "\n";
    const auto scorer = CountScorer::from_text(corpus, 1.0);
    const auto text = sentence(rng, static_cast<std::size_t>(state.range(0)), 500);
    for (auto _ : state) benchmark::DoNotOptimize(pseudo_perplexity(text, scorer));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_CountPseudoPerplexity)->Range(8, 256);

// Prompt-perplexity selection over a pool of the given size.
void BM_SelectTemplatePpl(benchmark::State& state) {
    const auto scorer = uniform(64);
    std::vector<Template> templates;
    for (int i = 0; i < state.range(0); ++i) {
        templates.emplace_back("p" + std::to_string(i), "t" + std::to_string(i % 64) + " [MASK] t1", Placement::Postfix);
    }
    const TemplatePool pool(std::move(templates), PoolProvenance::Manual);
    const Verbalizer verbalizer({{"t2", "++"}, {"t3", "--"}});
    SeededRng rng(4);
    const LabeledExample example{sentence(rng, 14, 64), "++"};
    for (auto _ : state) benchmark::DoNotOptimize(select_template_ppl(example, 0, pool, verbalizer, scorer));
}
BENCHMARK(BM_SelectTemplatePpl)->Arg(1)->Arg(8)->Arg(64);

}  // namespace

BENCHMARK_MAIN();
