#include <doctest.h>

#include <atomic>
#include <cmath>
#include <memory>
#include <functional>
#include <mutex>
#include <set>

#include "pplprompt/count_scorer.hpp"
#include "pplprompt/error.hpp"
#include "pplprompt/selection.hpp"
#include "pplprompt/table_scorer.hpp"
#include "synthetic.hpp"

using namespace pplprompt;

namespace {

template <typename Fn>
ErrorCode code_of(Fn&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected pplprompt::Error");
    return ErrorCode::ScorerFailure;
}

struct WorldFixture {
    testing::SentimentWorld world = testing::make_sentiment_world(40, 17);
    std::shared_ptr<const CountScorer> scorer =
        std::make_shared<CountScorer>(CountScorer::from_text(world.corpus_text(), 1.0));
    TemplatePool pool{{world.matched, world.unmatched}, PoolProvenance::Manual};
};

/// Table fixture for input "q": template "four" gives both fills PPL 4, "six" gives PPL 6.
TableScorer four_six_table() {
    const double quarter = std::log(0.25);
    const double sixth = std::log(1.0 / 6.0);
    return TableScorer({{"[MASK] w1", "q", quarter},
                        {"[MASK] w2", "q", quarter},
                        {"q [MASK]", "w1", quarter},
                        {"q [MASK]", "w2", quarter},
                        {"[MASK] w1 z", "q", sixth},
                        {"[MASK] w2 z", "q", sixth},
                        {"q [MASK] z", "w1", sixth},
                        {"q [MASK] z", "w2", sixth},
                        {"q w1 [MASK]", "z", sixth},
                        {"q w2 [MASK]", "z", sixth}});
}

const Verbalizer kWords({{"w1", "pos"}, {"w2", "neg"}});

class ScriptedGenerator : public TemplateGenerator {
public:
    explicit ScriptedGenerator(std::function<std::vector<std::string>(const GenerationRequest&, int)> script)
        : script_(std::move(script)) {}

    std::vector<std::string> generate(const GenerationRequest& request) const override {
        const int call = calls_++;
        std::lock_guard lock(mutex_);
        requests_.push_back(request);
        return script_(request, call);
    }

    int calls() const { return calls_; }
    const std::vector<GenerationRequest>& requests() const { return requests_; }

private:
    std::function<std::vector<std::string>(const GenerationRequest&, int)> script_;
    mutable std::atomic<int> calls_{0};
    mutable std::mutex mutex_;
    mutable std::vector<GenerationRequest> requests_;
};

std::vector<LabeledExample> numbered_examples(std::size_t n) {
    std::vector<LabeledExample> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back({"example " + std::to_string(i), "++"});
    return out;
}

}  // namespace

TEST_CASE("zero_shot_classify picks the most probable label word") {
    const TableScorer scorer({{"x it was [MASK]", "very", std::log(0.7)}, {"x it was [MASK]", "not", std::log(0.3)}});
    const Template t("t", "it was [MASK]", Placement::Postfix);
    const Verbalizer v({{"very", "++"}, {"not", "--"}});
    CHECK(zero_shot_classify("x", t, v, scorer) == "++");
    CHECK(zero_shot_classify("x", t, v.with_swapped_classes(), scorer) == "--");

    SUBCASE("ties go to the earlier verbalizer entry") {
        const TableScorer tied({{"x it was [MASK]", "very", std::log(0.4)}, {"x it was [MASK]", "not", std::log(0.4)}});
        CHECK(zero_shot_classify("x", t, v, tied) == "++");
        CHECK(zero_shot_classify("x", t, Verbalizer({{"not", "--"}, {"very", "++"}}), tied) == "--");
    }
}

TEST_CASE("held-out positive sentence is classified positive by the count model") {
    const auto world = testing::make_sentiment_world(40, 17);
    const auto scorer = CountScorer::from_text(world.corpus_text(), 1.0);
    const auto held_out = testing::held_out_positive_sentence();

    // Oracle: the mask sits between the last input word and "pleased", so the
    // count model compares n(great, w, pleased) for the two label words.
    const auto last = held_out.substr(held_out.rfind(' ') + 1);
    auto count = [&](const std::string& word) {
        std::size_t n = 0;
        for (const auto& line : world.corpus) n += line.find(" " + last + " " + word + " pleased") != std::string::npos;
        return n;
    };
    REQUIRE(count("very") > count("not"));
    CHECK(zero_shot_classify(held_out, world.matched, world.verbalizer, scorer) == "++");
}

TEST_CASE("select_template_ppl worked cases") {
    const auto scorer = four_six_table();
    const Template four("four", "[MASK]", Placement::Postfix);
    const Template six("six", "[MASK] z", Placement::Postfix);
    const LabeledExample q{"q", "pos"};

    SUBCASE("lower perplexity wins regardless of pool order") {
        for (const auto& pool : {TemplatePool({six, four}, PoolProvenance::Manual),
                                 TemplatePool({four, six}, PoolProvenance::Manual)}) {
            const auto trace = select_template_ppl(q, 3, pool, kWords, scorer);
            CHECK(trace.chosen_template_id == "four");
            CHECK(trace.example_index == 3);
            REQUIRE(trace.per_template_ppl.size() == 2);
            CHECK(trace.per_template_ppl[pool.index_of("four")].ppl == doctest::Approx(4.0).epsilon(1e-12));
            CHECK(trace.per_template_ppl[pool.index_of("six")].ppl == doctest::Approx(6.0).epsilon(1e-12));
            CHECK(trace.correct());
        }
    }
    SUBCASE("single-template pool") {
        const TemplatePool pool({six}, PoolProvenance::Manual);
        CHECK(select_template_ppl(q, 0, pool, kWords, scorer).chosen_template_id == "six");
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            CHECK(select_template_random(q, seed, pool, kWords, scorer, seed).chosen_template_id == "six");
        }
    }
    SUBCASE("exact ties go to pool order") {
        const Template twin("twin", "[MASK]", Placement::Postfix);
        const TemplatePool a({four, twin}, PoolProvenance::Manual);
        const TemplatePool b({twin, four}, PoolProvenance::Manual);
        for (int run = 0; run < 3; ++run) {
            CHECK(select_template_ppl(q, 0, a, kWords, scorer).chosen_template_id == "four");
            CHECK(select_template_ppl(q, 0, b, kWords, scorer).chosen_template_id == "twin");
        }
    }
}

TEST_CASE("template pools") {
    const Template t("a", "[MASK]", Placement::Prefix);
    CHECK(code_of([] { TemplatePool({}, PoolProvenance::Manual); }) == ErrorCode::EmptyPool);
    CHECK(code_of([&] { TemplatePool({t, t}, PoolProvenance::Manual); }) == ErrorCode::InvalidTemplate);
    const TemplatePool pool({t}, PoolProvenance::Manual);
    CHECK(code_of([&] { pool.at("b"); }) == ErrorCode::InvalidTemplate);
}

TEST_CASE("random selection draws uniformly and reproducibly") {
    std::vector<std::size_t> counts(4, 0);
    const std::size_t draws = 10000;
    for (std::size_t i = 0; i < draws; ++i) ++counts[random_template_index(2024, i, 4)];
    for (const auto c : counts) {
        const double frequency = static_cast<double>(c) / static_cast<double>(draws);
        CHECK(frequency >= 0.23);
        CHECK(frequency <= 0.27);
    }

    WorldFixture f;
    for (std::size_t i = 0; i < f.world.examples.size(); ++i) {
        const auto a = select_template_random(f.world.examples[i], i, f.pool, f.world.verbalizer, *f.scorer, 5);
        const auto b = select_template_random(f.world.examples[i], i, f.pool, f.world.verbalizer, *f.scorer, 5);
        CHECK(a == b);
        CHECK(a.chosen_template_id == f.pool.templates()[random_template_index(5, i, 2)].id());
    }
}

TEST_CASE("property: selection ignores a global probability scale") {
    WorldFixture f;
    for (const double k : {0.5, 0.1}) {
        const testing::TransformedScorer scaled(
            f.scorer, [k](double lp) { return lp + std::log(k); }, [](double lp) { return lp; });
        for (std::size_t i = 0; i < f.world.examples.size(); ++i) {
            const auto base = select_template_ppl(f.world.examples[i], i, f.pool, f.world.verbalizer, *f.scorer);
            const auto moved = select_template_ppl(f.world.examples[i], i, f.pool, f.world.verbalizer, scaled);
            CHECK(moved.chosen_template_id == base.chosen_template_id);
            CHECK(moved.predicted_class == base.predicted_class);
            for (std::size_t t = 0; t < base.per_template_ppl.size(); ++t) {
                CHECK(moved.per_template_ppl[t].ppl == doctest::Approx(base.per_template_ppl[t].ppl / k).epsilon(1e-9));
            }
        }
    }
}

TEST_CASE("property: classification ignores monotone transforms of mask scores") {
    WorldFixture f;
    const std::vector<std::function<double(double)>> transforms = {
        [](double lp) { return 3.0 * lp - 7.0; },
        [](double lp) { return -std::exp(-lp); },
        [](double lp) { return lp * lp * lp; },
    };
    for (const auto& transform : transforms) {
        const testing::TransformedScorer moved(f.scorer, [](double lp) { return lp; }, transform);
        for (const auto& example : f.world.examples) {
            for (const auto& tmpl : f.pool.templates()) {
                CHECK(zero_shot_classify(example.text, tmpl, f.world.verbalizer, moved) ==
                      zero_shot_classify(example.text, tmpl, f.world.verbalizer, *f.scorer));
            }
        }
    }
}

TEST_CASE("property: swapping binary class labels flips every prediction") {
    WorldFixture f;
    const auto swapped = f.world.verbalizer.with_swapped_classes();
    for (const auto mode : {ClassifyMode::MaskLogprob, ClassifyMode::MinPplFill}) {
        for (std::size_t i = 0; i < f.world.examples.size(); ++i) {
            const auto& example = f.world.examples[i];
            const auto a = select_template_ppl(example, i, f.pool, f.world.verbalizer, *f.scorer, mode);
            const auto b = select_template_ppl(example, i, f.pool, swapped, *f.scorer, mode);
            CHECK(a.chosen_template_id == b.chosen_template_id);
            CHECK(a.predicted_class != b.predicted_class);
        }
    }
}

TEST_CASE("property: pool permutation without ties keeps the choice") {
    WorldFixture f;
    const TemplatePool reversed({f.world.unmatched, f.world.matched}, PoolProvenance::Manual);
    for (std::size_t i = 0; i < f.world.examples.size(); ++i) {
        const auto a = select_template_ppl(f.world.examples[i], i, f.pool, f.world.verbalizer, *f.scorer);
        const auto b = select_template_ppl(f.world.examples[i], i, reversed, f.world.verbalizer, *f.scorer);
        REQUIRE(a.per_template_ppl[0].ppl != a.per_template_ppl[1].ppl);
        CHECK(a.chosen_template_id == b.chosen_template_id);
    }
}

TEST_CASE("property: traces replay to the same prediction") {
    WorldFixture f;
    for (const auto mode : {ClassifyMode::MaskLogprob, ClassifyMode::MinPplFill}) {
        for (std::size_t i = 0; i < f.world.examples.size(); ++i) {
            const auto& example = f.world.examples[i];
            const auto traces = {select_template_ppl(example, i, f.pool, f.world.verbalizer, *f.scorer, mode),
                                 select_template_random(example, i, f.pool, f.world.verbalizer, *f.scorer, 9, mode)};
            for (const auto& trace : traces) {
                const auto& chosen = f.pool.at(trace.chosen_template_id);
                CHECK(zero_shot_classify(example.text, chosen, f.world.verbalizer, *f.scorer, mode) ==
                      trace.predicted_class);
                double lowest = trace.per_template_ppl.front().ppl;
                for (const auto& s : trace.per_template_ppl) lowest = std::min(lowest, s.ppl);
                if (trace.per_template_ppl.size() == f.pool.size()) {
                    CHECK(trace.per_template_ppl[f.pool.index_of(trace.chosen_template_id)].ppl == lowest);
                }
            }
        }
    }
}

TEST_CASE("the corpus-matched template is selected on in-corpus examples") {
    WorldFixture f;
    std::size_t matched = 0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < f.world.examples.size(); ++i) {
        const auto trace = select_template_ppl(f.world.examples[i], i, f.pool, f.world.verbalizer, *f.scorer);
        matched += trace.chosen_template_id == f.world.matched.id();
        correct += trace.correct();
    }
    const auto n = static_cast<double>(f.world.examples.size());
    CHECK(static_cast<double>(matched) / n >= 0.95);
    CHECK(static_cast<double>(correct) / n >= 0.95);
}

TEST_CASE("selection frequency report") {
    WorldFixture f;
    std::vector<SelectionTrace> all_matched;
    std::vector<SelectionTrace> random;
    for (std::size_t i = 0; i < f.world.examples.size(); ++i) {
        all_matched.push_back(apply_fixed_template(f.world.examples[i], i, f.world.matched, f.world.verbalizer, *f.scorer));
        random.push_back(select_template_random(f.world.examples[i], i, f.pool, f.world.verbalizer, *f.scorer, 1));
    }

    const auto single = selection_frequency_report(all_matched, f.pool);
    CHECK(single[0].frequency == 1.0);
    CHECK(single[1].frequency == 0.0);
    CHECK_FALSE(single[0].accuracy);

    const auto posthoc =
        selection_frequency_report(random, f.pool, PostHocInputs{f.world.examples, f.world.verbalizer, *f.scorer});
    CHECK(posthoc[0].frequency + posthoc[1].frequency == doctest::Approx(1.0).epsilon(1e-9));
    REQUIRE(posthoc[0].accuracy);
    // Post-hoc accuracy covers every example, not only those that picked the template.
    std::size_t correct = 0;
    for (const auto& trace : all_matched) correct += trace.correct();
    CHECK(*posthoc[0].accuracy == static_cast<double>(correct) / static_cast<double>(all_matched.size()));
    CHECK(*posthoc[1].accuracy <= 0.6);

    auto unlabeled = f.world.examples;
    unlabeled[3].label.reset();
    CHECK(code_of([&] {
              selection_frequency_report(random, f.pool, PostHocInputs{unlabeled, f.world.verbalizer, *f.scorer});
          }) == ErrorCode::MissingGoldLabels);
    CHECK(code_of([&] { selection_frequency_report(std::vector<SelectionTrace>{}, f.pool); }) ==
          ErrorCode::InsufficientExamples);
}

TEST_CASE("build_auto_pool") {
    const auto examples = numbered_examples(80);
    const Verbalizer v({{"very", "++"}, {"not", "--"}});

    SUBCASE("fifty examples and two label words give at most one hundred templates") {
        const ScriptedGenerator unique([](const GenerationRequest&, int call) {
            return std::vector<std::string>{"[MASK] generated " + std::to_string(call)};
        });
        const auto pool = build_auto_pool(examples, v, unique);
        CHECK(unique.calls() == 100);
        CHECK(pool.size() == 100);
        CHECK(pool.provenance() == PoolProvenance::AutoGenerated);
        CHECK(pool.generation_prompt() == auto_pool_generation_prompt());
        CHECK(pool.templates()[0].id() == "auto-000");
        CHECK(pool.templates()[0].placement() == Placement::Postfix);
        std::set<std::string> inputs;
        for (const auto& request : unique.requests()) inputs.insert(request.input);
        CHECK(inputs.size() == 50);
    }
    SUBCASE("identical generations collapse to one template") {
        const ScriptedGenerator same(
            [](const GenerationRequest&, int) { return std::vector<std::string>{"[MASK] pleased ."}; });
        const auto pool = build_auto_pool(examples, v, same);
        CHECK(pool.size() == 1);
        AutoPoolOptions keep;
        keep.dedupe = false;
        keep.n_examples = 3;
        CHECK(build_auto_pool(examples, v, same, keep).size() == 6);
    }
    SUBCASE("patterns without a single mask are dropped") {
        const ScriptedGenerator mixed([](const GenerationRequest&, int call) {
            if (call % 2) return std::vector<std::string>{"no mask here"};
            return std::vector<std::string>{"[MASK] number " + std::to_string(call)};
        });
        AutoPoolOptions options;
        options.n_examples = 10;
        const auto pool = build_auto_pool(examples, v, mixed, options);
        CHECK(pool.size() == 10);
    }
    SUBCASE("seeded sampling is reproducible") {
        auto run = [&](std::uint64_t seed) {
            const ScriptedGenerator echo([](const GenerationRequest& r, int) {
                return std::vector<std::string>{r.input + " [MASK] " + r.filled_label_word};
            });
            AutoPoolOptions options;
            options.seed = seed;
            options.n_examples = 5;
            return build_auto_pool(examples, v, echo, options).templates();
        };
        CHECK(run(3) == run(3));
        CHECK(run(3) != run(4));
    }
    SUBCASE("failed cells are retried, then skipped") {
        const ScriptedGenerator flaky([](const GenerationRequest& r, int call) {
            if (call < 2) throw Error(ErrorCode::Transport, "connection reset");
            if (r.filled_label_word == "not") throw Error(ErrorCode::ModelError, "refused");
            return std::vector<std::string>{"[MASK] ok"};
        });
        AutoPoolOptions options;
        options.n_examples = 2;
        options.retries = 3;
        const auto pool = build_auto_pool(examples, v, flaky, options);
        CHECK(pool.size() == 1);
        // 3 calls for the first "very" cell, 4 for each "not" cell, 1 for the second "very" cell.
        CHECK(flaky.calls() == 3 + 4 + 1 + 4);
    }
    SUBCASE("generator that never answers") {
        const ScriptedGenerator down([](const GenerationRequest&, int) -> std::vector<std::string> {
            throw Error(ErrorCode::Transport, "connection refused");
        });
        AutoPoolOptions options;
        options.n_examples = 2;
        CHECK(code_of([&] { build_auto_pool(examples, v, down, options); }) == ErrorCode::GeneratorUnavailable);
        CHECK(down.calls() == 2 * 2 * 4);
    }
    SUBCASE("nothing valid") {
        const ScriptedGenerator invalid([](const GenerationRequest&, int) {
            return std::vector<std::string>{"[MASK] [MASK]", "plain"};
        });
        CHECK(code_of([&] { build_auto_pool(examples, v, invalid); }) == ErrorCode::AllGenerationsInvalid);
        const ScriptedGenerator empty([](const GenerationRequest&, int) { return std::vector<std::string>{}; });
        CHECK(code_of([&] { build_auto_pool(examples, v, empty); }) == ErrorCode::AllGenerationsInvalid);
    }
}
