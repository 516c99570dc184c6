#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <thread>

#include "oracles.hpp"
#include "pplprompt/caching_scorer.hpp"
#include "pplprompt/count_scorer.hpp"
#include "pplprompt/error.hpp"
#include "pplprompt/perplexity.hpp"
#include "pplprompt/seeding.hpp"
#include "pplprompt/table_scorer.hpp"
#include "synthetic.hpp"

using namespace pplprompt;
using pplprompt::testing::brute_force_perplexity;
using pplprompt::testing::relative_error;

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

/// Table rows giving each token of `tokens` the log-probability in `logprobs`
/// in its own masked context.
std::vector<TableEntry> sequence_rows(const std::vector<std::string>& tokens, const std::vector<double>& logprobs) {
    std::vector<TableEntry> rows;
    for (std::size_t i = 0; i < tokens.size(); ++i) rows.push_back({masked_context(tokens, i), tokens[i], logprobs[i]});
    return rows;
}

std::string join(const std::vector<std::string>& tokens) {
    std::string out;
    for (const auto& t : tokens) out += (out.empty() ? "" : " ") + t;
    return out;
}

}  // namespace

TEST_CASE("pseudo_perplexity worked cases") {
    SUBCASE("certain single token has perplexity one") {
        const TableScorer scorer({{"[MASK]", "a", 0.0}});
        const auto ppl = pseudo_perplexity("a", scorer);
        CHECK(ppl.value == 1.0);
        CHECK(ppl.token_count == 1);
    }
    SUBCASE("uniform scorer has perplexity equal to vocabulary size") {
        const TableScorer scorer(testing::uniform_table(8));
        CHECK(pseudo_perplexity("t0 t1 t2 t3 t4", scorer).value == doctest::Approx(8.0).epsilon(1e-12));
        CHECK(scorer.vocab_size() == 8);
    }
    SUBCASE("probabilities 1/2, 1/4, 1/8 give 4") {
        const TableScorer scorer(testing::three_token_table());
        const auto ppl = pseudo_perplexity("a b c", scorer);
        CHECK(std::abs(ppl.value - 4.0) <= 1e-12);
        CHECK(testing::inverse_geometric_mean({0.5, 0.25, 0.125}) == doctest::Approx(4.0).epsilon(1e-12));
        CHECK(ppl.per_token_nll.size() == 3);
        CHECK(ppl.per_token_nll[2] == doctest::Approx(std::log(8.0)));
    }
}

TEST_CASE("pseudo_perplexity errors") {
    const TableScorer scorer(testing::three_token_table());
    CHECK(code_of([&] { pseudo_perplexity("", scorer); }) == ErrorCode::EmptySequence);
    CHECK(code_of([&] { pseudo_perplexity("a b d", scorer); }) == ErrorCode::ScorerFailure);
    CHECK(code_of([] { perplexity_from_logprobs(std::vector<double>{}); }) == ErrorCode::EmptySequence);
    CHECK(code_of([] { perplexity_from_logprobs(std::vector<double>{std::nan("")}); }) == ErrorCode::ScorerFailure);
}

TEST_CASE("degenerate probabilities are clamped and counted") {
    const auto ppl = perplexity_from_logprobs(std::vector<double>{-1000.0, -1.0, 1e-12});
    CHECK(ppl.clamp_events == 2);
    CHECK(ppl.per_token_nll[0] == kMaxTokenNll);
    CHECK(ppl.per_token_nll[2] == 0.0);
    CHECK(std::isfinite(ppl.value));
    CHECK(ppl.value == doctest::Approx(std::exp(51.0 / 3.0)));
}

TEST_CASE("property: pseudo_perplexity matches a brute-force loop on random tables") {
    SeededRng rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        const auto length = 1 + rng.below(20);
        std::vector<std::string> tokens;
        std::vector<double> logprobs;
        for (std::size_t i = 0; i < length; ++i) {
            tokens.push_back("w" + std::to_string(rng.below(6)));
            logprobs.push_back(-static_cast<double>(rng.below(1000000)) / 1e5);
        }
        const TableScorer scorer(sequence_rows(tokens, logprobs));
        const auto ppl = pseudo_perplexity(join(tokens), scorer);
        CHECK(relative_error(ppl.value, brute_force_perplexity(logprobs)) <= 1e-9);

        double mean = 0.0;
        for (const double nll : ppl.per_token_nll) mean += nll;
        mean /= static_cast<double>(ppl.per_token_nll.size());
        CHECK(relative_error(ppl.value, std::exp(mean)) <= 1e-9);
        CHECK(ppl.value >= 1.0);
    }
}

TEST_CASE("property: appending a token moves perplexity toward its NLL") {
    SeededRng rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        const auto length = 2 + rng.below(10);
        std::vector<std::string> tokens;
        std::vector<double> logprobs;
        double mean_nll = 0.0;
        for (std::size_t i = 0; i < length; ++i) {
            tokens.push_back("w" + std::to_string(i));
            logprobs.push_back(-(0.5 + static_cast<double>(rng.below(400)) / 100.0));
            mean_nll -= logprobs.back();
        }
        mean_nll /= static_cast<double>(length);

        for (const double offset : {-0.25, +0.25}) {
            auto longer_tokens = tokens;
            auto longer_logprobs = logprobs;
            longer_tokens.push_back("extra");
            longer_logprobs.push_back(-std::max(0.0, mean_nll + offset));
            auto rows = sequence_rows(tokens, logprobs);
            const auto more = sequence_rows(longer_tokens, longer_logprobs);
            rows.insert(rows.end(), more.begin(), more.end());
            const TableScorer scorer(rows);

            const double before = pseudo_perplexity(join(tokens), scorer).value;
            const double after = pseudo_perplexity(join(longer_tokens), scorer).value;
            if (offset < 0) {
                CHECK(after < before);
            } else {
                CHECK(after > before);
            }
        }
    }
}

TEST_CASE("property: scaling every probability by k scales perplexity by 1/k") {
    SeededRng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::string> tokens;
        std::vector<double> logprobs;
        for (std::size_t i = 0; i < 1 + rng.below(12); ++i) {
            tokens.push_back("w" + std::to_string(i));
            logprobs.push_back(-static_cast<double>(rng.below(300)) / 100.0);
        }
        const double base = pseudo_perplexity(join(tokens), TableScorer(sequence_rows(tokens, logprobs))).value;
        for (const double k : {1.0, 0.5, 0.1}) {
            auto scaled = logprobs;
            for (auto& lp : scaled) lp += std::log(k);
            const double ppl = pseudo_perplexity(join(tokens), TableScorer(sequence_rows(tokens, scaled))).value;
            CHECK(relative_error(ppl, base / k) <= 1e-12);
        }
    }
}

TEST_CASE("prompt_perplexity averages perplexity values of each fill") {
    const Template t("t", "[MASK]", Placement::Postfix);
    const TableScorer scorer({{"[MASK] w1", "q", std::log(0.25)},
                              {"q [MASK]", "w1", std::log(0.25)},
                              {"[MASK] w2", "q", std::log(1.0 / 6.0)},
                              {"q [MASK]", "w2", std::log(1.0 / 6.0)}});
    const Verbalizer v({{"w1", "pos"}, {"w2", "neg"}});
    const auto ppl = prompt_perplexity("q", t, v, scorer);
    REQUIRE(ppl.per_word.size() == 2);
    CHECK(ppl.per_word[0].perplexity.value == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(ppl.per_word[1].perplexity.value == doctest::Approx(6.0).epsilon(1e-12));
    CHECK(ppl.mean == doctest::Approx(5.0).epsilon(1e-12));

    SUBCASE("equal fills reduce to the single-fill value") {
        const TableScorer same({{"[MASK] w1", "q", std::log(0.25)},
                                {"q [MASK]", "w1", std::log(0.25)},
                                {"[MASK] w2", "q", std::log(0.25)},
                                {"q [MASK]", "w2", std::log(0.25)}});
        const auto equal = prompt_perplexity("q", t, v, same);
        CHECK(equal.mean == equal.per_word[0].perplexity.value);
    }
    SUBCASE("verbalizer order does not change the mean") {
        const Verbalizer reversed({{"w2", "neg"}, {"w1", "pos"}});
        CHECK(prompt_perplexity("q", t, reversed, scorer).mean == ppl.mean);
    }
    SUBCASE("multi-token label words are rejected") {
        const Verbalizer multi({{"w1", "pos"}, {"w2 w3", "neg"}});
        CHECK(code_of([&] { prompt_perplexity("q", t, multi, scorer); }) == ErrorCode::MultiTokenLabelWord);
    }
}

TEST_CASE("property: prompt_perplexity is invariant under verbalizer permutations") {
    const auto world = testing::make_sentiment_world(20, 5);
    const CountScorer scorer(CountScorer::from_text(world.corpus_text(), 1.0));
    const Verbalizer three({{"very", "a"}, {"not", "b"}, {"so", "c"}});
    std::vector<VerbalizerEntry> entries = three.entries();
    std::sort(entries.begin(), entries.end(), [](auto& x, auto& y) { return x.label_word < y.label_word; });
    for (const auto& example : world.examples) {
        const double reference = prompt_perplexity(example.text, world.matched, three, scorer).mean;
        auto perm = entries;
        do {
            CHECK(prompt_perplexity(example.text, world.matched, Verbalizer(perm), scorer).mean == reference);
        } while (std::next_permutation(perm.begin(), perm.end(),
                                       [](auto& x, auto& y) { return x.label_word < y.label_word; }));
    }
}

TEST_CASE("mask_fill_logprobs restricts the mask distribution to label words") {
    const Template t("t", "it was [MASK] .", Placement::Prefix);
    const TableScorer scorer({{"it was [MASK] . x", "good", std::log(0.9)},
                              {"it was [MASK] . x", "bad", std::log(0.1)}});
    const Verbalizer v({{"good", "++"}, {"bad", "--"}});
    const auto scores = mask_fill_logprobs("x", t, v, scorer);
    CHECK(scores.at("good") == std::log(0.9));
    CHECK(scores.at("bad") == std::log(0.1));

    const Verbalizer reordered({{"bad", "--"}, {"good", "++"}});
    CHECK(mask_fill_logprobs("x", t, reordered, scorer) == scores);

    const Verbalizer unknown({{"good", "++"}, {"meh", "--"}});
    CHECK(code_of([&] { mask_fill_logprobs("x", t, unknown, scorer); }) == ErrorCode::UnknownLabelWord);
}

TEST_CASE("table scorer validation") {
    CHECK(code_of([] { TableScorer(std::vector<TableEntry>{}); }) == ErrorCode::MalformedTable);
    CHECK(code_of([] { TableScorer({{"*", "a", 0.1}}); }) == ErrorCode::MalformedTable);
    CHECK(code_of([] { TableScorer({{"*", "a", -INFINITY}}); }) == ErrorCode::MalformedTable);
    CHECK(code_of([] { TableScorer({{"*", "a", std::log(0.7)}, {"*", "b", std::log(0.7)}}); }) ==
          ErrorCode::MalformedTable);
    CHECK(code_of([] { TableScorer({{"*", "a", -1.0}, {"*", "a", -2.0}}); }) == ErrorCode::MalformedTable);
    CHECK(code_of([] { TableScorer::parse("{\"context\": \"*\"}"); }) == ErrorCode::MalformedTable);

    const auto parsed = TableScorer::parse(testing::table_to_jsonl(testing::three_token_table()));
    CHECK(pseudo_perplexity("a  b   c", parsed).value == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("count scorer") {
    SUBCASE("memorization limit") {
        const std::string corpus = "the cat sat down\nthe cat sat down\n";
        const auto near_zero = CountScorer::from_text(corpus, 1e-9);
        CHECK(pseudo_perplexity("the cat sat down", near_zero).value == doctest::Approx(1.0).epsilon(1e-6));
        const auto smoothed = CountScorer::from_text(corpus, 1.0);
        CHECK(pseudo_perplexity("the cat sat down", smoothed).value > 1.0);
    }
    SUBCASE("hand-computed two-sentence corpus") {
        // V = {x, y, z, w, [MASK], <s>, </s>}, alpha = 1.
        // "x y z": p(x|<s>,y) = 3/9, p(y|x,z) = 2/8, p(z|y,</s>) = 2/9 -> 54^(1/3)
        // "z y x": p(z|<s>,y) = 1/9, p(y|z,x) = 1/7 (unseen), p(x|y,</s>) = 1/9 -> 567^(1/3)
        const auto scorer = CountScorer::from_text("x y z\nx y w\n", 1.0);
        CHECK(scorer.vocab_size() == 7);
        const double present = pseudo_perplexity("x y z", scorer).value;
        const double absent = pseudo_perplexity("z y x", scorer).value;
        CHECK(present == doctest::Approx(std::cbrt(54.0)).epsilon(1e-12));
        CHECK(absent == doctest::Approx(std::cbrt(567.0)).epsilon(1e-12));
        CHECK(absent > present);
    }
    SUBCASE("every context distribution sums to one") {
        const auto world = testing::make_sentiment_world(10, 1);
        const auto scorer = CountScorer::from_text(world.corpus_text(), 0.3);
        const auto& vocab = scorer.vocabulary();
        for (const auto& left : vocab) {
            for (const auto& right : vocab) {
                double total = 0.0;
                for (const auto& token : vocab) total += scorer.probability(left, token, right);
                CHECK(std::abs(total - 1.0) <= 1e-9);
            }
        }
    }
    SUBCASE("errors") {
        CHECK(code_of([] { CountScorer::from_text("\n\n", 1.0); }) == ErrorCode::EmptyCorpus);
        CHECK(code_of([] { CountScorer::from_text("a b", 0.0); }) == ErrorCode::ScorerFailure);
        const auto scorer = CountScorer::from_text("a b", 1.0);
        const std::vector<std::string> oov{"zzz"};
        CHECK(code_of([&] { scorer.mask_candidate_logprobs("a [MASK]", oov); }) == ErrorCode::UnknownLabelWord);
        const std::vector<std::string> known{"b"};
        CHECK(code_of([&] { scorer.mask_candidate_logprobs("a [MASK] [MASK]", known); }) == ErrorCode::ScorerFailure);
    }
    SUBCASE("deterministic") {
        const auto world = testing::make_sentiment_world(10, 2);
        const auto a = CountScorer::from_text(world.corpus_text(), 0.5);
        const auto b = CountScorer::from_text(world.corpus_text(), 0.5);
        for (const auto& line : world.corpus) CHECK(a.token_logprobs(line) == b.token_logprobs(line));
    }
}

TEST_CASE("caching scorer agrees with the scorer it wraps, also under concurrency") {
    const auto world = testing::make_sentiment_world(20, 9);
    auto inner = std::make_shared<CountScorer>(CountScorer::from_text(world.corpus_text(), 1.0));
    const CachingScorer cached(inner);
    const std::vector<std::string> words{"very", "not"};
    for (const auto& line : world.corpus) {
        CHECK(cached.token_logprobs(line) == inner->token_logprobs(line));
        CHECK(cached.token_logprobs(line) == inner->token_logprobs(line));
    }
    const auto batch = cached.token_logprobs_batch(world.corpus);
    for (std::size_t i = 0; i < world.corpus.size(); ++i) CHECK(batch[i] == inner->token_logprobs(world.corpus[i]));

    std::vector<std::vector<double>> results(8);
    {
        std::vector<std::jthread> threads;
        for (std::size_t t = 0; t < results.size(); ++t) {
            threads.emplace_back([&, t] {
                results[t] = cached.mask_candidate_logprobs(world.examples[t].text + " [MASK] pleased .", words);
            });
        }
    }
    for (std::size_t t = 0; t < results.size(); ++t) {
        CHECK(results[t] == inner->mask_candidate_logprobs(world.examples[t].text + " [MASK] pleased .", words));
    }
}
