#include <doctest.h>

#include <cmath>

#include <json.hpp>

#include "oracles.hpp"
#include "pplprompt/count_scorer.hpp"
#include "pplprompt/diagnostics.hpp"
#include "pplprompt/error.hpp"
#include "pplprompt/perplexity.hpp"
#include "pplprompt/seeding.hpp"
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

constexpr std::size_t kWords = 20;

/// Context-free table: twenty content words at 1% each plus a filler token "h" at 50%.
TableScorer filler_table() {
    std::vector<TableEntry> rows;
    for (std::size_t i = 0; i < kWords; ++i) rows.push_back({std::string(kAnyContext), "w" + std::to_string(i), std::log(0.01)});
    rows.push_back({std::string(kAnyContext), "h", std::log(0.5)});
    return TableScorer(rows);
}

std::vector<std::string> random_sentences(std::size_t n, std::uint64_t seed) {
    SeededRng rng(seed);
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) {
        std::string text;
        const auto length = 3 + rng.below(8);
        for (std::size_t k = 0; k < length; ++k) text += (k ? " w" : "w") + std::to_string(rng.below(kWords));
        out.push_back(text);
    }
    return out;
}

}  // namespace

TEST_CASE("length bias: sentences padded with likely tokens score lower perplexity") {
    const auto scorer = filler_table();
    NamedTexts a{"A", random_sentences(30, 1)};
    NamedTexts b{"B", a.texts};
    for (auto& text : b.texts) {
        for (int i = 0; i < 10; ++i) text += " h";
    }
    const std::vector<NamedTexts> datasets{a, b};
    const auto report = length_bias_report(datasets, scorer);
    REQUIRE(report.rows.size() == 2);
    CHECK(report.rows[0].dataset == "A");
    CHECK(report.rows[1].mean_ppl < report.rows[0].mean_ppl);
    CHECK(report.rows[1].mean_tokens > report.rows[0].mean_tokens);
    CHECK(report.rows[1].mean_tokens == doctest::Approx(report.rows[0].mean_tokens + 10.0));

    SUBCASE("means match an independent recomputation") {
        for (std::size_t d = 0; d < datasets.size(); ++d) {
            double ppl_sum = 0.0;
            double length_sum = 0.0;
            for (const auto& text : datasets[d].texts) {
                std::vector<double> logprobs;
                std::size_t tokens = 0;
                for (std::size_t pos = 0; (pos = text.find_first_not_of(' ', pos)) != std::string::npos; ++tokens) {
                    const auto end = text.find(' ', pos);
                    logprobs.push_back(text.substr(pos, end - pos) == "h" ? std::log(0.5) : std::log(0.01));
                    pos = end == std::string::npos ? text.size() : end;
                }
                ppl_sum += testing::brute_force_perplexity(logprobs);
                length_sum += static_cast<double>(tokens);
            }
            const auto n = static_cast<double>(datasets[d].texts.size());
            CHECK(testing::relative_error(report.rows[d].mean_ppl, ppl_sum / n) <= 1e-9);
            CHECK(testing::relative_error(report.rows[d].mean_tokens, length_sum / n) <= 1e-9);
            CHECK(report.rows[d].count == datasets[d].texts.size());
        }
    }
}

TEST_CASE("length bias bucketing") {
    const auto scorer = filler_table();
    const std::vector<NamedTexts> single{{"only", random_sentences(25, 4)}};
    const auto one = length_bias_report(single, scorer);
    REQUIRE(one.rows.size() == 1);
    CHECK(one.rows[0].count == 25);

    const auto bucketed = length_bias_report(single, scorer, LengthBucketing{4});
    std::size_t total = 0;
    for (const auto& row : bucketed.rows) {
        CHECK(row.count > 0);
        CHECK((row.min_tokens - 1) % 4 == 0);
        CHECK(row.max_tokens == row.min_tokens + 3);
        CHECK(row.mean_tokens >= static_cast<double>(row.min_tokens));
        CHECK(row.mean_tokens <= static_cast<double>(row.max_tokens));
        total += row.count;
    }
    CHECK(total == 25);
    // Lengths 3..10 fall in [1,4], [5,8] and [9,12].
    CHECK(bucketed.rows.size() == 3);

    const std::vector<NamedTexts> empty{{"none", {}}};
    CHECK(code_of([&] { length_bias_report(empty, scorer); }) == ErrorCode::InsufficientExamples);

    const auto tsv = length_bias_tsv(bucketed);
    CHECK(tsv.rfind("dataset\tmin_tokens\tmax_tokens\tmean_tokens\tmean_ppl\tcount\n", 0) == 0);
    std::size_t lines = 0;
    for (std::string::size_type pos = 0; (pos = length_bias_jsonl(bucketed).find('\n', pos)) != std::string::npos;
         ++pos) {
        ++lines;
    }
    CHECK(lines == bucketed.rows.size());
}

TEST_CASE("reverse-label diagnostic") {
    const Verbalizer v({{"t0", "++"}, {"t1", "--"}});
    const Template t("rev", "[MASK] t2", Placement::Postfix);
    std::vector<LabeledExample> balanced;
    for (int i = 0; i < 10; ++i) {
        balanced.push_back({"t3 t4 t5", "++"});
        balanced.push_back({"t5 t3", "--"});
    }

    SUBCASE("a scorer symmetric in the label words gives exactly zero") {
        const TableScorer uniform(testing::uniform_table(8));
        const auto row = reverse_label_report("sym", balanced, t, v, uniform);
        CHECK(row.diff == 0.0);
        CHECK(row.ppl_gold == row.ppl_reversed);
        CHECK(row.count == 20);
        CHECK(row.template_id == "rev");
    }

    SUBCASE("a count model trained on gold fills prefers the gold word") {
        const auto world = testing::make_sentiment_world(30, 8);
        const auto scorer = CountScorer::from_text(world.corpus_text(), 1.0);
        const auto row = reverse_label_report("world", world.examples, world.matched, world.verbalizer, scorer);
        CHECK(row.diff < 0.0);
        CHECK(row.diff == row.ppl_gold - row.ppl_reversed);

        const auto swapped =
            reverse_label_report("world", world.examples, world.matched, world.verbalizer.with_swapped_classes(), scorer);
        CHECK(swapped.diff == -row.diff);
        CHECK(swapped.ppl_gold == row.ppl_reversed);
    }

    SUBCASE("errors") {
        const TableScorer uniform(testing::uniform_table(8));
        const Verbalizer three({{"t0", "a"}, {"t1", "b"}, {"t6", "c"}});
        CHECK(code_of([&] { reverse_label_report("x", balanced, t, three, uniform); }) ==
              ErrorCode::NotBinaryVerbalizer);
        auto unlabeled = balanced;
        unlabeled[4].label.reset();
        CHECK(code_of([&] { reverse_label_report("x", unlabeled, t, v, uniform); }) == ErrorCode::UnlabeledExample);
        auto foreign = balanced;
        foreign[0].label = "neutral";
        CHECK(code_of([&] { reverse_label_report("x", foreign, t, v, uniform); }) == ErrorCode::UnlabeledExample);
        CHECK(code_of([&] { reverse_label_report("x", std::vector<LabeledExample>{}, t, v, uniform); }) ==
              ErrorCode::InsufficientExamples);
    }

    SUBCASE("output formats") {
        const TableScorer uniform(testing::uniform_table(8));
        const std::vector<ReverseLabelRow> rows{reverse_label_report("sym", balanced, t, v, uniform)};
        CHECK(reverse_label_tsv(rows) ==
              "dataset\ttemplate_id\tppl_g\tppl_r\tdiff\tcount\n"
              "sym\trev\t8.000000\t8.000000\t0.000000\t20\n");
        const auto j = nlohmann::json::parse(reverse_label_jsonl(rows));
        CHECK(j.at("diff").get<double>() == 0.0);
        CHECK(j.at("count").get<int>() == 20);
    }
}
