#include "pplprompt/diagnostics.hpp"

#include <map>
#include <sstream>

#include <json.hpp>

#include "pplprompt/error.hpp"
#include "pplprompt/format.hpp"
#include "pplprompt/perplexity.hpp"

namespace pplprompt {

namespace {

struct Accumulator {
    double tokens = 0.0;
    double ppl = 0.0;
    std::size_t count = 0;
};

}  // namespace

LengthBiasReport length_bias_report(std::span<const NamedTexts> datasets, const MaskedTokenScorer& scorer,
                                    const LengthBucketing& bucketing) {
    if (bucketing.width && *bucketing.width == 0) {
        throw Error(ErrorCode::ConfigError, "bucket width must be positive");
    }
    LengthBiasReport report;
    for (const auto& dataset : datasets) {
        if (dataset.texts.empty()) {
            throw Error(ErrorCode::InsufficientExamples, "dataset \"" + dataset.name + "\" is empty");
        }
        // Keyed by bucket index; ordered so rows come out shortest first.
        std::map<std::size_t, Accumulator> buckets;
        for (const auto& text : dataset.texts) {
            const auto ppl = pseudo_perplexity(text, scorer);
            report.clamp_events += ppl.clamp_events;
            const auto length = ppl.token_count;
            const std::size_t bucket = bucketing.width ? (length - 1) / *bucketing.width : 0;
            auto& acc = buckets[bucket];
            acc.tokens += static_cast<double>(length);
            acc.ppl += ppl.value;
            ++acc.count;
        }
        for (const auto& [bucket, acc] : buckets) {
            LengthBiasRow row;
            row.dataset = dataset.name;
            if (bucketing.width) {
                row.min_tokens = bucket * *bucketing.width + 1;
                row.max_tokens = (bucket + 1) * *bucketing.width;
            }
            row.count = acc.count;
            row.mean_tokens = acc.tokens / static_cast<double>(acc.count);
            row.mean_ppl = acc.ppl / static_cast<double>(acc.count);
            report.rows.push_back(std::move(row));
        }
        if (!bucketing.width) {
            // Single bucket: bounds are the observed extremes.
            std::size_t lo = SIZE_MAX;
            std::size_t hi = 0;
            for (const auto& text : dataset.texts) {
                const auto length = scorer.tokenize(text).size();
                lo = std::min(lo, length);
                hi = std::max(hi, length);
            }
            report.rows.back().min_tokens = lo;
            report.rows.back().max_tokens = hi;
        }
    }
    return report;
}

ReverseLabelRow reverse_label_report(const std::string& dataset_name, std::span<const LabeledExample> examples,
                                     const Template& tmpl, const Verbalizer& verbalizer,
                                     const MaskedTokenScorer& scorer) {
    if (verbalizer.size() != 2) {
        throw Error(ErrorCode::NotBinaryVerbalizer, "reverse-label diagnostic needs exactly 2 label words");
    }
    if (examples.empty()) throw Error(ErrorCode::InsufficientExamples, "dataset \"" + dataset_name + "\" is empty");
    require_single_token_label_words(verbalizer, scorer);

    double gold_total = 0.0;
    double reversed_total = 0.0;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        const auto& example = examples[i];
        if (!example.label || !verbalizer.has_class(*example.label)) {
            throw Error(ErrorCode::UnlabeledExample,
                        "example " + std::to_string(i) + " has no label covered by the verbalizer");
        }
        const auto& gold_word = verbalizer.word_of(*example.label);
        const auto& other_word = verbalizer.entries()[0].label_word == gold_word ? verbalizer.entries()[1].label_word
                                                                                 : verbalizer.entries()[0].label_word;
        const auto prompted = build_prompted_input(example.text, tmpl);
        gold_total += pseudo_perplexity(fill_mask(prompted, gold_word).text, scorer).value;
        reversed_total += pseudo_perplexity(fill_mask(prompted, other_word).text, scorer).value;
    }
    ReverseLabelRow row;
    row.dataset = dataset_name;
    row.template_id = tmpl.id();
    row.count = examples.size();
    row.ppl_gold = gold_total / static_cast<double>(examples.size());
    row.ppl_reversed = reversed_total / static_cast<double>(examples.size());
    row.diff = row.ppl_gold - row.ppl_reversed;
    return row;
}

std::string length_bias_tsv(const LengthBiasReport& report) {
    std::ostringstream out;
    out << "dataset\tmin_tokens\tmax_tokens\tmean_tokens\tmean_ppl\tcount\n";
    for (const auto& row : report.rows) {
        out << row.dataset << '\t' << row.min_tokens << '\t' << row.max_tokens << '\t' << fixed6(row.mean_tokens)
            << '\t' << fixed6(row.mean_ppl) << '\t' << row.count << '\n';
    }
    return out.str();
}

std::string length_bias_jsonl(const LengthBiasReport& report) {
    std::ostringstream out;
    for (const auto& row : report.rows) {
        nlohmann::ordered_json record;
        record["dataset"] = row.dataset;
        record["min_tokens"] = row.min_tokens;
        record["max_tokens"] = row.max_tokens;
        record["mean_tokens"] = round6(row.mean_tokens);
        record["mean_ppl"] = round6(row.mean_ppl);
        record["count"] = row.count;
        out << record.dump() << '\n';
    }
    return out.str();
}

std::string reverse_label_tsv(std::span<const ReverseLabelRow> rows) {
    std::ostringstream out;
    out << "dataset\ttemplate_id\tppl_g\tppl_r\tdiff\tcount\n";
    for (const auto& row : rows) {
        out << row.dataset << '\t' << row.template_id << '\t' << fixed6(row.ppl_gold) << '\t'
            << fixed6(row.ppl_reversed) << '\t' << fixed6(row.diff) << '\t' << row.count << '\n';
    }
    return out.str();
}

std::string reverse_label_jsonl(std::span<const ReverseLabelRow> rows) {
    std::ostringstream out;
    for (const auto& row : rows) {
        nlohmann::ordered_json record;
        record["dataset"] = row.dataset;
        record["template_id"] = row.template_id;
        record["ppl_g"] = round6(row.ppl_gold);
        record["ppl_r"] = round6(row.ppl_reversed);
        record["diff"] = round6(row.diff);
        record["count"] = row.count;
        out << record.dump() << '\n';
    }
    return out.str();
}

}  // namespace pplprompt
