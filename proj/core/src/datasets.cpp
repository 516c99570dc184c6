#include "pplprompt/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "pplprompt/error.hpp"
#include "pplprompt/seeding.hpp"

namespace pplprompt {

Dataset::Dataset(std::string name, std::vector<LabeledExample> examples)
    : name_(std::move(name)), examples_(std::move(examples)) {
    if (name_.empty()) throw Error(ErrorCode::ConfigError, "dataset name is empty");
    std::set<std::string> labels;
    for (const auto& example : examples_) {
        if (example.label) labels.insert(*example.label);
    }
    class_labels_.assign(labels.begin(), labels.end());
}

std::map<std::string, std::size_t> Dataset::class_counts() const {
    std::map<std::string, std::size_t> counts;
    for (const auto& label : class_labels_) counts[label] = 0;
    for (const auto& example : examples_) {
        if (example.label) ++counts[*example.label];
    }
    return counts;
}

DatasetFormat parse_dataset_format(std::string_view name) {
    if (name == "jsonl") return DatasetFormat::Jsonl;
    if (name == "tsv") return DatasetFormat::Tsv;
    throw Error(ErrorCode::ConfigError, "dataset format must be jsonl or tsv, got \"" + std::string(name) + "\"");
}

DatasetFormat format_from_extension(const std::filesystem::path& path) {
    return path.extension() == ".tsv" ? DatasetFormat::Tsv : DatasetFormat::Jsonl;
}

namespace {

Error parse_error(std::size_t line, const std::string& what) {
    return Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + what);
}

LabeledExample parse_jsonl_row(const std::string& line, std::size_t line_no) {
    nlohmann::json record;
    try {
        record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw parse_error(line_no, e.what());
    }
    if (!record.is_object()) throw parse_error(line_no, "expected an object");
    const auto text = record.find("text");
    if (text == record.end() || !text->is_string()) throw parse_error(line_no, "missing string field \"text\"");

    LabeledExample example{std::string(trim(text->get<std::string>())), std::nullopt};
    if (const auto label = record.find("label"); label != record.end() && !label->is_null()) {
        if (!label->is_string()) throw parse_error(line_no, "\"label\" must be a string");
        example.label = label->get<std::string>();
    }
    return example;
}

LabeledExample parse_tsv_row(const std::string& line, std::size_t line_no) {
    const auto tab = line.find('\t');
    LabeledExample example;
    if (tab == std::string::npos) {
        example.text = std::string(trim(line));
    } else {
        example.text = std::string(trim(std::string_view(line).substr(0, tab)));
        const auto label = trim(std::string_view(line).substr(tab + 1));
        if (label.find('\t') != std::string_view::npos) throw parse_error(line_no, "more than two columns");
        if (!label.empty()) example.label = std::string(label);
    }
    return example;
}

}  // namespace

Dataset parse_dataset(std::string_view content, DatasetFormat format, const LoadOptions& options) {
    std::vector<LabeledExample> examples;
    std::istringstream stream{std::string(content)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(stream, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (format == DatasetFormat::Tsv && options.header && line_no == 1) continue;
        if (trim(line).empty()) continue;
        auto example = format == DatasetFormat::Jsonl ? parse_jsonl_row(line, line_no) : parse_tsv_row(line, line_no);
        if (example.text.empty()) throw parse_error(line_no, "empty text");
        examples.push_back(std::move(example));
    }
    Dataset dataset(options.name.empty() ? std::string("dataset") : options.name, std::move(examples));
    for (const auto& [label, count] : dataset.class_counts()) {
        spdlog::debug("{}: class \"{}\" has {} examples", dataset.name(), label, count);
    }
    return dataset;
}

Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format, const LoadOptions& options) {
    LoadOptions resolved = options;
    if (resolved.name.empty()) resolved.name = path.stem().string();
    try {
        return parse_dataset(read_text_file(path), format, resolved);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::ParseError) throw Error(e.code(), path.string() + ": " + e.what());
        throw;
    }
}

std::vector<Dataset> load_datasets(std::span<const std::filesystem::path> paths, const LoadOptions& options) {
    std::vector<Dataset> out;
    std::set<std::string> names;
    for (const auto& path : paths) {
        LoadOptions per_file = options;
        per_file.name.clear();
        out.push_back(load_dataset(path, format_from_extension(path), per_file));
        if (!names.insert(out.back().name()).second) {
            throw Error(ErrorCode::DuplicateName, "dataset name \"" + out.back().name() + "\" is used twice");
        }
    }
    return out;
}

std::string dataset_to_jsonl(const Dataset& dataset) {
    std::string out;
    for (const auto& example : dataset.examples()) {
        nlohmann::ordered_json record;
        record["text"] = example.text;
        if (example.label) record["label"] = *example.label;
        out += record.dump();
        out += '\n';
    }
    return out;
}

Dataset subsample_balanced(const Dataset& dataset, const SubsampleSpec& spec, const MaskedTokenScorer& tokenizer) {
    if (spec.min_tokens < 1 || spec.min_tokens > spec.max_tokens) {
        throw Error(ErrorCode::ConfigError, "token bounds must satisfy 1 <= min_tokens <= max_tokens");
    }

    std::vector<std::pair<std::string, double>> balance = spec.balance;
    if (balance.empty()) {
        for (const auto& label : dataset.class_labels()) {
            balance.emplace_back(label, 1.0 / static_cast<double>(dataset.class_labels().size()));
        }
    }
    if (balance.empty()) throw Error(ErrorCode::InsufficientExamples, "dataset has no labeled examples");
    double proportion_total = 0.0;
    std::unordered_map<std::string, std::size_t> class_slot;
    for (std::size_t c = 0; c < balance.size(); ++c) {
        if (balance[c].second < 0.0) throw Error(ErrorCode::ConfigError, "class proportions must be non-negative");
        proportion_total += balance[c].second;
        if (!class_slot.emplace(balance[c].first, c).second) {
            throw Error(ErrorCode::ConfigError, "class \"" + balance[c].first + "\" listed twice in balance");
        }
    }
    if (std::abs(proportion_total - 1.0) > 1e-9) throw Error(ErrorCode::ConfigError, "class proportions must sum to 1");

    // Length filter, with token counts cached per text.
    std::unordered_map<std::string, std::size_t> lengths;
    std::vector<std::vector<std::size_t>> survivors(balance.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const auto& example = dataset.examples()[i];
        if (!example.label) {
            throw Error(ErrorCode::UnlabeledExample, "example " + std::to_string(i) + " has no label");
        }
        const auto slot = class_slot.find(*example.label);
        if (slot == class_slot.end()) {
            throw Error(ErrorCode::ConfigError, "class \"" + *example.label + "\" is missing from the balance spec");
        }
        auto [it, fresh] = lengths.try_emplace(example.text, 0);
        if (fresh) it->second = tokenizer.tokenize(example.text).size();
        if (it->second >= spec.min_tokens && it->second <= spec.max_tokens) survivors[slot->second].push_back(i);
    }

    // Largest total that every class with a non-zero share can supply.
    double total = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < balance.size(); ++c) {
        if (balance[c].second == 0.0) continue;
        if (survivors[c].empty()) {
            throw Error(ErrorCode::InsufficientExamples,
                        "class \"" + balance[c].first + "\" has no examples within the token bounds");
        }
        total = std::min(total, static_cast<double>(survivors[c].size()) / balance[c].second);
    }
    total = std::floor(total + 1e-9);

    std::vector<std::size_t> keep;
    for (std::size_t c = 0; c < balance.size(); ++c) {
        const auto target = std::min(survivors[c].size(),
                                     static_cast<std::size_t>(std::floor(balance[c].second * total + 1e-9)));
        SeededRng rng(spec.seed, c);
        for (const auto pick : rng.sample_indices(survivors[c].size(), target)) keep.push_back(survivors[c][pick]);
    }
    std::sort(keep.begin(), keep.end());

    std::vector<LabeledExample> examples;
    examples.reserve(keep.size());
    for (const auto i : keep) examples.push_back(dataset.examples()[i]);
    return Dataset(dataset.name(), std::move(examples));
}

Splits make_splits(const Dataset& dataset, const SplitSpec& spec) {
    if (spec.k_train_splits == 0 || spec.shots_per_class == 0) {
        throw Error(ErrorCode::ConfigError, "k_train_splits and shots_per_class must be positive");
    }
    const auto& classes = dataset.class_labels();
    if (classes.empty()) throw Error(ErrorCode::InsufficientExamples, "dataset has no labeled examples");

    std::vector<std::vector<std::size_t>> by_class(classes.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const auto& label = dataset.examples()[i].label;
        if (!label) throw Error(ErrorCode::UnlabeledExample, "example " + std::to_string(i) + " has no label");
        const auto c = static_cast<std::size_t>(std::lower_bound(classes.begin(), classes.end(), *label) -
                                                classes.begin());
        by_class[c].push_back(i);
    }
    const auto needed = spec.disjoint ? spec.k_train_splits * spec.shots_per_class : spec.shots_per_class;
    for (std::size_t c = 0; c < classes.size(); ++c) {
        if (by_class[c].size() < needed) {
            throw Error(ErrorCode::InsufficientExamples, "class \"" + classes[c] + "\" has " +
                                                             std::to_string(by_class[c].size()) + " examples, needs " +
                                                             std::to_string(needed));
        }
    }

    std::vector<std::vector<std::size_t>> split_indices(spec.k_train_splits);
    if (spec.disjoint) {
        for (std::size_t c = 0; c < classes.size(); ++c) {
            SeededRng rng(spec.seed, c);
            const auto picks = rng.sample_indices(by_class[c].size(), needed);
            for (std::size_t j = 0; j < picks.size(); ++j) {
                split_indices[j / spec.shots_per_class].push_back(by_class[c][picks[j]]);
            }
        }
    } else {
        for (std::size_t s = 0; s < spec.k_train_splits; ++s) {
            for (std::size_t c = 0; c < classes.size(); ++c) {
                SeededRng rng(mix_seed(spec.seed, s), c);
                for (const auto pick : rng.sample_indices(by_class[c].size(), spec.shots_per_class)) {
                    split_indices[s].push_back(by_class[c][pick]);
                }
            }
        }
    }

    std::vector<bool> used(dataset.size(), false);
    Splits out{{}, Dataset(dataset.name() + "-dev", {}), Dataset(dataset.name() + "-test", {})};
    for (std::size_t s = 0; s < spec.k_train_splits; ++s) {
        std::vector<LabeledExample> examples;
        for (const auto i : split_indices[s]) {
            used[i] = true;
            examples.push_back(dataset.examples()[i]);
        }
        out.train.emplace_back(dataset.name() + "-train-" + std::to_string(s), std::move(examples));
    }

    std::vector<std::size_t> remainder;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        if (!used[i]) remainder.push_back(i);
    }
    SeededRng rng(spec.seed, spec.k_train_splits + 1);
    rng.shuffle(remainder);
    const auto dev_size = std::min(remainder.size(), spec.dev_multiple * spec.shots_per_class * classes.size());
    if (remainder.size() <= dev_size) {
        throw Error(ErrorCode::InsufficientExamples, "no examples left for the test split");
    }
    std::vector<LabeledExample> dev;
    std::vector<LabeledExample> test;
    for (std::size_t j = 0; j < remainder.size(); ++j) {
        (j < dev_size ? dev : test).push_back(dataset.examples()[remainder[j]]);
    }
    out.dev = Dataset(dataset.name() + "-dev", std::move(dev));
    out.test = Dataset(dataset.name() + "-test", std::move(test));
    return out;
}

}  // namespace pplprompt
