#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pplprompt/prompt.hpp"
#include "pplprompt/scorer.hpp"

namespace pplprompt {

/// Named collection of examples. class_labels is sorted and holds every label
/// that occurs in the examples.
class Dataset {
public:
    Dataset(std::string name, std::vector<LabeledExample> examples);

    const std::string& name() const noexcept { return name_; }
    const std::vector<LabeledExample>& examples() const noexcept { return examples_; }
    const std::vector<std::string>& class_labels() const noexcept { return class_labels_; }
    std::size_t size() const noexcept { return examples_.size(); }

    std::map<std::string, std::size_t> class_counts() const;

    friend bool operator==(const Dataset&, const Dataset&) = default;

private:
    std::string name_;
    std::vector<LabeledExample> examples_;
    std::vector<std::string> class_labels_;
};

enum class DatasetFormat { Jsonl, Tsv };

DatasetFormat parse_dataset_format(std::string_view name);
/// ".tsv" maps to Tsv, anything else to Jsonl.
DatasetFormat format_from_extension(const std::filesystem::path& path);

struct LoadOptions {
    /// Defaults to the file stem.
    std::string name;
    /// Skip one header line (tsv only).
    bool header = false;
};

/// jsonl: {"text", "label"} per line. tsv: text<TAB>label. Blank lines are
/// skipped; rows with empty text raise ParseError naming the line.
Dataset parse_dataset(std::string_view content, DatasetFormat format, const LoadOptions& options);
Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format, const LoadOptions& options = {});

/// Loads several files; throws DuplicateName when two resolve to the same name.
std::vector<Dataset> load_datasets(std::span<const std::filesystem::path> paths, const LoadOptions& options = {});

std::string dataset_to_jsonl(const Dataset& dataset);

struct SubsampleSpec {
    std::size_t min_tokens = 14;
    std::size_t max_tokens = 15;
    /// Target proportion per class; empty means uniform over the dataset's classes.
    std::vector<std::pair<std::string, double>> balance;
    std::uint64_t seed = 0;
};

/// Keeps examples whose scorer-token length lies in [min_tokens, max_tokens],
/// then downsamples classes to the target balance. Survivors keep their
/// original relative order.
Dataset subsample_balanced(const Dataset& dataset, const SubsampleSpec& spec, const MaskedTokenScorer& tokenizer);

struct SplitSpec {
    std::size_t k_train_splits = 5;
    std::size_t shots_per_class = 16;
    std::uint64_t seed = 0;
    /// Draw the k splits without overlap.
    bool disjoint = false;
    /// Dev size as a multiple of one train split; the rest of the remainder is test.
    std::size_t dev_multiple = 1;
};

struct Splits {
    std::vector<Dataset> train;
    Dataset dev;
    Dataset test;
};

/// Train splits of shots_per_class per class; the examples in no train split
/// are shuffled and cut into dev and test.
Splits make_splits(const Dataset& dataset, const SplitSpec& spec);

}  // namespace pplprompt
