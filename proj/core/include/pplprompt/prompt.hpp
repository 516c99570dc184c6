#pragma once

// Cloze prompting primitives: templates with a single mask slot, verbalizers
// mapping label words to classes, and the prompted sequences built from them.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace pplprompt {

/// Canonical mask placeholder. Remote scorers rewrite it to the model's own token.
inline constexpr std::string_view kMaskToken = "[MASK]";

/// Joiner between template and input text.
inline constexpr std::string_view kPromptSeparator = " ";

enum class Placement { Prefix, Postfix };

std::string_view placement_name(Placement placement) noexcept;
Placement parse_placement(std::string_view name);

/// Number of non-overlapping occurrences of `needle` in `haystack`.
std::size_t count_occurrences(std::string_view haystack, std::string_view needle);

class Template {
public:
    /// Throws InvalidTemplate unless `pattern` holds exactly one mask and `id` is non-empty.
    Template(std::string id, std::string pattern, Placement placement);

    const std::string& id() const noexcept { return id_; }
    const std::string& pattern() const noexcept { return pattern_; }
    Placement placement() const noexcept { return placement_; }

    friend bool operator==(const Template&, const Template&) = default;

private:
    std::string id_;
    std::string pattern_;
    Placement placement_;
};

struct VerbalizerEntry {
    std::string label_word;
    std::string class_label;

    friend bool operator==(const VerbalizerEntry&, const VerbalizerEntry&) = default;
};

/// Ordered bijection between label words and class labels. Entry order is the
/// tie-break order for classification.
class Verbalizer {
public:
    explicit Verbalizer(std::vector<VerbalizerEntry> entries);

    const std::vector<VerbalizerEntry>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }

    std::vector<std::string> label_words() const;
    std::vector<std::string> class_labels() const;

    /// Throws UnknownLabelWord.
    const std::string& class_of(std::string_view label_word) const;
    /// Inverse lookup; throws UnknownLabelWord when no word maps to the class.
    const std::string& word_of(std::string_view class_label) const;
    bool has_class(std::string_view class_label) const noexcept;

    /// Same label words with class labels exchanged. Binary verbalizers only.
    Verbalizer with_swapped_classes() const;

    friend bool operator==(const Verbalizer&, const Verbalizer&) = default;

private:
    std::vector<VerbalizerEntry> entries_;
};

struct PromptedSequence {
    std::string text;
    /// Byte offset of the mask placeholder in `text`; empty once filled. The
    /// token position is resolved by the scorer.
    std::optional<std::size_t> mask_offset;
    std::string source_input;
    std::string template_id;

    bool has_mask() const noexcept { return mask_offset.has_value(); }
};

struct LabeledExample {
    std::string text;
    std::optional<std::string> label;

    friend bool operator==(const LabeledExample&, const LabeledExample&) = default;
};

/// [t, x] for prefix templates, [x, t] for postfix ones, joined by one space.
/// Throws EmptyInput when `input` is blank.
PromptedSequence build_prompted_input(std::string_view input, const Template& tmpl);

/// Replaces the placeholder with `label_word`. Throws NoMaskPresent if already filled.
PromptedSequence fill_mask(const PromptedSequence& sequence, std::string_view label_word);

/// Throws UnknownLabelWord.
const std::string& map_label_word(const Verbalizer& verbalizer, std::string_view label_word);

// File formats. Template pools are line-delimited JSON records
// {"id", "pattern", "placement": "prefix"|"postfix"}; verbalizers are a single
// document {"label_words": {"<word>": "<class>", ...}} whose key order is kept.
std::vector<Template> parse_template_pool(std::string_view jsonl);
std::vector<Template> load_template_pool(const std::filesystem::path& path);
std::string template_to_json(const Template& tmpl);

Verbalizer parse_verbalizer(std::string_view json);
Verbalizer load_verbalizer(const std::filesystem::path& path);

/// Reads a whole file; throws IoError.
std::string read_text_file(const std::filesystem::path& path);

/// Strips ASCII whitespace from both ends.
std::string_view trim(std::string_view text) noexcept;

}  // namespace pplprompt
