#include "pplprompt/prompt.hpp"

#include <algorithm>
#include <set>

#include "pplprompt/error.hpp"

namespace pplprompt {

std::string_view placement_name(Placement placement) noexcept {
    return placement == Placement::Prefix ? "prefix" : "postfix";
}

Placement parse_placement(std::string_view name) {
    if (name == "prefix") return Placement::Prefix;
    if (name == "postfix") return Placement::Postfix;
    throw Error(ErrorCode::InvalidTemplate,
                "placement must be \"prefix\" or \"postfix\", got \"" + std::string(name) + "\"");
}

std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
    if (needle.empty()) return 0;
    std::size_t count = 0;
    for (auto pos = haystack.find(needle); pos != std::string_view::npos;
         pos = haystack.find(needle, pos + needle.size())) {
        ++count;
    }
    return count;
}

std::string_view trim(std::string_view text) noexcept {
    constexpr std::string_view kSpace = " \t\r\n\v\f";
    const auto begin = text.find_first_not_of(kSpace);
    if (begin == std::string_view::npos) return {};
    const auto end = text.find_last_not_of(kSpace);
    return text.substr(begin, end - begin + 1);
}

Template::Template(std::string id, std::string pattern, Placement placement)
    : id_(std::move(id)), pattern_(std::move(pattern)), placement_(placement) {
    if (id_.empty()) throw Error(ErrorCode::InvalidTemplate, "template id is empty");
    const auto masks = count_occurrences(pattern_, kMaskToken);
    if (masks != 1) {
        throw Error(ErrorCode::InvalidTemplate,
                    "template \"" + id_ + "\" must contain exactly one " + std::string(kMaskToken) +
                        ", found " + std::to_string(masks));
    }
}

Verbalizer::Verbalizer(std::vector<VerbalizerEntry> entries) : entries_(std::move(entries)) {
    if (entries_.size() < 2) {
        throw Error(ErrorCode::InvalidVerbalizer, "verbalizer needs at least 2 entries");
    }
    std::set<std::string_view> words;
    std::set<std::string_view> classes;
    for (const auto& entry : entries_) {
        if (entry.label_word.empty() || entry.class_label.empty()) {
            throw Error(ErrorCode::InvalidVerbalizer, "verbalizer entries must be non-empty");
        }
        if (!words.insert(entry.label_word).second) {
            throw Error(ErrorCode::InvalidVerbalizer, "duplicate label word \"" + entry.label_word + "\"");
        }
        if (!classes.insert(entry.class_label).second) {
            throw Error(ErrorCode::InvalidVerbalizer, "duplicate class label \"" + entry.class_label + "\"");
        }
    }
}

std::vector<std::string> Verbalizer::label_words() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& entry : entries_) out.push_back(entry.label_word);
    return out;
}

std::vector<std::string> Verbalizer::class_labels() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& entry : entries_) out.push_back(entry.class_label);
    return out;
}

const std::string& Verbalizer::class_of(std::string_view label_word) const {
    for (const auto& entry : entries_) {
        if (entry.label_word == label_word) return entry.class_label;
    }
    throw Error(ErrorCode::UnknownLabelWord, "unknown label word \"" + std::string(label_word) + "\"");
}

const std::string& Verbalizer::word_of(std::string_view class_label) const {
    for (const auto& entry : entries_) {
        if (entry.class_label == class_label) return entry.label_word;
    }
    throw Error(ErrorCode::UnknownLabelWord,
                "no label word maps to class \"" + std::string(class_label) + "\"");
}

bool Verbalizer::has_class(std::string_view class_label) const noexcept {
    return std::any_of(entries_.begin(), entries_.end(),
                       [&](const auto& e) { return e.class_label == class_label; });
}

Verbalizer Verbalizer::with_swapped_classes() const {
    if (entries_.size() != 2) {
        throw Error(ErrorCode::NotBinaryVerbalizer, "class swap requires exactly 2 entries");
    }
    return Verbalizer({{entries_[0].label_word, entries_[1].class_label},
                       {entries_[1].label_word, entries_[0].class_label}});
}

PromptedSequence build_prompted_input(std::string_view input, const Template& tmpl) {
    if (trim(input).empty()) throw Error(ErrorCode::EmptyInput, "input text is empty");

    PromptedSequence out;
    out.source_input = std::string(input);
    out.template_id = tmpl.id();
    out.text.reserve(tmpl.pattern().size() + kPromptSeparator.size() + input.size());

    const auto mask_in_pattern = tmpl.pattern().find(kMaskToken);
    if (tmpl.placement() == Placement::Prefix) {
        out.text.append(tmpl.pattern()).append(kPromptSeparator).append(input);
        out.mask_offset = mask_in_pattern;
    } else {
        out.text.append(input).append(kPromptSeparator).append(tmpl.pattern());
        out.mask_offset = input.size() + kPromptSeparator.size() + mask_in_pattern;
    }
    return out;
}

PromptedSequence fill_mask(const PromptedSequence& sequence, std::string_view label_word) {
    if (!sequence.mask_offset) {
        throw Error(ErrorCode::NoMaskPresent,
                    "sequence from template \"" + sequence.template_id + "\" has no mask to fill");
    }
    PromptedSequence out = sequence;
    out.text.replace(*sequence.mask_offset, kMaskToken.size(), label_word);
    out.mask_offset.reset();
    return out;
}

const std::string& map_label_word(const Verbalizer& verbalizer, std::string_view label_word) {
    return verbalizer.class_of(label_word);
}

}  // namespace pplprompt
