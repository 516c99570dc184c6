#include "pplprompt/table_scorer.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include <json.hpp>

#include "pplprompt/error.hpp"
#include "pplprompt/prompt.hpp"

namespace pplprompt {

namespace {

constexpr double kNormalizationSlack = 1e-6;

std::string normalize_context(std::string_view context) {
    if (trim(context) == kAnyContext) return std::string(kAnyContext);
    const auto tokens = whitespace_tokenize(context);
    std::string out;
    for (const auto& token : tokens) {
        if (!out.empty()) out += ' ';
        out += token;
    }
    return out;
}

std::size_t single_mask_position(const std::vector<std::string>& tokens) {
    std::size_t position = tokens.size();
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (tokens[i] != kMaskToken) continue;
        if (position != tokens.size()) {
            throw Error(ErrorCode::ScorerFailure, "text contains more than one mask token");
        }
        position = i;
    }
    if (position == tokens.size()) {
        throw Error(ErrorCode::ScorerFailure, "text has no whitespace-delimited mask token");
    }
    return position;
}

}  // namespace

std::string masked_context(const std::vector<std::string>& tokens, std::size_t masked) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += ' ';
        out += i == masked ? std::string(kMaskToken) : tokens[i];
    }
    return out;
}

TableScorer::TableScorer(const std::vector<TableEntry>& entries) {
    if (entries.empty()) throw Error(ErrorCode::MalformedTable, "table is empty");

    std::set<std::string> vocab;
    std::map<std::string, double> mass;
    for (const auto& entry : entries) {
        if (!std::isfinite(entry.logprob) || entry.logprob > 0.0) {
            throw Error(ErrorCode::MalformedTable,
                        "log-probability for \"" + entry.token + "\" must be finite and <= 0");
        }
        if (whitespace_tokenize(entry.token).size() != 1) {
            throw Error(ErrorCode::MalformedTable, "token \"" + entry.token + "\" is not a single token");
        }
        auto key = std::make_pair(normalize_context(entry.context), entry.token);
        const auto [it, inserted] = rows_.emplace(key, entry.logprob);
        if (!inserted) {
            if (it->second != entry.logprob) {
                throw Error(ErrorCode::MalformedTable,
                            "conflicting rows for \"" + entry.token + "\" in context \"" + key.first + "\"");
            }
            continue;
        }
        mass[key.first] += std::exp(entry.logprob);
        vocab.insert(entry.token);
    }
    for (const auto& [context, total] : mass) {
        if (total > 1.0 + kNormalizationSlack) {
            throw Error(ErrorCode::MalformedTable,
                        "probabilities in context \"" + context + "\" sum to more than one");
        }
    }
    vocab_size_ = vocab.size();
}

TableScorer TableScorer::parse(std::string_view jsonl) {
    std::vector<TableEntry> entries;
    std::istringstream stream{std::string(jsonl)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(stream, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            const auto record = nlohmann::json::parse(line);
            entries.push_back({record.at("context").get<std::string>(), record.at("token").get<std::string>(),
                               record.at("logprob").get<double>()});
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::MalformedTable, "line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return TableScorer(entries);
}

TableScorer TableScorer::load(const std::filesystem::path& path) {
    return parse(read_text_file(path));
}

const double* TableScorer::find(const std::string& context, const std::string& token) const {
    if (const auto it = rows_.find({context, token}); it != rows_.end()) return &it->second;
    if (const auto it = rows_.find({std::string(kAnyContext), token}); it != rows_.end()) return &it->second;
    return nullptr;
}

std::vector<std::string> TableScorer::tokenize(std::string_view text) const {
    return whitespace_tokenize(text);
}

std::vector<double> TableScorer::token_logprobs(std::string_view text) const {
    const auto tokens = tokenize(text);
    std::vector<double> out;
    out.reserve(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const auto context = masked_context(tokens, i);
        const double* lp = find(context, tokens[i]);
        if (!lp) {
            throw Error(ErrorCode::ScorerFailure,
                        "no table entry for \"" + tokens[i] + "\" in context \"" + context + "\"");
        }
        out.push_back(*lp);
    }
    return out;
}

std::vector<double> TableScorer::mask_candidate_logprobs(std::string_view text_with_mask,
                                                         std::span<const std::string> candidates) const {
    const auto tokens = tokenize(text_with_mask);
    const auto context = masked_context(tokens, single_mask_position(tokens));
    std::vector<double> out;
    out.reserve(candidates.size());
    for (const auto& candidate : candidates) {
        const double* lp = find(context, candidate);
        if (!lp) {
            throw Error(ErrorCode::UnknownLabelWord,
                        "no table entry for candidate \"" + candidate + "\" in context \"" + context + "\"");
        }
        out.push_back(*lp);
    }
    return out;
}

}  // namespace pplprompt
