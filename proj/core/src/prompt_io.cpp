#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "pplprompt/error.hpp"
#include "pplprompt/prompt.hpp"

namespace pplprompt {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string require_string(const ordered_json& record, const char* key, std::size_t line) {
    const auto it = record.find(key);
    if (it == record.end() || !it->is_string()) {
        throw Error(ErrorCode::ParseError,
                    "line " + std::to_string(line) + ": missing string field \"" + key + "\"");
    }
    return it->get<std::string>();
}

}  // namespace

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

std::vector<Template> parse_template_pool(std::string_view jsonl) {
    std::vector<Template> out;
    std::set<std::string> ids;
    std::istringstream stream{std::string(jsonl)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(stream, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        ordered_json record;
        try {
            record = ordered_json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!record.is_object()) {
            throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": expected an object");
        }
        auto id = require_string(record, "id", line_no);
        auto pattern = require_string(record, "pattern", line_no);
        auto placement = require_string(record, "placement", line_no);
        try {
            out.emplace_back(std::move(id), std::move(pattern), parse_placement(placement));
        } catch (const Error& e) {
            throw Error(e.code(), "line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!ids.insert(out.back().id()).second) {
            throw Error(ErrorCode::InvalidTemplate,
                        "line " + std::to_string(line_no) + ": duplicate template id \"" + out.back().id() + "\"");
        }
    }
    return out;
}

std::vector<Template> load_template_pool(const std::filesystem::path& path) {
    return parse_template_pool(read_text_file(path));
}

std::string template_to_json(const Template& tmpl) {
    ordered_json record;
    record["id"] = tmpl.id();
    record["pattern"] = tmpl.pattern();
    record["placement"] = placement_name(tmpl.placement());
    return record.dump();
}

Verbalizer parse_verbalizer(std::string_view json) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(json);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::ParseError, std::string("verbalizer: ") + e.what());
    }
    const auto words = doc.find("label_words");
    if (!doc.is_object() || words == doc.end() || !words->is_object()) {
        throw Error(ErrorCode::ParseError, "verbalizer: expected {\"label_words\": {...}}");
    }
    std::vector<VerbalizerEntry> entries;
    for (const auto& [word, label] : words->items()) {
        if (!label.is_string()) {
            throw Error(ErrorCode::ParseError, "verbalizer: class for \"" + word + "\" is not a string");
        }
        entries.push_back({word, label.get<std::string>()});
    }
    return Verbalizer(std::move(entries));
}

Verbalizer load_verbalizer(const std::filesystem::path& path) {
    return parse_verbalizer(read_text_file(path));
}

}  // namespace pplprompt
