#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "pplprompt/error.hpp"
#include "pplprompt/format.hpp"
#include "pplprompt/harness.hpp"

namespace pplprompt {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr const char* kReportFile = "report.jsonl";
constexpr const char* kTracesFile = "traces.jsonl";
constexpr const char* kTableFile = "report.txt";
constexpr const char* kTsvFile = "frequencies.tsv";
constexpr const char* kIncomplete = "INCOMPLETE";

ordered_json trace_json(const TraceRecord& record) {
    ordered_json j;
    j["record"] = "trace";
    j["dataset"] = record.dataset;
    j["method"] = record.method;
    j["subject"] = record.subject;
    j["seed"] = record.seed ? ordered_json(*record.seed) : ordered_json(nullptr);
    j["example_index"] = record.trace.example_index;
    j["chosen_template_id"] = record.trace.chosen_template_id;
    auto scores = ordered_json::array();
    for (const auto& score : record.trace.per_template_ppl) {
        scores.push_back(ordered_json{{"template_id", score.template_id}, {"ppl", score.ppl}});
    }
    j["per_template_ppl"] = std::move(scores);
    j["predicted_class"] = record.trace.predicted_class;
    j["gold_class"] = record.trace.gold_class ? ordered_json(*record.trace.gold_class) : ordered_json(nullptr);
    j["clamp_events"] = record.trace.clamp_events;
    return j;
}

TraceRecord trace_from_json(const ordered_json& j) {
    TraceRecord record;
    record.dataset = j.at("dataset").get<std::string>();
    record.method = j.at("method").get<std::string>();
    record.subject = j.at("subject").get<std::string>();
    if (!j.at("seed").is_null()) record.seed = j.at("seed").get<std::uint64_t>();
    record.trace.example_index = j.at("example_index").get<std::size_t>();
    record.trace.chosen_template_id = j.at("chosen_template_id").get<std::string>();
    for (const auto& score : j.at("per_template_ppl")) {
        record.trace.per_template_ppl.push_back({score.at("template_id").get<std::string>(), score.at("ppl").get<double>()});
    }
    record.trace.predicted_class = j.at("predicted_class").get<std::string>();
    if (!j.at("gold_class").is_null()) record.trace.gold_class = j.at("gold_class").get<std::string>();
    record.trace.clamp_events = j.at("clamp_events").get<std::size_t>();
    return record;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << content;
    if (!out.flush()) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

std::string percent(double fraction) {
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%.2f", fraction * 100.0);
    return buffer;
}

}  // namespace

std::string trace_to_json(const TraceRecord& record) { return trace_json(record).dump(); }

std::string report_to_jsonl(const EvalReport& report) {
    std::ostringstream out;
    ordered_json meta;
    meta["record"] = "meta";
    meta["kind"] = report.kind;
    meta["fingerprint"] = report.fingerprint;
    meta["std_kind"] = report.std_kind;
    meta["dataset_variant"] = report.dataset_variant;
    meta["status"] = report.complete ? "COMPLETE" : kIncomplete;
    meta["failure"] = report.failure;
    out << meta.dump() << '\n';
    for (const auto& row : report.rows) {
        ordered_json j;
        j["record"] = "result";
        j["dataset"] = row.dataset;
        j["method"] = row.method;
        j["subject"] = row.subject;
        j["per_seed_accuracy"] = row.per_seed_accuracy;
        j["mean"] = row.mean;
        j["std"] = row.std;
        j["mean_prompt_ppl"] = row.mean_prompt_ppl;
        j["clamp_events"] = row.clamp_events;
        j["n_examples"] = row.n_examples;
        out << j.dump() << '\n';
    }
    for (const auto& row : report.frequencies) {
        ordered_json j;
        j["record"] = "frequency";
        j["dataset"] = row.dataset;
        j["pool"] = row.pool;
        j["template_id"] = row.template_id;
        j["frequency"] = row.frequency;
        j["accuracy"] = row.accuracy ? ordered_json(*row.accuracy) : ordered_json(nullptr);
        out << j.dump() << '\n';
    }
    return out.str();
}

std::string traces_to_jsonl(const EvalReport& report) {
    std::ostringstream out;
    for (const auto& record : report.traces) out << trace_json(record).dump() << '\n';
    if (!report.complete) {
        ordered_json marker;
        marker["record"] = "status";
        marker["status"] = kIncomplete;
        marker["failure"] = report.failure;
        out << marker.dump() << '\n';
    }
    return out.str();
}

std::string report_to_table(const EvalReport& report) {
    std::vector<std::vector<std::string>> cells;
    cells.push_back({"dataset", "method", "subject", "accuracy(%)", "mean_ppl", "n", "clamped"});
    for (const auto& row : report.rows) {
        cells.push_back({row.dataset, row.method, row.subject, percent(row.mean) + " +/- " + percent(row.std),
                         fixed6(row.mean_prompt_ppl), std::to_string(row.n_examples), std::to_string(row.clamp_events)});
    }
    std::vector<std::size_t> widths(cells.front().size(), 0);
    for (const auto& line : cells) {
        for (std::size_t c = 0; c < line.size(); ++c) widths[c] = std::max(widths[c], line[c].size());
    }

    std::ostringstream out;
    out << "# " << report.kind << "  fingerprint " << report.fingerprint << "  std " << report.std_kind
        << "  variant " << report.dataset_variant << '\n';
    if (!report.complete) out << "# " << kIncomplete << ": " << report.failure << '\n';
    for (const auto& line : cells) {
        for (std::size_t c = 0; c < line.size(); ++c) {
            out << line[c];
            if (c + 1 < line.size()) out << std::string(widths[c] - line[c].size() + 2, ' ');
        }
        out << '\n';
    }
    if (!report.frequencies.empty()) {
        out << "\n# selection frequency\n" << frequencies_to_tsv(report);
    }
    return out.str();
}

std::string frequencies_to_tsv(const EvalReport& report) {
    std::ostringstream out;
    out << "dataset\tpool\ttemplate_id\tfrequency\taccuracy\n";
    for (const auto& row : report.frequencies) {
        out << row.dataset << '\t' << row.pool << '\t' << row.template_id << '\t' << fixed6(row.frequency) << '\t'
            << (row.accuracy ? fixed6(*row.accuracy) : std::string("NA")) << '\n';
    }
    return out.str();
}

std::vector<std::filesystem::path> emit_report(const EvalReport& report, const std::filesystem::path& dir,
                                               const EmitFormats& formats) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());

    std::vector<std::filesystem::path> written;
    auto emit = [&](const char* name, const std::string& content) {
        write_file(dir / name, content);
        written.push_back(dir / name);
    };
    if (formats.jsonl) {
        emit(kReportFile, report_to_jsonl(report));
        emit(kTracesFile, traces_to_jsonl(report));
    }
    if (formats.table) emit(kTableFile, report_to_table(report));
    if (formats.tsv && !report.frequencies.empty()) emit(kTsvFile, frequencies_to_tsv(report));
    return written;
}

EvalReport load_report(const std::filesystem::path& dir) {
    EvalReport report;
    auto parse_lines = [](const std::filesystem::path& path, auto&& handle) {
        std::istringstream in(read_text_file(path));
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            try {
                handle(ordered_json::parse(line));
            } catch (const nlohmann::json::exception& e) {
                throw Error(ErrorCode::ParseError, path.string() + " line " + std::to_string(line_no) + ": " + e.what());
            }
        }
    };

    parse_lines(dir / kReportFile, [&](const ordered_json& j) {
        const auto kind = j.at("record").get<std::string>();
        if (kind == "meta") {
            report.kind = j.at("kind").get<std::string>();
            report.fingerprint = j.at("fingerprint").get<std::string>();
            report.std_kind = j.at("std_kind").get<std::string>();
            report.dataset_variant = j.at("dataset_variant").get<std::string>();
            report.complete = j.at("status").get<std::string>() != kIncomplete;
            report.failure = j.at("failure").get<std::string>();
        } else if (kind == "result") {
            ResultRow row;
            row.dataset = j.at("dataset").get<std::string>();
            row.method = j.at("method").get<std::string>();
            row.subject = j.at("subject").get<std::string>();
            row.per_seed_accuracy = j.at("per_seed_accuracy").get<std::vector<double>>();
            row.mean = j.at("mean").get<double>();
            row.std = j.at("std").get<double>();
            row.mean_prompt_ppl = j.at("mean_prompt_ppl").get<double>();
            row.clamp_events = j.at("clamp_events").get<std::size_t>();
            row.n_examples = j.at("n_examples").get<std::size_t>();
            report.rows.push_back(std::move(row));
        } else if (kind == "frequency") {
            FrequencyRow row;
            row.dataset = j.at("dataset").get<std::string>();
            row.pool = j.at("pool").get<std::string>();
            row.template_id = j.at("template_id").get<std::string>();
            row.frequency = j.at("frequency").get<double>();
            if (!j.at("accuracy").is_null()) row.accuracy = j.at("accuracy").get<double>();
            report.frequencies.push_back(std::move(row));
        }
    });
    parse_lines(dir / kTracesFile, [&](const ordered_json& j) {
        if (j.at("record").get<std::string>() == "trace") report.traces.push_back(trace_from_json(j));
    });
    return report;
}

}  // namespace pplprompt
