#include "pplprompt/harness.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <set>
#include <thread>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "pplprompt/bridge_client.hpp"
#include "pplprompt/count_scorer.hpp"
#include "pplprompt/datasets.hpp"
#include "pplprompt/error.hpp"
#include "pplprompt/table_scorer.hpp"

namespace pplprompt {

std::string_view method_name(Method method) noexcept {
    switch (method) {
        case Method::FixedTemplate: return "fixed-template";
        case Method::PplSelect: return "ppl-select";
        case Method::RandomSelect: return "random-select";
        case Method::MethodComparison: return "method-comparison";
    }
    return "unknown";
}

Method parse_method(std::string_view name) {
    for (const auto method : {Method::FixedTemplate, Method::PplSelect, Method::RandomSelect, Method::MethodComparison}) {
        if (method_name(method) == name) return method;
    }
    throw Error(ErrorCode::ConfigError, "unknown method \"" + std::string(name) +
                                            "\" (expected fixed-template, ppl-select, random-select or method-comparison)");
}

// ---------------------------------------------------------------------------
// Config

namespace {

using ordered_json = nlohmann::ordered_json;

const std::set<std::string> kConfigKeys = {
    "dataset_refs", "template_pool_refs", "verbalizer_ref", "scorer_binding", "method",
    "seeds", "output_directory", "classify_mode", "count_alpha", "threads",
    "tsv_header", "dataset_variant", "bridge_timeout_ms"};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& ref) {
    std::filesystem::path path(ref);
    return path.is_absolute() || base.empty() ? path : base / path;
}

template <typename T>
T config_value(const ordered_json& doc, const char* key) {
    try {
        return doc.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw Error(ErrorCode::ConfigError, std::string("config field \"") + key + "\" is missing or has the wrong type");
    }
}

std::string fnv1a_hex(std::string_view data, std::uint64_t hash = 0xcbf29ce484222325ULL) {
    for (const unsigned char c : data) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    char out[17];
    std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(hash));
    return out;
}

std::string file_digest(const std::filesystem::path& path) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec)) return "missing";
    return fnv1a_hex(read_text_file(path));
}

}  // namespace

ExperimentConfig parse_experiment_config(std::string_view json, const std::filesystem::path& base_dir) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(json);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::ConfigError, std::string("config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw Error(ErrorCode::ConfigError, "config must be a JSON object");
    for (const auto& [key, value] : doc.items()) {
        if (!kConfigKeys.count(key)) throw Error(ErrorCode::ConfigError, "unknown config field \"" + key + "\"");
    }

    ExperimentConfig config;
    for (const auto& ref : config_value<std::vector<std::string>>(doc, "dataset_refs")) {
        config.dataset_refs.push_back(resolve(base_dir, ref));
    }
    for (const auto& ref : config_value<std::vector<std::string>>(doc, "template_pool_refs")) {
        config.template_pool_refs.push_back(resolve(base_dir, ref));
    }
    config.verbalizer_ref = resolve(base_dir, config_value<std::string>(doc, "verbalizer_ref"));
    config.scorer_binding = config_value<std::string>(doc, "scorer_binding");
    // Toy-scorer paths are relative to the config, too.
    for (const std::string prefix : {"table:", "count:"}) {
        if (config.scorer_binding.rfind(prefix, 0) == 0) {
            config.scorer_binding = prefix + resolve(base_dir, config.scorer_binding.substr(prefix.size())).string();
        }
    }
    config.method = parse_method(config_value<std::string>(doc, "method"));
    config.seeds = config_value<std::vector<std::uint64_t>>(doc, "seeds");
    config.output_directory = resolve(base_dir, config_value<std::string>(doc, "output_directory"));

    if (doc.contains("classify_mode")) config.classify_mode = parse_classify_mode(config_value<std::string>(doc, "classify_mode"));
    if (doc.contains("count_alpha")) config.count_alpha = config_value<double>(doc, "count_alpha");
    if (doc.contains("threads")) config.threads = config_value<std::size_t>(doc, "threads");
    if (doc.contains("tsv_header")) config.tsv_header = config_value<bool>(doc, "tsv_header");
    if (doc.contains("dataset_variant")) config.dataset_variant = config_value<std::string>(doc, "dataset_variant");
    if (doc.contains("bridge_timeout_ms")) {
        config.bridge_timeout = std::chrono::milliseconds(config_value<long long>(doc, "bridge_timeout_ms"));
    }
    return config;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    return parse_experiment_config(read_text_file(path), path.parent_path());
}

void validate_config(const ExperimentConfig& config) {
    if (config.seeds.empty()) throw Error(ErrorCode::ConfigError, "config needs at least one seed");
    if (config.dataset_refs.empty()) throw Error(ErrorCode::ConfigError, "config needs at least one dataset");
    if (config.template_pool_refs.empty()) throw Error(ErrorCode::ConfigError, "config needs at least one template pool");
    if (config.threads == 0) throw Error(ErrorCode::ConfigError, "threads must be at least 1");
    auto require_file = [](const std::filesystem::path& path) {
        std::error_code ec;
        if (!std::filesystem::is_regular_file(path, ec)) {
            throw Error(ErrorCode::ConfigError, "referenced file does not exist: " + path.string());
        }
    };
    for (const auto& path : config.dataset_refs) require_file(path);
    for (const auto& path : config.template_pool_refs) require_file(path);
    require_file(config.verbalizer_ref);
    for (const std::string prefix : {"table:", "count:"}) {
        if (config.scorer_binding.rfind(prefix, 0) == 0) require_file(config.scorer_binding.substr(prefix.size()));
    }
    if (config.method == Method::MethodComparison && config.template_pool_refs.size() > 2) {
        throw Error(ErrorCode::ConfigError, "method-comparison takes a manual pool and an optional auto pool");
    }
}

std::string config_fingerprint(const ExperimentConfig& config) {
    ordered_json doc;
    auto files = [](const std::vector<std::filesystem::path>& paths) {
        ordered_json out = ordered_json::array();
        for (const auto& path : paths) out.push_back({path.filename().string(), file_digest(path)});
        return out;
    };
    doc["dataset_refs"] = files(config.dataset_refs);
    doc["template_pool_refs"] = files(config.template_pool_refs);
    doc["verbalizer_ref"] = files({config.verbalizer_ref});
    std::string binding = config.scorer_binding;
    for (const std::string prefix : {"table:", "count:"}) {
        if (binding.rfind(prefix, 0) == 0) {
            const std::filesystem::path path = binding.substr(prefix.size());
            binding = prefix + path.filename().string() + "#" + file_digest(path);
        }
    }
    doc["scorer_binding"] = binding;
    doc["method"] = method_name(config.method);
    doc["seeds"] = config.seeds;
    doc["classify_mode"] = classify_mode_name(config.classify_mode);
    doc["count_alpha"] = config.count_alpha;
    doc["tsv_header"] = config.tsv_header;
    doc["dataset_variant"] = config.dataset_variant;
    return fnv1a_hex(doc.dump());
}

std::shared_ptr<const MaskedTokenScorer> resolve_scorer(std::string_view binding, const ScorerOptions& options) {
    const auto colon = binding.find(':');
    const auto kind = binding.substr(0, colon);
    const std::string target = colon == std::string_view::npos ? std::string() : std::string(binding.substr(colon + 1));
    if (kind == "table") {
        if (target.empty()) throw Error(ErrorCode::ConfigError, "table scorer needs a fixture path");
        return std::make_shared<TableScorer>(TableScorer::load(target));
    }
    if (kind == "count") {
        if (target.empty()) throw Error(ErrorCode::ConfigError, "count scorer needs a corpus path");
        return std::make_shared<CountScorer>(CountScorer::load(target, options.count_alpha));
    }
    if (kind == "remote") {
        std::string url = target;
        if (url.empty()) {
            if (const char* env = std::getenv(std::string(kBridgeUrlEnv).c_str())) url = env;
        }
        if (url.empty()) {
            throw Error(ErrorCode::ConfigError, "remote scorer needs a URL or " + std::string(kBridgeUrlEnv));
        }
        BridgeEndpoint endpoint;
        endpoint.base_url = url;
        endpoint.timeout = options.timeout;
        return remote_scorer(endpoint);
    }
    throw Error(ErrorCode::ConfigError,
                "scorer binding must be table:<fixture>, count:<corpus> or remote:<url>, got \"" + std::string(binding) + "\"");
}

// ---------------------------------------------------------------------------
// Runs

std::pair<double, double> mean_and_std(const std::vector<double>& values) {
    if (values.empty()) return {0.0, 0.0};
    double total = 0.0;
    for (const double v : values) total += v;
    const double mean = total / static_cast<double>(values.size());
    double squares = 0.0;
    for (const double v : values) squares += (v - mean) * (v - mean);
    return {mean, std::sqrt(squares / static_cast<double>(values.size()))};
}

ExperimentInputs load_experiment_inputs(const ExperimentConfig& config) {
    validate_config(config);
    ExperimentInputs inputs;
    LoadOptions options;
    options.header = config.tsv_header;
    for (auto& dataset : load_datasets(config.dataset_refs, options)) {
        inputs.datasets.emplace_back(dataset.name(), dataset.examples());
    }
    for (std::size_t i = 0; i < config.template_pool_refs.size(); ++i) {
        const auto& path = config.template_pool_refs[i];
        const auto provenance = config.method == Method::MethodComparison && i == 1 ? PoolProvenance::AutoGenerated
                                                                                    : PoolProvenance::Manual;
        inputs.pools.emplace_back(path.stem().string(), TemplatePool(load_template_pool(path), provenance));
    }
    inputs.verbalizer = load_verbalizer(config.verbalizer_ref);
    inputs.scorer = resolve_scorer(config.scorer_binding, {config.count_alpha, config.bridge_timeout});
    return inputs;
}

namespace {

struct ScorerAbort {
    std::size_t index = 0;
    ErrorCode code = ErrorCode::ScorerFailure;
    std::string message;
};

struct BatchResult {
    std::vector<SelectionTrace> traces;
    std::optional<ScorerAbort> abort;
};

/// Evaluates fn(i) for i in [0, n) on `threads` workers; results merge by index.
/// Scorer errors stop further work and keep the completed traces.
template <typename Fn>
BatchResult evaluate_examples(std::size_t n, std::size_t threads, Fn fn) {
    std::vector<std::optional<SelectionTrace>> slots(n);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    std::mutex failure_mutex;
    std::optional<ScorerAbort> abort;
    std::exception_ptr fatal;

    auto worker = [&] {
        while (!stop.load()) {
            const auto i = next.fetch_add(1);
            if (i >= n) return;
            try {
                slots[i] = fn(i);
            } catch (const Error& e) {
                std::lock_guard lock(failure_mutex);
                stop = true;
                if (is_scorer_error(e.code())) {
                    if (!abort || i < abort->index) abort = ScorerAbort{i, e.code(), e.what()};
                } else if (!fatal) {
                    fatal = std::current_exception();
                }
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                stop = true;
                if (!fatal) fatal = std::current_exception();
            }
        }
    };

    const auto workers = std::max<std::size_t>(1, std::min(threads, n));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    }
    if (fatal) std::rethrow_exception(fatal);

    BatchResult result;
    result.abort = abort;
    for (auto& slot : slots) {
        if (slot) result.traces.push_back(std::move(*slot));
    }
    return result;
}

void require_labels(const std::string& dataset, const std::vector<LabeledExample>& examples) {
    for (std::size_t i = 0; i < examples.size(); ++i) {
        if (!examples[i].label) {
            throw Error(ErrorCode::MissingGoldLabels,
                        "dataset \"" + dataset + "\" example " + std::to_string(i) + " has no gold label");
        }
    }
    if (examples.empty()) throw Error(ErrorCode::InsufficientExamples, "dataset \"" + dataset + "\" is empty");
}

double accuracy_of(const std::vector<SelectionTrace>& traces) {
    std::size_t correct = 0;
    for (const auto& trace : traces) correct += trace.correct() ? 1 : 0;
    return static_cast<double>(correct) / static_cast<double>(traces.size());
}

double chosen_ppl(const SelectionTrace& trace) {
    for (const auto& score : trace.per_template_ppl) {
        if (score.template_id == trace.chosen_template_id) return score.ppl;
    }
    return 0.0;
}

/// Accumulates one result row from one or more trace batches (one per seed).
class RowBuilder {
public:
    RowBuilder(std::string dataset, std::string method, std::string subject, EvalReport& report)
        : report_(report) {
        row_.dataset = std::move(dataset);
        row_.method = std::move(method);
        row_.subject = std::move(subject);
    }

    /// Returns false when the batch aborted; the report is then marked incomplete.
    bool add(BatchResult batch, std::optional<std::uint64_t> seed) {
        for (auto& trace : batch.traces) {
            ppl_total_ += chosen_ppl(trace);
            ++ppl_count_;
            row_.clamp_events += trace.clamp_events;
            report_.traces.push_back({row_.dataset, row_.method, row_.subject, seed, trace});
        }
        if (batch.abort) {
            report_.complete = false;
            report_.failure = std::string(error_code_name(batch.abort->code)) + ": " + batch.abort->message +
                              " (dataset " + row_.dataset + ", " + row_.method + " " + row_.subject + ", example " +
                              std::to_string(batch.abort->index) + ")";
            spdlog::error("run aborted: {}", report_.failure);
            return false;
        }
        row_.n_examples = batch.traces.size();
        row_.per_seed_accuracy.push_back(accuracy_of(batch.traces));
        return true;
    }

    void finish() {
        std::tie(row_.mean, row_.std) = mean_and_std(row_.per_seed_accuracy);
        row_.mean_prompt_ppl = ppl_count_ ? ppl_total_ / static_cast<double>(ppl_count_) : 0.0;
        report_.rows.push_back(std::move(row_));
    }

private:
    EvalReport& report_;
    ResultRow row_;
    double ppl_total_ = 0.0;
    std::size_t ppl_count_ = 0;
};

EvalReport start_report(const ExperimentConfig& config, std::string kind) {
    EvalReport report;
    report.kind = std::move(kind);
    report.fingerprint = config_fingerprint(config);
    report.dataset_variant = config.dataset_variant;
    return report;
}

/// PPL selection then random selection over every seed. Returns false on abort.
bool run_pool_methods(const ExperimentConfig& config, const std::string& dataset,
                      const std::vector<LabeledExample>& examples, const TemplatePool& pool,
                      const std::string& pool_name, const Verbalizer& verbalizer, const MaskedTokenScorer& scorer,
                      const std::string& ppl_method, const std::string& random_method, bool run_ppl, bool run_random,
                      EvalReport& report, std::vector<SelectionTrace>* ppl_traces) {
    if (run_ppl) {
        RowBuilder row(dataset, ppl_method, pool_name, report);
        auto batch = evaluate_examples(examples.size(), config.threads, [&](std::size_t i) {
            return select_template_ppl(examples[i], i, pool, verbalizer, scorer, config.classify_mode);
        });
        if (ppl_traces) *ppl_traces = batch.traces;
        if (!row.add(std::move(batch), std::nullopt)) return false;
        row.finish();
    }
    if (run_random) {
        RowBuilder row(dataset, random_method, pool_name, report);
        for (const auto seed : config.seeds) {
            auto batch = evaluate_examples(examples.size(), config.threads, [&](std::size_t i) {
                return select_template_random(examples[i], i, pool, verbalizer, scorer, seed, config.classify_mode);
            });
            if (!row.add(std::move(batch), seed)) return false;
        }
        row.finish();
    }
    return true;
}

}  // namespace

EvalReport run_zero_shot(const ExperimentConfig& config, const ExperimentInputs& inputs) {
    if (config.method == Method::MethodComparison) {
        throw Error(ErrorCode::ConfigError, "method-comparison configs run through run_method_comparison");
    }
    if (config.seeds.empty()) throw Error(ErrorCode::ConfigError, "config needs at least one seed");
    if (!inputs.verbalizer || !inputs.scorer) throw Error(ErrorCode::ConfigError, "verbalizer and scorer are required");
    const auto& verbalizer = *inputs.verbalizer;
    const auto& scorer = *inputs.scorer;

    auto report = start_report(config, "zero-shot");
    for (const auto& [dataset, examples] : inputs.datasets) {
        require_labels(dataset, examples);
        for (const auto& [pool_name, pool] : inputs.pools) {
            if (config.method == Method::FixedTemplate) {
                for (const auto& tmpl : pool.templates()) {
                    RowBuilder row(dataset, std::string(method_name(config.method)), tmpl.id(), report);
                    auto batch = evaluate_examples(examples.size(), config.threads, [&](std::size_t i) {
                        return apply_fixed_template(examples[i], i, tmpl, verbalizer, scorer, config.classify_mode);
                    });
                    if (!row.add(std::move(batch), std::nullopt)) return report;
                    row.finish();
                }
                continue;
            }
            const bool ppl = config.method == Method::PplSelect;
            if (!run_pool_methods(config, dataset, examples, pool, pool_name, verbalizer, scorer, "ppl-select",
                                  "random-select", ppl, !ppl, report, nullptr)) {
                return report;
            }
        }
    }
    return report;
}

EvalReport run_method_comparison(const ExperimentConfig& config, const ExperimentInputs& inputs) {
    if (config.seeds.empty()) throw Error(ErrorCode::ConfigError, "config needs at least one seed");
    if (!inputs.verbalizer || !inputs.scorer) throw Error(ErrorCode::ConfigError, "verbalizer and scorer are required");
    if (inputs.pools.empty() || inputs.pools.size() > 2) {
        throw Error(ErrorCode::ConfigError, "method comparison takes a manual pool and an optional auto pool");
    }
    const auto& verbalizer = *inputs.verbalizer;
    const auto& scorer = *inputs.scorer;

    auto report = start_report(config, "method-comparison");
    for (const auto& [dataset, examples] : inputs.datasets) {
        require_labels(dataset, examples);
        for (std::size_t p = 0; p < inputs.pools.size(); ++p) {
            const auto& [pool_name, pool] = inputs.pools[p];
            const std::string prefix = p == 0 ? "manual" : "auto";
            std::vector<SelectionTrace> ppl_traces;
            if (!run_pool_methods(config, dataset, examples, pool, pool_name, verbalizer, scorer, prefix + "-ppl",
                                  prefix + "-random", true, true, report, &ppl_traces)) {
                return report;
            }
            try {
                const auto frequencies = selection_frequency_report(
                    ppl_traces, pool, PostHocInputs{examples, verbalizer, scorer, config.classify_mode});
                for (const auto& f : frequencies) {
                    report.frequencies.push_back({dataset, pool_name, f.template_id, f.frequency, f.accuracy});
                }
            } catch (const Error& e) {
                if (!is_scorer_error(e.code())) throw;
                report.complete = false;
                report.failure = std::string(error_code_name(e.code())) + ": " + e.what() + " (post-hoc accuracy, dataset " +
                                 dataset + ")";
                return report;
            }
        }
    }
    return report;
}

EvalReport run_zero_shot(const ExperimentConfig& config) {
    return run_zero_shot(config, load_experiment_inputs(config));
}

EvalReport run_method_comparison(const ExperimentConfig& config) {
    return run_method_comparison(config, load_experiment_inputs(config));
}

EvalReport run_experiment(const ExperimentConfig& config) {
    return config.method == Method::MethodComparison ? run_method_comparison(config) : run_zero_shot(config);
}

}  // namespace pplprompt
