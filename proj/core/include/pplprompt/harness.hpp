#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pplprompt/scorer.hpp"
#include "pplprompt/selection.hpp"

namespace pplprompt {

enum class Method { FixedTemplate, PplSelect, RandomSelect, MethodComparison };

std::string_view method_name(Method method) noexcept;
Method parse_method(std::string_view name);

/// Experiment description. The config document is a single JSON object whose
/// keys are these field names; relative paths resolve against the document's
/// directory.
struct ExperimentConfig {
    std::vector<std::filesystem::path> dataset_refs;
    /// For method-comparison the first pool is the manual pool and the
    /// optional second pool the auto-generated one.
    std::vector<std::filesystem::path> template_pool_refs;
    std::filesystem::path verbalizer_ref;
    /// table:<fixture> | count:<corpus> | remote:<url>
    std::string scorer_binding;
    Method method = Method::FixedTemplate;
    std::vector<std::uint64_t> seeds;
    std::filesystem::path output_directory;

    // Optional.
    ClassifyMode classify_mode = ClassifyMode::MaskLogprob;
    double count_alpha = 1.0;
    std::size_t threads = 1;
    bool tsv_header = false;
    /// Which dataset variant was scored ("full", "subsampled", ...); recorded only.
    std::string dataset_variant = "full";
    std::chrono::milliseconds bridge_timeout{30000};
};

ExperimentConfig parse_experiment_config(std::string_view json, const std::filesystem::path& base_dir);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Throws ConfigError when a referenced file is missing or no seed is given.
void validate_config(const ExperimentConfig& config);

/// Hash of every config field except output_directory, plus the contents of
/// each referenced file.
std::string config_fingerprint(const ExperimentConfig& config);

struct ScorerOptions {
    double count_alpha = 1.0;
    std::chrono::milliseconds timeout{30000};
};

/// Resolves a scorer binding string. "remote:" without a URL falls back to
/// the PPLPROMPT_BRIDGE_URL environment variable.
std::shared_ptr<const MaskedTokenScorer> resolve_scorer(std::string_view binding, const ScorerOptions& options = {});

struct ResultRow {
    std::string dataset;
    /// fixed-template, ppl-select, random-select, manual-ppl, manual-random, auto-ppl or auto-random.
    std::string method;
    /// Template id for fixed templates, pool name otherwise.
    std::string subject;
    std::vector<double> per_seed_accuracy;
    double mean = 0.0;
    /// Population standard deviation of per_seed_accuracy.
    double std = 0.0;
    double mean_prompt_ppl = 0.0;
    std::size_t clamp_events = 0;
    std::size_t n_examples = 0;

    friend bool operator==(const ResultRow&, const ResultRow&) = default;
};

struct FrequencyRow {
    std::string dataset;
    std::string pool;
    std::string template_id;
    double frequency = 0.0;
    std::optional<double> accuracy;

    friend bool operator==(const FrequencyRow&, const FrequencyRow&) = default;
};

struct TraceRecord {
    std::string dataset;
    std::string method;
    std::string subject;
    std::optional<std::uint64_t> seed;
    SelectionTrace trace;

    friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

struct EvalReport {
    std::string kind;
    std::string fingerprint;
    std::string std_kind = "population";
    std::string dataset_variant = "full";
    bool complete = true;
    std::string failure;
    std::vector<ResultRow> rows;
    std::vector<FrequencyRow> frequencies;
    std::vector<TraceRecord> traces;

    friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

/// Population mean and standard deviation.
std::pair<double, double> mean_and_std(const std::vector<double>& values);

/// Fixed templates, PPL selection or random selection per the config method,
/// with accuracy and mean prompt perplexity side by side. A scorer failure
/// stops the run and returns the completed traces with complete == false.
EvalReport run_zero_shot(const ExperimentConfig& config);

/// Manual-PPL, Manual-Random, Auto-PPL and Auto-Random on identical examples,
/// plus selection-frequency rows with post-hoc template accuracy.
EvalReport run_method_comparison(const ExperimentConfig& config);

/// run_method_comparison for Method::MethodComparison, run_zero_shot otherwise.
EvalReport run_experiment(const ExperimentConfig& config);

// Overloads used when datasets and the scorer are already in memory.
struct ExperimentInputs {
    std::vector<std::pair<std::string, std::vector<LabeledExample>>> datasets;
    std::vector<std::pair<std::string, TemplatePool>> pools;
    std::optional<Verbalizer> verbalizer;
    std::shared_ptr<const MaskedTokenScorer> scorer;
};

EvalReport run_zero_shot(const ExperimentConfig& config, const ExperimentInputs& inputs);
EvalReport run_method_comparison(const ExperimentConfig& config, const ExperimentInputs& inputs);

/// Loads datasets, pools, verbalizer and scorer named by the config.
ExperimentInputs load_experiment_inputs(const ExperimentConfig& config);

struct EmitFormats {
    bool jsonl = true;
    bool table = true;
    bool tsv = true;
};

/// Writes report.jsonl, traces.jsonl, report.txt and frequencies.tsv into `dir`.
/// Returns the written paths. Throws IoError.
std::vector<std::filesystem::path> emit_report(const EvalReport& report, const std::filesystem::path& dir,
                                               const EmitFormats& formats = {});

/// Reads report.jsonl and traces.jsonl back.
EvalReport load_report(const std::filesystem::path& dir);

std::string report_to_jsonl(const EvalReport& report);
std::string traces_to_jsonl(const EvalReport& report);
std::string report_to_table(const EvalReport& report);
std::string frequencies_to_tsv(const EvalReport& report);

/// One JSON line per trace, as exported by emit_report.
std::string trace_to_json(const TraceRecord& record);

}  // namespace pplprompt
