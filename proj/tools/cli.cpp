#include "cli.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "pplprompt/bridge_client.hpp"
#include "pplprompt/datasets.hpp"
#include "pplprompt/diagnostics.hpp"
#include "pplprompt/error.hpp"
#include "pplprompt/format.hpp"
#include "pplprompt/harness.hpp"
#include "pplprompt/perplexity.hpp"
#include "pplprompt/selection.hpp"

namespace pplprompt::cli {

namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

/// Bad flag combinations detected after parsing; reported with exit code 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Routes library logs to `err` for the duration of one invocation.
class LogRedirect {
public:
    LogRedirect(std::ostream& err, const std::string& level) : previous_(spdlog::default_logger()) {
        auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err, true);
        auto logger = std::make_shared<spdlog::logger>("pplprompt", sink);
        logger->set_pattern("[%l] %v");
        logger->set_level(spdlog::level::from_str(level));
        spdlog::set_default_logger(logger);
    }
    ~LogRedirect() { spdlog::set_default_logger(previous_); }
    LogRedirect(const LogRedirect&) = delete;
    LogRedirect& operator=(const LogRedirect&) = delete;

private:
    std::shared_ptr<spdlog::logger> previous_;
};

/// Tokenizer used by prep-data when no scorer is named.
class WhitespaceTokenizer final : public MaskedTokenScorer {
public:
    std::vector<std::string> tokenize(std::string_view text) const override { return whitespace_tokenize(text); }
    std::vector<double> token_logprobs(std::string_view) const override { return unsupported(); }
    std::vector<double> mask_candidate_logprobs(std::string_view, std::span<const std::string>) const override {
        return unsupported();
    }
    std::size_t vocab_size() const override { return 0; }

private:
    static std::vector<double> unsupported() {
        throw Error(ErrorCode::ScorerFailure, "the whitespace tokenizer cannot score text");
    }
};

struct ScorerFlags {
    std::string binding;
    double alpha = 1.0;
    long long timeout_ms = 30000;

    void add_to(CLI::App& cmd) {
        cmd.add_option("--scorer", binding,
                       "table:<fixture.jsonl>, count:<corpus.txt> or remote:<url>; bare remote: and an absent "
                       "flag fall back to PPLPROMPT_BRIDGE_URL");
        cmd.add_option("--alpha", alpha, "Add-alpha smoothing of the count scorer")->capture_default_str();
        cmd.add_option("--timeout-ms", timeout_ms, "Bridge request timeout in milliseconds")->capture_default_str();
    }

    bool given() const { return !binding.empty() || std::getenv(std::string(kBridgeUrlEnv).c_str()); }

    std::shared_ptr<const MaskedTokenScorer> resolve() const {
        if (!given()) throw UsageError("--scorer is required (or set " + std::string(kBridgeUrlEnv) + ")");
        return resolve_scorer(binding.empty() ? "remote:" : binding, {alpha, std::chrono::milliseconds(timeout_ms)});
    }
};

/// Labeled or unlabeled examples from a file, or plain lines from standard input.
struct DataFlags {
    std::string path;
    std::string format;
    bool header = false;

    void add_to(CLI::App& cmd, const std::string& help) {
        cmd.add_option("--data", path, help);
        add_format(cmd);
    }

    void add_format(CLI::App& cmd) {
        cmd.add_option("--input-format", format, "jsonl, tsv or text (one example per line); default from extension")
            ->check(CLI::IsMember({"jsonl", "tsv", "text"}));
        cmd.add_flag("--header", header, "Skip the first line of a tsv file");
    }

    std::string name() const { return path.empty() ? "stdin" : fs::path(path).stem().string(); }

    std::string effective_format() const {
        if (!format.empty()) return format;
        if (path.empty()) return "text";
        const auto ext = fs::path(path).extension();
        return ext == ".tsv" ? "tsv" : ext == ".txt" ? "text" : "jsonl";
    }

    Dataset load(std::istream& in) const {
        std::string content;
        if (path.empty()) {
            std::ostringstream buffer;
            buffer << in.rdbuf();
            content = buffer.str();
        } else {
            content = read_text_file(path);
        }
        const auto fmt = effective_format();
        if (fmt == "text") return Dataset(name(), text_lines(content));
        LoadOptions options;
        options.name = name();
        options.header = header;
        return parse_dataset(content, parse_dataset_format(fmt), options);
    }

    static std::vector<LabeledExample> text_lines(const std::string& content) {
        std::vector<LabeledExample> out;
        std::istringstream stream(content);
        std::string line;
        while (std::getline(stream, line)) {
            const auto text = trim(line);
            if (!text.empty()) out.push_back({std::string(text), std::nullopt});
        }
        return out;
    }
};

struct TemplateFlags {
    std::string pool;
    std::string id;
    std::string pattern;
    std::string placement = "postfix";

    void add_to(CLI::App& cmd) {
        cmd.add_option("--pool", pool, "Template pool (jsonl of {id, pattern, placement})");
        cmd.add_option("--template", id, "Template id within --pool");
        cmd.add_option("--pattern", pattern, "Inline template pattern containing [MASK]");
        cmd.add_option("--placement", placement, "Placement of an inline pattern")
            ->check(CLI::IsMember({"prefix", "postfix"}))
            ->capture_default_str();
    }

    Template single() const {
        if (!pattern.empty()) {
            if (!pool.empty()) throw UsageError("--pattern and --pool are mutually exclusive");
            return Template("inline", pattern, parse_placement(placement));
        }
        if (pool.empty()) throw UsageError("give --pattern or --pool");
        const TemplatePool loaded(load_template_pool(pool), PoolProvenance::Manual);
        if (!id.empty()) return loaded.at(id);
        if (loaded.size() != 1) {
            throw UsageError("pool has " + std::to_string(loaded.size()) + " templates; choose one with --template");
        }
        return loaded.templates().front();
    }

    std::vector<Template> all() const {
        if (!pattern.empty()) return {single()};
        if (pool.empty()) throw UsageError("give --pattern or --pool");
        auto templates = load_template_pool(pool);
        if (id.empty()) return templates;
        return {TemplatePool(std::move(templates), PoolProvenance::Manual).at(id)};
    }
};

void mode_option(CLI::App& cmd, std::string& mode) {
    cmd.add_option("--mode", mode, "Prediction rule: mask (label-word log-probabilities) or min-ppl-fill")
        ->check(CLI::IsMember({"mask", "min-ppl-fill"}))
        ->capture_default_str();
}

std::vector<std::string> score_inputs(const std::vector<std::string>& texts, const std::string& file, std::istream& in) {
    if (!texts.empty()) return texts;
    std::string content;
    if (!file.empty()) {
        content = read_text_file(file);
    } else {
        std::ostringstream buffer;
        buffer << in.rdbuf();
        content = buffer.str();
    }
    std::vector<std::string> out;
    for (auto& example : DataFlags::text_lines(content)) out.push_back(std::move(example.text));
    return out;
}

std::vector<std::pair<std::string, double>> parse_balance(const std::string& spec) {
    std::vector<std::pair<std::string, double>> out;
    std::stringstream stream(spec);
    std::string item;
    while (std::getline(stream, item, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw UsageError("--balance expects label=share[,label=share...]");
        try {
            out.emplace_back(std::string(trim(item.substr(0, eq))), std::stod(item.substr(eq + 1)));
        } catch (const std::logic_error&) {
            throw UsageError("--balance share for \"" + item.substr(0, eq) + "\" is not a number");
        }
    }
    return out;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file || !(file << content) || !file.flush()) throw Error(ErrorCode::IoError, "cannot write " + path.string());
}

ordered_json rounded_trace(const TraceRecord& record) {
    auto j = ordered_json::parse(trace_to_json(record));
    for (auto& score : j["per_template_ppl"]) score["ppl"] = round6(score["ppl"].get<double>());
    return j;
}

std::vector<Dataset> load_many(const std::vector<std::string>& paths, const DataFlags& flags) {
    std::vector<Dataset> out;
    for (const auto& path : paths) {
        DataFlags one = flags;
        one.path = path;
        std::istringstream none;
        out.push_back(one.load(none));
        for (std::size_t i = 0; i + 1 < out.size(); ++i) {
            if (out[i].name() == out.back().name()) {
                throw Error(ErrorCode::DuplicateName, "dataset name \"" + out.back().name() + "\" is used twice");
            }
        }
    }
    return out;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
    CLI::App app{"Pseudo-perplexity scoring, zero-shot classification and prompt template selection", "pplprompt"};
    app.require_subcommand(1);
    std::string log_level = "warn";
    app.add_option("--log-level", log_level, "Log level on standard error")
        ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}))
        ->capture_default_str();

    // score
    auto* score = app.add_subcommand("score", "Print the pseudo-perplexity of each input, one value per line");
    ScorerFlags score_scorer;
    score_scorer.add_to(*score);
    std::vector<std::string> score_texts;
    std::string score_file;
    score->add_option("--text", score_texts, "Text to score (repeatable); otherwise --file or standard input lines");
    score->add_option("--file", score_file, "File with one text per line");

    // classify
    auto* classify = app.add_subcommand("classify", "Print the predicted class of each example, one per line");
    ScorerFlags classify_scorer;
    classify_scorer.add_to(*classify);
    DataFlags classify_data;
    classify_data.add_to(*classify, "Examples (jsonl, tsv or text); default: standard input lines");
    TemplateFlags classify_template;
    classify_template.add_to(*classify);
    std::string classify_verbalizer;
    classify->add_option("--verbalizer", classify_verbalizer, "Verbalizer JSON {\"label_words\": {word: class}}")
        ->required();
    std::string classify_mode = "mask";
    mode_option(*classify, classify_mode);
    std::string classify_format = "plain";
    classify->add_option("--format", classify_format, "plain (class only) or jsonl")
        ->check(CLI::IsMember({"plain", "jsonl"}))
        ->capture_default_str();

    // select
    auto* select = app.add_subcommand("select", "Select a template per example and print selection traces as jsonl");
    ScorerFlags select_scorer;
    select_scorer.add_to(*select);
    DataFlags select_data;
    select_data.add_to(*select, "Examples (jsonl, tsv or text); default: standard input lines");
    std::string select_pool;
    select->add_option("--pool", select_pool, "Template pool (jsonl)")->required();
    std::string select_verbalizer;
    select->add_option("--verbalizer", select_verbalizer, "Verbalizer JSON")->required();
    std::string select_method = "ppl";
    select->add_option("--method", select_method, "ppl (lowest prompt perplexity) or random")
        ->check(CLI::IsMember({"ppl", "random"}))
        ->capture_default_str();
    std::uint64_t select_seed = 0;
    select->add_option("--seed", select_seed, "Seed for random selection")->capture_default_str();
    std::string select_mode = "mask";
    mode_option(*select, select_mode);
    bool select_frequencies = false;
    select->add_flag("--frequencies", select_frequencies,
                     "Print a tab-separated table template_id, frequency, accuracy instead of traces");

    // gen-templates
    auto* gen = app.add_subcommand("gen-templates", "Build an automatic template pool through the bridge; prints jsonl");
    std::string gen_bridge;
    gen->add_option("--bridge", gen_bridge, "Bridge URL; default PPLPROMPT_BRIDGE_URL");
    long long gen_timeout_ms = 30000;
    gen->add_option("--timeout-ms", gen_timeout_ms, "Bridge request timeout in milliseconds")->capture_default_str();
    DataFlags gen_data;
    gen_data.add_to(*gen, "Inputs to sample from; default: standard input lines");
    std::string gen_verbalizer;
    gen->add_option("--verbalizer", gen_verbalizer, "Verbalizer JSON")->required();
    AutoPoolOptions gen_options;
    gen->add_option("--n-examples", gen_options.n_examples, "Inputs sampled")->capture_default_str();
    gen->add_option("--seed", gen_options.seed, "Sampling seed")->capture_default_str();
    bool gen_keep_duplicates = false;
    gen->add_flag("--keep-duplicates", gen_keep_duplicates, "Do not drop identical patterns");
    gen->add_option("--num-return", gen_options.num_return, "Templates requested per call")->capture_default_str();
    gen->add_option("--max-new-tokens", gen_options.max_new_tokens, "Generation length cap")->capture_default_str();
    gen->add_option("--retries", gen_options.retries, "Retries per (input, label word)")->capture_default_str();
    gen->add_option("--id-prefix", gen_options.id_prefix, "Prefix of generated template ids")->capture_default_str();
    std::string gen_placement = "postfix";
    gen->add_option("--placement", gen_placement, "Placement of generated templates")
        ->check(CLI::IsMember({"prefix", "postfix"}))
        ->capture_default_str();
    std::string gen_meta;
    gen->add_option("--meta", gen_meta, "Write pool provenance and the generation request format to this JSON file");

    // prep-data
    auto* prep = app.add_subcommand("prep-data", "Subsample and split a dataset");
    DataFlags prep_data;
    prep->add_option("--input", prep_data.path, "Dataset file")->required();
    prep_data.add_format(*prep);
    std::string prep_name;
    prep->add_option("--name", prep_name, "Dataset name; default file stem");
    bool prep_subsample = false;
    prep->add_flag("--subsample", prep_subsample, "Keep examples within the token bounds, then balance classes");
    SubsampleSpec subsample;
    prep->add_option("--min-tokens", subsample.min_tokens, "Inclusive lower token bound")->capture_default_str();
    prep->add_option("--max-tokens", subsample.max_tokens, "Inclusive upper token bound")->capture_default_str();
    std::string prep_balance;
    prep->add_option("--balance", prep_balance, "Target shares, e.g. pos=0.5,neg=0.5; default uniform");
    ScorerFlags prep_scorer;
    prep->add_option("--scorer", prep_scorer.binding, "Scorer whose tokenizer measures length; default whitespace");
    prep->add_option("--timeout-ms", prep_scorer.timeout_ms, "Bridge request timeout in milliseconds");
    std::uint64_t prep_seed = 0;
    prep->add_option("--seed", prep_seed, "Sampling seed")->capture_default_str();
    SplitSpec split;
    std::size_t prep_splits = 0;
    prep->add_option("--splits", prep_splits, "Number of train splits; 0 prints the (subsampled) dataset")
        ->capture_default_str();
    prep->add_option("--shots", split.shots_per_class, "Examples per class in each train split")->capture_default_str();
    prep->add_flag("--disjoint", split.disjoint, "Draw train splits without overlap");
    prep->add_option("--dev-multiple", split.dev_multiple, "Dev size in train-split units")->capture_default_str();
    std::string prep_out_dir;
    prep->add_option("--out-dir", prep_out_dir, "Directory for train-<i>.jsonl, dev.jsonl and test.jsonl");

    // diagnose
    auto* diagnose = app.add_subcommand("diagnose", "Length-bias and reverse-label diagnostics");
    diagnose->require_subcommand(1);
    auto* length_bias = diagnose->add_subcommand(
        "length-bias", "Raw-text perplexity against token length; columns dataset, min_tokens, max_tokens, "
                       "mean_tokens, mean_ppl, count");
    ScorerFlags length_scorer;
    length_scorer.add_to(*length_bias);
    std::vector<std::string> length_paths;
    DataFlags length_data;
    length_bias->add_option("--data", length_paths, "Dataset files (repeatable); names are file stems")->required();
    length_data.add_format(*length_bias);
    std::size_t bucket_width = 0;
    length_bias->add_option("--bucket-width", bucket_width, "Token bucket width; 0 means one bucket per dataset")
        ->capture_default_str();
    std::string length_format = "tsv";
    length_bias->add_option("--format", length_format, "tsv or jsonl")
        ->check(CLI::IsMember({"tsv", "jsonl"}))
        ->capture_default_str();

    auto* reverse = diagnose->add_subcommand(
        "reverse-label", "Gold versus reversed label-word perplexity; columns dataset, template_id, ppl_g, ppl_r, "
                         "diff, count");
    ScorerFlags reverse_scorer;
    reverse_scorer.add_to(*reverse);
    std::vector<std::string> reverse_paths;
    DataFlags reverse_data;
    reverse->add_option("--data", reverse_paths, "Labeled dataset files (repeatable)")->required();
    reverse_data.add_format(*reverse);
    TemplateFlags reverse_template;
    reverse_template.add_to(*reverse);
    std::string reverse_verbalizer;
    reverse->add_option("--verbalizer", reverse_verbalizer, "Binary verbalizer JSON")->required();
    std::string reverse_format = "tsv";
    reverse->add_option("--format", reverse_format, "tsv or jsonl")
        ->check(CLI::IsMember({"tsv", "jsonl"}))
        ->capture_default_str();

    // eval
    auto* eval = app.add_subcommand("eval", "Run an experiment config, write reports and print the result table");
    std::string eval_config;
    eval->add_option("--config", eval_config, "Experiment config (JSON)")->required();
    std::string eval_output;
    eval->add_option("--output-dir", eval_output, "Override the config's output_directory");
    std::size_t eval_threads = 0;
    eval->add_option("--threads", eval_threads, "Override the config's worker count");

    std::vector<std::string> argv_storage{"pplprompt"};
    argv_storage.insert(argv_storage.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& arg : argv_storage) argv.push_back(arg.data());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "error: usage: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    LogRedirect logs(err, log_level);
    try {
        if (*score) {
            const auto scorer = score_scorer.resolve();
            const auto texts = score_inputs(score_texts, score_file, in);
            std::size_t clamped = 0;
            for (const auto& text : texts) {
                const auto ppl = pseudo_perplexity(text, *scorer);
                clamped += ppl.clamp_events;
                out << fixed6(ppl.value) << '\n';
            }
            if (clamped) spdlog::warn("{} token NLLs were clamped", clamped);
        } else if (*classify) {
            const auto scorer = classify_scorer.resolve();
            const auto tmpl = classify_template.single();
            const auto verbalizer = load_verbalizer(classify_verbalizer);
            const auto mode = parse_classify_mode(classify_mode);
            const auto dataset = classify_data.load(in);
            for (std::size_t i = 0; i < dataset.size(); ++i) {
                const auto& example = dataset.examples()[i];
                const auto predicted = zero_shot_classify(example.text, tmpl, verbalizer, *scorer, mode);
                if (classify_format == "plain") {
                    out << predicted << '\n';
                    continue;
                }
                ordered_json record;
                record["example_index"] = i;
                record["template_id"] = tmpl.id();
                record["predicted_class"] = predicted;
                record["gold_class"] = example.label ? ordered_json(*example.label) : ordered_json(nullptr);
                out << record.dump() << '\n';
            }
        } else if (*select) {
            const auto scorer = select_scorer.resolve();
            const TemplatePool pool(load_template_pool(select_pool), PoolProvenance::Manual);
            const auto verbalizer = load_verbalizer(select_verbalizer);
            const auto mode = parse_classify_mode(select_mode);
            const auto dataset = select_data.load(in);
            const bool random = select_method == "random";
            std::vector<SelectionTrace> traces;
            for (std::size_t i = 0; i < dataset.size(); ++i) {
                const auto& example = dataset.examples()[i];
                traces.push_back(random ? select_template_random(example, i, pool, verbalizer, *scorer, select_seed, mode)
                                        : select_template_ppl(example, i, pool, verbalizer, *scorer, mode));
                if (!select_frequencies) {
                    const TraceRecord record{dataset.name(), random ? "random-select" : "ppl-select",
                                             fs::path(select_pool).stem().string(),
                                             random ? std::optional<std::uint64_t>(select_seed) : std::nullopt,
                                             traces.back()};
                    out << rounded_trace(record).dump() << '\n';
                }
            }
            if (select_frequencies) {
                bool labeled = !dataset.examples().empty();
                for (const auto& example : dataset.examples()) labeled = labeled && example.label.has_value();
                const auto rows = labeled ? selection_frequency_report(traces, pool,
                                                                       PostHocInputs{dataset.examples(), verbalizer,
                                                                                     *scorer, mode})
                                          : selection_frequency_report(traces, pool);
                out << "template_id\tfrequency\taccuracy\n";
                for (const auto& row : rows) {
                    out << row.template_id << '\t' << fixed6(row.frequency) << '\t'
                        << (row.accuracy ? fixed6(*row.accuracy) : std::string("NA")) << '\n';
                }
            }
        } else if (*gen) {
            std::string url = gen_bridge;
            if (url.empty()) {
                if (const char* env = std::getenv(std::string(kBridgeUrlEnv).c_str())) url = env;
            }
            if (url.empty()) throw UsageError("--bridge is required (or set " + std::string(kBridgeUrlEnv) + ")");
            BridgeEndpoint endpoint;
            endpoint.base_url = url;
            endpoint.timeout = std::chrono::milliseconds(gen_timeout_ms);
            const RemoteGenerator generator(endpoint);
            const auto verbalizer = load_verbalizer(gen_verbalizer);
            const auto dataset = gen_data.load(in);
            gen_options.dedupe = !gen_keep_duplicates;
            gen_options.placement = parse_placement(gen_placement);
            const auto pool = build_auto_pool(dataset.examples(), verbalizer, generator, gen_options);
            for (const auto& tmpl : pool.templates()) out << template_to_json(tmpl) << '\n';
            if (!gen_meta.empty()) {
                ordered_json meta;
                meta["provenance"] = provenance_name(pool.provenance());
                meta["generation_prompt"] = pool.generation_prompt();
                meta["generator_model"] = generator.health().model;
                meta["n_examples"] = gen_options.n_examples;
                meta["seed"] = gen_options.seed;
                meta["dedupe"] = gen_options.dedupe;
                write_file(gen_meta, meta.dump(2) + "\n");
            }
        } else if (*prep) {
            std::istringstream none;
            auto dataset = prep_data.load(none);
            if (!prep_name.empty()) dataset = Dataset(prep_name, dataset.examples());
            if (prep_subsample) {
                subsample.balance = prep_balance.empty() ? decltype(subsample.balance){} : parse_balance(prep_balance);
                subsample.seed = prep_seed;
                if (prep_scorer.binding.empty()) {
                    dataset = subsample_balanced(dataset, subsample, WhitespaceTokenizer{});
                } else {
                    dataset = subsample_balanced(dataset, subsample, *prep_scorer.resolve());
                }
                spdlog::info("subsampled {} to {} examples", dataset.name(), dataset.size());
            }
            if (prep_splits == 0) {
                out << dataset_to_jsonl(dataset);
            } else {
                if (prep_out_dir.empty()) throw UsageError("--splits needs --out-dir");
                split.k_train_splits = prep_splits;
                split.seed = prep_seed;
                const auto splits = make_splits(dataset, split);
                std::error_code ec;
                fs::create_directories(prep_out_dir, ec);
                if (ec) throw Error(ErrorCode::IoError, "cannot create " + prep_out_dir + ": " + ec.message());
                std::vector<std::pair<fs::path, const Dataset*>> files;
                for (std::size_t s = 0; s < splits.train.size(); ++s) {
                    files.emplace_back(fs::path(prep_out_dir) / ("train-" + std::to_string(s) + ".jsonl"),
                                       &splits.train[s]);
                }
                files.emplace_back(fs::path(prep_out_dir) / "dev.jsonl", &splits.dev);
                files.emplace_back(fs::path(prep_out_dir) / "test.jsonl", &splits.test);
                for (const auto& [path, data] : files) {
                    write_file(path, dataset_to_jsonl(*data));
                    out << path.string() << '\n';
                }
            }
        } else if (*length_bias) {
            const auto scorer = length_scorer.resolve();
            std::vector<NamedTexts> named;
            for (const auto& dataset : load_many(length_paths, length_data)) {
                NamedTexts texts{dataset.name(), {}};
                for (const auto& example : dataset.examples()) texts.texts.push_back(example.text);
                named.push_back(std::move(texts));
            }
            LengthBucketing bucketing;
            if (bucket_width > 0) bucketing.width = bucket_width;
            const auto report = length_bias_report(named, *scorer, bucketing);
            if (report.clamp_events) spdlog::warn("{} token NLLs were clamped", report.clamp_events);
            out << (length_format == "tsv" ? length_bias_tsv(report) : length_bias_jsonl(report));
        } else if (*reverse) {
            const auto scorer = reverse_scorer.resolve();
            const auto templates = reverse_template.all();
            const auto verbalizer = load_verbalizer(reverse_verbalizer);
            std::vector<ReverseLabelRow> rows;
            for (const auto& dataset : load_many(reverse_paths, reverse_data)) {
                for (const auto& tmpl : templates) {
                    rows.push_back(reverse_label_report(dataset.name(), dataset.examples(), tmpl, verbalizer, *scorer));
                }
            }
            out << (reverse_format == "tsv" ? reverse_label_tsv(rows) : reverse_label_jsonl(rows));
        } else if (*eval) {
            auto config = load_experiment_config(eval_config);
            if (!eval_output.empty()) config.output_directory = eval_output;
            if (eval_threads > 0) config.threads = eval_threads;
            const auto report = run_experiment(config);
            const auto written = emit_report(report, config.output_directory);
            for (const auto& path : written) spdlog::info("wrote {}", path.string());
            out << report_to_table(report);
            if (!report.complete) {
                err << "error: incomplete: " << report.failure << '\n';
                return 1;
            }
        }
    } catch (const UsageError& e) {
        err << "error: usage: " << e.what() << '\n';
        return 2;
    } catch (const Error& e) {
        err << "error: " << error_code_name(e.code()) << ": " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: internal: " << e.what() << '\n';
        return 1;
    }
    out.flush();
    return 0;
}

}  // namespace pplprompt::cli
