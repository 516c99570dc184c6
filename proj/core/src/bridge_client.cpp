#include "pplprompt/bridge_client.hpp"

#include <cmath>
#include <future>
#include <set>
#include <thread>

#include <httplib.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "pplprompt/caching_scorer.hpp"
#include "pplprompt/error.hpp"
#include "pplprompt/prompt.hpp"

namespace pplprompt {

namespace {

using json = nlohmann::json;
// Request bodies keep the documented key order.
using ordered_json = nlohmann::ordered_json;

json parse_body(std::string_view body, std::string_view endpoint) {
    try {
        auto doc = json::parse(body);
        if (!doc.is_object()) throw Error(ErrorCode::Protocol, std::string(endpoint) + ": response is not an object");
        return doc;
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::Protocol, std::string(endpoint) + ": malformed JSON: " + e.what());
    }
}

double require_logprob(const json& value, std::string_view endpoint) {
    if (!value.is_number()) throw Error(ErrorCode::Protocol, std::string(endpoint) + ": log-probability is not a number");
    const double lp = value.get<double>();
    if (!std::isfinite(lp) || lp > 0.0) {
        throw Error(ErrorCode::Protocol, std::string(endpoint) + ": log-probability must be finite and <= 0");
    }
    return lp;
}

std::string replace_all(std::string text, std::string_view from, std::string_view to) {
    if (from == to || from.empty()) return text;
    for (auto pos = text.find(from); pos != std::string::npos; pos = text.find(from, pos + to.size())) {
        text.replace(pos, from.size(), to);
    }
    return text;
}

std::string error_detail(const std::string& body) {
    try {
        const auto doc = json::parse(body);
        if (doc.is_object() && doc.contains("error") && doc["error"].is_string()) return doc["error"].get<std::string>();
    } catch (const json::exception&) {
    }
    return body.substr(0, 200);
}

}  // namespace

void BridgeEndpoint::validate() const {
    if (timeout.count() <= 0) throw Error(ErrorCode::ConfigError, "bridge timeout must be positive");
    if (max_batch < 1) throw Error(ErrorCode::ConfigError, "bridge max batch must be at least 1");
    if (max_in_flight < 1 || max_in_flight > 1024) {
        throw Error(ErrorCode::ConfigError, "bridge in-flight limit must be in [1, 1024]");
    }
    if (retry.count < 0) throw Error(ErrorCode::ConfigError, "retry count must be non-negative");
    if (base_url.rfind("http://", 0) != 0) {
        throw Error(ErrorCode::ConfigError, "bridge URL must start with http://, got \"" + base_url + "\"");
    }
}

BridgeConnection::BridgeConnection(BridgeEndpoint endpoint)
    : endpoint_(std::move(endpoint)), in_flight_(static_cast<std::ptrdiff_t>(std::max<std::size_t>(1, endpoint_.max_in_flight))) {
    endpoint_.validate();
    const auto scheme_end = endpoint_.base_url.find("://") + 3;
    const auto path_start = endpoint_.base_url.find('/', scheme_end);
    origin_ = endpoint_.base_url.substr(0, path_start);
    if (path_start != std::string::npos) {
        path_prefix_ = endpoint_.base_url.substr(path_start);
        while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
    }
}

std::string BridgeConnection::get(std::string_view path) const { return request("GET", path, nullptr); }

std::string BridgeConnection::post(std::string_view path, const std::string& body) const {
    return request("POST", path, &body);
}

std::string BridgeConnection::request(std::string_view method, std::string_view path, const std::string* body) const {
    const std::string target = path_prefix_ + std::string(path);
    const auto timeout_s = std::chrono::duration_cast<std::chrono::seconds>(endpoint_.timeout);
    const auto timeout_us =
        std::chrono::duration_cast<std::chrono::microseconds>(endpoint_.timeout - timeout_s);

    std::string last_error;
    for (int attempt = 0; attempt <= endpoint_.retry.count; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(endpoint_.retry.backoff * (1 << std::min(attempt - 1, 10)));
        }
        httplib::Result result;
        {
            in_flight_.acquire();
            httplib::Client client(origin_);
            client.set_connection_timeout(timeout_s.count(), timeout_us.count());
            client.set_read_timeout(timeout_s.count(), timeout_us.count());
            client.set_write_timeout(timeout_s.count(), timeout_us.count());
            result = method == "GET" ? client.Get(target) : client.Post(target, *body, "application/json");
            in_flight_.release();
        }
        if (!result) {
            last_error = "request to " + target + " failed: " + httplib::to_string(result.error());
        } else if (result->status >= 500) {
            last_error = target + " returned HTTP " + std::to_string(result->status) + ": " + error_detail(result->body);
        } else if (result->status >= 400) {
            throw Error(ErrorCode::ModelError,
                        target + " returned HTTP " + std::to_string(result->status) + ": " + error_detail(result->body));
        } else if (result->status != 200) {
            throw Error(ErrorCode::Protocol, target + " returned unexpected HTTP " + std::to_string(result->status));
        } else {
            return result->body;
        }
        spdlog::debug("bridge attempt {}/{}: {}", attempt + 1, endpoint_.retry.count + 1, last_error);
    }
    throw Error(ErrorCode::Transport, last_error);
}

BridgeHealth parse_health(std::string_view body) {
    const auto doc = parse_body(body, "/v1/health");
    const auto model = doc.find("model");
    const auto vocab = doc.find("vocab_size");
    if (model == doc.end() || !model->is_string()) throw Error(ErrorCode::Protocol, "/v1/health: missing \"model\"");
    if (vocab == doc.end() || !vocab->is_number_integer() || vocab->get<long long>() <= 0) {
        throw Error(ErrorCode::Protocol, "/v1/health: \"vocab_size\" must be a positive integer");
    }
    BridgeHealth health{model->get<std::string>(), vocab->get<std::size_t>(), std::string(kMaskToken)};
    if (const auto mask = doc.find("mask_token"); mask != doc.end()) {
        if (!mask->is_string() || mask->get<std::string>().empty()) {
            throw Error(ErrorCode::Protocol, "/v1/health: \"mask_token\" must be a non-empty string");
        }
        health.mask_token = mask->get<std::string>();
    }
    return health;
}

RemoteScorer::RemoteScorer(BridgeEndpoint endpoint)
    : connection_(std::move(endpoint)), health_(parse_health(connection_.get("/v1/health"))) {
    spdlog::info("bridge scorer: model {} (vocab {}, mask {})", health_.model, health_.vocab_size, health_.mask_token);
}

std::string RemoteScorer::to_native(std::string_view text) const {
    return replace_all(std::string(text), kMaskToken, health_.mask_token);
}

std::vector<std::string> RemoteScorer::tokenize(std::string_view text) const {
    const std::string body = ordered_json{{"text", to_native(text)}}.dump();
    const auto doc = parse_body(connection_.post("/v1/tokenize", body), "/v1/tokenize");
    const auto tokens = doc.find("tokens");
    const auto ids = doc.find("ids");
    if (tokens == doc.end() || !tokens->is_array() || ids == doc.end() || !ids->is_array()) {
        throw Error(ErrorCode::Protocol, "/v1/tokenize: expected \"tokens\" and \"ids\" arrays");
    }
    if (tokens->size() != ids->size()) throw Error(ErrorCode::Protocol, "/v1/tokenize: tokens and ids differ in length");
    std::vector<std::string> out;
    out.reserve(tokens->size());
    for (std::size_t i = 0; i < tokens->size(); ++i) {
        if (!(*tokens)[i].is_string() || !(*ids)[i].is_number_integer()) {
            throw Error(ErrorCode::Protocol, "/v1/tokenize: token " + std::to_string(i) + " is malformed");
        }
        out.push_back((*tokens)[i].get<std::string>());
    }
    return out;
}

std::vector<double> RemoteScorer::token_logprobs(std::string_view text) const {
    const std::string body = ordered_json{{"text", to_native(text)}}.dump();
    const auto doc = parse_body(connection_.post("/v1/token_logprobs", body), "/v1/token_logprobs");
    const auto logprobs = doc.find("logprobs");
    if (logprobs == doc.end() || !logprobs->is_array()) {
        throw Error(ErrorCode::Protocol, "/v1/token_logprobs: expected a \"logprobs\" array");
    }
    std::vector<double> out;
    out.reserve(logprobs->size());
    for (const auto& value : *logprobs) out.push_back(require_logprob(value, "/v1/token_logprobs"));
    return out;
}

std::vector<std::vector<double>> RemoteScorer::token_logprobs_batch(std::span<const std::string> texts) const {
    std::vector<std::vector<double>> out(texts.size());
    const auto batch = connection_.endpoint().max_batch;
    for (std::size_t start = 0; start < texts.size(); start += batch) {
        const auto end = std::min(texts.size(), start + batch);
        if (end - start == 1) {
            out[start] = token_logprobs(texts[start]);
            continue;
        }
        std::vector<std::future<std::vector<double>>> pending;
        pending.reserve(end - start);
        for (std::size_t i = start; i < end; ++i) {
            pending.push_back(std::async(std::launch::async, [this, &texts, i] { return token_logprobs(texts[i]); }));
        }
        // Collect every future before rethrowing so no request outlives the call.
        std::exception_ptr failure;
        for (std::size_t i = start; i < end; ++i) {
            try {
                out[i] = pending[i - start].get();
            } catch (...) {
                if (!failure) failure = std::current_exception();
            }
        }
        if (failure) std::rethrow_exception(failure);
    }
    return out;
}

std::vector<double> RemoteScorer::mask_candidate_logprobs(std::string_view text_with_mask,
                                                          std::span<const std::string> candidates) const {
    const std::string body = ordered_json{{"text_with_mask", to_native(text_with_mask)},
                                  {"mask_token", health_.mask_token},
                                  {"candidates", std::vector<std::string>(candidates.begin(), candidates.end())}}
                                 .dump();
    const auto doc = parse_body(connection_.post("/v1/mask_candidates", body), "/v1/mask_candidates");
    const auto logprobs = doc.find("logprobs");
    if (logprobs == doc.end() || !logprobs->is_object()) {
        throw Error(ErrorCode::Protocol, "/v1/mask_candidates: expected a \"logprobs\" object");
    }
    const std::set<std::string> requested(candidates.begin(), candidates.end());
    for (const auto& [word, value] : logprobs->items()) {
        if (!requested.count(word)) {
            throw Error(ErrorCode::Protocol, "/v1/mask_candidates: unrequested candidate \"" + word + "\"");
        }
    }
    std::vector<double> out;
    out.reserve(candidates.size());
    for (const auto& candidate : candidates) {
        const auto it = logprobs->find(candidate);
        if (it == logprobs->end()) {
            throw Error(ErrorCode::Protocol, "/v1/mask_candidates: missing candidate \"" + candidate + "\"");
        }
        out.push_back(require_logprob(*it, "/v1/mask_candidates"));
    }
    return out;
}

std::shared_ptr<const MaskedTokenScorer> remote_scorer(BridgeEndpoint endpoint) {
    return std::make_shared<CachingScorer>(std::make_shared<RemoteScorer>(std::move(endpoint)));
}

RemoteGenerator::RemoteGenerator(BridgeEndpoint endpoint)
    : connection_(std::move(endpoint)), health_(parse_health(connection_.get("/v1/health"))) {}

std::vector<std::string> RemoteGenerator::generate(const GenerationRequest& request) const {
    const std::string body = ordered_json{{"input", request.input},
                                  {"filled_label_word", request.filled_label_word},
                                  {"num_return", request.num_return},
                                  {"max_new_tokens", request.max_new_tokens}}
                                 .dump();
    const auto doc = parse_body(connection_.post("/v1/generate", body), "/v1/generate");
    const auto templates = doc.find("templates");
    if (templates == doc.end() || !templates->is_array()) {
        throw Error(ErrorCode::Protocol, "/v1/generate: expected a \"templates\" array");
    }
    std::vector<std::string> out;
    out.reserve(templates->size());
    for (const auto& value : *templates) {
        if (!value.is_string()) throw Error(ErrorCode::Protocol, "/v1/generate: template is not a string");
        out.push_back(replace_all(value.get<std::string>(), health_.mask_token, kMaskToken));
    }
    return out;
}

}  // namespace pplprompt
