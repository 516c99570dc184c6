#pragma once

// Client side of the model-bridge wire protocol (UTF-8 JSON over HTTP):
//
//   POST /v1/tokenize        {"text"}                       -> {"tokens": [str], "ids": [int]}
//   POST /v1/token_logprobs  {"text"}                       -> {"logprobs": [float]}
//   POST /v1/mask_candidates {"text_with_mask", "mask_token", "candidates"}
//                                                           -> {"logprobs": {word: float}}
//   POST /v1/generate        {"input", "filled_label_word", "num_return", "max_new_tokens"}
//                                                           -> {"templates": [str]}
//   GET  /v1/health                                         -> {"model", "vocab_size"}
//
// Log-probabilities are natural logs, finite and <= 0; anything else in a 200
// response is a Protocol error. Connection failures and 5xx responses are
// Transport errors and are retried; 4xx responses are relayed as ModelError.

#include <chrono>
#include <cstddef>
#include <memory>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include "pplprompt/scorer.hpp"
#include "pplprompt/selection.hpp"

namespace pplprompt {

inline constexpr std::string_view kBridgeUrlEnv = "PPLPROMPT_BRIDGE_URL";

struct RetryPolicy {
    /// Retries after the first attempt.
    int count = 3;
    std::chrono::milliseconds backoff{50};
};

struct BridgeEndpoint {
    std::string base_url;
    std::chrono::milliseconds timeout{30000};
    std::size_t max_batch = 16;
    RetryPolicy retry;
    std::size_t max_in_flight = 8;

    /// Throws ConfigError unless timeout > 0, max_batch >= 1 and the URL is http://.
    void validate() const;
};

struct BridgeHealth {
    std::string model;
    std::size_t vocab_size = 0;
    /// Native mask token; "[MASK]" when the bridge does not advertise one.
    std::string mask_token;
};

/// Issues protocol requests with the retry policy and the in-flight bound.
/// Payloads are serialized once and resent unchanged on retry.
class BridgeConnection {
public:
    explicit BridgeConnection(BridgeEndpoint endpoint);

    std::string get(std::string_view path) const;
    std::string post(std::string_view path, const std::string& body) const;

    const BridgeEndpoint& endpoint() const noexcept { return endpoint_; }

private:
    std::string request(std::string_view method, std::string_view path, const std::string* body) const;

    BridgeEndpoint endpoint_;
    std::string origin_;
    std::string path_prefix_;
    mutable std::counting_semaphore<1024> in_flight_;
};

BridgeHealth parse_health(std::string_view body);

/// Scorer backed by the bridge. Construction performs the health check.
/// Uncached; use remote_scorer() for the cached variant.
class RemoteScorer final : public MaskedTokenScorer {
public:
    explicit RemoteScorer(BridgeEndpoint endpoint);

    const BridgeHealth& health() const noexcept { return health_; }

    std::vector<std::string> tokenize(std::string_view text) const override;
    std::vector<double> token_logprobs(std::string_view text) const override;
    std::vector<double> mask_candidate_logprobs(std::string_view text_with_mask,
                                                std::span<const std::string> candidates) const override;
    std::size_t vocab_size() const override { return health_.vocab_size; }

    /// Requests are issued max_batch at a time and reassembled by position.
    std::vector<std::vector<double>> token_logprobs_batch(std::span<const std::string> texts) const override;

private:
    std::string to_native(std::string_view text) const;

    BridgeConnection connection_;
    BridgeHealth health_;
};

/// Cached RemoteScorer.
std::shared_ptr<const MaskedTokenScorer> remote_scorer(BridgeEndpoint endpoint);

class RemoteGenerator final : public TemplateGenerator {
public:
    explicit RemoteGenerator(BridgeEndpoint endpoint);

    const BridgeHealth& health() const noexcept { return health_; }

    /// Native mask tokens in the returned templates are rewritten to "[MASK]".
    std::vector<std::string> generate(const GenerationRequest& request) const override;

private:
    BridgeConnection connection_;
    BridgeHealth health_;
};

}  // namespace pplprompt
