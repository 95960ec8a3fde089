#pragma once

#include "rae/error.hpp"
#include "rae/generator.hpp"
#include "rae/jsonl.hpp"
#include "rae/scorer.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace rae {

// Scheme, host, port and path of a completions endpoint URL.
struct Endpoint {
    std::string scheme;
    std::string host;
    int port = 0;
    std::string path;

    // Accepts http(s)://host[:port][/path]; the path defaults to
    // /v1/completions. Throws ValidationError otherwise.
    static Endpoint parse(std::string_view url);
    std::string origin() const;
};

struct EndpointConfig {
    std::string url;
    std::string model;
    std::chrono::milliseconds timeout{30000};
    int max_retries = 3;  // total attempts per request
    std::chrono::milliseconds retry_backoff{200};
    int top_logprobs = 5;
    std::string api_key_env = "RAE_API_KEY";
    std::size_t max_in_flight = 4;

    void validate() const;
};

struct HttpResponse {
    int status = 0;
    std::string body;
};

using HttpHeaders = std::vector<std::pair<std::string, std::string>>;

// POSTs a JSON body to the endpoint path. Network failures throw
// TransportError; HTTP statuses are returned, not thrown.
class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    virtual HttpResponse post_json(const std::string& body, const HttpHeaders& headers) = 0;
};

// cpp-httplib backed transport with an internal connection pool.
std::shared_ptr<HttpTransport> make_http_transport(const Endpoint& endpoint, std::chrono::milliseconds timeout);

// The endpoint rejected the request shape (HTTP 400/422).
class RejectedRequest : public ProtocolError {
public:
    using ProtocolError::ProtocolError;
};

// Completions client: retries transport failures, bounds in-flight requests,
// attaches the bearer token from the configured environment variable.
class CompletionsClient {
public:
    // Never touches the network; the first request opens connections.
    explicit CompletionsClient(EndpointConfig config, std::shared_ptr<HttpTransport> transport = nullptr);

    json complete(const json& request) const;
    const EndpointConfig& config() const { return config_; }

private:
    class Slots {
    public:
        explicit Slots(std::size_t n) : free_(n) {}
        void acquire();
        void release();

    private:
        std::mutex mu_;
        std::condition_variable cv_;
        std::size_t free_;
    };

    HttpTransport& transport() const;

    EndpointConfig config_;
    Endpoint endpoint_;
    mutable std::once_flag transport_once_;
    mutable std::shared_ptr<HttpTransport> transport_;
    mutable Slots slots_;
};

// Teacher-forced scoring through echoed prompt logprobs.
class RemoteScorer final : public Scorer {
public:
    explicit RemoteScorer(std::shared_ptr<const CompletionsClient> client);

    double sequence_logprob(std::string_view context, std::string_view continuation) const override;
    TokenDist next_token_dist(std::string_view context) const override;
    std::string describe() const override;

private:
    std::shared_ptr<const CompletionsClient> client_;
    // 0 until the endpoint rejects max_tokens = 0, then 1.
    mutable std::atomic<int> scoring_max_tokens_{0};
};

class RemoteGenerator final : public Generator {
public:
    explicit RemoteGenerator(std::shared_ptr<const CompletionsClient> client);

    Generation generate(std::string_view prompt, int max_new_tokens) const override;
    std::string describe() const override;

private:
    std::shared_ptr<const CompletionsClient> client_;
};

std::shared_ptr<const RemoteScorer> make_remote_scorer(EndpointConfig config,
                                                       std::shared_ptr<HttpTransport> transport = nullptr);
std::shared_ptr<const RemoteGenerator> make_remote_generator(EndpointConfig config,
                                                             std::shared_ptr<HttpTransport> transport = nullptr);

// Sum of base-2 logprobs of the tokens covering prompt[context_bytes, end).
// Exposed for tests of the wire contract.
double continuation_logprob_from_echo(const json& response, std::size_t context_bytes, std::size_t prompt_bytes);
TokenDist top_logprobs_to_dist(const json& response);

}  // namespace rae
