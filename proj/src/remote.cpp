#include <httplib.h>

#include "rae/remote.hpp"

#include "rae/error.hpp"
#include "rae/text.hpp"

#include <cmath>
#include <cstdlib>
#include <numbers>
#include <thread>

namespace rae {

namespace {

constexpr double kLn2 = std::numbers::ln2;

class HttplibTransport final : public HttpTransport {
public:
    HttplibTransport(Endpoint endpoint, std::chrono::milliseconds timeout)
        : endpoint_(std::move(endpoint)), timeout_(timeout) {}

    HttpResponse post_json(const std::string& body, const HttpHeaders& headers) override {
        auto client = checkout();
        httplib::Headers hdrs;
        for (const auto& [k, v] : headers) hdrs.emplace(k, v);
        auto result = client->Post(endpoint_.path, hdrs, body, "application/json");
        if (!result) {
            // Drop the connection; it may be half-open.
            throw TransportError(endpoint_.origin() + ": " + httplib::to_string(result.error()));
        }
        HttpResponse response{result->status, result->body};
        checkin(std::move(client));
        return response;
    }

private:
    std::unique_ptr<httplib::Client> checkout() {
        {
            std::lock_guard lock(mu_);
            if (!idle_.empty()) {
                auto c = std::move(idle_.back());
                idle_.pop_back();
                return c;
            }
        }
        auto c = std::make_unique<httplib::Client>(endpoint_.origin());
        const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
        const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout_ - secs);
        c->set_connection_timeout(secs.count(), usecs.count());
        c->set_read_timeout(secs.count(), usecs.count());
        c->set_write_timeout(secs.count(), usecs.count());
        c->set_keep_alive(true);
        return c;
    }

    void checkin(std::unique_ptr<httplib::Client> c) {
        std::lock_guard lock(mu_);
        idle_.push_back(std::move(c));
    }

    Endpoint endpoint_;
    std::chrono::milliseconds timeout_;
    std::mutex mu_;
    std::vector<std::unique_ptr<httplib::Client>> idle_;
};

const json& logprobs_of(const json& response) {
    auto choices = response.find("choices");
    if (choices == response.end() || !choices->is_array() || choices->empty()) {
        throw ProtocolError("response has no choices[0]");
    }
    const json& choice = (*choices)[0];
    auto lp = choice.find("logprobs");
    if (lp == choice.end() || !lp->is_object()) throw ProtocolError("choices[0].logprobs missing");
    return *lp;
}

}  // namespace

Endpoint Endpoint::parse(std::string_view url) {
    Endpoint ep;
    std::string_view rest;
    if (url.starts_with("http://")) {
        ep.scheme = "http";
        ep.port = 80;
        rest = url.substr(7);
    } else if (url.starts_with("https://")) {
        ep.scheme = "https";
        ep.port = 443;
        rest = url.substr(8);
    } else {
        throw ValidationError("endpoint must start with http:// or https://: '" + std::string(url) + "'");
    }
    const std::size_t slash = rest.find('/');
    std::string_view authority = rest.substr(0, slash);
    ep.path = slash == std::string_view::npos ? "/v1/completions" : std::string(rest.substr(slash));
    if (ep.path == "/") ep.path = "/v1/completions";
    const std::size_t colon = authority.rfind(':');
    if (colon != std::string_view::npos && authority.find(']') == std::string_view::npos) {
        std::string port(authority.substr(colon + 1));
        authority = authority.substr(0, colon);
        char* end = nullptr;
        long value = std::strtol(port.c_str(), &end, 10);
        if (port.empty() || *end != '\0' || value <= 0 || value > 65535) {
            throw ValidationError("invalid port in endpoint '" + std::string(url) + "'");
        }
        ep.port = static_cast<int>(value);
    }
    if (authority.empty()) throw ValidationError("endpoint has no host: '" + std::string(url) + "'");
    ep.host = std::string(authority);
    return ep;
}

std::string Endpoint::origin() const {
    return scheme + "://" + host + ":" + std::to_string(port);
}

void EndpointConfig::validate() const {
    Endpoint::parse(url);
    if (timeout.count() <= 0) throw ValidationError("request timeout must be positive");
    if (max_retries < 1) throw ValidationError("max retries must be at least 1");
    if (retry_backoff.count() < 0) throw ValidationError("retry backoff must be non-negative");
    if (top_logprobs < 1) throw ValidationError("logprobs K must be at least 1");
    if (max_in_flight < 1) throw ValidationError("max in-flight requests must be at least 1");
}

std::shared_ptr<HttpTransport> make_http_transport(const Endpoint& endpoint, std::chrono::milliseconds timeout) {
    return std::make_shared<HttplibTransport>(endpoint, timeout);
}

void CompletionsClient::Slots::acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return free_ > 0; });
    --free_;
}

void CompletionsClient::Slots::release() {
    {
        std::lock_guard lock(mu_);
        ++free_;
    }
    cv_.notify_one();
}

CompletionsClient::CompletionsClient(EndpointConfig config, std::shared_ptr<HttpTransport> transport)
    : config_((config.validate(), std::move(config))),
      endpoint_(Endpoint::parse(config_.url)),
      transport_(std::move(transport)),
      slots_(config_.max_in_flight) {}

HttpTransport& CompletionsClient::transport() const {
    std::call_once(transport_once_, [&] {
        if (!transport_) transport_ = make_http_transport(endpoint_, config_.timeout);
    });
    return *transport_;
}

json CompletionsClient::complete(const json& request) const {
    HttpHeaders headers;
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
        headers.emplace_back("Authorization", std::string("Bearer ") + key);
    }
    const std::string body = request.dump();

    std::string last_error;
    for (int attempt = 0; attempt < config_.max_retries; ++attempt) {
        if (attempt > 0 && config_.retry_backoff.count() > 0) {
            std::this_thread::sleep_for(config_.retry_backoff * (1 << std::min(attempt - 1, 6)));
        }
        HttpResponse response;
        slots_.acquire();
        try {
            response = transport().post_json(body, headers);
        } catch (const TransportError& e) {
            slots_.release();
            last_error = e.what();
            continue;
        } catch (...) {
            slots_.release();
            throw;
        }
        slots_.release();

        const int status = response.status;
        if (status == 401 || status == 403) {
            throw CredentialError("endpoint rejected credentials (HTTP " + std::to_string(status) +
                                  "); check $" + config_.api_key_env);
        }
        if (status == 408 || status == 429 || status >= 500) {
            last_error = "HTTP " + std::to_string(status);
            continue;
        }
        if (status == 400 || status == 422) {
            throw RejectedRequest("HTTP " + std::to_string(status) + ": " + response.body.substr(0, 512));
        }
        if (status < 200 || status >= 300) {
            throw ProtocolError("unexpected HTTP " + std::to_string(status));
        }
        try {
            return json::parse(response.body);
        } catch (const json::parse_error& e) {
            throw ProtocolError(std::string("response is not JSON: ") + e.what());
        }
    }
    throw ConnectionError(endpoint_.origin() + " unreachable after " + std::to_string(config_.max_retries) +
                          " attempts: " + last_error);
}

double continuation_logprob_from_echo(const json& response, std::size_t context_bytes, std::size_t prompt_bytes) {
    const json& lp = logprobs_of(response);
    auto tokens = lp.find("tokens");
    auto logprobs = lp.find("token_logprobs");
    if (tokens == lp.end() || !tokens->is_array() || logprobs == lp.end() || !logprobs->is_array() ||
        tokens->size() != logprobs->size()) {
        throw ProtocolError("logprobs.tokens / logprobs.token_logprobs missing or mismatched");
    }
    const json* offsets = nullptr;
    if (auto it = lp.find("text_offset"); it != lp.end() && it->is_array() && it->size() == tokens->size()) {
        offsets = &*it;
    }

    double total = 0.0;
    std::size_t covered = 0;
    std::size_t start = 0;
    for (std::size_t i = 0; i < tokens->size(); ++i) {
        const json& tok = (*tokens)[i];
        if (!tok.is_string()) throw ProtocolError("non-string token in logprobs.tokens");
        if (offsets) start = (*offsets)[i].get<std::size_t>();
        const std::size_t end = start + tok.get_ref<const std::string&>().size();
        if (start >= prompt_bytes) break;  // generated, not echoed
        if (end > context_bytes) {
            const json& value = (*logprobs)[i];
            if (!value.is_number()) {
                throw ProtocolError("continuation token " + std::to_string(i) + " has no logprob");
            }
            total += value.get<double>() / kLn2;
            ++covered;
        }
        start = end;
    }
    if (covered == 0) throw ProtocolError("echoed tokens do not cover the continuation");
    return total;
}

TokenDist top_logprobs_to_dist(const json& response) {
    const json& lp = logprobs_of(response);
    auto top = lp.find("top_logprobs");
    if (top == lp.end() || !top->is_array() || top->empty()) {
        throw ProtocolError("logprobs.top_logprobs missing");
    }
    const json& first = (*top)[0];
    TokenDist dist;
    auto add = [&](const std::string& token, const json& value) {
        if (!value.is_number()) throw ProtocolError("non-numeric top logprob");
        dist.entries[token] += std::exp(value.get<double>());
    };
    if (first.is_object()) {
        for (const auto& [token, value] : first.items()) add(token, value);
    } else if (first.is_array()) {
        for (const auto& item : first) add(item.at("token").get<std::string>(), item.at("logprob"));
    } else {
        throw ProtocolError("top_logprobs[0] has unexpected shape");
    }
    double total = 0.0;
    for (const auto& [token, p] : dist.entries) total += p;
    if (total > 1.0) {
        for (auto& [token, p] : dist.entries) p /= total;
        dist.tail_mass = 0.0;
    } else {
        dist.tail_mass = 1.0 - total;
    }
    return dist;
}

RemoteScorer::RemoteScorer(std::shared_ptr<const CompletionsClient> client) : client_(std::move(client)) {}

double RemoteScorer::sequence_logprob(std::string_view context, std::string_view continuation) const {
    if (collapse_whitespace(continuation).empty()) throw ValidationError("continuation is empty");
    const std::string prompt = extend_context(context, continuation);
    json request{{"model", client_->config().model},
                 {"prompt", prompt},
                 {"logprobs", client_->config().top_logprobs},
                 {"echo", true},
                 {"temperature", 0}};
    int max_tokens = scoring_max_tokens_.load();
    request["max_tokens"] = max_tokens;
    json response;
    try {
        response = client_->complete(request);
    } catch (const RejectedRequest&) {
        if (max_tokens != 0) throw;
        scoring_max_tokens_.store(1);
        request["max_tokens"] = 1;
        response = client_->complete(request);
    }
    return continuation_logprob_from_echo(response, context.size(), prompt.size());
}

TokenDist RemoteScorer::next_token_dist(std::string_view context) const {
    json request{{"model", client_->config().model},
                 {"prompt", std::string(context)},
                 {"max_tokens", 1},
                 {"logprobs", client_->config().top_logprobs},
                 {"echo", false},
                 {"temperature", 0}};
    return top_logprobs_to_dist(client_->complete(request));
}

std::string RemoteScorer::describe() const {
    return "remote:" + client_->config().url;
}

RemoteGenerator::RemoteGenerator(std::shared_ptr<const CompletionsClient> client) : client_(std::move(client)) {}

Generation RemoteGenerator::generate(std::string_view prompt, int max_new_tokens) const {
    if (max_new_tokens < 1) throw ValidationError("max_new_tokens must be at least 1");
    json request{{"model", client_->config().model},
                 {"prompt", std::string(prompt)},
                 {"max_tokens", max_new_tokens},
                 {"logprobs", 1},
                 {"echo", false},
                 {"temperature", 0}};
    json response = client_->complete(request);
    auto choices = response.find("choices");
    if (choices == response.end() || !choices->is_array() || choices->empty()) {
        throw ProtocolError("response has no choices[0]");
    }
    const json& choice = (*choices)[0];
    Generation g;
    g.text = choice.value("text", std::string());
    auto lp = choice.find("logprobs");
    if (lp != choice.end() && lp->is_object() && lp->contains("tokens") && (*lp)["tokens"].is_array()) {
        for (const auto& t : (*lp)["tokens"]) g.tokens.push_back(t.get<std::string>());
        g.whitespace_tokens = false;
    } else {
        g.tokens = split_whitespace(g.text);
    }
    return g;
}

std::string RemoteGenerator::describe() const {
    return "remote:" + client_->config().url;
}

std::shared_ptr<const RemoteScorer> make_remote_scorer(EndpointConfig config, std::shared_ptr<HttpTransport> transport) {
    auto client = std::make_shared<const CompletionsClient>(std::move(config), std::move(transport));
    return std::make_shared<const RemoteScorer>(std::move(client));
}

std::shared_ptr<const RemoteGenerator> make_remote_generator(EndpointConfig config,
                                                             std::shared_ptr<HttpTransport> transport) {
    auto client = std::make_shared<const CompletionsClient>(std::move(config), std::move(transport));
    return std::make_shared<const RemoteGenerator>(std::move(client));
}

}  // namespace rae
