#pragma once

#include "resrag/embedding.hpp"
#include "resrag/generation.hpp"

#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <thread>

namespace mocks {

/// Deterministic vector for a text: components drawn from a hash of the text.
inline std::vector<float> fake_vector(std::string const &text, int dim)
{
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::vector<float> v(static_cast<std::size_t>(dim));
  for (auto &x : v) {
    h ^= h >> 33;
    h *= 0xff51afd7ed558ccdull;
    h ^= h >> 33;
    x = static_cast<float>(static_cast<double>(h % 2001) / 1000.0 - 1.0);
  }
  v[0] += 3.0f; // keep vectors away from zero
  return v;
}

/// Embedding provider with a call counter and scripted failures.
class CountingEmbedder : public resrag::EmbeddingProvider
{
public:
  explicit CountingEmbedder(int dim = 8, std::string model = "mock-emb")
    : dim_(dim)
    , model_(std::move(model))
  {
  }

  std::string model_id() const override { return model_; }

  resrag::EmbedResponse embed(std::vector<std::string> const &texts) override
  {
    int const call = calls++;
    texts_seen += static_cast<int>(texts.size());
    {
      std::lock_guard lock(mutex);
      batch_sizes.push_back(texts.size());
    }
    if (offline) { throw resrag::ProviderUnavailable("mock offline"); }
    if (call < fail_first) { throw resrag::ProviderUnavailable("mock transient failure"); }
    for (auto const &t : texts) {
      if (!poison.empty() && t.find(poison) != std::string::npos) { throw resrag::ProviderUnavailable("poisoned batch"); }
    }
    resrag::EmbedResponse r;
    int const d = call >= switch_dim_after && switch_dim_after >= 0 ? dim_ + 1 : dim_;
    r.dim = d;
    for (auto const &t : texts) {
      auto it = fixed.find(t);
      r.vectors.push_back(it != fixed.end() ? it->second : fake_vector(t, d));
    }
    return r;
  }

  std::atomic<int> calls{0};
  std::atomic<int> texts_seen{0};
  int fail_first = 0;
  bool offline = false;
  std::string poison;
  int switch_dim_after = -1;
  std::map<std::string, std::vector<float>> fixed;
  std::mutex mutex;
  std::vector<std::size_t> batch_sizes;

private:
  int dim_;
  std::string model_;
};

/// Generation provider driven by a script. Each entry is either an answer
/// text or one of "!overflow", "!unavailable", "!timeout"; "!echo" returns
/// the prompt. When the script runs dry the last entry repeats.
class ScriptedGenerator : public resrag::GenerationProvider
{
public:
  explicit ScriptedGenerator(std::deque<std::string> script = {"!echo"}, std::string model = "mock-gen")
    : script_(std::move(script))
    , model_(std::move(model))
  {
  }

  std::string model() const override { return model_; }

  std::string complete(std::string const &prompt, std::chrono::milliseconds) override
  {
    std::string step;
    {
      std::lock_guard lock(mutex_);
      prompts.push_back(prompt);
      step = script_.size() > 1 ? script_.front() : script_.back();
      if (script_.size() > 1) { script_.pop_front(); }
    }
    if (step == "!overflow") { throw resrag::ContextOverflow("context length exceeded"); }
    if (step == "!unavailable") { throw resrag::ProviderUnavailable("mock generator down"); }
    if (step == "!timeout") { throw resrag::ProviderTimeout("mock generator timed out"); }
    if (step == "!echo") { return "Echo:\n\n" + prompt; }
    return step;
  }

  std::vector<std::string> prompts;

private:
  std::mutex mutex_;
  std::deque<std::string> script_;
  std::string model_;
};

/// In-process HTTP server for provider wire-protocol tests.
class HttpMock
{
public:
  HttpMock() = default;
  ~HttpMock()
  {
    server_.stop();
    if (thread_.joinable()) { thread_.join(); }
  }
  HttpMock(HttpMock const &) = delete;
  HttpMock &operator=(HttpMock const &) = delete;

  httplib::Server &server() { return server_; }
  /// Handlers must be registered before the first call.
  int port()
  {
    if (!thread_.joinable()) {
      port_ = server_.bind_to_any_port("127.0.0.1");
      thread_ = std::thread([this] { server_.listen_after_bind(); });
      server_.wait_until_ready();
    }
    return port_;
  }
  std::string url() { return "http://127.0.0.1:" + std::to_string(port()); }

  /// POST /embed answering with fake_vector() of `dim`.
  void serve_embeddings(int dim)
  {
    server_.Post("/embed", [dim, this](httplib::Request const &req, httplib::Response &res) {
      ++embed_calls;
      auto const body = nlohmann::json::parse(req.body);
      nlohmann::json out{{"dim", dim}, {"vectors", nlohmann::json::array()}};
      for (auto const &t : body.at("texts")) { out["vectors"].push_back(fake_vector(t.get<std::string>(), dim)); }
      res.set_content(out.dump(), "application/json");
    });
  }

  /// POST /v1/chat/completions answering through `reply(prompt)`; a reply of
  /// "!overflow" produces an OpenAI-style context_length_exceeded error.
  void serve_chat(std::function<std::string(std::string const &)> reply)
  {
    server_.Post("/v1/chat/completions", [reply, this](httplib::Request const &req, httplib::Response &res) {
      ++chat_calls;
      auto const body = nlohmann::json::parse(req.body);
      auto const prompt = body.at("messages").at(0).at("content").get<std::string>();
      {
        std::lock_guard lock(mutex_);
        last_model = body.at("model").get<std::string>();
      }
      auto const text = reply(prompt);
      if (text == "!overflow") {
        res.status = 400;
        res.set_content(R"({"error":{"message":"This model's maximum context length is 10 tokens","code":"context_length_exceeded"}})",
                        "application/json");
        return;
      }
      if (text == "!500") {
        res.status = 500;
        res.set_content(R"({"error":"boom"})", "application/json");
        return;
      }
      nlohmann::json out{{"choices", {{{"message", {{"role", "assistant"}, {"content", text}}}}}}};
      res.set_content(out.dump(), "application/json");
    });
  }

  std::atomic<int> embed_calls{0};
  std::atomic<int> chat_calls{0};
  std::string last_model;

private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::mutex mutex_;
};

} // namespace mocks
