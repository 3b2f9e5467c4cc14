#include "resrag/embedding.hpp"

#include <httplib.h>
#include <json.hpp>
#include <openssl/evp.h>

#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <thread>

namespace resrag {

using nlohmann::json;

std::pair<std::string, std::string> split_url(std::string const &url)
{
  auto const scheme = url.find("://");
  auto const host_start = scheme == std::string::npos ? 0 : scheme + 3;
  auto const slash = url.find('/', host_start);
  std::string origin = slash == std::string::npos ? url : url.substr(0, slash);
  std::string prefix = slash == std::string::npos ? "" : url.substr(slash);
  while (!prefix.empty() && prefix.back() == '/') { prefix.pop_back(); }
  return {origin, prefix};
}

// ---------------------------------------------------------------------------
// HTTP provider

HttpEmbeddingProvider::HttpEmbeddingProvider(std::string base_url, std::string model, std::chrono::milliseconds timeout)
  : model_(std::move(model))
  , timeout_(timeout)
{
  std::tie(origin_, prefix_) = split_url(base_url);
}

EmbedResponse HttpEmbeddingProvider::embed(std::vector<std::string> const &texts)
{
  httplib::Client cli(origin_);
  auto const secs = timeout_.count() / 1000;
  auto const usecs = (timeout_.count() % 1000) * 1000;
  cli.set_connection_timeout(secs, usecs);
  cli.set_read_timeout(secs, usecs);
  cli.set_write_timeout(secs, usecs);

  json body{{"model", model_}, {"texts", texts}};
  auto res = cli.Post(prefix_ + "/embed", body.dump(), "application/json");
  if (!res) { throw ProviderUnavailable("embedding provider: " + httplib::to_string(res.error())); }
  if (res->status < 200 || res->status >= 300) {
    std::string msg = res->body;
    try {
      msg = json::parse(res->body).at("error").get<std::string>();
    } catch (std::exception const &) {
    }
    throw ProviderUnavailable("embedding provider returned " + std::to_string(res->status) + ": " + msg);
  }
  try {
    auto const j = json::parse(res->body);
    EmbedResponse out;
    out.dim = j.at("dim").get<int>();
    out.vectors = j.at("vectors").get<std::vector<std::vector<float>>>();
    return out;
  } catch (json::exception const &e) {
    throw ProviderUnavailable(std::string("embedding provider sent malformed body: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Hashing provider

namespace {
std::uint64_t fnv1a(std::string_view s)
{
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}
} // namespace

HashingEmbeddingProvider::HashingEmbeddingProvider(int dim)
  : dim_(dim)
{
  if (dim <= 0) { throw InvalidConfig("hashing embedder needs a positive dimension"); }
}

std::string HashingEmbeddingProvider::model_id() const { return "hash-" + std::to_string(dim_); }

EmbedResponse HashingEmbeddingProvider::embed(std::vector<std::string> const &texts)
{
  EmbedResponse out;
  out.dim = dim_;
  for (auto const &text : texts) {
    std::vector<float> v(static_cast<std::size_t>(dim_), 0.0f);
    std::vector<std::string> words;
    std::string cur;
    for (char ch : text) {
      auto const c = static_cast<unsigned char>(ch);
      if (std::isalnum(c) || c >= 0x80) {
        cur.push_back(static_cast<char>(std::tolower(c)));
      } else if (!cur.empty()) {
        words.push_back(std::move(cur));
        cur.clear();
      }
    }
    if (!cur.empty()) { words.push_back(std::move(cur)); }
    auto add = [&](std::string const &feature, float weight) {
      auto const h = fnv1a(feature);
      v[h % static_cast<std::uint64_t>(dim_)] += (h >> 63) ? -weight : weight;
    };
    for (std::size_t i = 0; i < words.size(); ++i) {
      add(words[i], 1.0f);
      if (i + 1 < words.size()) { add(words[i] + ' ' + words[i + 1], 0.5f); }
    }
    // never emit a zero vector
    add("\x01bias", 0.05f);
    out.vectors.push_back(std::move(v));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gateway

GatewayConfig GatewayConfig::from_env()
{
  GatewayConfig c;
  if (char const *v = std::getenv("EMBED_BATCH_SIZE")) { c.batch_size = std::max(1, std::atoi(v)); }
  if (char const *v = std::getenv("EMBED_CONCURRENCY")) { c.concurrency = static_cast<unsigned>(std::max(1, std::atoi(v))); }
  if (char const *v = std::getenv("EMBED_CACHE"); v && *v) { c.cache_file = v; }
  return c;
}

std::string normalize_text(std::string_view text)
{
  std::string out;
  bool pending_space = false;
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) { out.push_back(' '); }
    pending_space = false;
    out.push_back(ch);
  }
  return out;
}

std::string cache_key(std::string_view model_id, std::string_view text)
{
  std::string const payload = std::string(model_id) + '\0' + normalize_text(text);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(payload.data(), payload.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

EmbeddingGateway::EmbeddingGateway(std::shared_ptr<EmbeddingProvider> provider, GatewayConfig config)
  : provider_(std::move(provider))
  , config_(std::move(config))
{
  if (!provider_) { throw InvalidConfig("embedding gateway needs a provider"); }
  if (config_.batch_size == 0 || config_.concurrency == 0 || config_.max_attempts < 1) {
    throw InvalidConfig("batch size, concurrency and attempts must be positive");
  }
  model_id_ = provider_->model_id();
  dim_ = config_.expected_dim;
  if (config_.cache_file) { load_cache_file(); }
}

std::optional<int> EmbeddingGateway::dim() const
{
  std::lock_guard lock(dim_mutex_);
  return dim_;
}

std::size_t EmbeddingGateway::cache_size() const
{
  std::shared_lock lock(cache_mutex_);
  return cache_.size();
}

std::optional<std::vector<float>> EmbeddingGateway::cached(std::string const &key) const
{
  std::shared_lock lock(cache_mutex_);
  if (auto it = cache_.find(key); it != cache_.end()) { return it->second; }
  return std::nullopt;
}

void EmbeddingGateway::store(std::string const &key, std::vector<float> const &v)
{
  {
    std::unique_lock lock(cache_mutex_);
    if (!cache_.emplace(key, v).second) { return; }
  }
  if (!config_.cache_file) { return; }
  std::lock_guard lock(file_mutex_);
  std::ofstream out(*config_.cache_file, std::ios::binary | std::ios::app);
  auto const n = static_cast<std::uint32_t>(v.size());
  out.write(key.data(), static_cast<std::streamsize>(key.size()));
  out.write(reinterpret_cast<char const *>(&n), sizeof n);
  out.write(reinterpret_cast<char const *>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
}

void EmbeddingGateway::load_cache_file()
{
  std::ifstream in(*config_.cache_file, std::ios::binary);
  if (!in) { return; }
  std::string key(64, '\0');
  while (in.read(key.data(), 64)) {
    std::uint32_t n = 0;
    if (!in.read(reinterpret_cast<char *>(&n), sizeof n) || n == 0 || n > (1u << 20)) { break; }
    std::vector<float> v(n);
    if (!in.read(reinterpret_cast<char *>(v.data()), static_cast<std::streamsize>(n * sizeof(float)))) { break; }
    cache_.emplace(key, std::move(v));
  }
}

std::vector<std::vector<float>> EmbeddingGateway::call_with_retry(std::vector<std::string> const &texts)
{
  std::string last_error;
  auto delay = config_.backoff;
  for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
    EmbedResponse res;
    try {
      res = provider_->embed(texts);
    } catch (DimensionMismatch const &) {
      throw;
    } catch (std::exception const &e) {
      last_error = e.what();
      if (attempt < config_.max_attempts) {
        std::this_thread::sleep_for(delay);
        delay *= 2;
      }
      continue;
    }
    if (res.vectors.size() != texts.size()) {
      throw DimensionMismatch("provider returned " + std::to_string(res.vectors.size()) + " vectors for " +
                              std::to_string(texts.size()) + " texts");
    }
    {
      std::lock_guard lock(dim_mutex_);
      if (res.dim <= 0) { throw DimensionMismatch("provider declared non-positive dimension"); }
      if (!dim_) { dim_ = res.dim; }
      if (res.dim != *dim_) {
        throw DimensionMismatch("provider declared dim " + std::to_string(res.dim) + ", expected " +
                                std::to_string(*dim_));
      }
    }
    for (auto const &v : res.vectors) {
      if (static_cast<int>(v.size()) != res.dim) {
        throw DimensionMismatch("vector of length " + std::to_string(v.size()) + " for declared dim " +
                                std::to_string(res.dim));
      }
      for (float x : v) {
        if (!std::isfinite(x)) { throw DimensionMismatch("provider returned a non-finite value"); }
      }
    }
    return std::move(res.vectors);
  }
  throw ProviderUnavailable("embedding provider failed after " + std::to_string(config_.max_attempts) +
                            " attempts: " + last_error);
}

EmbeddingVector EmbeddingGateway::embed_query(std::string_view text)
{
  if (normalize_text(text).empty()) { throw InvalidConfig("query text must be non-empty"); }
  auto const key = cache_key(model_id_, text);
  auto v = cached(key);
  if (!v) {
    auto rows = call_with_retry({std::string(text)});
    v = std::move(rows.front());
    store(key, *v);
  }
  EmbeddingVector out;
  out.model_id = model_id_;
  out.values = Eigen::Map<Vecf const>(v->data(), static_cast<Index>(v->size()));
  return out;
}

EmbeddingMatrix EmbeddingGateway::embed_batch(std::vector<std::string> const &texts, std::vector<RowKey> keys)
{
  if (keys.empty()) {
    keys.reserve(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) { keys.push_back({"#" + std::to_string(i), std::nullopt}); }
  }
  if (keys.size() != texts.size()) { throw InvalidConfig("embed_batch: one key per text required"); }
  {
    std::set<RowKey> unique(keys.begin(), keys.end());
    if (unique.size() != keys.size()) { throw InvalidConfig("embed_batch: row keys must be unique"); }
  }

  std::vector<std::string> cache_keys(texts.size());
  std::vector<std::optional<std::vector<float>>> rows(texts.size());
  std::vector<std::size_t> miss_first; // first input index of each distinct missing text
  std::unordered_map<std::string, std::size_t> miss_slot;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (normalize_text(texts[i]).empty()) {
      throw InvalidConfig("embed_batch: text at index " + std::to_string(i) + " is empty");
    }
    cache_keys[i] = cache_key(model_id_, texts[i]);
    rows[i] = cached(cache_keys[i]);
    if (!rows[i] && miss_slot.emplace(cache_keys[i], miss_first.size()).second) { miss_first.push_back(i); }
  }

  std::size_t const n_batches = (miss_first.size() + config_.batch_size - 1) / config_.batch_size;
  std::vector<std::vector<std::vector<float>>> results(n_batches);
  std::vector<std::exception_ptr> errors(n_batches);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t b = next++; b < n_batches; b = next++) {
      std::vector<std::string> batch;
      auto const lo = b * config_.batch_size;
      auto const hi = std::min(lo + config_.batch_size, miss_first.size());
      for (auto m = lo; m < hi; ++m) { batch.push_back(texts[miss_first[m]]); }
      try {
        results[b] = call_with_retry(batch);
        for (auto m = lo; m < hi; ++m) { store(cache_keys[miss_first[m]], results[b][m - lo]); }
      } catch (...) {
        errors[b] = std::current_exception();
      }
    }
  };
  {
    auto const workers = std::min<std::size_t>(config_.concurrency, n_batches);
    std::vector<std::jthread> pool;
    for (std::size_t w = 1; w < workers; ++w) { pool.emplace_back(work); }
    if (workers > 0) { work(); }
  }

  std::size_t failed_batches = 0;
  for (std::size_t b = 0; b < n_batches; ++b) {
    if (!errors[b]) { continue; }
    ++failed_batches;
    try {
      std::rethrow_exception(errors[b]);
    } catch (ProviderUnavailable const &) {
    } // other errors (dimension mismatch) are not partial failures
  }

  EmbeddingMatrix out;
  out.model_id = model_id_;
  out.keys = std::move(keys);
  std::vector<std::size_t> failed;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (rows[i]) { continue; }
    auto const slot = miss_slot.at(cache_keys[i]);
    auto const b = slot / config_.batch_size;
    if (errors[b]) {
      failed.push_back(i);
    } else {
      rows[i] = results[b][slot % config_.batch_size];
    }
  }
  if (!failed.empty()) {
    if (failed_batches == n_batches && failed.size() == texts.size()) {
      throw ProviderUnavailable("embedding provider unavailable for every batch");
    }
    throw PartialBatchError(failed, std::to_string(failed.size()) + " of " + std::to_string(texts.size()) +
                                      " texts could not be embedded");
  }

  Index const dim = texts.empty() ? 0 : static_cast<Index>(rows.front()->size());
  out.rows.resize(static_cast<Index>(texts.size()), dim);
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (static_cast<Index>(rows[i]->size()) != dim) { throw DimensionMismatch("cached vector has a different dimension"); }
    out.rows.row(static_cast<Index>(i)) = Eigen::Map<Vecf const>(rows[i]->data(), dim).transpose();
  }
  return out;
}

} // namespace resrag
