#pragma once

#include "eigen_types.hpp"
#include "errors.hpp"

#include <chrono>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace resrag {

struct EmbeddingVector
{
  Vecf values;
  std::string model_id;

  Index dim() const { return values.size(); }
};

/// Row key: a document (`sentence` empty) or one of its sentences.
struct RowKey
{
  std::string doc_id;
  std::optional<std::uint32_t> sentence;

  auto operator<=>(RowKey const &) const = default;
  bool operator==(RowKey const &) const = default;
};

struct EmbeddingMatrix
{
  RowMatrixf rows;
  std::vector<RowKey> keys;
  std::string model_id;

  Index size() const { return rows.rows(); }
  Index dim() const { return rows.cols(); }
};

/// Raw provider answer: `dim` as declared by the provider, one vector per text.
struct EmbedResponse
{
  int dim = 0;
  std::vector<std::vector<float>> vectors;
};

class EmbeddingProvider
{
public:
  virtual ~EmbeddingProvider() = default;
  virtual std::string model_id() const = 0;
  /// One round trip. Transport failures throw ProviderUnavailable.
  virtual EmbedResponse embed(std::vector<std::string> const &texts) = 0;
};

/// Client for `POST {base}/embed` with {"model", "texts"} -> {"dim", "vectors"}.
class HttpEmbeddingProvider final : public EmbeddingProvider
{
public:
  HttpEmbeddingProvider(std::string base_url, std::string model,
                        std::chrono::milliseconds timeout = std::chrono::seconds(60));
  std::string model_id() const override { return model_; }
  EmbedResponse embed(std::vector<std::string> const &texts) override;

private:
  std::string origin_;
  std::string prefix_;
  std::string model_;
  std::chrono::milliseconds timeout_;
};

/// Deterministic local embedder (signed feature hashing of lower-cased word
/// unigrams and bigrams). Useful offline and for demos; not semantic.
class HashingEmbeddingProvider final : public EmbeddingProvider
{
public:
  explicit HashingEmbeddingProvider(int dim = 256);
  std::string model_id() const override;
  EmbedResponse embed(std::vector<std::string> const &texts) override;

private:
  int dim_;
};

struct GatewayConfig
{
  std::size_t batch_size = 64;
  unsigned concurrency = 8;
  int max_attempts = 3;
  std::chrono::milliseconds backoff{250}; // doubled after every failed attempt
  std::optional<int> expected_dim;
  std::optional<std::filesystem::path> cache_file;

  /// EMBED_BATCH_SIZE, EMBED_CONCURRENCY, EMBED_CACHE.
  static GatewayConfig from_env();
};

/// Trim and collapse whitespace runs; this is the text the cache key covers.
std::string normalize_text(std::string_view text);
/// Hex SHA-256 of model_id, a NUL separator and the normalized text.
std::string cache_key(std::string_view model_id, std::string_view text);

/// Provider front: retries, batching, bounded concurrency and a content cache.
/// The embedding dimension is learned from the first provider response and
/// enforced afterwards.
class EmbeddingGateway
{
public:
  EmbeddingGateway(std::shared_ptr<EmbeddingProvider> provider, GatewayConfig config = {});

  EmbeddingVector embed_query(std::string_view text);
  /// Rows come back in input order. `keys` defaults to positional "#i" keys.
  EmbeddingMatrix embed_batch(std::vector<std::string> const &texts, std::vector<RowKey> keys = {});

  std::string model_id() const { return model_id_; }
  std::optional<int> dim() const;
  std::size_t cache_size() const;

private:
  std::vector<std::vector<float>> call_with_retry(std::vector<std::string> const &texts);
  std::optional<std::vector<float>> cached(std::string const &key) const;
  void store(std::string const &key, std::vector<float> const &v);
  void load_cache_file();

  std::shared_ptr<EmbeddingProvider> provider_;
  GatewayConfig config_;
  std::string model_id_;

  mutable std::mutex dim_mutex_;
  std::optional<int> dim_;

  mutable std::shared_mutex cache_mutex_;
  std::unordered_map<std::string, std::vector<float>> cache_;
  std::mutex file_mutex_;
};

/// Split "http://host:port/prefix" into origin and path prefix (no trailing '/').
std::pair<std::string, std::string> split_url(std::string const &url);

} // namespace resrag
