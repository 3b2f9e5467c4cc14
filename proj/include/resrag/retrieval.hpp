#pragma once

#include "embedding.hpp"
#include "vector_index.hpp"

#include <optional>
#include <string>
#include <vector>

namespace resrag {

struct RetrievalConfig
{
  std::size_t n = 50;  // prefetch width
  std::size_t k = 5;   // returned documents
  double alpha = 0.7;  // weight of the best-sentence term

  void validate() const; // throws InvalidConfig
};

struct BestSentence
{
  std::uint32_t index = 0;
  std::string text;
};

struct RetrievedDoc
{
  std::string doc_id;
  double prefetch_score = 0;
  double rerank_score = 0;
  std::uint32_t prefetch_rank = 0;
  std::uint32_t final_rank = 0;
  std::optional<BestSentence> best_sentence; // empty when the doc has no sentence vectors
  DocMeta meta;
  /// Best sentence with its surrounding paragraph, in reading order.
  std::vector<std::string> excerpt;
};

inline constexpr std::size_t kExcerptChars = 1200;

/// Sentences of the paragraph holding `best`, grown outward from `best` while
/// the joined text stays within `cap` bytes. `best` itself is always kept.
std::vector<std::string> build_excerpt(std::vector<Sentence> const &sentences, std::uint32_t best,
                                       std::size_t cap = kExcerptChars);

/// Second stage over an already embedded query: cosine prefetch of n documents,
/// relevance re-rank, first k kept.
std::vector<RetrievedDoc> rerank(IndexedCorpus const &index, Vecf const &query, RetrievalConfig const &config);

class Retriever
{
public:
  Retriever(IndexedCorpus const &index, EmbeddingGateway &gateway)
    : index_(index)
    , gateway_(gateway)
  {
  }

  std::vector<RetrievedDoc> retrieve(std::string_view query, RetrievalConfig const &config = {});

private:
  IndexedCorpus const &index_;
  EmbeddingGateway &gateway_;
};

/// Text embedded as the document-level vector: title plus first paragraph.
std::string document_embedding_text(DocumentRecord const &record);

/// Embed every record (document and sentence level) and build the index.
IndexedCorpus build_index(std::vector<DocumentRecord> const &records, EmbeddingGateway &gateway);

} // namespace resrag
