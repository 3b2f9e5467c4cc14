#pragma once

#include "corpus.hpp"
#include "embedding.hpp"
#include "similarity.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace resrag {

/// Metadata snapshot shown on source cards.
struct DocMeta
{
  std::string doc_id;
  std::string title;
  Date date;
  Domain domain = Domain::HealthRS;
  std::set<std::string> languages;
  std::vector<std::string> subjects;

  bool operator==(DocMeta const &) const = default;
};

struct ScoredDoc
{
  std::string doc_id;
  double score = 0; // cosine similarity
  std::uint32_t rank = 0; // competition rank over the whole corpus
  Index row = 0;
};

/// Exact flat index over document and sentence embeddings. Documents are held
/// in ascending doc_id order; sentence rows are grouped per document. Immutable
/// after construction, so concurrent queries need no locking.
class IndexedCorpus
{
public:
  static constexpr std::uint16_t kFormatVersion = 1;

  IndexedCorpus() = default;

  /// `doc_vectors` is keyed by doc_id, `sentence_vectors` by (doc_id, sentence
  /// index). Every record needs a document vector; sentence vectors may be
  /// missing for some documents.
  static IndexedCorpus build(std::vector<DocumentRecord> const &records, EmbeddingMatrix const &doc_vectors,
                             EmbeddingMatrix const &sentence_vectors);

  std::string const &model_id() const { return model_id_; }
  Index dim() const { return docs_.cols(); }
  Index size() const { return docs_.rows(); }
  Index sentence_count() const { return sentences_.rows(); }
  bool empty() const { return docs_.rows() == 0; }

  std::optional<Index> find(std::string_view doc_id) const;
  DocMeta const &meta(Index row) const { return meta_[static_cast<std::size_t>(row)]; }
  std::vector<std::string> const &paragraphs(Index row) const { return paragraphs_[static_cast<std::size_t>(row)]; }
  std::vector<Sentence> const &sentences(Index row) const { return sentence_text_[static_cast<std::size_t>(row)]; }

  auto doc_vector(Index row) const { return docs_.row(row); }
  RowMatrixf const &doc_matrix() const { return docs_; }
  /// Embedded sentences of one document; row i belongs to sentence `sentence_ids(row)[i]`.
  Eigen::Block<RowMatrixf const, Eigen::Dynamic, Eigen::Dynamic, true> sentence_block(Index row) const;
  std::vector<std::uint32_t> sentence_ids(Index row) const;

  /// Cosine top-n, descending; ties by ascending doc_id.
  std::vector<ScoredDoc> top_n(Vecf const &query, std::size_t n) const;

  void save(std::filesystem::path const &path) const;
  static IndexedCorpus load(std::filesystem::path const &path);

  /// Serialized bytes (the on-disk format).
  std::string serialize() const;
  static IndexedCorpus deserialize(std::string_view data);

private:
  void check_invariants() const;

  std::string model_id_;
  RowMatrixf docs_;
  RowMatrixf sentences_;
  std::vector<std::uint64_t> sentence_offsets_; // size()+1 entries
  std::vector<std::uint32_t> sentence_ids_;     // per sentence row
  std::vector<DocMeta> meta_;
  std::vector<std::vector<std::string>> paragraphs_;
  std::vector<std::vector<Sentence>> sentence_text_;
};

} // namespace resrag
