#include "resrag/vector_index.hpp"

#include "binary_io.hpp"

#include <algorithm>
#include <map>
#include <numeric>

namespace resrag {

namespace {
constexpr char kMagic[4] = {'S', 'R', 'I', 'X'};

void check_finite(RowMatrixf const &m, char const *what)
{
  if (!m.allFinite()) { throw InvalidConfig(std::string(what) + " contain non-finite values"); }
}
} // namespace

IndexedCorpus IndexedCorpus::build(std::vector<DocumentRecord> const &records, EmbeddingMatrix const &doc_vectors,
                                   EmbeddingMatrix const &sentence_vectors)
{
  if (doc_vectors.model_id != sentence_vectors.model_id && sentence_vectors.size() > 0) {
    throw DimensionMismatch("document and sentence vectors come from different models");
  }
  if (sentence_vectors.size() > 0 && sentence_vectors.dim() != doc_vectors.dim()) {
    throw DimensionMismatch("document and sentence vectors differ in dimension");
  }
  if (static_cast<std::size_t>(doc_vectors.size()) != doc_vectors.keys.size() ||
      static_cast<std::size_t>(sentence_vectors.size()) != sentence_vectors.keys.size()) {
    throw InvalidConfig("embedding matrix rows and keys disagree");
  }
  check_finite(doc_vectors.rows, "document vectors");
  check_finite(sentence_vectors.rows, "sentence vectors");

  std::map<std::string, Index> doc_row;
  for (Index i = 0; i < doc_vectors.size(); ++i) {
    auto const &key = doc_vectors.keys[static_cast<std::size_t>(i)];
    if (key.sentence) { throw InvalidConfig("document matrix holds a sentence key for " + key.doc_id); }
    if (!doc_row.emplace(key.doc_id, i).second) { throw DuplicateIdError("duplicate document vector " + key.doc_id); }
    if (doc_vectors.rows.row(i).squaredNorm() == 0.0f) { throw ZeroVectorError("zero document vector for " + key.doc_id); }
  }

  std::vector<DocumentRecord const *> sorted;
  for (auto const &r : records) { sorted.push_back(&r); }
  std::sort(sorted.begin(), sorted.end(), [](auto a, auto b) { return a->doc_id < b->doc_id; });
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i]->doc_id == sorted[i - 1]->doc_id) { throw DuplicateIdError("duplicate record " + sorted[i]->doc_id); }
  }
  if (sorted.size() != doc_row.size()) { throw InvalidConfig("document vectors and records cover different doc sets"); }

  std::map<std::string, std::vector<std::pair<std::uint32_t, Index>>> sent_rows;
  for (Index i = 0; i < sentence_vectors.size(); ++i) {
    auto const &key = sentence_vectors.keys[static_cast<std::size_t>(i)];
    if (!key.sentence) { throw InvalidConfig("sentence matrix holds a document key for " + key.doc_id); }
    if (!doc_row.contains(key.doc_id)) { throw InvalidConfig("sentence vector for unknown document " + key.doc_id); }
    sent_rows[key.doc_id].emplace_back(*key.sentence, i);
  }

  IndexedCorpus idx;
  idx.model_id_ = doc_vectors.model_id;
  Index const m = doc_vectors.dim();
  idx.docs_.resize(static_cast<Index>(sorted.size()), m);
  idx.sentences_.resize(sentence_vectors.size(), m);
  idx.sentence_offsets_.push_back(0);
  Index srow = 0;
  for (std::size_t d = 0; d < sorted.size(); ++d) {
    auto const &rec = *sorted[d];
    auto it = doc_row.find(rec.doc_id);
    if (it == doc_row.end()) { throw InvalidConfig("no document vector for " + rec.doc_id); }
    idx.docs_.row(static_cast<Index>(d)) = doc_vectors.rows.row(it->second);
    idx.meta_.push_back({rec.doc_id, rec.title, rec.date, rec.domain, rec.languages, rec.subjects});
    idx.paragraphs_.push_back(rec.paragraphs);
    idx.sentence_text_.push_back(rec.sentences);

    auto &rows = sent_rows[rec.doc_id];
    std::sort(rows.begin(), rows.end());
    for (std::size_t k = 0; k < rows.size(); ++k) {
      if (k > 0 && rows[k].first == rows[k - 1].first) {
        throw DuplicateIdError("duplicate sentence vector " + rec.doc_id + "#" + std::to_string(rows[k].first));
      }
      if (rows[k].first >= rec.sentences.size()) {
        throw InvalidConfig("sentence index out of range for " + rec.doc_id);
      }
      idx.sentences_.row(srow++) = sentence_vectors.rows.row(rows[k].second);
      idx.sentence_ids_.push_back(rows[k].first);
    }
    idx.sentence_offsets_.push_back(static_cast<std::uint64_t>(srow));
  }
  return idx;
}

std::optional<Index> IndexedCorpus::find(std::string_view doc_id) const
{
  auto it = std::lower_bound(meta_.begin(), meta_.end(), doc_id,
                             [](DocMeta const &m, std::string_view id) { return m.doc_id < id; });
  if (it == meta_.end() || it->doc_id != doc_id) { return std::nullopt; }
  return static_cast<Index>(it - meta_.begin());
}

Eigen::Block<RowMatrixf const, Eigen::Dynamic, Eigen::Dynamic, true> IndexedCorpus::sentence_block(Index row) const
{
  auto const lo = static_cast<Index>(sentence_offsets_[static_cast<std::size_t>(row)]);
  auto const hi = static_cast<Index>(sentence_offsets_[static_cast<std::size_t>(row) + 1]);
  return sentences_.middleRows(lo, hi - lo);
}

std::vector<std::uint32_t> IndexedCorpus::sentence_ids(Index row) const
{
  auto const lo = sentence_offsets_[static_cast<std::size_t>(row)];
  auto const hi = sentence_offsets_[static_cast<std::size_t>(row) + 1];
  return {sentence_ids_.begin() + static_cast<std::ptrdiff_t>(lo), sentence_ids_.begin() + static_cast<std::ptrdiff_t>(hi)};
}

std::vector<ScoredDoc> IndexedCorpus::top_n(Vecf const &query, std::size_t n) const
{
  if (empty()) { throw EmptyIndexError("index holds no documents"); }
  if (n == 0) { throw InvalidConfig("n must be at least 1"); }
  if (query.size() != dim()) {
    throw DimensionMismatch("query dimension " + std::to_string(query.size()) + " vs index " + std::to_string(dim()));
  }
  if (query.squaredNorm() == 0.0f) { throw ZeroVectorError("query embedding is a zero vector"); }

  std::vector<double> scores(static_cast<std::size_t>(size()));
  for (Index i = 0; i < size(); ++i) { scores[static_cast<std::size_t>(i)] = cosine(query, docs_.row(i).transpose()); }

  std::vector<Index> order(scores.size());
  std::iota(order.begin(), order.end(), Index{0});
  auto const take = std::min(n, order.size());
  // rows are in doc_id order, so the row index is the tie-break
  auto const better = [&](Index a, Index b) {
    auto const sa = scores[static_cast<std::size_t>(a)], sb = scores[static_cast<std::size_t>(b)];
    return sa != sb ? sa > sb : a < b;
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(), better);

  std::vector<ScoredDoc> out;
  out.reserve(take);
  for (std::size_t pos = 0; pos < take; ++pos) {
    auto const row = order[pos];
    ScoredDoc sd{meta_[static_cast<std::size_t>(row)].doc_id, scores[static_cast<std::size_t>(row)], 0, row};
    // everything strictly better sits earlier in the prefix
    sd.rank = pos > 0 && out.back().score == sd.score ? out.back().rank : static_cast<std::uint32_t>(pos + 1);
    out.push_back(std::move(sd));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Persistence

std::string IndexedCorpus::serialize() const
{
  io::Writer w;
  w.bytes(kMagic, 4);
  w.pod(kFormatVersion);
  w.str(model_id_);
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(dim()));
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(size()));
  w.pod<std::uint64_t>(static_cast<std::uint64_t>(sentence_count()));
  w.bytes(docs_.data(), static_cast<std::size_t>(docs_.size()) * sizeof(float));
  w.bytes(sentences_.data(), static_cast<std::size_t>(sentences_.size()) * sizeof(float));

  io::Writer meta;
  auto strings = [&](auto const &v) {
    meta.pod<std::uint32_t>(static_cast<std::uint32_t>(v.size()));
    for (auto const &s : v) { meta.str(s); }
  };
  for (std::size_t d = 0; d < meta_.size(); ++d) {
    auto const &m = meta_[d];
    meta.str(m.doc_id);
    meta.str(m.title);
    meta.pod<std::int16_t>(static_cast<std::int16_t>(m.date.year));
    meta.pod<std::uint8_t>(static_cast<std::uint8_t>(m.date.month));
    meta.pod<std::uint8_t>(static_cast<std::uint8_t>(m.date.day));
    meta.pod<std::uint8_t>(static_cast<std::uint8_t>(m.domain));
    strings(m.languages);
    strings(m.subjects);
    strings(paragraphs_[d]);
    meta.pod<std::uint32_t>(static_cast<std::uint32_t>(sentence_text_[d].size()));
    for (auto const &s : sentence_text_[d]) {
      meta.pod(s.paragraph_index);
      meta.str(s.text);
    }
    meta.pod<std::uint32_t>(static_cast<std::uint32_t>(sentence_offsets_[d + 1] - sentence_offsets_[d]));
  }
  for (auto id : sentence_ids_) { meta.pod(id); }
  w.pod<std::uint64_t>(meta.size());
  w.bytes(meta.buffer().data(), meta.size());
  w.pod(io::crc32(w.buffer()));
  return std::move(w.buffer());
}

IndexedCorpus IndexedCorpus::deserialize(std::string_view data)
{
  if (data.size() < 4 || data.substr(0, 4) != std::string_view(kMagic, 4)) { throw CorruptIndexError("bad index magic"); }
  IndexedCorpus idx;
  try {
    io::Reader head(data.substr(4));
    auto const version = head.pod<std::uint16_t>();
    if (version > kFormatVersion) {
      throw VersionError("index format version " + std::to_string(version) + " is newer than supported " +
                         std::to_string(kFormatVersion));
    }
    if (version == 0) { throw CorruptIndexError("index format version 0"); }
    if (data.size() < 4 + 2 + 4) { throw CorruptIndexError("truncated index"); }
    auto const body = data.substr(0, data.size() - 4);
    io::Reader trailer(data.substr(data.size() - 4));
    if (trailer.pod<std::uint32_t>() != io::crc32(body)) { throw CorruptIndexError("index checksum mismatch"); }

    io::Reader r(body.substr(6));
    idx.model_id_ = r.str();
    auto const m = r.pod<std::uint32_t>();
    auto const ndocs = r.pod<std::uint32_t>();
    auto const nsent = r.pod<std::uint64_t>();
    if ((static_cast<std::uint64_t>(ndocs) + nsent) * m * sizeof(float) > r.remaining()) {
      throw CorruptIndexError("index float blocks exceed file size");
    }
    idx.docs_.resize(ndocs, m);
    r.bytes(idx.docs_.data(), static_cast<std::size_t>(idx.docs_.size()) * sizeof(float));
    idx.sentences_.resize(static_cast<Index>(nsent), m);
    r.bytes(idx.sentences_.data(), static_cast<std::size_t>(idx.sentences_.size()) * sizeof(float));

    auto const meta_len = r.pod<std::uint64_t>();
    if (meta_len != r.remaining()) { throw CorruptIndexError("metadata block length mismatch"); }
    auto strings = [&] {
      std::vector<std::string> v(r.pod<std::uint32_t>());
      for (auto &s : v) { s = r.str(); }
      return v;
    };
    idx.sentence_offsets_.push_back(0);
    for (std::uint32_t d = 0; d < ndocs; ++d) {
      DocMeta meta;
      meta.doc_id = r.str();
      meta.title = r.str();
      meta.date.year = r.pod<std::int16_t>();
      meta.date.month = r.pod<std::uint8_t>();
      meta.date.day = r.pod<std::uint8_t>();
      auto const dom = r.pod<std::uint8_t>();
      if (dom > 2) { throw CorruptIndexError("bad domain tag"); }
      meta.domain = static_cast<Domain>(dom);
      for (auto &l : strings()) { meta.languages.insert(std::move(l)); }
      meta.subjects = strings();
      idx.meta_.push_back(std::move(meta));
      idx.paragraphs_.push_back(strings());
      std::vector<Sentence> sents(r.pod<std::uint32_t>());
      for (auto &s : sents) {
        s.paragraph_index = r.pod<std::uint32_t>();
        s.text = r.str();
      }
      idx.sentence_text_.push_back(std::move(sents));
      idx.sentence_offsets_.push_back(idx.sentence_offsets_.back() + r.pod<std::uint32_t>());
    }
    if (idx.sentence_offsets_.back() != nsent) { throw CorruptIndexError("sentence counts disagree"); }
    idx.sentence_ids_.resize(static_cast<std::size_t>(nsent));
    for (auto &id : idx.sentence_ids_) { id = r.pod<std::uint32_t>(); }
    if (r.remaining() != 0) { throw CorruptIndexError("trailing bytes in metadata block"); }
  } catch (io::Truncated const &) {
    throw CorruptIndexError("truncated index");
  }
  idx.check_invariants();
  return idx;
}

void IndexedCorpus::check_invariants() const
{
  for (std::size_t d = 0; d < meta_.size(); ++d) {
    if (d > 0 && !(meta_[d - 1].doc_id < meta_[d].doc_id)) { throw CorruptIndexError("documents out of order"); }
    for (auto id : sentence_ids(static_cast<Index>(d))) {
      if (id >= sentence_text_[d].size()) { throw CorruptIndexError("sentence id out of range"); }
    }
  }
  if (!docs_.allFinite() || !sentences_.allFinite()) { throw CorruptIndexError("non-finite values in index"); }
}

void IndexedCorpus::save(std::filesystem::path const &path) const { io::write_file_atomic(path, serialize()); }

IndexedCorpus IndexedCorpus::load(std::filesystem::path const &path) { return deserialize(io::read_file(path)); }

} // namespace resrag
