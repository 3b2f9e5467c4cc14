#include "resrag/retrieval.hpp"

#include <algorithm>
#include <iostream>

namespace resrag {

void RetrievalConfig::validate() const
{
  if (n < 1) { throw InvalidConfig("n must be at least 1"); }
  if (k < 1) { throw InvalidConfig("k must be at least 1"); }
  if (k > n) { throw InvalidConfig("k must not exceed n"); }
  if (!(alpha >= 0.0 && alpha <= 1.0)) { throw InvalidConfig("alpha must lie in [0, 1]"); }
}

std::vector<std::string> build_excerpt(std::vector<Sentence> const &sentences, std::uint32_t best, std::size_t cap)
{
  if (best >= sentences.size()) { return {}; }
  auto const para = sentences[best].paragraph_index;
  std::size_t lo = best, hi = best + 1; // [lo, hi)
  std::size_t len = sentences[best].text.size();
  bool grow_right = true;
  for (;;) {
    bool const can_right = hi < sentences.size() && sentences[hi].paragraph_index == para &&
                           len + 1 + sentences[hi].text.size() <= cap;
    bool const can_left = lo > 0 && sentences[lo - 1].paragraph_index == para &&
                          len + 1 + sentences[lo - 1].text.size() <= cap;
    if (!can_right && !can_left) { break; }
    if ((grow_right && can_right) || !can_left) {
      len += 1 + sentences[hi++].text.size();
    } else {
      len += 1 + sentences[--lo].text.size();
    }
    grow_right = !grow_right;
  }
  std::vector<std::string> out;
  for (auto i = lo; i < hi; ++i) { out.push_back(sentences[i].text); }
  return out;
}

std::vector<RetrievedDoc> rerank(IndexedCorpus const &index, Vecf const &query, RetrievalConfig const &config)
{
  config.validate();
  auto const prefetch = index.top_n(query, config.n);

  std::vector<RetrievedDoc> docs;
  docs.reserve(prefetch.size());
  for (auto const &sd : prefetch) {
    RetrievedDoc rd;
    rd.doc_id = sd.doc_id;
    rd.prefetch_score = sd.score;
    rd.prefetch_rank = sd.rank;
    rd.meta = index.meta(sd.row);
    auto const block = index.sentence_block(sd.row);
    auto const &texts = index.sentences(sd.row);
    if (block.rows() == 0) {
      std::clog << "warning: no sentence embeddings for " << sd.doc_id << "; using prefetch score\n";
      rd.rerank_score = sd.score;
      if (!texts.empty()) { rd.excerpt = build_excerpt(texts, 0); }
    } else {
      Vecd const sims = sentence_similarities(query, block);
      rd.rerank_score = relevance_from_similarities(sims, config.alpha);
      Index best = 0;
      for (Index i = 1; i < sims.size(); ++i) {
        if (sims[i] > sims[best]) { best = i; }
      }
      auto const sid = index.sentence_ids(sd.row)[static_cast<std::size_t>(best)];
      rd.best_sentence = BestSentence{sid, texts[sid].text};
      rd.excerpt = build_excerpt(texts, sid);
    }
    docs.push_back(std::move(rd));
  }

  std::sort(docs.begin(), docs.end(), [](RetrievedDoc const &a, RetrievedDoc const &b) {
    if (a.rerank_score != b.rerank_score) { return a.rerank_score > b.rerank_score; }
    if (a.prefetch_score != b.prefetch_score) { return a.prefetch_score > b.prefetch_score; }
    return a.doc_id < b.doc_id;
  });
  if (docs.size() > config.k) { docs.resize(config.k); }
  for (std::size_t i = 0; i < docs.size(); ++i) { docs[i].final_rank = static_cast<std::uint32_t>(i + 1); }
  return docs;
}

std::vector<RetrievedDoc> Retriever::retrieve(std::string_view query, RetrievalConfig const &config)
{
  config.validate();
  if (index_.empty()) { throw EmptyIndexError("index holds no documents"); }
  auto const q = gateway_.embed_query(query);
  if (q.model_id != index_.model_id()) {
    throw DimensionMismatch("query model '" + q.model_id + "' differs from index model '" + index_.model_id() + "'");
  }
  return rerank(index_, q.values, config);
}

std::string document_embedding_text(DocumentRecord const &record)
{
  std::string text = record.title;
  if (!record.paragraphs.empty()) {
    if (!text.empty()) { text += "\n"; }
    text += record.paragraphs.front();
  }
  if (normalize_text(text).empty()) { text = record.doc_id; }
  return text;
}

IndexedCorpus build_index(std::vector<DocumentRecord> const &records, EmbeddingGateway &gateway)
{
  std::vector<std::string> doc_texts;
  std::vector<RowKey> doc_keys;
  std::vector<std::string> sent_texts;
  std::vector<RowKey> sent_keys;
  for (auto const &r : records) {
    doc_texts.push_back(document_embedding_text(r));
    doc_keys.push_back({r.doc_id, std::nullopt});
    for (std::size_t s = 0; s < r.sentences.size(); ++s) {
      if (normalize_text(r.sentences[s].text).empty()) { continue; }
      sent_texts.push_back(r.sentences[s].text);
      sent_keys.push_back({r.doc_id, static_cast<std::uint32_t>(s)});
    }
  }
  auto const docs = gateway.embed_batch(doc_texts, std::move(doc_keys));
  auto sents = gateway.embed_batch(sent_texts, std::move(sent_keys));
  if (sents.size() == 0) {
    sents.rows.resize(0, docs.dim());
    sents.model_id = docs.model_id;
  }
  return IndexedCorpus::build(records, docs, sents);
}

} // namespace resrag
