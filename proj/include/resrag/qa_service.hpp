#pragma once

#include "eval.hpp"
#include "generation.hpp"
#include "pdf.hpp"
#include "retrieval.hpp"

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

namespace resrag {

struct Turn
{
  std::string query;
  GeneratedAnswer answer;
  std::vector<std::string> retrieved; // doc ids in final rank order
  std::string timestamp;              // ISO-8601 UTC
  std::optional<std::string> upload_id;
  std::string prompt; // exactly what was sent to the generator
  bool operator==(Turn const &) const = default;
};

struct ChatSession
{
  std::string session_id;
  std::vector<Turn> turns;
  std::optional<ParsedUpload> active_upload;
  std::chrono::system_clock::time_point last_active;
};

struct ChatRequest
{
  std::optional<std::string> session_id;
  std::string query;
  std::optional<std::size_t> n;
  std::optional<std::size_t> k;
  std::optional<double> alpha;
};

struct ChatResponse
{
  std::string session_id;
  std::string answer;
  std::vector<DocMeta> sources;
  std::int64_t retrieve_ms = 0;
  std::int64_t generate_ms = 0;
};

struct UploadResult
{
  std::string session_id;
  std::string upload_id;
  std::size_t chunks = 0;
};

struct DocumentFile
{
  std::string bytes;
  DocMeta meta;
};

enum class HistoryFormat
{
  Json,
  Markdown,
};

struct Health
{
  std::string status;
  std::int64_t index_docs = 0;
  std::string model_id;
};

struct ServiceConfig
{
  RetrievalConfig retrieval;
  GenerationOptions generation;
  std::size_t prompt_budget = kDefaultPromptBudget;
  UploadOptions upload;
  std::filesystem::path pdf_store;
  std::optional<std::filesystem::path> session_dir; // per-session JSON, rewritten after every turn
  std::optional<std::filesystem::path> eval_log;    // in memory when unset
  std::chrono::seconds session_ttl{24 * 3600};
  std::string retriever_tag; // defaults to the index model id
  std::string generator_tag; // defaults to the generator model
};

/// Chat sessions over a retriever and a generator. Requests for different
/// sessions run in parallel; turns of one session are serialized. At most four
/// generation calls are in flight at once.
class QaService
{
public:
  QaService(std::shared_ptr<IndexedCorpus const> index, std::shared_ptr<EmbeddingGateway> gateway,
            std::shared_ptr<GenerationProvider> generator, ServiceConfig config = {});
  ~QaService();

  std::string create_session();
  bool has_session(std::string const &session_id) const;

  /// Creates the session when the id is absent or unknown.
  ChatResponse handle_chat(ChatRequest const &request);
  UploadResult upload_pdf(std::optional<std::string> const &session_id, std::span<std::byte const> bytes,
                          std::string filename = "upload.pdf");

  DocMeta document_meta(std::string const &doc_id) const;                           // NotFound
  DocumentFile get_document(std::string const &doc_id, std::string const &lang) const; // NotFound

  std::vector<Turn> history(std::string const &session_id) const; // NotFound
  std::string export_history(std::string const &session_id, HistoryFormat format) const;

  EvalRecord record_eval(EvalRecord record); // fills a missing timestamp; returns what was stored
  EvalReport eval_report(std::optional<std::string> const &config = std::nullopt) const;

  Health healthz() const;
  void swap_index(std::shared_ptr<IndexedCorpus const> index);
  std::size_t purge_expired();

  ServiceConfig const &config() const { return config_; }

private:
  struct Slot;
  std::shared_ptr<Slot> slot(std::string const &session_id) const;
  std::shared_ptr<Slot> slot_or_create(std::optional<std::string> const &session_id);
  std::shared_ptr<IndexedCorpus const> index() const;
  void persist(ChatSession const &session) const;
  void load_sessions();

  ServiceConfig config_;
  std::shared_ptr<EmbeddingGateway> gateway_;
  std::shared_ptr<GenerationProvider> generator_;

  mutable std::mutex index_mutex_;
  std::shared_ptr<IndexedCorpus const> index_;

  mutable std::mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Slot>> sessions_;

  std::counting_semaphore<4> generation_slots_{4};

  mutable std::mutex eval_mutex_;
  std::unique_ptr<RatingsLog> eval_log_;
  std::vector<EvalRecord> eval_memory_;
};

std::string iso_timestamp(std::chrono::system_clock::time_point t);

std::string turns_to_json(std::vector<Turn> const &turns);
std::vector<Turn> turns_from_json(std::string_view json_text);
std::string turns_to_markdown(std::vector<Turn> const &turns);

std::string doc_meta_json(DocMeta const &meta);

/// Directory name used for a document inside the PDF store.
std::string pdf_store_name(std::string_view doc_id);

} // namespace resrag
