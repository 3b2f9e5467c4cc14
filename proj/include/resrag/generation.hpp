#pragma once

#include "pdf.hpp"
#include "retrieval.hpp"

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace resrag {

/// Answer prompt with `{query}`, `{retrieved_docs}` and `{parsed_pdf}` slots.
/// Sections are separated by blank lines; the section holding `{parsed_pdf}`
/// is dropped entirely when there is no upload.
class PromptTemplate
{
public:
  explicit PromptTemplate(std::string text);
  static PromptTemplate builtin();
  static PromptTemplate from_file(std::filesystem::path const &path);

  std::string const &text() const { return text_; }
  std::string render(std::string_view query, std::string_view retrieved_docs,
                     std::optional<std::string_view> parsed_pdf) const;

private:
  std::string text_;
  std::string without_upload_;
};

/// Byte-exact copy of the shipped prompt.tmpl.
extern char const *const kDefaultPromptTemplate;

inline constexpr std::size_t kDefaultPromptBudget = 24'000;

struct PromptBundle
{
  std::string query;
  std::vector<std::pair<std::string, std::string>> retrieved_blocks; // (doc_id, excerpt) in rank order
  std::optional<std::vector<std::string>> upload_blocks;
  std::string rendered;

  // inputs kept for re-assembly under a smaller budget
  std::vector<RetrievedDoc> retrieved;
  std::optional<ParsedUpload> upload;
  std::size_t budget = kDefaultPromptBudget;
};

/// Fill the template within `budget` characters. Blocks are added in rank
/// order; a block that does not fit loses trailing sentences and ends the
/// list. With an upload, 20% of the budget is held back for its chunks.
PromptBundle assemble_prompt(std::string const &query, std::vector<RetrievedDoc> const &retrieved,
                             std::optional<ParsedUpload> const &upload = std::nullopt,
                             std::size_t budget = kDefaultPromptBudget,
                             PromptTemplate const &tmpl = PromptTemplate::builtin());

class GenerationProvider
{
public:
  virtual ~GenerationProvider() = default;
  virtual std::string model() const = 0;
  /// Throws ProviderUnavailable, ProviderTimeout or ContextOverflow.
  virtual std::string complete(std::string const &prompt, std::chrono::milliseconds timeout) = 0;
};

/// `POST {base}/v1/chat/completions` with a single user message.
class HttpGenerationProvider final : public GenerationProvider
{
public:
  HttpGenerationProvider(std::string base_url, std::string model);
  std::string model() const override { return model_; }
  std::string complete(std::string const &prompt, std::chrono::milliseconds timeout) override;

private:
  std::string origin_;
  std::string prefix_;
  std::string model_;
};

struct GeneratedAnswer
{
  std::string text; // markdown, verbatim from the provider
  std::vector<DocMeta> sources;
  std::string provider_model;
  std::int64_t latency_ms = 0;
  int retries = 0;
  bool operator==(GeneratedAnswer const &) const = default;
};

struct GenerationOptions
{
  std::chrono::milliseconds timeout{120'000};
  PromptTemplate const *tmpl = nullptr;

  /// GEN_TIMEOUT_S
  static GenerationOptions from_env();
};

/// Sends the prompt; on ContextOverflow re-assembles once with half the budget.
/// `bundle` is updated to the prompt that was finally sent.
GeneratedAnswer generate(PromptBundle &bundle, GenerationProvider &provider, GenerationOptions const &options = {});

} // namespace resrag
