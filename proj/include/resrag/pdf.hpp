#pragma once

#include "errors.hpp"

#include <chrono>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace resrag {

/// Extracts the text layer of a PDF, one string per page.
class PdfTextExtractor
{
public:
  virtual ~PdfTextExtractor() = default;
  /// Throws UnparsablePdfError for corrupt or encrypted input.
  virtual std::vector<std::string> extract_pages(std::span<std::byte const> pdf) const = 0;
};

/// Built-in extractor: walks the page tree, inflates Flate streams (including
/// object streams) and decodes text-showing operators, mapping glyphs through
/// ToUnicode CMaps where fonts carry one. No OCR.
class TextLayerExtractor final : public PdfTextExtractor
{
public:
  std::vector<std::string> extract_pages(std::span<std::byte const> pdf) const override;
};

struct ParsedUpload
{
  std::string upload_id;
  std::string filename;
  std::vector<std::string> chunks;
  std::chrono::system_clock::time_point created_at;
};

struct UploadOptions
{
  std::size_t chunk_chars = 1000;
  std::chrono::milliseconds timeout{30'000};
  PdfTextExtractor const *extractor = nullptr; // TextLayerExtractor when null
};

/// Group page text into chunks of at most `max_chars` bytes, breaking at
/// paragraph, then sentence boundaries. A single over-long sentence becomes its
/// own chunk.
std::vector<std::string> chunk_text(std::vector<std::string> const &pages, std::size_t max_chars);

/// Parse and chunk an uploaded PDF. Throws UnparsablePdfError,
/// EmptyDocumentError (no extractable text) or ParseTimeoutError.
ParsedUpload parse_user_pdf(std::span<std::byte const> bytes, std::string filename = "upload.pdf",
                            UploadOptions const &options = {});

inline std::span<std::byte const> as_bytes(std::string_view s)
{
  return std::as_bytes(std::span<char const>(s.data(), s.size()));
}

/// 128-bit random identifier, hex encoded.
std::string random_id();

} // namespace resrag
