#include "pdf_writer.hpp"

#include "resrag/pdf.hpp"

#include <gtest/gtest.h>

#include <thread>

using namespace resrag;

TEST(Pdf, SinglePageText)
{
  auto const pdf = pdfw::text_pdf({{"The Assembly adopted the text.", "It was a long day."}});
  auto const up = parse_user_pdf(as_bytes(pdf), "one.pdf");
  ASSERT_FALSE(up.chunks.empty());
  EXPECT_NE(up.chunks[0].find("The Assembly adopted the text."), std::string::npos);
  EXPECT_NE(up.chunks[0].find("It was a long day."), std::string::npos);
  EXPECT_EQ(up.filename, "one.pdf");
  EXPECT_EQ(up.upload_id.size(), 32u);
}

TEST(Pdf, FlateAndMultiPage)
{
  auto const pdf = pdfw::text_pdf({{"Page one text."}, {"Page two (with parens) text."}}, true);
  auto const pages = TextLayerExtractor().extract_pages(as_bytes(pdf));
  ASSERT_EQ(pages.size(), 2u);
  EXPECT_NE(pages[0].find("Page one text."), std::string::npos);
  EXPECT_NE(pages[1].find("Page two (with parens) text."), std::string::npos);
}

TEST(Pdf, ParagraphGapsAndHyphenation)
{
  auto const pdf = pdfw::text_pdf({{"First para- ", "graph ends here.", "", "Second paragraph."}});
  auto const pages = TextLayerExtractor().extract_pages(as_bytes(pdf));
  auto const chunks = chunk_text(pages, 1000);
  ASSERT_EQ(chunks.size(), 1u);
  EXPECT_NE(chunks[0].find("First paragraph ends here."), std::string::npos) << chunks[0];
  auto const small = chunk_text(pages, 30);
  ASSERT_EQ(small.size(), 2u);
  EXPECT_EQ(small[1], "Second paragraph.");
}

TEST(Pdf, ImageOnlyIsEmpty) { EXPECT_THROW(parse_user_pdf(as_bytes(pdfw::image_only_pdf())), EmptyDocumentError); }

TEST(Pdf, CorruptAndEncrypted)
{
  EXPECT_THROW(parse_user_pdf(as_bytes(pdfw::corrupt_pdf())), UnparsablePdfError);
  EXPECT_THROW(parse_user_pdf(as_bytes("hello world")), UnparsablePdfError);
  EXPECT_THROW(parse_user_pdf(as_bytes("")), UnparsablePdfError);
  EXPECT_THROW(parse_user_pdf(as_bytes(pdfw::encrypted_pdf())), UnparsablePdfError);
}

TEST(Pdf, TruncatedFile)
{
  auto const pdf = pdfw::text_pdf({{"Some text that will be cut."}}, true);
  for (std::size_t cut : {pdf.size() / 4, pdf.size() / 2}) {
    try {
      auto const up = parse_user_pdf(as_bytes(pdf.substr(0, cut)));
      ADD_FAILURE() << "truncated PDF parsed into " << up.chunks.size() << " chunks";
    } catch (UnparsablePdfError const &) {
    } catch (EmptyDocumentError const &) {
    }
  }
}

namespace {
class SlowExtractor : public PdfTextExtractor
{
public:
  std::vector<std::string> extract_pages(std::span<std::byte const>) const override
  {
    std::this_thread::sleep_for(std::chrono::milliseconds(300));
    return {"late"};
  }
};
} // namespace

TEST(Pdf, Timeout)
{
  static SlowExtractor const slow;
  UploadOptions opts;
  opts.timeout = std::chrono::milliseconds(20);
  opts.extractor = &slow;
  EXPECT_THROW(parse_user_pdf(as_bytes("x"), "slow.pdf", opts), ParseTimeoutError);
}

TEST(Chunking, LongParagraphSplitsAtSentences)
{
  std::string para;
  for (int i = 0; i < 30; ++i) { para += "Sentence number " + std::to_string(i) + " is here. "; }
  auto const chunks = chunk_text({para}, 200);
  EXPECT_GT(chunks.size(), 1u);
  for (auto const &c : chunks) {
    EXPECT_LE(c.size(), 200u);
    EXPECT_EQ(c.back(), '.');
  }
}

TEST(Chunking, Empty) { EXPECT_TRUE(chunk_text({"", "  \n \n"}, 1000).empty()); }

TEST(RandomId, UniqueHex)
{
  std::set<std::string> ids;
  for (int i = 0; i < 1000; ++i) {
    auto const id = random_id();
    EXPECT_EQ(id.find_first_not_of("0123456789abcdef"), std::string::npos);
    ids.insert(id);
  }
  EXPECT_EQ(ids.size(), 1000u);
}
