#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace resrag {

/// Base of every error raised by the library. `kind()` is the stable name used
/// in error reports and HTTP payloads.
class Error : public std::runtime_error
{
public:
  Error(std::string kind, std::string const &what)
    : std::runtime_error(what)
    , kind_(std::move(kind))
  {
  }
  std::string const &kind() const noexcept { return kind_; }

private:
  std::string kind_;
};

#define RESRAG_DEFINE_ERROR(Name)                                                                  \
  class Name : public Error                                                                        \
  {                                                                                                \
  public:                                                                                          \
    explicit Name(std::string const &what)                                                         \
      : Error(#Name, what)                                                                         \
    {                                                                                              \
    }                                                                                              \
  }

// corpus / uploads
RESRAG_DEFINE_ERROR(SchemaError);
RESRAG_DEFINE_ERROR(DateRangeError);
RESRAG_DEFINE_ERROR(DuplicateIdError);
RESRAG_DEFINE_ERROR(UnparsablePdfError);
RESRAG_DEFINE_ERROR(EmptyDocumentError);
RESRAG_DEFINE_ERROR(ParseTimeoutError);

// providers
RESRAG_DEFINE_ERROR(ProviderUnavailable);
RESRAG_DEFINE_ERROR(ProviderTimeout);
RESRAG_DEFINE_ERROR(ContextOverflow);
RESRAG_DEFINE_ERROR(DimensionMismatch);

// index / retrieval
RESRAG_DEFINE_ERROR(ZeroVectorError);
RESRAG_DEFINE_ERROR(EmptyIndexError);
RESRAG_DEFINE_ERROR(CorruptIndexError);
RESRAG_DEFINE_ERROR(VersionError);
RESRAG_DEFINE_ERROR(InvalidConfig);

// generation
RESRAG_DEFINE_ERROR(BudgetTooSmall);

// evaluation / analytics
RESRAG_DEFINE_ERROR(CountError);
RESRAG_DEFINE_ERROR(EmptyInputError);
RESRAG_DEFINE_ERROR(NotFound);

#undef RESRAG_DEFINE_ERROR

/// A rating sheet failed validation; `key()` names the offending dimension.
class ValidationError : public Error
{
public:
  ValidationError(std::string key, std::string const &what)
    : Error("ValidationError", what)
    , key_(std::move(key))
  {
  }
  std::string const &key() const noexcept { return key_; }

private:
  std::string key_;
};

/// Some provider batches failed after retries. Rows at `failed_indices` are
/// missing; everything else was embedded (and cached).
class PartialBatchError : public Error
{
public:
  PartialBatchError(std::vector<std::size_t> failed, std::string const &what)
    : Error("PartialBatchError", what)
    , failed_(std::move(failed))
  {
  }
  std::vector<std::size_t> const &failed_indices() const noexcept { return failed_; }

private:
  std::vector<std::size_t> failed_;
};

} // namespace resrag
