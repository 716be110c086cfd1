#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace refine {

// Every failure the pipeline can surface. The HTTP layer maps these onto
// status codes and the CLI onto exit messages, so the set is closed.
enum class ErrorCode {
  kTransport,
  kSchema,
  kFixtureMiss,
  kXmlParse,
  kEmptyBody,
  kIo,
  kSchemaVersion,
  kDimMismatch,
  kZeroNorm,
  kLengthMismatch,
  kNoEligiblePapers,
  kSingleCluster,
  kNoImplications,
  kNoActionItems,
  kAllAbsent,
  kHtmlParse,
  kInvalidReference,
  kFragmentParse,
  kPreviewFailed,
  kBadImage,
  kUnknownSession,
  kUnknownItem,
  kUnknownCluster,
  kNotRepresentable,
  kReconstructionPending,
  kTranslationFailed,
  kPrecondition,
};

std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

template <ErrorCode Code>
class CodedError : public Error {
 public:
  explicit CodedError(const std::string& message) : Error(Code, message) {}
};

using TransportError = CodedError<ErrorCode::kTransport>;
using SchemaError = CodedError<ErrorCode::kSchema>;
using FixtureMiss = CodedError<ErrorCode::kFixtureMiss>;
using XmlParseError = CodedError<ErrorCode::kXmlParse>;
using EmptyBodyError = CodedError<ErrorCode::kEmptyBody>;
using IoError = CodedError<ErrorCode::kIo>;
using SchemaVersionError = CodedError<ErrorCode::kSchemaVersion>;
using DimMismatchError = CodedError<ErrorCode::kDimMismatch>;
using ZeroNormError = CodedError<ErrorCode::kZeroNorm>;
using LengthMismatchError = CodedError<ErrorCode::kLengthMismatch>;
using NoEligiblePapersError = CodedError<ErrorCode::kNoEligiblePapers>;
using SingleClusterError = CodedError<ErrorCode::kSingleCluster>;
using NoImplicationsError = CodedError<ErrorCode::kNoImplications>;
using NoActionItemsError = CodedError<ErrorCode::kNoActionItems>;
using AllAbsentError = CodedError<ErrorCode::kAllAbsent>;
using HtmlParseError = CodedError<ErrorCode::kHtmlParse>;
using FragmentParseError = CodedError<ErrorCode::kFragmentParse>;
using PreviewFailedError = CodedError<ErrorCode::kPreviewFailed>;
using BadImageError = CodedError<ErrorCode::kBadImage>;
using UnknownSession = CodedError<ErrorCode::kUnknownSession>;
using UnknownItem = CodedError<ErrorCode::kUnknownItem>;
using UnknownCluster = CodedError<ErrorCode::kUnknownCluster>;
using NotRepresentableError = CodedError<ErrorCode::kNotRepresentable>;
using TranslationFailedError = CodedError<ErrorCode::kTranslationFailed>;
using PreconditionError = CodedError<ErrorCode::kPrecondition>;

// Carries the position of the offending edit within the submitted list and
// the ids that could not be resolved.
class InvalidReferenceError : public Error {
 public:
  InvalidReferenceError(const std::string& message, int edit_index,
                        std::vector<std::string> bad_ids = {})
      : Error(ErrorCode::kInvalidReference, message),
        edit_index_(edit_index),
        bad_ids_(std::move(bad_ids)) {}

  int edit_index() const noexcept { return edit_index_; }
  const std::vector<std::string>& bad_ids() const noexcept { return bad_ids_; }

 private:
  int edit_index_;
  std::vector<std::string> bad_ids_;
};

class ReconstructionPendingError : public Error {
 public:
  ReconstructionPendingError(const std::string& message, int retry_after_seconds)
      : Error(ErrorCode::kReconstructionPending, message),
        retry_after_seconds_(retry_after_seconds) {}

  int retry_after_seconds() const noexcept { return retry_after_seconds_; }

 private:
  int retry_after_seconds_;
};

}  // namespace refine
