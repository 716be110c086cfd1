#include "refine/common/util.h"

#include <unistd.h>

#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "refine/common/error.h"

namespace refine {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kTransport: return "TransportError";
    case ErrorCode::kSchema: return "SchemaError";
    case ErrorCode::kFixtureMiss: return "FixtureMiss";
    case ErrorCode::kXmlParse: return "XmlParseError";
    case ErrorCode::kEmptyBody: return "EmptyBodyError";
    case ErrorCode::kIo: return "IoError";
    case ErrorCode::kSchemaVersion: return "SchemaVersionError";
    case ErrorCode::kDimMismatch: return "DimMismatchError";
    case ErrorCode::kZeroNorm: return "ZeroNormError";
    case ErrorCode::kLengthMismatch: return "LengthMismatchError";
    case ErrorCode::kNoEligiblePapers: return "NoEligiblePapersError";
    case ErrorCode::kSingleCluster: return "SingleClusterError";
    case ErrorCode::kNoImplications: return "NoImplicationsError";
    case ErrorCode::kNoActionItems: return "NoActionItemsError";
    case ErrorCode::kAllAbsent: return "AllAbsentError";
    case ErrorCode::kHtmlParse: return "HtmlParseError";
    case ErrorCode::kInvalidReference: return "InvalidReferenceError";
    case ErrorCode::kFragmentParse: return "FragmentParseError";
    case ErrorCode::kPreviewFailed: return "PreviewFailedError";
    case ErrorCode::kBadImage: return "BadImageError";
    case ErrorCode::kUnknownSession: return "UnknownSession";
    case ErrorCode::kUnknownItem: return "UnknownItem";
    case ErrorCode::kUnknownCluster: return "UnknownCluster";
    case ErrorCode::kNotRepresentable: return "NotRepresentableError";
    case ErrorCode::kReconstructionPending: return "ReconstructionPendingError";
    case ErrorCode::kTranslationFailed: return "TranslationFailedError";
    case ErrorCode::kPrecondition: return "PreconditionError";
  }
  return "Error";
}

void Diagnostics::warn(std::string message) {
  spdlog::warn("{}", message);
  std::lock_guard lock(mu_);
  warnings_.push_back(std::move(message));
}

void Diagnostics::append(const Diagnostics& other) {
  if (&other == this) return;
  std::vector<std::string> copy;
  {
    std::lock_guard lock(other.mu_);
    copy = other.warnings_;
  }
  std::lock_guard lock(mu_);
  warnings_.insert(warnings_.end(), copy.begin(), copy.end());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError(fmt::format("read failed for {}", path.string()));
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  auto tmp = path;
  tmp += fmt::format(".tmp-{}-{}", ::getpid(),
                     std::hash<std::thread::id>{}(std::this_thread::get_id()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(fmt::format("cannot write {}", tmp.string()));
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw IoError(fmt::format("write failed for {}", tmp.string()));
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw IoError(fmt::format("rename to {} failed: {}", path.string(), ec.message()));
  }
}

void parallel_for(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t)>& fn,
                  std::vector<std::exception_ptr>* errors) {
  std::vector<std::exception_ptr> local(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
      try {
        fn(i);
      } catch (...) {
        local[i] = std::current_exception();
      }
    }
  };
  std::size_t n_threads = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(count, 1));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  if (errors) {
    *errors = std::move(local);
    return;
  }
  for (auto& e : local) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace refine
