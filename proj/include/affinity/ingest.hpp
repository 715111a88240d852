#ifndef AFFINITY_INGEST_HPP_
#define AFFINITY_INGEST_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "affinity/idset.hpp"
#include "affinity/registry.hpp"

namespace affinity {

struct IngestOptions {
  /// Fraction of non-blank text lines allowed to be malformed before the
  /// file is rejected. Strictly greater is fatal.
  double malformed_threshold = 0.01;
  unsigned threads = 1;
};

struct IngestEntry {
  std::string handle;
  std::uint64_t raw_count = 0;  // non-blank lines (text) or stored values (binary)
  std::uint64_t distinct_count = 0;
  std::uint64_t duplicate_count = 0;
  std::uint64_t malformed_line_count = 0;
  std::string digest;  // of the bytes read
  friend bool operator==(const IngestEntry&, const IngestEntry&) = default;
};

struct IngestReport {
  std::vector<IngestEntry> entries;  // registry order
  const IngestEntry* find(std::string_view handle) const;
};

class IngestError : public std::runtime_error {
 public:
  enum class Code {
    kMissingFile,
    kUnreadable,
    kPathEscape,
    kBadMagic,
    kTruncated,
    kOrdering,
    kMalformedThreshold,
    kDigestMismatch,
  };

  IngestError(Code code, std::string handle, std::string path, std::string detail,
              std::string expected_digest = {}, std::string actual_digest = {});

  Code code() const noexcept { return code_; }
  const std::string& handle() const noexcept { return handle_; }
  const std::string& path() const noexcept { return path_; }
  const std::string& expected_digest() const noexcept { return expected_; }
  const std::string& actual_digest() const noexcept { return actual_; }

 private:
  Code code_;
  std::string handle_, path_, expected_, actual_;
};

std::string_view to_string(IngestError::Code c);

struct FollowerFile {
  IdSet ids;
  IngestEntry entry;
};

/// Parses an in-memory follower file. `handle` and `path` only label errors.
FollowerFile parse_follower_bytes(std::span<const std::byte> bytes, FileFormat format,
                                  const IngestOptions& options = {}, const std::string& handle = {},
                                  const std::string& path = {});

FollowerFile read_follower_file(const std::filesystem::path& path, FileFormat format,
                                const IngestOptions& options = {}, const std::string& handle = {});

/// Frozen per-entity follower sets taken at one time.
class Snapshot {
 public:
  Snapshot(std::shared_ptr<const Registry> registry, std::map<std::string, IdSet> sets);

  const Registry& registry() const noexcept { return *registry_; }
  std::shared_ptr<const Registry> registry_ptr() const noexcept { return registry_; }
  const std::string& collected_at() const noexcept { return registry_->collected_at(); }

  const IdSet* find(std::string_view handle) const;
  /// Throws std::out_of_range when the entity has no follower set.
  const IdSet& at(std::string_view handle) const;
  const std::map<std::string, IdSet, std::less<>>& sets() const noexcept { return sets_; }

  friend bool operator==(const Snapshot& a, const Snapshot& b) {
    return a.sets_ == b.sets_ && *a.registry_ == *b.registry_;
  }

 private:
  std::shared_ptr<const Registry> registry_;
  std::map<std::string, IdSet, std::less<>> sets_;
};

struct LoadedSnapshot {
  Snapshot snapshot;
  IngestReport report;
};

/// Loads every entity that declares a follower_file, resolving paths under
/// `root`. Stops at the first error in registry order.
LoadedSnapshot load_snapshot(std::shared_ptr<const Registry> registry, const std::filesystem::path& root,
                             const IngestOptions& options = {});

/// Same checks as load_snapshot but returns every violation instead of
/// throwing on the first.
std::vector<IngestError> validate_snapshot(const Registry& registry, const std::filesystem::path& root,
                                           const IngestOptions& options = {});

}  // namespace affinity

#endif  // AFFINITY_INGEST_HPP_
