#ifndef AFFINITY_COLLECTOR_HPP_
#define AFFINITY_COLLECTOR_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "affinity/idset.hpp"
#include "affinity/ingest.hpp"
#include "affinity/registry.hpp"

namespace affinity {

inline constexpr std::uint32_t kMaxPageSize = 5000;

struct PageRequest {
  std::string handle;
  std::string cursor;  // empty for the first page
  std::uint32_t page_size = kMaxPageSize;
};

struct RateLimit {
  std::uint32_t remaining = 1;
  std::int64_t reset_at_ms = 0;
};

struct PageResponse {
  std::vector<UserId> ids;
  std::optional<std::string> next_cursor;  // nullopt ends pagination
  RateLimit rate_limit;
};

class TransportError : public std::runtime_error {
 public:
  enum class Kind { kTransient, kPermanent, kRateLimited };
  TransportError(Kind kind, const std::string& what, std::int64_t reset_at_ms = 0)
      : std::runtime_error(what), kind_(kind), reset_at_ms_(reset_at_ms) {}
  Kind kind() const noexcept { return kind_; }
  /// For kRateLimited: when requests may resume.
  std::int64_t reset_at_ms() const noexcept { return reset_at_ms_; }

 private:
  Kind kind_;
  std::int64_t reset_at_ms_;
};

/// Must be safe to call from several threads for distinct handles.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual PageResponse fetch(const PageRequest& request) = 0;
};

class Clock {
 public:
  virtual ~Clock() = default;
  virtual std::int64_t now_ms() = 0;
  /// Blocks until now_ms() >= t.
  virtual void sleep_until(std::int64_t t_ms) = 0;
};

/// Wall clock in milliseconds since the Unix epoch.
class SystemClock : public Clock {
 public:
  std::int64_t now_ms() override;
  void sleep_until(std::int64_t t_ms) override;
};

/// Virtual time: sleeping jumps the clock forward and is recorded.
class ManualClock : public Clock {
 public:
  explicit ManualClock(std::int64_t start_ms = 0) : now_(start_ms) {}
  std::int64_t now_ms() override;
  void sleep_until(std::int64_t t_ms) override;

  std::vector<std::int64_t> sleeps() const;  // requested wake-up times, in call order
  std::uint64_t now_calls() const;

 private:
  mutable std::mutex mu_;
  std::int64_t now_;
  std::vector<std::int64_t> sleeps_;
  std::uint64_t now_calls_ = 0;
};

struct CollectPolicy {
  std::uint32_t page_size = kMaxPageSize;
  std::uint32_t max_retries = 3;                        // per page, for transient failures
  std::vector<std::int64_t> backoff_ms{1000, 4000, 16000};  // k-th retry waits backoff_ms[min(k, size-1)]
  std::uint32_t max_rate_limit_waits = 1000;            // per job
};

enum class JobState { kPending, kRunning, kRateLimited, kDone, kFailed };
std::string_view to_string(JobState s);

struct CollectionJob {
  std::string handle;
  JobState state = JobState::kPending;
  std::uint64_t pages_fetched = 0;
  std::uint64_t ids_accumulated = 0;  // before deduplication
  std::uint64_t retries = 0;
  std::uint64_t rate_limit_waits = 0;
  std::int64_t rate_limited_until_ms = 0;
  std::uint64_t distinct_ids = 0;
  std::string error;
};

class CollectError : public std::runtime_error {
 public:
  enum class Code { kInvalidPolicy, kCursorLoop, kPermanentFailure, kRetriesExhausted, kRateLimitExhausted };
  CollectError(Code code, std::string handle, const std::string& what)
      : std::runtime_error(what), code_(code), handle_(std::move(handle)) {}
  Code code() const noexcept { return code_; }
  const std::string& handle() const noexcept { return handle_; }

 private:
  Code code_;
  std::string handle_;
};
std::string_view to_string(CollectError::Code code);

struct CollectResult {
  IdSet ids;
  CollectionJob job;
};

/// Follows the cursor chain for one handle. `progress` (optional) sees every
/// state change of the job.
CollectResult collect(Transport& transport, const std::string& handle, const CollectPolicy& policy, Clock& clock,
                      const std::function<void(const CollectionJob&)>& progress = {});

struct CollectAllOptions {
  CollectPolicy policy;
  unsigned concurrency_limit = 1;
};

struct CollectAllReport {
  bool ok = false;
  std::vector<CollectionJob> jobs;  // registry order
  std::optional<CollectError> failure;
  std::filesystem::path manifest;   // set when ok
};

/// Collects every entity of the registry into `out_dir/followers/<handle>.ids`
/// (binary) and writes `out_dir/manifest.json` with digests. After a fatal
/// error no new jobs start and no manifest is written.
CollectAllReport collect_all(Transport& transport, const Registry& registry, const std::filesystem::path& out_dir,
                             Clock& clock, const CollectAllOptions& options = {});

/// In-process transport answering from a script keyed by (handle, cursor).
class ScriptedTransport : public Transport {
 public:
  struct Page {
    std::vector<UserId> ids;
    std::optional<std::string> next_cursor;
    RateLimit rate_limit;
    std::vector<TransportError> failures;  // thrown one per request before the page is served
  };

  void add(const std::string& handle, const std::string& cursor, Page page);
  /// Chains pages with cursors "c1", "c2", ...; every page reports ample quota.
  void add_pages(const std::string& handle, const std::vector<std::vector<UserId>>& pages);

  PageResponse fetch(const PageRequest& request) override;
  std::vector<PageRequest> requests() const;

 private:
  struct Slot {
    Page page;
    std::size_t failures_served = 0;
  };
  mutable std::mutex mu_;
  std::map<std::pair<std::string, std::string>, Slot> script_;
  std::vector<PageRequest> log_;
};

/// Serves each follower set of `snapshot` in shuffled pages of `page_size`
/// with some cross-page duplicates and a rate-limit pause every `quota`
/// requests, starting at `start_ms`.
std::unique_ptr<ScriptedTransport> demo_transport(const Snapshot& snapshot, std::uint32_t page_size, std::uint64_t seed,
                                                  std::uint32_t quota = 15, std::int64_t start_ms = 0);

}  // namespace affinity

#endif  // AFFINITY_COLLECTOR_HPP_
