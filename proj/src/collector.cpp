#include "affinity/collector.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <random>
#include <set>
#include <thread>

#include "affinity/digest.hpp"
#include "affinity/parallel.hpp"

namespace affinity {

namespace fs = std::filesystem;
using Code = CollectError::Code;

// --- clocks ---

std::int64_t SystemClock::now_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

void SystemClock::sleep_until(std::int64_t t_ms) {
  using namespace std::chrono;
  std::this_thread::sleep_until(system_clock::time_point(milliseconds(t_ms)));
}

std::int64_t ManualClock::now_ms() {
  std::lock_guard lock(mu_);
  ++now_calls_;
  return now_;
}

void ManualClock::sleep_until(std::int64_t t_ms) {
  std::lock_guard lock(mu_);
  sleeps_.push_back(t_ms);
  now_ = std::max(now_, t_ms);
}

std::vector<std::int64_t> ManualClock::sleeps() const {
  std::lock_guard lock(mu_);
  return sleeps_;
}

std::uint64_t ManualClock::now_calls() const {
  std::lock_guard lock(mu_);
  return now_calls_;
}

std::string_view to_string(JobState s) {
  switch (s) {
    case JobState::kPending: return "pending";
    case JobState::kRunning: return "running";
    case JobState::kRateLimited: return "rate_limited";
    case JobState::kDone: return "done";
    case JobState::kFailed: return "failed";
  }
  return "?";
}

std::string_view to_string(CollectError::Code code) {
  switch (code) {
    case Code::kInvalidPolicy: return "invalid_policy";
    case Code::kCursorLoop: return "cursor_loop";
    case Code::kPermanentFailure: return "permanent_failure";
    case Code::kRetriesExhausted: return "retries_exhausted";
    case Code::kRateLimitExhausted: return "rate_limit_exhausted";
  }
  return "?";
}

// --- collect ---

CollectResult collect(Transport& transport, const std::string& handle, const CollectPolicy& policy, Clock& clock,
                      const std::function<void(const CollectionJob&)>& progress) {
  if (policy.page_size == 0 || policy.page_size > kMaxPageSize)
    throw CollectError(Code::kInvalidPolicy, handle,
                       "page_size must be in [1, " + std::to_string(kMaxPageSize) + "]");

  CollectionJob job;
  job.handle = handle;
  auto emit = [&] {
    if (progress) progress(job);
  };
  auto fail = [&](Code code, const std::string& msg) {
    job.state = JobState::kFailed;
    job.error = msg;
    emit();
    throw CollectError(code, handle, msg);
  };
  auto wait_for_quota = [&](std::int64_t reset_at) {
    if (++job.rate_limit_waits > policy.max_rate_limit_waits)
      fail(Code::kRateLimitExhausted, "'" + handle + "': rate limit never lifted");
    job.state = JobState::kRateLimited;
    job.rate_limited_until_ms = reset_at;
    emit();
    if (reset_at > clock.now_ms()) clock.sleep_until(reset_at);
    job.state = JobState::kRunning;
    emit();
  };

  job.state = JobState::kRunning;
  emit();
  std::vector<UserId> all;
  std::set<std::string> seen{""};
  std::string cursor;
  for (;;) {
    PageResponse page;
    for (std::uint32_t attempt = 0;;) {
      try {
        page = transport.fetch({handle, cursor, policy.page_size});
        break;
      } catch (const TransportError& e) {
        switch (e.kind()) {
          case TransportError::Kind::kPermanent:
            fail(Code::kPermanentFailure, "'" + handle + "': " + e.what());
            break;
          case TransportError::Kind::kRateLimited:
            wait_for_quota(e.reset_at_ms());
            break;
          case TransportError::Kind::kTransient: {
            if (attempt >= policy.max_retries)
              fail(Code::kRetriesExhausted, "'" + handle + "': gave up after " + std::to_string(attempt) +
                                                " retries: " + e.what());
            std::int64_t delay = 0;
            if (!policy.backoff_ms.empty())
              delay = policy.backoff_ms[std::min<std::size_t>(attempt, policy.backoff_ms.size() - 1)];
            ++attempt;
            ++job.retries;
            if (delay > 0) clock.sleep_until(clock.now_ms() + delay);
            break;
          }
        }
      }
    }
    ++job.pages_fetched;
    job.ids_accumulated += page.ids.size();
    all.insert(all.end(), page.ids.begin(), page.ids.end());
    emit();

    if (!page.next_cursor) break;
    if (!seen.insert(*page.next_cursor).second)
      fail(Code::kCursorLoop, "'" + handle + "': cursor '" + *page.next_cursor + "' returned twice");
    cursor = *page.next_cursor;
    if (page.rate_limit.remaining == 0) wait_for_quota(page.rate_limit.reset_at_ms);
  }

  CollectResult r{IdSet::build(std::move(all)), {}};
  job.distinct_ids = r.ids.size();
  job.state = JobState::kDone;
  emit();
  r.job = std::move(job);
  return r;
}

// --- collect_all ---

CollectAllReport collect_all(Transport& transport, const Registry& registry, const fs::path& out_dir, Clock& clock,
                             const CollectAllOptions& options) {
  const auto& entities = registry.entities();
  const std::size_t n = entities.size();
  CollectAllReport report;
  report.jobs.resize(n);
  for (std::size_t i = 0; i < n; ++i) report.jobs[i].handle = entities[i].handle;

  fs::create_directories(out_dir / "followers");
  std::mutex mu;
  std::atomic<bool> abort{false};
  std::vector<std::optional<CollectError>> errors(n);
  std::vector<std::string> digests(n);

  parallel_for(n, std::max(1u, options.concurrency_limit), [&](std::size_t i) {
    if (abort.load()) return;
    const std::string& handle = entities[i].handle;
    auto progress = [&](const CollectionJob& job) {
      std::lock_guard lock(mu);
      report.jobs[i] = job;
    };
    try {
      auto result = collect(transport, handle, options.policy, clock, progress);
      const auto bytes = encode_ids1(result.ids);
      std::ofstream out(out_dir / "followers" / (handle + ".ids"), std::ios::binary | std::ios::trunc);
      out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
      if (!out) throw std::runtime_error("cannot write follower file for '" + handle + "'");
      digests[i] = content_digest(std::span<const std::byte>(bytes));
    } catch (const CollectError& e) {
      errors[i] = e;
      abort = true;
    } catch (const std::exception& e) {
      {
        std::lock_guard lock(mu);
        report.jobs[i].state = JobState::kFailed;
        report.jobs[i].error = e.what();
      }
      errors[i] = CollectError(Code::kPermanentFailure, handle, e.what());
      abort = true;
    }
  });

  for (auto& e : errors)
    if (e) {
      report.failure = std::move(e);
      return report;
    }

  std::map<std::string, Entity> updated;
  for (std::size_t i = 0; i < n; ++i) {
    Entity e = entities[i];
    e.follower_file = "followers/" + e.handle + ".ids";
    e.format = FileFormat::kBinary;
    e.digest = digests[i];
    updated.emplace(e.handle, std::move(e));
  }
  report.manifest = out_dir / "manifest.json";
  std::ofstream(report.manifest, std::ios::binary | std::ios::trunc) << registry.with_files(updated).to_manifest()
                                                                       << "\n";
  report.ok = true;
  return report;
}

// --- scripted transport ---

void ScriptedTransport::add(const std::string& handle, const std::string& cursor, Page page) {
  std::lock_guard lock(mu_);
  script_[{handle, cursor}] = Slot{std::move(page), 0};
}

void ScriptedTransport::add_pages(const std::string& handle, const std::vector<std::vector<UserId>>& pages) {
  for (std::size_t i = 0; i < pages.size(); ++i) {
    Page p;
    p.ids = pages[i];
    if (i + 1 < pages.size()) p.next_cursor = "c" + std::to_string(i + 1);
    p.rate_limit = {1000, 0};
    add(handle, i == 0 ? "" : "c" + std::to_string(i), std::move(p));
  }
}

PageResponse ScriptedTransport::fetch(const PageRequest& request) {
  std::lock_guard lock(mu_);
  log_.push_back(request);
  auto it = script_.find({request.handle, request.cursor});
  if (it == script_.end())
    throw TransportError(TransportError::Kind::kPermanent,
                         "no scripted page for cursor '" + request.cursor + "'");
  Slot& slot = it->second;
  if (slot.failures_served < slot.page.failures.size()) throw slot.page.failures[slot.failures_served++];
  if (slot.page.ids.size() > request.page_size)
    throw TransportError(TransportError::Kind::kPermanent, "scripted page exceeds the requested page size");
  return {slot.page.ids, slot.page.next_cursor, slot.page.rate_limit};
}

std::vector<PageRequest> ScriptedTransport::requests() const {
  std::lock_guard lock(mu_);
  return log_;
}

std::unique_ptr<ScriptedTransport> demo_transport(const Snapshot& snapshot, std::uint32_t page_size,
                                                  std::uint64_t seed, std::uint32_t quota, std::int64_t start_ms) {
  constexpr std::int64_t kWindowMs = 15 * 60 * 1000;
  constexpr std::size_t kRepeats = 3;  // ids carried over from the previous page
  auto t = std::make_unique<ScriptedTransport>();
  const std::uint32_t fresh = page_size > kRepeats ? page_size - kRepeats : page_size;
  for (const auto& [handle, set] : snapshot.sets()) {
    auto ids = set.to_vector();
    std::mt19937_64 rng(seed ^ std::hash<std::string>{}(handle));
    std::shuffle(ids.begin(), ids.end(), rng);
    std::size_t pages = std::max<std::size_t>(1, (ids.size() + fresh - 1) / fresh);
    for (std::size_t i = 0; i < pages; ++i) {
      ScriptedTransport::Page p;
      const std::size_t begin = i * fresh, end = std::min(ids.size(), begin + fresh);
      if (i > 0) p.ids.assign(ids.begin() + begin - std::min<std::size_t>(kRepeats, begin), ids.begin() + begin);
      p.ids.insert(p.ids.end(), ids.begin() + begin, ids.begin() + end);
      if (i + 1 < pages) p.next_cursor = handle + ":" + std::to_string(i + 1);
      const auto window = static_cast<std::int64_t>(i / quota);
      p.rate_limit = {static_cast<std::uint32_t>(quota - 1 - i % quota), start_ms + (window + 1) * kWindowMs};
      t->add(handle, i == 0 ? "" : handle + ":" + std::to_string(i), std::move(p));
    }
  }
  return t;
}

}  // namespace affinity
