#include "affinity/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <optional>

#include "affinity/digest.hpp"
#include "affinity/parallel.hpp"

namespace affinity {

namespace fs = std::filesystem;
using Code = IngestError::Code;

std::string_view to_string(IngestError::Code c) {
  switch (c) {
    case Code::kMissingFile: return "missing_file";
    case Code::kUnreadable: return "unreadable_file";
    case Code::kPathEscape: return "path_outside_root";
    case Code::kBadMagic: return "bad_magic";
    case Code::kTruncated: return "truncated_file";
    case Code::kOrdering: return "ordering_violation";
    case Code::kMalformedThreshold: return "malformed_threshold_exceeded";
    case Code::kDigestMismatch: return "digest_mismatch";
  }
  return "unknown";
}

IngestError::IngestError(Code code, std::string handle, std::string path, std::string detail,
                         std::string expected_digest, std::string actual_digest)
    : std::runtime_error(std::string(to_string(code)) + (handle.empty() ? "" : " [" + handle + "]") +
                         (path.empty() ? "" : " " + path) + ": " + detail),
      code_(code),
      handle_(std::move(handle)),
      path_(std::move(path)),
      expected_(std::move(expected_digest)),
      actual_(std::move(actual_digest)) {}

const IngestEntry* IngestReport::find(std::string_view handle) const {
  auto it = std::find_if(entries.begin(), entries.end(), [&](const IngestEntry& e) { return e.handle == handle; });
  return it == entries.end() ? nullptr : &*it;
}

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f'; }

FollowerFile parse_text(std::string_view text, const IngestOptions& options, const std::string& handle,
                        const std::string& path) {
  FollowerFile out;
  std::vector<UserId> ids;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;

    while (!line.empty() && is_space(line.front())) line.remove_prefix(1);
    while (!line.empty() && is_space(line.back())) line.remove_suffix(1);
    if (line.empty()) continue;

    ++out.entry.raw_count;
    UserId v = 0;
    auto [end, ec] = std::from_chars(line.data(), line.data() + line.size(), v, 10);
    if (ec != std::errc() || end != line.data() + line.size()) {
      ++out.entry.malformed_line_count;
      continue;
    }
    ids.push_back(v);
  }

  if (out.entry.raw_count > 0) {
    const double frac = static_cast<double>(out.entry.malformed_line_count) / static_cast<double>(out.entry.raw_count);
    if (frac > options.malformed_threshold)
      throw IngestError(Code::kMalformedThreshold, handle, path,
                        std::to_string(out.entry.malformed_line_count) + " of " +
                            std::to_string(out.entry.raw_count) + " lines malformed");
  }
  const std::uint64_t valid = ids.size();
  out.ids = IdSet::build(std::move(ids));
  out.entry.distinct_count = out.ids.size();
  out.entry.duplicate_count = valid - out.ids.size();
  return out;
}

std::optional<std::vector<std::byte>> slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) return std::nullopt;
  const auto size = in.tellg();
  if (size < 0) return std::nullopt;
  std::vector<std::byte> buf(static_cast<std::size_t>(size));
  in.seekg(0);
  if (!in.read(reinterpret_cast<char*>(buf.data()), size)) return std::nullopt;
  return buf;
}

// Resolves `rel` under `root`, refusing absolute paths and parent escapes.
fs::path resolve_under(const fs::path& root, const std::string& rel, const std::string& handle) {
  fs::path p(rel);
  if (p.is_absolute()) throw IngestError(Code::kPathEscape, handle, rel, "follower_file must be relative to the dataset root");
  fs::path norm = p.lexically_normal();
  if (!norm.empty() && *norm.begin() == "..")
    throw IngestError(Code::kPathEscape, handle, rel, "follower_file escapes the dataset root");
  return root / norm;
}

struct Loaded {
  IdSet ids;
  IngestEntry entry;
};

Loaded load_entity(const Entity& e, const fs::path& root, const IngestOptions& options) {
  const fs::path path = resolve_under(root, *e.follower_file, e.handle);
  if (!fs::exists(path)) throw IngestError(Code::kMissingFile, e.handle, path.string(), "follower file not found");
  auto bytes = slurp(path);
  if (!bytes) throw IngestError(Code::kUnreadable, e.handle, path.string(), "cannot read follower file");
  auto file = parse_follower_bytes(*bytes, e.format, options, e.handle, path.string());
  if (e.digest && *e.digest != file.entry.digest)
    throw IngestError(Code::kDigestMismatch, e.handle, path.string(),
                      "expected " + *e.digest + ", got " + file.entry.digest, *e.digest, file.entry.digest);
  file.entry.handle = e.handle;
  return {std::move(file.ids), std::move(file.entry)};
}

}  // namespace

FollowerFile parse_follower_bytes(std::span<const std::byte> bytes, FileFormat format, const IngestOptions& options,
                                  const std::string& handle, const std::string& path) {
  FollowerFile out;
  if (format == FileFormat::kText) {
    out = parse_text(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()), options, handle,
                     path);
  } else {
    try {
      out.ids = decode_ids1(bytes);
    } catch (const IdsFormatError& e) {
      Code c = Code::kTruncated;
      if (e.code() == IdsFormatError::Code::kBadMagic) c = Code::kBadMagic;
      if (e.code() == IdsFormatError::Code::kOrdering) c = Code::kOrdering;
      throw IngestError(c, handle, path, e.what());
    }
    out.entry.raw_count = out.entry.distinct_count = out.ids.size();
  }
  out.entry.handle = handle;
  out.entry.digest = content_digest(bytes);
  return out;
}

FollowerFile read_follower_file(const fs::path& path, FileFormat format, const IngestOptions& options,
                                const std::string& handle) {
  if (!fs::exists(path)) throw IngestError(Code::kMissingFile, handle, path.string(), "follower file not found");
  auto bytes = slurp(path);
  if (!bytes) throw IngestError(Code::kUnreadable, handle, path.string(), "cannot read follower file");
  return parse_follower_bytes(*bytes, format, options, handle, path.string());
}

Snapshot::Snapshot(std::shared_ptr<const Registry> registry, std::map<std::string, IdSet> sets)
    : registry_(std::move(registry)) {
  for (auto& [h, s] : sets) sets_.emplace(h, std::move(s));
}

const IdSet* Snapshot::find(std::string_view handle) const {
  auto it = sets_.find(handle);
  return it == sets_.end() ? nullptr : &it->second;
}

const IdSet& Snapshot::at(std::string_view handle) const {
  if (const IdSet* s = find(handle)) return *s;
  throw std::out_of_range("snapshot has no follower set for '" + std::string(handle) + "'");
}

LoadedSnapshot load_snapshot(std::shared_ptr<const Registry> registry, const fs::path& root,
                             const IngestOptions& options) {
  std::vector<const Entity*> todo;
  for (const auto& e : registry->entities())
    if (e.follower_file) todo.push_back(&e);

  std::vector<Loaded> loaded(todo.size());
  parallel_for(todo.size(), options.threads,
               [&](std::size_t i) { loaded[i] = load_entity(*todo[i], root, options); });

  std::map<std::string, IdSet> sets;
  IngestReport report;
  for (std::size_t i = 0; i < todo.size(); ++i) {
    sets.emplace(todo[i]->handle, std::move(loaded[i].ids));
    report.entries.push_back(std::move(loaded[i].entry));
  }
  return {Snapshot(std::move(registry), std::move(sets)), std::move(report)};
}

std::vector<IngestError> validate_snapshot(const Registry& registry, const fs::path& root,
                                           const IngestOptions& options) {
  std::vector<IngestError> out;
  for (const auto& e : registry.entities()) {
    if (!e.follower_file) continue;
    try {
      load_entity(e, root, options);
    } catch (const IngestError& err) {
      out.push_back(err);
    }
  }
  return out;
}

}  // namespace affinity
