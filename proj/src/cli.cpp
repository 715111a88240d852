#include "affinity/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <memory>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "affinity/collector.hpp"
#include "affinity/report.hpp"
#include "affinity/synth.hpp"
#include "json.hpp"

namespace affinity {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::shared_ptr<spdlog::logger> make_logger(std::ostream& err) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
  auto log = std::make_shared<spdlog::logger>("affinity", sink);
  log->set_pattern("[%l] %v");
  const char* env = std::getenv("AFFINITY_LOG");
  log->set_level(env ? spdlog::level::from_str(env) : spdlog::level::warn);
  return log;
}

struct Flags {
  std::string manifest;
  std::string out;
  std::string config;
  std::string level = "state";
  std::string format = "csv";
  unsigned threads = 1;
  std::optional<std::uint64_t> seed;
  std::uint32_t page_size = kMaxPageSize;
  double malformed_threshold = IngestOptions{}.malformed_threshold;
};

json registry_violations(const RegistryError& e) {
  json out = json::array();
  for (const auto& i : e.issues())
    out.push_back({{"code", std::string(to_string(i.code))}, {"handle", i.handle}, {"message", i.message}});
  return out;
}

json ingest_violation(const IngestError& e) {
  json v{{"code", std::string(to_string(e.code()))},
         {"handle", e.handle()},
         {"path", e.path()},
         {"message", e.what()}};
  if (!e.expected_digest().empty()) {
    v["expected_digest"] = e.expected_digest();
    v["actual_digest"] = e.actual_digest();
  }
  return v;
}

IngestOptions ingest_options(const Flags& f) {
  IngestOptions o;
  o.threads = f.threads;
  o.malformed_threshold = f.malformed_threshold;
  return o;
}

// Loads the registry and snapshot; on validation failure prints the violation
// list and returns nullopt.
std::optional<LoadedSnapshot> load_dataset(const Flags& f, std::ostream& out, spdlog::logger& log) {
  std::shared_ptr<const Registry> reg;
  try {
    reg = std::make_shared<const Registry>(load_registry_file(f.manifest));
  } catch (const RegistryError& e) {
    out << json{{"ok", false}, {"violations", registry_violations(e)}}.dump(2) << "\n";
    return std::nullopt;
  }
  try {
    auto loaded = load_snapshot(reg, fs::path(f.manifest).parent_path(), ingest_options(f));
    log.info("loaded {} follower sets", loaded.snapshot.sets().size());
    return loaded;
  } catch (const IngestError& e) {
    out << json{{"ok", false}, {"violations", json::array({ingest_violation(e)})}}.dump(2) << "\n";
    return std::nullopt;
  }
}

int cmd_validate(const Flags& f, std::ostream& out, spdlog::logger& log) {
  json violations = json::array();
  try {
    const Registry reg = load_registry_file(f.manifest);
    for (const auto& e : validate_snapshot(reg, fs::path(f.manifest).parent_path(), ingest_options(f)))
      violations.push_back(ingest_violation(e));
  } catch (const RegistryError& e) {
    violations = registry_violations(e);
  }
  const bool ok = violations.empty();
  out << json{{"ok", ok}, {"manifest", f.manifest}, {"violations", violations}}.dump(2) << "\n";
  log.info("validation {}", ok ? "passed" : "failed");
  return ok ? kExitOk : kExitValidation;
}

int cmd_synth(const Flags& f, std::ostream& out, spdlog::logger& log) {
  SynthConfig config;
  try {
    config = load_synth_config(f.config);
    if (f.seed) config.seed = *f.seed;
    config.threads = f.threads;
    validate(config);
  } catch (const SynthConfigError& e) {
    out << json{{"ok", false}, {"violations", e.issues()}}.dump(2) << "\n";
    return kExitValidation;
  }
  const auto manifest = write_dataset(config, f.out);
  log.info("wrote {}", manifest.string());

  // Regenerating in memory is cheap next to writing; it yields the summary.
  Table t{"summary", "Synthetic cohort (seed " + std::to_string(config.seed) + ")",
          {"state", "lean", "users", "democrats", "republicans", "noise"}, {}, {}};
  for (const auto& s : describe(generate(config).truth))
    t.rows.push_back({s.code, s.lean, s.users, s.democrats, s.republicans, s.noise});
  out << to_text(t) << "\nmanifest: " << manifest.string() << "\n";
  return kExitOk;
}

int cmd_collect(const Flags& f, std::ostream& out, spdlog::logger& log) {
  auto loaded = load_dataset(f, out, log);
  if (!loaded) return kExitValidation;
  const Snapshot& source = loaded->snapshot;

  // Demo mode: the loaded dataset plays the remote service.
  auto transport = demo_transport(source, f.page_size, f.seed.value_or(1));
  ManualClock clock;
  CollectAllOptions opts;
  opts.concurrency_limit = f.threads;
  opts.policy.page_size = f.page_size;
  auto report = collect_all(*transport, source.registry(), f.out, clock, opts);

  Table t{"jobs", "Collection jobs", {"handle", "state", "pages", "ids", "distinct", "retries", "waits"}, {}, {}};
  for (const auto& j : report.jobs)
    t.rows.push_back({j.handle, std::string(to_string(j.state)), j.pages_fetched, j.ids_accumulated, j.distinct_ids,
                      j.retries, j.rate_limit_waits});
  out << to_text(t);
  if (!report.ok) {
    log.error("collection aborted: {}", report.failure->what());
    out << "\nfailed: " << report.failure->handle() << " (" << to_string(report.failure->code())
        << "): " << report.failure->what() << "\n";
    return kExitRuntime;
  }
  out << "\nvirtual time waited: " << clock.now_ms() << " ms\nmanifest: " << report.manifest.string() << "\n";
  return kExitOk;
}

int cmd_report(const Flags& f, std::ostream& out, spdlog::logger& log) {
  auto loaded = load_dataset(f, out, log);
  if (!loaded) return kExitValidation;
  ReportOptions opts;
  opts.level = *parse_level(f.level);
  opts.format = *parse_report_format(f.format);
  opts.threads = f.threads;
  auto result = write_report(loaded->snapshot, f.out, opts);
  for (const auto& p : result.files) out << p.string() << "\n";
  for (const auto& w : result.warnings) log.warn("{}: {}", w.table, w.message);
  if (!result.warnings.empty()) out << result.warnings.size() << " warning(s); undefined rows are marked NA\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  auto log = make_logger(err);
  Flags f;
  CLI::App app{"Sports fandom and political affinity analysis"};
  app.name("affinity");
  app.require_subcommand(1);

  const auto levels = CLI::IsMember({"sport", "state", "team"});
  auto threads = [&](CLI::App* c) { c->add_option("--threads", f.threads, "Worker threads")->check(CLI::Range(1u, 256u)); };
  auto tolerance = [&](CLI::App* c) {
    c->add_option("--malformed-threshold", f.malformed_threshold, "Largest tolerated malformed-line fraction")
        ->check(CLI::Range(0.0, 1.0));
  };

  auto* validate_cmd = app.add_subcommand("validate", "Check a manifest and its follower files");
  validate_cmd->add_option("--manifest", f.manifest, "Manifest path")->required();
  threads(validate_cmd);
  tolerance(validate_cmd);

  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth_cmd->add_option("--config", f.config, "Synth config (JSON)")->required();
  synth_cmd->add_option("--out", f.out, "Output directory")->required();
  synth_cmd->add_option("--seed", f.seed, "Override the config seed");
  threads(synth_cmd);

  auto* collect_cmd = app.add_subcommand("collect", "Collect follower files through the fake transport");
  collect_cmd->add_option("--manifest", f.manifest, "Dataset served by the fake transport")->required();
  collect_cmd->add_option("--out", f.out, "Output directory")->required();
  collect_cmd->add_option("--seed", f.seed, "Page shuffling seed");
  collect_cmd->add_option("--page-size", f.page_size, "IDs per page")->check(CLI::Range(1u, kMaxPageSize));
  threads(collect_cmd);
  tolerance(collect_cmd);

  auto* report_cmd = app.add_subcommand("report", "Write ratio, breakdown and CDR tables");
  report_cmd->add_option("--manifest", f.manifest, "Manifest path")->required();
  report_cmd->add_option("--out", f.out, "Output directory")->required();
  report_cmd->add_option("--level", f.level, "CDR grouping level")->check(levels);
  report_cmd->add_option("--format", f.format, "Output format")->check(CLI::IsMember({"csv", "text"}));
  threads(report_cmd);
  tolerance(report_cmd);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitRuntime;
  }

  try {
    if (*validate_cmd) return cmd_validate(f, out, *log);
    if (*synth_cmd) return cmd_synth(f, out, *log);
    if (*collect_cmd) return cmd_collect(f, out, *log);
    if (*report_cmd) return cmd_report(f, out, *log);
  } catch (const std::exception& e) {
    log->error("{}", e.what());
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitRuntime;
}

}  // namespace affinity
