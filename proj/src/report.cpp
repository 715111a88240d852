#include "affinity/report.hpp"

#include <algorithm>
#include <fstream>

#include <fmt/format.h>

namespace affinity {

namespace fs = std::filesystem;

std::optional<ReportFormat> parse_report_format(std::string_view s) {
  if (s == "csv") return ReportFormat::kCsv;
  if (s == "text") return ReportFormat::kText;
  return std::nullopt;
}

std::string format_text_real(double v) { return fmt::format("{:.3f}", v); }

namespace {

std::string csv_cell(const Cell& c) {
  struct {
    std::string operator()(const std::string& s) const {
      if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
      std::string q = "\"";
      for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
      return q + "\"";
    }
    std::string operator()(std::uint64_t v) const { return fmt::format("{}", v); }
    std::string operator()(double v) const { return fmt::format("{}", v); }
    std::string operator()(Missing) const { return "NA"; }
  } visit;
  return std::visit(visit, c);
}

std::string text_cell(const Cell& c) {
  if (auto* d = std::get_if<double>(&c)) return format_text_real(*d);
  if (auto* s = std::get_if<std::string>(&c)) return *s;
  return csv_cell(c);
}

std::string key_label(const GroupKey& k) {
  std::string s(to_string(k.league));
  if (!k.state.empty()) s += "/" + k.state;
  if (!k.team.empty()) s += "/" + k.team;
  return s;
}

std::vector<std::string> key_header(Level level) {
  switch (level) {
    case Level::kSport: return {"league"};
    case Level::kState: return {"league", "state"};
    case Level::kTeam: return {"league", "state", "team"};
  }
  return {};
}

std::vector<Cell> key_cells(const GroupKey& k, Level level) {
  std::vector<Cell> out{std::string(to_string(k.league))};
  if (level != Level::kSport) out.emplace_back(k.state);
  if (level == Level::kTeam) out.emplace_back(k.team);
  return out;
}

}  // namespace

std::string to_csv(const Table& table) {
  std::string out;
  auto line = [&](const auto& cells, auto&& render) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += render(cells[i]);
    }
    out += '\n';
  };
  line(table.header, [](const std::string& h) { return csv_cell(h); });
  for (const auto& row : table.rows) line(row, csv_cell);
  return out;
}

std::string to_text(const Table& table) {
  std::vector<std::vector<std::string>> cells;
  cells.push_back(table.header);
  for (const auto& row : table.rows) {
    std::vector<std::string> r;
    for (const auto& c : row) r.push_back(text_cell(c));
    cells.push_back(std::move(r));
  }
  std::vector<std::size_t> width(table.header.size(), 0);
  for (const auto& r : cells)
    for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());

  std::string out = table.title + "\n\n";
  // Headers follow their column: text columns left, numeric columns right.
  std::vector<bool> text_column(width.size(), true);
  if (!table.rows.empty())
    for (std::size_t i = 0; i < width.size(); ++i)
      text_column[i] = std::holds_alternative<std::string>(table.rows.front()[i]);
  auto emit = [&](const std::vector<std::string>& r, const std::vector<Cell>* src) {
    std::string line;
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i) line += "  ";
      const bool left = src ? std::holds_alternative<std::string>((*src)[i]) : text_column[i];
      line += left ? fmt::format("{:<{}}", r[i], width[i]) : fmt::format("{:>{}}", r[i], width[i]);
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
  };
  emit(cells[0], nullptr);
  std::vector<std::string> rule;
  for (auto w : width) rule.emplace_back(w, '-');
  emit(rule, nullptr);
  for (std::size_t r = 0; r < table.rows.size(); ++r) emit(cells[r + 1], &table.rows[r]);
  if (!table.warnings.empty()) {
    out += "\nWarnings\n";
    for (const auto& w : table.warnings) out += "  " + key_label(w.key) + ": " + w.message + "\n";
  }
  return out;
}

// --- tables ---

Table ratio_report(const std::vector<RatioRow>& rows, Level level, const std::vector<std::string>& candidates) {
  Table t{"ratios", "Candidate following ratios among exclusive fans", key_header(level), {}, {}};
  t.header.push_back("fans");
  for (const auto& c : candidates) t.header.push_back("overlap_" + c);
  for (const auto& c : candidates) t.header.push_back("ratio_" + c);
  for (const auto& r : rows) {
    auto cells = key_cells(r.key, level);
    cells.emplace_back(r.fans);
    for (auto o : r.overlaps) cells.emplace_back(o);
    for (std::size_t j = 0; j < candidates.size(); ++j)
      cells.push_back(r.defined() ? Cell(r.ratios[j]) : Cell(Missing{}));
    if (!r.defined()) t.warnings.push_back({t.name, r.key, "no fan follows any candidate; ratios undefined"});
    t.rows.push_back(std::move(cells));
  }
  return t;
}

Table breakdown_report(const std::vector<SenatorBreakdown>& rows, Level level) {
  Table t{"senator_breakdown", "Senator following among exclusive fans", key_header(level), {}, {}};
  for (const char* h : {"senator_followers", "only_democrat_count", "only_republican_count", "both_count",
                        "only_democrat", "only_republican", "both"})
    t.header.emplace_back(h);
  for (const auto& r : rows) {
    auto cells = key_cells(r.key, level);
    cells.emplace_back(r.senator_followers);
    cells.emplace_back(r.only_democrat_count);
    cells.emplace_back(r.only_republican_count);
    cells.emplace_back(r.both_count);
    for (double v : {r.only_democrat, r.only_republican, r.both})
      cells.push_back(r.defined() ? Cell(v) : Cell(Missing{}));
    if (!r.defined()) t.warnings.push_back({t.name, r.key, "no fan follows a senator; breakdown undefined"});
    t.rows.push_back(std::move(cells));
  }
  return t;
}

Table engagement_report(const std::vector<EngagementRow>& rows, Level level) {
  Table t{"engagement", "Political engagement of exclusive fans", key_header(level), {}, {}};
  for (const char* h : {"fans", "candidate_followers", "senator_followers", "eligible", "engagement_rate"})
    t.header.emplace_back(h);
  for (const auto& r : rows) {
    auto cells = key_cells(r.key, level);
    cells.emplace_back(r.fans);
    cells.emplace_back(r.candidate_followers);
    cells.emplace_back(r.senator_followers);
    cells.emplace_back(r.eligible);
    cells.push_back(r.fans ? Cell(r.engagement_rate) : Cell(Missing{}));
    if (!r.fans) t.warnings.push_back({t.name, r.key, "no exclusive fans; engagement rate undefined"});
    t.rows.push_back(std::move(cells));
  }
  return t;
}

Table cdr_report(const CdrTable& table) {
  Table t{"cdr_" + std::string(to_string(table.level)),
          "Congressional devotedness by " + std::string(to_string(table.level)), key_header(table.level), {}, {}};
  t.header.push_back("cohort_size");
  for (const auto& c : table.candidates) t.header.push_back("cds_" + c);
  for (const auto& c : table.candidates) t.header.push_back("cdr_" + c);
  for (const auto& r : table.rows) {
    auto cells = key_cells(r.key, table.level);
    cells.emplace_back(r.cohort_size);
    for (double v : r.cds) cells.emplace_back(v);
    for (std::size_t j = 0; j < table.candidates.size(); ++j)
      cells.push_back(r.defined() ? Cell(r.cdr[j]) : Cell(Missing{}));
    if (!r.defined())
      t.warnings.push_back({t.name, r.key,
                            r.cohort_size == 0 ? "empty cohort; CDR undefined" : "all CDS are zero; CDR undefined"});
    t.rows.push_back(std::move(cells));
  }
  return t;
}

ReportOutput write_report(const Snapshot& snapshot, const fs::path& out_dir, const ReportOptions& options) {
  PipelineOptions popts;
  popts.threads = options.threads;
  std::vector<std::string> candidates;
  for (const Entity* e : snapshot.registry().candidates()) candidates.push_back(e->handle);

  const std::vector<Table> tables{
      ratio_report(ratio_table(snapshot, Level::kState, popts), Level::kState, candidates),
      breakdown_report(senator_breakdown_table(snapshot, Level::kSport, popts), Level::kSport),
      engagement_report(engagement_table(snapshot, Level::kSport, popts), Level::kSport),
      cdr_report(run_cdr(snapshot, options.level, popts)),
  };

  fs::create_directories(out_dir);
  ReportOutput out;
  auto write = [&](const std::string& file, const std::string& content) {
    const fs::path p = out_dir / file;
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    f << content;
    if (!f) throw std::runtime_error("cannot write " + p.string());
    out.files.push_back(p);
  };
  const bool csv = options.format == ReportFormat::kCsv;
  for (const auto& t : tables) {
    write(t.name + (csv ? ".csv" : ".txt"), csv ? to_csv(t) : to_text(t));
    out.warnings.insert(out.warnings.end(), t.warnings.begin(), t.warnings.end());
  }
  if (csv) {
    Table w{"warnings", "Warnings", {"table", "league", "state", "team", "message"}, {}, {}};
    for (const auto& x : out.warnings)
      w.rows.push_back({x.table, std::string(to_string(x.key.league)), x.key.state, x.key.team, x.message});
    write("warnings.csv", to_csv(w));
  }
  return out;
}

}  // namespace affinity
