#ifndef AFFINITY_REPORT_HPP_
#define AFFINITY_REPORT_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "affinity/pipeline.hpp"

namespace affinity {

enum class ReportFormat { kCsv, kText };
std::optional<ReportFormat> parse_report_format(std::string_view s);

/// Undefined value; rendered as "NA".
struct Missing {
  friend bool operator==(Missing, Missing) { return true; }
};
using Cell = std::variant<std::string, std::uint64_t, double, Missing>;

struct ReportWarning {
  std::string table;
  GroupKey key;
  std::string message;
};

struct Table {
  std::string name;  // file stem
  std::string title;
  std::vector<std::string> header;
  std::vector<std::vector<Cell>> rows;
  std::vector<ReportWarning> warnings;
};

/// Full precision (shortest round-trip), comma separated, LF line endings.
std::string to_csv(const Table& table);
/// Aligned columns, reals at three decimals, then a Warnings section.
std::string to_text(const Table& table);
std::string format_text_real(double v);

// Key columns follow `level`: league, then state, then team.
Table ratio_report(const std::vector<RatioRow>& rows, Level level, const std::vector<std::string>& candidates);
Table breakdown_report(const std::vector<SenatorBreakdown>& rows, Level level);
Table engagement_report(const std::vector<EngagementRow>& rows, Level level);
Table cdr_report(const CdrTable& table);

struct ReportOptions {
  Level level = Level::kState;
  ReportFormat format = ReportFormat::kCsv;
  unsigned threads = 1;
};

struct ReportOutput {
  std::vector<std::filesystem::path> files;
  std::vector<ReportWarning> warnings;
};

/// Writes ratios (state level), senator_breakdown and engagement (sport
/// level) and cdr_<level>, plus warnings.csv in CSV mode.
ReportOutput write_report(const Snapshot& snapshot, const std::filesystem::path& out_dir,
                          const ReportOptions& options = {});

}  // namespace affinity

#endif  // AFFINITY_REPORT_HPP_
