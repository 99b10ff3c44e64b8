#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mwb/types.hpp"

namespace mwb {

/// Shortest round-trip decimal form; identical bytes on every run.
std::string format_double(double value);
std::string format_optional(const std::optional<double>& value);

/// Accumulates a tidy CSV table in memory (UTF-8, LF endings, fixed column
/// order) and writes it atomically via temp file + rename.
class CsvTable {
  public:
    explicit CsvTable(std::vector<std::string> header);

    CsvTable& row(std::initializer_list<std::string> fields);
    CsvTable& row(const std::vector<std::string>& fields);
    std::size_t columns() const { return n_columns_; }
    const std::string& text() const { return text_; }
    void write(const std::filesystem::path& path) const;

  private:
    std::size_t n_columns_;
    std::string text_;
};

/// Writes `content` to `path` through a sibling temp file and rename.
void write_atomic(const std::filesystem::path& path, std::string_view content);

/// Splits a CSV line on commas (no quoting; the schemas never need it).
std::vector<std::string_view> split_csv_line(std::string_view line);

// Contracts: record_id, prefecture_id, date, hourly_wage, posted_hours,
// transport_reimbursement, occupation, start_time, matched
std::vector<ContractRecord> read_contracts(std::istream& in);
std::vector<ContractRecord> read_contracts(const std::filesystem::path& path);
std::string contracts_csv(std::span<const ContractRecord> records);

// Schedule: prefecture_id, old_mw, new_mw, event_month
MinWageSchedule read_schedule(std::istream& in);
MinWageSchedule read_schedule(const std::filesystem::path& path);
std::string schedule_csv(const MinWageSchedule& schedule);

// Users: month, users
std::map<YearMonth, std::int64_t> read_users(std::istream& in);
std::map<YearMonth, std::int64_t> read_users(const std::filesystem::path& path);
std::string users_csv(const std::map<YearMonth, std::int64_t>& users);

}  // namespace mwb
