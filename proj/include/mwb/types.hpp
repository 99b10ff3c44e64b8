#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mwb/calendar.hpp"

namespace mwb {

// Error hierarchy. The CLI maps these onto exit codes.

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A malformed input row. `row` is 1-based and counts the CSV header as row 1
/// when the record came from a file; 0 means "not from a file".
struct SchemaError : std::runtime_error {
    SchemaError(const std::string& what, std::size_t row = 0, std::string column = {})
        : std::runtime_error(what), row(row), column(std::move(column)) {}
    std::size_t row;
    std::string column;
};

struct InvalidRecord : SchemaError {
    using SchemaError::SchemaError;
};

struct EstimationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Broken internal invariant (e.g. a wage bin straddling a group boundary).
struct ConsistencyError : std::logic_error {
    using std::logic_error::logic_error;
};

enum class Occupation : std::uint8_t {
    Restaurant,
    LightWork,
    Retail,
    CustomerService,
    Professional,
    Logistics,
    Entertainment,
    OfficeWork,
    EventStaff,
};

inline constexpr std::size_t kOccupationCount = 9;
inline constexpr std::array<Occupation, kOccupationCount> kAllOccupations = {
    Occupation::Restaurant,   Occupation::LightWork,     Occupation::Retail,
    Occupation::CustomerService, Occupation::Professional, Occupation::Logistics,
    Occupation::Entertainment, Occupation::OfficeWork,   Occupation::EventStaff,
};

std::string_view to_string(Occupation occupation);
std::optional<Occupation> parse_occupation(std::string_view name);

/// Four shift slots keyed by start time: [6,12), [12,18), [18,24), [0,6).
enum class TimeSlot : std::uint8_t { Morning, Afternoon, Evening, LateNight };

inline constexpr std::array<TimeSlot, 4> kAllTimeSlots = {
    TimeSlot::Morning, TimeSlot::Afternoon, TimeSlot::Evening, TimeSlot::LateNight};

std::string_view to_string(TimeSlot slot);
TimeSlot time_slot_of(int start_minute);
/// First minute of the slot, minutes since midnight.
int slot_start_minute(TimeSlot slot);

struct ContractRecord {
    std::string record_id;
    int prefecture_id = 0;
    CivilDate date;
    int hourly_wage = 0;
    double posted_hours = 0.0;
    int transport_reimbursement = 0;
    Occupation occupation = Occupation::Restaurant;
    int start_minute = 0;
    bool matched = false;

    friend bool operator==(const ContractRecord&, const ContractRecord&) = default;
};

/// Throws InvalidRecord when a field violates the record invariants.
void validate(const ContractRecord& record, std::size_t row = 0);

struct MinWageEntry {
    int prefecture_id = 0;
    int old_mw = 0;
    int new_mw = 0;
    YearMonth event_month;
};

class MinWageSchedule {
  public:
    MinWageSchedule() = default;
    explicit MinWageSchedule(std::vector<MinWageEntry> entries);

    void add(const MinWageEntry& entry);
    const MinWageEntry* find(int prefecture_id) const;
    const MinWageEntry& at(int prefecture_id) const;
    bool empty() const { return entries_.empty(); }
    std::size_t size() const { return entries_.size(); }
    /// Entries ordered by prefecture id.
    std::vector<MinWageEntry> entries() const;
    /// Common event month. Throws ConfigError for staggered schedules.
    YearMonth common_event_month() const;

  private:
    std::map<int, MinWageEntry> entries_;
};

/// Twelve study months by default, event at t = 7, reference period l = -1.
struct StudyWindow {
    YearMonth start{2023, 4};
    int length = 12;
    int event_index = 7;

    int relative(int t) const { return t - event_index; }
    /// 1-based index of `month` inside the window, nullopt when outside.
    std::optional<int> index_of(YearMonth month) const;
    YearMonth month_at(int t) const;
    CivilDate first_day() const { return {start.year, start.month, 1}; }
    void validate() const;
};

/// Throws ConfigError unless the schedule's common event month is the
/// window's event month.
void check_event_alignment(const MinWageSchedule& schedule, const StudyWindow& window);

/// Exposure group of a wage bin: e in {-1..max_e}, the unaffected upper tail
/// (infinity), or excluded from estimation.
class ExposureGroup {
  public:
    static constexpr int kInfinityCode = std::numeric_limits<int>::max();
    static constexpr int kExcludedCode = std::numeric_limits<int>::min();

    constexpr ExposureGroup() = default;
    static constexpr ExposureGroup finite(int e) { return ExposureGroup(e); }
    static constexpr ExposureGroup infinity() { return ExposureGroup(kInfinityCode); }
    static constexpr ExposureGroup excluded() { return ExposureGroup(kExcludedCode); }

    constexpr bool is_finite() const {
        return code_ != kInfinityCode && code_ != kExcludedCode;
    }
    constexpr bool is_infinity() const { return code_ == kInfinityCode; }
    constexpr bool is_excluded() const { return code_ == kExcludedCode; }
    constexpr int code() const { return code_; }
    /// Value of e; only meaningful for finite groups.
    constexpr int value() const { return code_; }

    std::string to_string() const;
    static std::optional<ExposureGroup> parse(std::string_view text);

    friend constexpr auto operator<=>(ExposureGroup, ExposureGroup) = default;

  private:
    constexpr explicit ExposureGroup(int code) : code_(code) {}
    int code_ = kExcludedCode;
};

struct BinKey {
    int prefecture_id = 0;
    int bin_lower = 0;
    ExposureGroup group;

    friend auto operator<=>(const BinKey& a, const BinKey& b) {
        if (auto c = a.prefecture_id <=> b.prefecture_id; c != 0) return c;
        return a.bin_lower <=> b.bin_lower;
    }
    friend bool operator==(const BinKey& a, const BinKey& b) {
        return a.prefecture_id == b.prefecture_id && a.bin_lower == b.bin_lower &&
               a.group == b.group;
    }
};

struct PanelCell {
    BinKey key;
    int month = 0;
    std::int64_t employment = 0;
    std::int64_t vacancies = 0;
    std::int64_t reimbursement_sum = 0;
    std::int64_t reimbursement_positive = 0;
    /// Sum of hourly wages over matched records; feeds the wage-bill baseline.
    std::int64_t wage_sum = 0;

    friend bool operator==(const PanelCell&, const PanelCell&) = default;
};

struct PrefectureMonthTotals {
    int prefecture_id = 0;
    int month = 0;
    std::int64_t postings = 0;
    std::int64_t matches = 0;
    double earnings_sum = 0.0;

    friend bool operator==(const PrefectureMonthTotals&, const PrefectureMonthTotals&) = default;
};

struct MacroSeries {
    YearMonth month;
    std::int64_t users = 0;
    std::int64_t vacancies = 0;
    std::int64_t hires = 0;
    std::optional<double> tightness;
    std::optional<double> job_finding;
    std::optional<double> worker_finding;
};

}  // namespace mwb
