#include "mwb/types.hpp"

#include <charconv>

namespace mwb {

namespace {

constexpr std::array<std::string_view, kOccupationCount> kOccupationNames = {
    "Restaurant",   "Light Work", "Retail",      "Customer Service", "Professional",
    "Logistics",    "Entertainment", "Office Work", "Event Staff",
};

}  // namespace

std::string_view to_string(Occupation occupation) {
    return kOccupationNames[static_cast<std::size_t>(occupation)];
}

std::optional<Occupation> parse_occupation(std::string_view name) {
    for (std::size_t i = 0; i < kOccupationNames.size(); ++i)
        if (kOccupationNames[i] == name) return static_cast<Occupation>(i);
    return std::nullopt;
}

std::string_view to_string(TimeSlot slot) {
    switch (slot) {
        case TimeSlot::Morning: return "morning";
        case TimeSlot::Afternoon: return "afternoon";
        case TimeSlot::Evening: return "evening";
        case TimeSlot::LateNight: return "late_night";
    }
    return "?";
}

TimeSlot time_slot_of(int start_minute) {
    const int m = ((start_minute % 1440) + 1440) % 1440;
    if (m < 6 * 60) return TimeSlot::LateNight;
    if (m < 12 * 60) return TimeSlot::Morning;
    if (m < 18 * 60) return TimeSlot::Afternoon;
    return TimeSlot::Evening;
}

int slot_start_minute(TimeSlot slot) {
    switch (slot) {
        case TimeSlot::Morning: return 6 * 60;
        case TimeSlot::Afternoon: return 12 * 60;
        case TimeSlot::Evening: return 18 * 60;
        case TimeSlot::LateNight: return 0;
    }
    return 0;
}

void validate(const ContractRecord& r, std::size_t row) {
    if (r.hourly_wage < 1)
        throw InvalidRecord("hourly_wage must be >= 1 (record " + r.record_id + ")", row,
                            "hourly_wage");
    if (!(r.posted_hours > 0.0))
        throw InvalidRecord("posted_hours must be > 0 (record " + r.record_id + ")", row,
                            "posted_hours");
    if (r.transport_reimbursement < 0)
        throw InvalidRecord("transport_reimbursement must be >= 0 (record " + r.record_id + ")",
                            row, "transport_reimbursement");
    if (r.start_minute < 0 || r.start_minute >= 1440)
        throw InvalidRecord("start_time out of range (record " + r.record_id + ")", row,
                            "start_time");
}

MinWageSchedule::MinWageSchedule(std::vector<MinWageEntry> entries) {
    for (const auto& e : entries) add(e);
}

void MinWageSchedule::add(const MinWageEntry& entry) {
    if (entry.old_mw <= 0 || entry.new_mw < entry.old_mw)
        throw ConfigError("schedule for prefecture " + std::to_string(entry.prefecture_id) +
                          " violates new_mw >= old_mw > 0");
    if (!entries_.emplace(entry.prefecture_id, entry).second)
        throw ConfigError("duplicate schedule entry for prefecture " +
                          std::to_string(entry.prefecture_id));
}

const MinWageEntry* MinWageSchedule::find(int prefecture_id) const {
    auto it = entries_.find(prefecture_id);
    return it == entries_.end() ? nullptr : &it->second;
}

const MinWageEntry& MinWageSchedule::at(int prefecture_id) const {
    if (const auto* e = find(prefecture_id)) return *e;
    throw ConfigError("no schedule entry for prefecture " + std::to_string(prefecture_id));
}

std::vector<MinWageEntry> MinWageSchedule::entries() const {
    std::vector<MinWageEntry> out;
    out.reserve(entries_.size());
    for (const auto& [id, e] : entries_) out.push_back(e);
    return out;
}

YearMonth MinWageSchedule::common_event_month() const {
    if (entries_.empty()) throw ConfigError("empty minimum-wage schedule");
    const YearMonth first = entries_.begin()->second.event_month;
    for (const auto& [id, e] : entries_)
        if (e.event_month != first)
            throw ConfigError("staggered event months are not supported (prefecture " +
                              std::to_string(id) + ")");
    return first;
}

std::optional<int> StudyWindow::index_of(YearMonth month) const {
    const int t = months_between(start, month) + 1;
    if (t < 1 || t > length) return std::nullopt;
    return t;
}

YearMonth StudyWindow::month_at(int t) const { return add_months(start, t - 1); }

void StudyWindow::validate() const {
    if (length < 3) throw ConfigError("study window must span at least 3 months");
    if (event_index < 2 || event_index > length)
        throw ConfigError("event month must lie strictly inside the study window");
}

std::string ExposureGroup::to_string() const {
    if (is_infinity()) return "inf";
    if (is_excluded()) return "excluded";
    return std::to_string(code_);
}

std::optional<ExposureGroup> ExposureGroup::parse(std::string_view text) {
    if (text == "inf") return infinity();
    if (text == "excluded") return excluded();
    int v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
    return finite(v);
}

void check_event_alignment(const MinWageSchedule& schedule, const StudyWindow& window) {
    const YearMonth event = schedule.common_event_month();
    if (event != window.month_at(window.event_index))
        throw ConfigError("schedule event month " + format_year_month(event) +
                          " is not study month " + std::to_string(window.event_index) + " (" +
                          format_year_month(window.month_at(window.event_index)) + ")");
}

}  // namespace mwb
