#include "mwb/csv_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <sstream>
#include <system_error>

namespace mwb {

std::string format_double(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    if (ec != std::errc{}) return "nan";
    return std::string(buf, ptr);
}

std::string format_optional(const std::optional<double>& value) {
    return value ? format_double(*value) : std::string{};
}

CsvTable::CsvTable(std::vector<std::string> header) : n_columns_(header.size()) {
    row(header);
}

CsvTable& CsvTable::row(std::initializer_list<std::string> fields) {
    return row(std::vector<std::string>(fields));
}

CsvTable& CsvTable::row(const std::vector<std::string>& fields) {
    if (fields.size() != n_columns_)
        throw std::logic_error("CSV row has " + std::to_string(fields.size()) +
                               " fields, expected " + std::to_string(n_columns_));
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) text_ += ',';
        text_ += fields[i];
    }
    text_ += '\n';
    return *this;
}

void CsvTable::write(const std::filesystem::path& path) const { write_atomic(path, text_); }

void write_atomic(const std::filesystem::path& path, std::string_view content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw std::runtime_error("cannot rename " + tmp.string() + ": " + ec.message());
}

std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return out;
}

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return in;
}

/// Column positions resolved from a header line; any column order accepted.
class HeaderMap {
  public:
    HeaderMap(std::string_view header, std::initializer_list<const char*> required) {
        const auto fields = split_csv_line(header);
        for (const char* name : required) {
            std::size_t pos = fields.size();
            for (std::size_t i = 0; i < fields.size(); ++i)
                if (fields[i] == name) pos = i;
            if (pos == fields.size())
                throw SchemaError(std::string("missing column '") + name + "'", 1, name);
            index_.emplace_back(name, pos);
        }
        width_ = fields.size();
    }

    std::string_view get(const std::vector<std::string_view>& fields, const char* name) const {
        for (const auto& [n, pos] : index_)
            if (std::string_view(n) == name) return fields[pos];
        throw std::logic_error("column not registered");
    }
    std::size_t width() const { return width_; }

  private:
    std::vector<std::pair<const char*, std::size_t>> index_;
    std::size_t width_ = 0;
};

template <class T>
T parse_number(std::string_view text, std::size_t row, const char* column) {
    T value{};
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty())
        throw SchemaError("cannot parse '" + std::string(text) + "' in column " + column +
                              " at row " + std::to_string(row),
                          row, column);
    return value;
}

void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
}

// Reads the header; returns false for an empty stream.
bool read_header(std::istream& in, std::string& header) {
    if (!std::getline(in, header)) return false;
    strip_cr(header);
    return true;
}

std::vector<std::string_view> fields_of(const std::string& line, const HeaderMap& header,
                                        std::size_t row) {
    auto fields = split_csv_line(line);
    if (fields.size() != header.width())
        throw SchemaError("row " + std::to_string(row) + " has " +
                              std::to_string(fields.size()) + " fields, expected " +
                              std::to_string(header.width()),
                          row);
    return fields;
}

}  // namespace

std::vector<ContractRecord> read_contracts(std::istream& in) {
    std::string line;
    if (!read_header(in, line)) throw SchemaError("contracts CSV has no header", 1);
    const HeaderMap h(line,
                      {"record_id", "prefecture_id", "date", "hourly_wage", "posted_hours",
                       "transport_reimbursement", "occupation", "start_time", "matched"});
    std::vector<ContractRecord> out;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        strip_cr(line);
        if (line.empty()) continue;
        const auto f = fields_of(line, h, row);
        ContractRecord r;
        r.record_id = std::string(h.get(f, "record_id"));
        r.prefecture_id = parse_number<int>(h.get(f, "prefecture_id"), row, "prefecture_id");
        const auto date = parse_date(h.get(f, "date"));
        if (!date) throw SchemaError("bad date at row " + std::to_string(row), row, "date");
        r.date = *date;
        r.hourly_wage = parse_number<int>(h.get(f, "hourly_wage"), row, "hourly_wage");
        r.posted_hours = parse_number<double>(h.get(f, "posted_hours"), row, "posted_hours");
        r.transport_reimbursement = parse_number<int>(h.get(f, "transport_reimbursement"), row,
                                                      "transport_reimbursement");
        const auto occ = parse_occupation(h.get(f, "occupation"));
        if (!occ)
            throw SchemaError("unknown occupation '" + std::string(h.get(f, "occupation")) +
                                  "' at row " + std::to_string(row),
                              row, "occupation");
        r.occupation = *occ;
        const auto clock = parse_clock(h.get(f, "start_time"));
        if (!clock)
            throw SchemaError("bad start_time at row " + std::to_string(row), row, "start_time");
        r.start_minute = *clock;
        const auto matched = h.get(f, "matched");
        if (matched != "0" && matched != "1")
            throw SchemaError("matched must be 0 or 1 at row " + std::to_string(row), row,
                              "matched");
        r.matched = matched == "1";
        validate(r, row);
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<ContractRecord> read_contracts(const std::filesystem::path& path) {
    auto in = open_input(path);
    return read_contracts(in);
}

std::string contracts_csv(std::span<const ContractRecord> records) {
    std::string out =
        "record_id,prefecture_id,date,hourly_wage,posted_hours,transport_reimbursement,"
        "occupation,start_time,matched\n";
    out.reserve(out.size() + records.size() * 72);
    for (const auto& r : records) {
        out += r.record_id;
        out += ',';
        out += std::to_string(r.prefecture_id);
        out += ',';
        out += format_date(r.date);
        out += ',';
        out += std::to_string(r.hourly_wage);
        out += ',';
        out += format_double(r.posted_hours);
        out += ',';
        out += std::to_string(r.transport_reimbursement);
        out += ',';
        out += to_string(r.occupation);
        out += ',';
        out += format_clock(r.start_minute);
        out += ',';
        out += r.matched ? '1' : '0';
        out += '\n';
    }
    return out;
}

MinWageSchedule read_schedule(std::istream& in) {
    std::string line;
    if (!read_header(in, line)) throw SchemaError("schedule CSV has no header", 1);
    const HeaderMap h(line, {"prefecture_id", "old_mw", "new_mw", "event_month"});
    MinWageSchedule schedule;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        strip_cr(line);
        if (line.empty()) continue;
        const auto f = fields_of(line, h, row);
        MinWageEntry e;
        e.prefecture_id = parse_number<int>(h.get(f, "prefecture_id"), row, "prefecture_id");
        e.old_mw = parse_number<int>(h.get(f, "old_mw"), row, "old_mw");
        e.new_mw = parse_number<int>(h.get(f, "new_mw"), row, "new_mw");
        const auto ym = parse_year_month(h.get(f, "event_month"));
        if (!ym)
            throw SchemaError("bad event_month at row " + std::to_string(row), row,
                              "event_month");
        e.event_month = *ym;
        if (e.old_mw <= 0 || e.new_mw < e.old_mw)
            throw SchemaError("new_mw >= old_mw > 0 violated at row " + std::to_string(row),
                              row, "new_mw");
        if (schedule.find(e.prefecture_id))
            throw SchemaError("duplicate prefecture at row " + std::to_string(row), row,
                              "prefecture_id");
        schedule.add(e);
    }
    return schedule;
}

MinWageSchedule read_schedule(const std::filesystem::path& path) {
    auto in = open_input(path);
    return read_schedule(in);
}

std::string schedule_csv(const MinWageSchedule& schedule) {
    CsvTable t({"prefecture_id", "old_mw", "new_mw", "event_month"});
    for (const auto& e : schedule.entries())
        t.row({std::to_string(e.prefecture_id), std::to_string(e.old_mw),
               std::to_string(e.new_mw), format_year_month(e.event_month)});
    return t.text();
}

std::map<YearMonth, std::int64_t> read_users(std::istream& in) {
    std::string line;
    if (!read_header(in, line)) throw SchemaError("users CSV has no header", 1);
    const HeaderMap h(line, {"month", "users"});
    std::map<YearMonth, std::int64_t> out;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        strip_cr(line);
        if (line.empty()) continue;
        const auto f = fields_of(line, h, row);
        const auto ym = parse_year_month(h.get(f, "month"));
        if (!ym) throw SchemaError("bad month at row " + std::to_string(row), row, "month");
        const auto users = parse_number<std::int64_t>(h.get(f, "users"), row, "users");
        if (users < 0)
            throw SchemaError("negative users at row " + std::to_string(row), row, "users");
        if (!out.emplace(*ym, users).second)
            throw SchemaError("duplicate month at row " + std::to_string(row), row, "month");
    }
    return out;
}

std::map<YearMonth, std::int64_t> read_users(const std::filesystem::path& path) {
    auto in = open_input(path);
    return read_users(in);
}

std::string users_csv(const std::map<YearMonth, std::int64_t>& users) {
    CsvTable t({"month", "users"});
    for (const auto& [ym, u] : users) t.row({format_year_month(ym), std::to_string(u)});
    return t.text();
}

}  // namespace mwb
