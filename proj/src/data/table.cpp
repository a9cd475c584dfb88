#include "ivrepro/data/table.hpp"

#include "ivrepro/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace ivrepro::data {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool is_missing_token(std::string_view s) {
    if (s.empty() || s == "." || s == "NA" || s == "NaN" || s == "nan") return true;
    return s.size() == 2 && s[0] == '.' && s[1] >= 'a' && s[1] <= 'z';
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::optional<double> parse_number(std::string_view s) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    if (s.empty()) return std::nullopt;
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

// "3: Some label" -> 3
std::optional<double> parse_coded_label(std::string_view s) {
    const auto colon = s.find(':');
    if (colon == std::string_view::npos || colon == 0) return std::nullopt;
    return parse_number(s.substr(0, colon));
}

std::vector<std::vector<std::string>> parse_records(std::string_view text, char delim) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    // Skip UTF-8 byte order mark.
    if (text.size() >= 3 && static_cast<unsigned char>(text[0]) == 0xEF &&
        static_cast<unsigned char>(text[1]) == 0xBB && static_cast<unsigned char>(text[2]) == 0xBF) {
        text.remove_prefix(3);
    }
    auto end_record = [&] {
        record.push_back(std::move(field));
        field.clear();
        field_started = false;
        if (!(record.size() == 1 && record[0].empty())) records.push_back(std::move(record));
        record.clear();
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        if (c == '"' && !field_started) {
            in_quotes = true;
            field_started = true;
        } else if (c == delim) {
            record.push_back(std::move(field));
            field.clear();
            field_started = false;
        } else if (c == '\n') {
            end_record();
        } else if (c == '\r') {
            // CRLF handled by the following '\n'
        } else {
            field.push_back(c);
            field_started = true;
        }
    }
    if (field_started || !field.empty() || !record.empty()) end_record();
    return records;
}

char delimiter_for(const std::filesystem::path& path, const ReadOptions& options) {
    if (options.delimiter != 0) return options.delimiter;
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return (ext == ".tab" || ext == ".tsv") ? '\t' : ',';
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Column make_column(std::string name, const std::vector<std::string_view>& cells) {
    Column col;
    col.name = std::move(name);
    const auto n = static_cast<Eigen::Index>(cells.size());
    col.values.resize(n);

    bool numeric = true;
    bool integral = true;
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto cell = trim(cells[static_cast<std::size_t>(i)]);
        if (is_missing_token(cell)) {
            col.values[i] = kNaN;
            continue;
        }
        const auto v = parse_number(cell);
        if (!v) {
            numeric = false;
            break;
        }
        col.values[i] = *v;
        if (std::floor(*v) != *v) integral = false;
    }
    if (numeric) {
        col.kind = integral ? ColumnKind::Integer : ColumnKind::Numeric;
        return col;
    }

    bool coded = true;
    for (const auto& raw : cells) {
        const auto cell = trim(raw);
        if (is_missing_token(cell)) continue;
        if (!parse_coded_label(cell)) {
            coded = false;
            break;
        }
    }
    if (coded) {
        integral = true;
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto cell = trim(cells[static_cast<std::size_t>(i)]);
            col.values[i] = is_missing_token(cell) ? kNaN : *parse_coded_label(cell);
            if (!std::isnan(col.values[i]) && std::floor(col.values[i]) != col.values[i]) integral = false;
        }
        col.kind = integral ? ColumnKind::Integer : ColumnKind::Numeric;
        return col;
    }

    col.kind = ColumnKind::String;
    std::map<std::string, int> codes;
    for (const auto& raw : cells) {
        const auto cell = trim(raw);
        if (cell.empty()) continue;
        codes.emplace(std::string(cell), 0);
    }
    int next = 0;
    for (auto& [label, code] : codes) {
        code = next++;
        col.labels.push_back(label);
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto cell = trim(cells[static_cast<std::size_t>(i)]);
        col.values[i] = cell.empty() ? kNaN : static_cast<double>(codes.at(std::string(cell)));
    }
    return col;
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

}  // namespace

std::string_view to_string(ColumnKind kind) noexcept {
    switch (kind) {
        case ColumnKind::Numeric: return "numeric";
        case ColumnKind::Integer: return "integer";
        case ColumnKind::String: return "string";
    }
    return "numeric";
}

Eigen::Index Column::missing_count() const {
    return static_cast<Eigen::Index>(values.array().isNaN().count());
}

std::string Column::label(Eigen::Index row) const {
    const double v = values[row];
    if (std::isnan(v)) return ".";
    if (kind == ColumnKind::String) return labels.at(static_cast<std::size_t>(v));
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

bool DataTable::has(std::string_view name) const { return index_.count(std::string(name)) != 0; }

const Column* DataTable::find(std::string_view name) const {
    const auto it = index_.find(std::string(name));
    return it == index_.end() ? nullptr : &columns_[it->second];
}

const Column& DataTable::column(std::string_view name) const {
    const auto* col = find(name);
    if (!col) fail(ErrorCode::UnresolvedTerm, "no column named '" + std::string(name) + "'");
    return *col;
}

std::vector<std::string> DataTable::column_names() const {
    std::vector<std::string> names;
    names.reserve(columns_.size());
    for (const auto& c : columns_) names.push_back(c.name);
    return names;
}

void DataTable::add_column(Column column) {
    if (columns_.empty()) {
        rows_ = column.size();
    } else if (column.size() != rows_) {
        throw std::invalid_argument("column '" + column.name + "' has " + std::to_string(column.size()) +
                                    " rows, table has " + std::to_string(rows_));
    }
    if (const auto it = index_.find(column.name); it != index_.end()) {
        columns_[it->second] = std::move(column);
        return;
    }
    index_.emplace(column.name, columns_.size());
    columns_.push_back(std::move(column));
}

DataTable DataTable::select_rows(const std::vector<Eigen::Index>& rows) const {
    DataTable out;
    for (const auto& col : columns_) {
        Column c;
        c.name = col.name;
        c.kind = col.kind;
        c.labels = col.labels;
        c.values.resize(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t i = 0; i < rows.size(); ++i) c.values[static_cast<Eigen::Index>(i)] = col.values[rows[i]];
        out.add_column(std::move(c));
    }
    if (columns_.empty()) out.rows_ = static_cast<Eigen::Index>(rows.size());
    return out;
}

std::vector<std::string> split_record(std::string_view line, char delimiter) {
    auto records = parse_records(line, delimiter);
    if (records.empty()) return {};
    return records.front();
}

DataTable parse_delimited(std::string_view text, char delimiter) {
    auto records = parse_records(text, delimiter);
    DataTable table;
    if (records.empty()) return table;
    const auto& header = records.front();
    const std::size_t ncol = header.size();
    std::vector<std::vector<std::string_view>> cells(ncol);
    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& rec = records[r];
        for (std::size_t c = 0; c < ncol; ++c) {
            cells[c].push_back(c < rec.size() ? std::string_view(rec[c]) : std::string_view{});
        }
    }
    for (std::size_t c = 0; c < ncol; ++c) {
        std::string name(trim(header[c]));
        if (name.empty()) name = "V" + std::to_string(c + 1);
        // Keep the first of any duplicated header names.
        if (table.has(name)) continue;
        table.add_column(make_column(std::move(name), cells[c]));
    }
    return table;
}

DataTable read_delimited(const std::filesystem::path& path, const ReadOptions& options) {
    return parse_delimited(slurp(path), delimiter_for(path, options));
}

std::vector<std::string> read_header(const std::filesystem::path& path, const ReadOptions& options) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
    std::string line;
    std::getline(in, line);
    auto fields = split_record(line, delimiter_for(path, options));
    for (auto& f : fields) f = std::string(trim(f));
    return fields;
}

void write_csv(const DataTable& table, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
    for (std::size_t c = 0; c < table.cols(); ++c) {
        if (c) out << ',';
        out << csv_escape(table.column(c).name);
    }
    out << '\n';
    for (Eigen::Index r = 0; r < table.rows(); ++r) {
        for (std::size_t c = 0; c < table.cols(); ++c) {
            if (c) out << ',';
            const auto& col = table.column(c);
            if (!col.is_missing(r)) out << csv_escape(col.label(r));
        }
        out << '\n';
    }
}

}  // namespace ivrepro::data
