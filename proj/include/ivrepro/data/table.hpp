#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ivrepro::data {

enum class ColumnKind { Numeric, Integer, String };

std::string_view to_string(ColumnKind kind) noexcept;

/// One column of a tabular dataset. Missing values are NaN. String columns
/// hold category codes in `values`, indexing into the sorted `labels`.
struct Column {
    std::string name;
    ColumnKind kind = ColumnKind::Numeric;
    Eigen::VectorXd values;
    std::vector<std::string> labels;

    [[nodiscard]] Eigen::Index size() const noexcept { return values.size(); }
    [[nodiscard]] bool is_missing(Eigen::Index row) const { return std::isnan(values[row]); }
    [[nodiscard]] Eigen::Index missing_count() const;
    /// Display label of a row: the category text for string columns, the
    /// shortest round-trip decimal otherwise.
    [[nodiscard]] std::string label(Eigen::Index row) const;
};

/// Column-major table with unique column names and a fixed row count.
class DataTable {
public:
    DataTable() = default;

    [[nodiscard]] Eigen::Index rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return columns_.size(); }
    [[nodiscard]] bool has(std::string_view name) const;
    [[nodiscard]] const Column& column(std::string_view name) const;
    [[nodiscard]] const Column& column(std::size_t index) const { return columns_.at(index); }
    [[nodiscard]] const Column* find(std::string_view name) const;
    [[nodiscard]] std::vector<std::string> column_names() const;

    /// Appends a column; replaces an existing column of the same name.
    void add_column(Column column);
    /// New table holding the given rows, in the given order.
    [[nodiscard]] DataTable select_rows(const std::vector<Eigen::Index>& rows) const;

private:
    Eigen::Index rows_ = 0;
    std::vector<Column> columns_;
    std::unordered_map<std::string, std::size_t> index_;
};

struct ReadOptions {
    /// 0 selects by extension: tab for .tab/.tsv, comma otherwise.
    char delimiter = 0;
};

/// Parses delimited text with a header row. Empty cells, ".", "NA" and Stata
/// extended missing codes (".a" … ".z") read as missing. String columns whose
/// every value looks like "<code>: <label>" are decoded to the numeric code.
DataTable parse_delimited(std::string_view text, char delimiter);
DataTable read_delimited(const std::filesystem::path& path, const ReadOptions& options = {});
/// Reads only the header row.
std::vector<std::string> read_header(const std::filesystem::path& path, const ReadOptions& options = {});

void write_csv(const DataTable& table, const std::filesystem::path& path);

/// Splits one delimited record honouring double-quote escaping.
std::vector<std::string> split_record(std::string_view line, char delimiter);

}  // namespace ivrepro::data
