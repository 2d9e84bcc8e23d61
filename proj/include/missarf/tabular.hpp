#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "missarf/errors.hpp"

namespace missarf {

enum class ColumnKind { numeric, categorical };

struct ColumnSchema {
    std::string name;
    ColumnKind kind = ColumnKind::numeric;
    // Category labels in declaration order; empty for numeric columns.
    std::vector<std::string> categories;

    bool operator==(const ColumnSchema&) const = default;
};

// One table cell: a numeric value, a category index into the column schema,
// or missing.
class Cell {
  public:
    static Cell missing() { return Cell(); }
    static Cell number(double v) {
        Cell c;
        c.tag_ = Tag::number;
        c.num_ = v;
        return c;
    }
    static Cell category(std::int32_t idx) {
        Cell c;
        c.tag_ = Tag::category;
        c.cat_ = idx;
        return c;
    }

    bool is_missing() const { return tag_ == Tag::missing; }
    bool is_number() const { return tag_ == Tag::number; }
    bool is_category() const { return tag_ == Tag::category; }
    double number() const { return num_; }
    std::int32_t category() const { return cat_; }

    bool operator==(const Cell&) const = default;

  private:
    enum class Tag : std::uint8_t { missing, number, category };
    Tag tag_ = Tag::missing;
    double num_ = 0.0;
    std::int32_t cat_ = -1;
};

// Column-major table of mixed numeric/categorical cells with explicit
// missingness. Numeric columns store NaN for missing, categorical columns
// store -1. Treat as immutable once filled: concurrent reads are safe,
// mutation requires exclusive access.
class Dataset {
  public:
    Dataset(std::vector<ColumnSchema> schema, std::size_t n_rows);

    std::size_t n_rows() const { return n_rows_; }
    std::size_t n_cols() const { return schema_.size(); }
    const std::vector<ColumnSchema>& schema() const { return schema_; }
    const ColumnSchema& column_schema(std::size_t j) const { return schema_[j]; }

    bool is_numeric(std::size_t j) const { return schema_[j].kind == ColumnKind::numeric; }

    bool is_missing(std::size_t i, std::size_t j) const {
        return is_numeric(j) ? std::isnan(numeric_[j][i]) : categorical_[j][i] < 0;
    }
    double number(std::size_t i, std::size_t j) const { return numeric_[j][i]; }
    std::int32_t category(std::size_t i, std::size_t j) const { return categorical_[j][i]; }

    Cell cell(std::size_t i, std::size_t j) const;
    void set(std::size_t i, std::size_t j, const Cell& c);
    void set_number(std::size_t i, std::size_t j, double v);
    void set_category(std::size_t i, std::size_t j, std::int32_t idx);
    void set_missing(std::size_t i, std::size_t j);

    // Raw column storage (missing encoded as NaN / -1).
    const std::vector<double>& numeric_column(std::size_t j) const { return numeric_[j]; }
    const std::vector<std::int32_t>& categorical_column(std::size_t j) const {
        return categorical_[j];
    }

    std::size_t missing_count() const;
    bool has_missing() const { return missing_count() > 0; }

    bool same_schema(const Dataset& other) const { return schema_ == other.schema_; }
    bool equals(const Dataset& other) const;

    // Row-wise concatenation; schemas must match.
    static Dataset stack(const Dataset& top, const Dataset& bottom);

  private:
    std::vector<ColumnSchema> schema_;
    std::size_t n_rows_ = 0;
    // One entry per column; the vector of the other kind stays empty.
    std::vector<std::vector<double>> numeric_;
    std::vector<std::vector<std::int32_t>> categorical_;
};

// Per-column standardization parameters (numeric columns only).
struct StandardizationParams {
    struct Moments {
        double mean = 0.0;
        double sd = 1.0;
    };
    // Indexed by column; entries for categorical columns are unused.
    std::vector<Moments> columns;
};

// Sample mean and SD (n-1 denominator) of each numeric column's observed
// values. Degenerate columns (constant, or fewer than two observed values)
// get sd = 1 so standardization reduces to a shift.
StandardizationParams compute_standardization(const Dataset& data);

// (x - mean) / sd on numeric cells; categorical and missing cells unchanged.
Dataset standardize(const Dataset& data, const StandardizationParams& params);

// CSV with mandatory header row, RFC 4180 quoting, "NA" or empty string for
// missing on read, "NA" on write. Column typing is hint-driven: columns not
// covered by a hint are numeric. A hint with an empty category list collects
// labels from the file in order of first appearance; a non-empty list is a
// fixed schema and unknown labels are an error.
Dataset read_csv(const std::string& path,
                 const std::vector<ColumnSchema>& schema_hint = {});
void write_csv(const Dataset& data, const std::string& path);

std::string format_double(double v);  // shortest round-trip representation
std::string csv_quote(const std::string& field);

}  // namespace missarf
