#include "missarf/tabular.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace missarf {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

Dataset::Dataset(std::vector<ColumnSchema> schema, std::size_t n_rows)
    : schema_(std::move(schema)), n_rows_(n_rows) {
    if (n_rows_ < 1) throw SchemaError("Dataset requires at least one row");
    if (schema_.empty()) throw SchemaError("Dataset requires at least one column");
    numeric_.resize(schema_.size());
    categorical_.resize(schema_.size());
    for (std::size_t j = 0; j < schema_.size(); ++j) {
        const auto& col = schema_[j];
        if (col.kind == ColumnKind::numeric) {
            if (!col.categories.empty())
                throw SchemaError("numeric column '" + col.name + "' declares categories");
            numeric_[j].assign(n_rows_, kNaN);
        } else {
            if (col.categories.empty())
                throw SchemaError("categorical column '" + col.name + "' has no categories");
            for (const auto& label : col.categories) {
                if (label.empty())
                    throw SchemaError("categorical column '" + col.name + "' has an empty label");
                if (label == "NA")
                    throw SchemaError("category label 'NA' collides with the missing sentinel");
                if (std::count(col.categories.begin(), col.categories.end(), label) != 1)
                    throw SchemaError("categorical column '" + col.name +
                                      "' has duplicate label '" + label + "'");
            }
            categorical_[j].assign(n_rows_, -1);
        }
    }
}

Cell Dataset::cell(std::size_t i, std::size_t j) const {
    if (is_numeric(j)) {
        const double v = numeric_[j][i];
        return std::isnan(v) ? Cell::missing() : Cell::number(v);
    }
    const std::int32_t c = categorical_[j][i];
    return c < 0 ? Cell::missing() : Cell::category(c);
}

void Dataset::set(std::size_t i, std::size_t j, const Cell& c) {
    if (c.is_missing()) {
        set_missing(i, j);
    } else if (c.is_number()) {
        set_number(i, j, c.number());
    } else {
        set_category(i, j, c.category());
    }
}

void Dataset::set_number(std::size_t i, std::size_t j, double v) {
    if (!is_numeric(j))
        throw SchemaError("numeric value written to categorical column '" + schema_[j].name + "'");
    if (std::isnan(v)) throw SchemaError("NaN is not a representable numeric value; use missing");
    numeric_[j][i] = v;
}

void Dataset::set_category(std::size_t i, std::size_t j, std::int32_t idx) {
    if (is_numeric(j))
        throw SchemaError("category written to numeric column '" + schema_[j].name + "'");
    if (idx < 0 || static_cast<std::size_t>(idx) >= schema_[j].categories.size())
        throw SchemaError("category index out of range for column '" + schema_[j].name + "'");
    categorical_[j][i] = idx;
}

void Dataset::set_missing(std::size_t i, std::size_t j) {
    if (is_numeric(j)) {
        numeric_[j][i] = kNaN;
    } else {
        categorical_[j][i] = -1;
    }
}

std::size_t Dataset::missing_count() const {
    std::size_t count = 0;
    for (std::size_t j = 0; j < n_cols(); ++j) {
        for (std::size_t i = 0; i < n_rows_; ++i) {
            if (is_missing(i, j)) ++count;
        }
    }
    return count;
}

bool Dataset::equals(const Dataset& other) const {
    if (!same_schema(other) || n_rows_ != other.n_rows_) return false;
    for (std::size_t j = 0; j < n_cols(); ++j) {
        for (std::size_t i = 0; i < n_rows_; ++i) {
            if (cell(i, j) != other.cell(i, j)) return false;
        }
    }
    return true;
}

Dataset Dataset::stack(const Dataset& top, const Dataset& bottom) {
    if (!top.same_schema(bottom)) throw SchemaError("stack: schemas differ");
    Dataset out(top.schema(), top.n_rows() + bottom.n_rows());
    for (std::size_t j = 0; j < top.n_cols(); ++j) {
        for (std::size_t i = 0; i < top.n_rows(); ++i) out.set(i, j, top.cell(i, j));
        for (std::size_t i = 0; i < bottom.n_rows(); ++i)
            out.set(top.n_rows() + i, j, bottom.cell(i, j));
    }
    return out;
}

StandardizationParams compute_standardization(const Dataset& data) {
    StandardizationParams params;
    params.columns.resize(data.n_cols());
    for (std::size_t j = 0; j < data.n_cols(); ++j) {
        if (!data.is_numeric(j)) continue;
        double sum = 0.0;
        std::size_t count = 0;
        for (double v : data.numeric_column(j)) {
            if (!std::isnan(v)) {
                sum += v;
                ++count;
            }
        }
        auto& m = params.columns[j];
        if (count == 0) continue;
        m.mean = sum / static_cast<double>(count);
        if (count < 2) continue;
        double ss = 0.0;
        for (double v : data.numeric_column(j)) {
            if (!std::isnan(v)) ss += (v - m.mean) * (v - m.mean);
        }
        const double sd = std::sqrt(ss / static_cast<double>(count - 1));
        m.sd = sd > 0.0 ? sd : 1.0;
    }
    return params;
}

Dataset standardize(const Dataset& data, const StandardizationParams& params) {
    if (params.columns.size() != data.n_cols())
        throw SchemaError("standardize: parameter count does not match column count");
    Dataset out = data;
    for (std::size_t j = 0; j < data.n_cols(); ++j) {
        if (!data.is_numeric(j)) continue;
        const auto& m = params.columns[j];
        if (!(m.sd > 0.0)) throw SchemaError("standardize: non-positive sd");
        for (std::size_t i = 0; i < data.n_rows(); ++i) {
            const double v = data.number(i, j);
            if (!std::isnan(v)) out.set_number(i, j, (v - m.mean) / m.sd);
        }
    }
    return out;
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string csv_quote(const std::string& field) {
    if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += "\"";
    return out;
}

namespace {

// Splits one CSV record (RFC 4180). Returns false at end of input. Handles
// quoted fields with embedded commas, quotes, and newlines.
bool read_record(std::istream& in, std::vector<std::string>& fields, std::size_t& line_no) {
    fields.clear();
    int c = in.get();
    if (c == EOF) return false;
    std::string field;
    bool in_quotes = false;
    bool record_done = false;
    while (!record_done) {
        if (c == EOF) {
            if (in_quotes) throw ParseError("unterminated quoted field at end of file");
            break;
        }
        const char ch = static_cast<char>(c);
        if (in_quotes) {
            if (ch == '"') {
                const int peek = in.peek();
                if (peek == '"') {
                    field.push_back('"');
                    in.get();
                } else {
                    in_quotes = false;
                }
            } else {
                if (ch == '\n') ++line_no;
                field.push_back(ch);
            }
        } else {
            switch (ch) {
                case '"':
                    in_quotes = true;
                    break;
                case ',':
                    fields.push_back(std::move(field));
                    field.clear();
                    break;
                case '\r':
                    if (in.peek() == '\n') in.get();
                    ++line_no;
                    record_done = true;
                    break;
                case '\n':
                    ++line_no;
                    record_done = true;
                    break;
                default:
                    field.push_back(ch);
            }
        }
        if (!record_done) c = in.get();
    }
    fields.push_back(std::move(field));
    return true;
}

bool is_na_token(const std::string& s) { return s.empty() || s == "NA"; }

double parse_number(const std::string& s, std::size_t line_no, const std::string& col) {
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
    while (end > begin && (end[-1] == ' ' || end[-1] == '\t')) --end;
    double v = 0.0;
    const auto res = std::from_chars(begin, end, v);
    if (res.ec != std::errc() || res.ptr != end || std::isnan(v))
        throw ParseError("line " + std::to_string(line_no) + ": cannot parse '" + s +
                         "' as a number in column '" + col + "'");
    return v;
}

}  // namespace

Dataset read_csv(const std::string& path, const std::vector<ColumnSchema>& schema_hint) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "' for reading");

    std::size_t line_no = 1;
    std::vector<std::string> header;
    if (!read_record(in, header, line_no)) throw ParseError("'" + path + "': empty file");

    std::unordered_map<std::string, const ColumnSchema*> hints;
    for (const auto& h : schema_hint) hints[h.name] = &h;

    const std::size_t p = header.size();
    std::vector<ColumnSchema> schema(p);
    // Fixed category schemas reject unknown labels; open ones collect them.
    std::vector<bool> open_categories(p, false);
    for (std::size_t j = 0; j < p; ++j) {
        schema[j].name = header[j];
        if (auto it = hints.find(header[j]); it != hints.end()) {
            schema[j].kind = it->second->kind;
            schema[j].categories = it->second->categories;
            open_categories[j] =
                it->second->kind == ColumnKind::categorical && it->second->categories.empty();
        }
    }

    std::vector<std::vector<std::string>> records;
    std::vector<std::string> fields;
    std::vector<std::size_t> record_lines;
    for (;;) {
        const std::size_t record_line = line_no;
        if (!read_record(in, fields, line_no)) break;
        if (fields.size() == 1 && fields[0].empty()) continue;  // trailing blank line
        if (fields.size() != p)
            throw ParseError("line " + std::to_string(record_line) + ": expected " +
                             std::to_string(p) + " fields, got " + std::to_string(fields.size()));
        record_lines.push_back(record_line);
        records.push_back(fields);
    }
    if (records.empty()) throw DataError("'" + path + "': no rows");

    // Collect labels for open categorical columns in order of first appearance.
    std::vector<std::unordered_map<std::string, std::int32_t>> label_index(p);
    for (std::size_t j = 0; j < p; ++j) {
        if (schema[j].kind != ColumnKind::categorical) continue;
        for (std::size_t k = 0; k < schema[j].categories.size(); ++k)
            label_index[j][schema[j].categories[k]] = static_cast<std::int32_t>(k);
        if (!open_categories[j]) continue;
        for (const auto& rec : records) {
            const auto& tok = rec[j];
            if (is_na_token(tok)) continue;
            if (label_index[j].emplace(tok, static_cast<std::int32_t>(schema[j].categories.size()))
                    .second)
                schema[j].categories.push_back(tok);
        }
        if (schema[j].categories.empty())
            throw SchemaError("categorical column '" + schema[j].name +
                              "' has no observed labels");
    }

    Dataset out(schema, records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        for (std::size_t j = 0; j < p; ++j) {
            const auto& tok = records[i][j];
            if (is_na_token(tok)) continue;  // cells start missing
            if (schema[j].kind == ColumnKind::numeric) {
                out.set_number(i, j, parse_number(tok, record_lines[i], schema[j].name));
            } else {
                const auto it = label_index[j].find(tok);
                if (it == label_index[j].end())
                    throw SchemaError("line " + std::to_string(record_lines[i]) +
                                      ": unknown category '" + tok + "' in column '" +
                                      schema[j].name + "'");
                out.set_category(i, j, it->second);
            }
        }
    }
    return out;
}

void write_csv(const Dataset& data, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    for (std::size_t j = 0; j < data.n_cols(); ++j) {
        if (j) out << ',';
        out << csv_quote(data.column_schema(j).name);
    }
    out << '\n';
    for (std::size_t i = 0; i < data.n_rows(); ++i) {
        for (std::size_t j = 0; j < data.n_cols(); ++j) {
            if (j) out << ',';
            const Cell c = data.cell(i, j);
            if (c.is_missing()) {
                out << "NA";
            } else if (c.is_number()) {
                out << format_double(c.number());
            } else {
                out << csv_quote(data.column_schema(j).categories[c.category()]);
            }
        }
        out << '\n';
    }
    if (!out) throw DataError("write failed for '" + path + "'");
}

}  // namespace missarf
