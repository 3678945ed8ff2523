#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sarpu/common.hpp"
#include "sarpu/simulate.hpp"
#include "sarpu/types.hpp"

namespace sarpu {

enum class ColumnKind { Continuous, Categorical, Label };

struct ColumnSchema {
    std::string name;
    ColumnKind kind = ColumnKind::Continuous;
};

// Schema file: one "name:kind" line per column, kind in
// {continuous, categorical, label}. Blank lines and #-comments ignored.
inline std::vector<ColumnSchema> parse_schema(std::istream& in) {
    std::vector<ColumnSchema> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        const auto colon = line.find(':');
        if (colon == std::string::npos) throw DataError("schema line missing ':': " + line);
        ColumnSchema col;
        col.name = line.substr(first, colon - first);
        while (!col.name.empty() && (col.name.back() == ' ' || col.name.back() == '\t')) {
            col.name.pop_back();
        }
        std::string kind = line.substr(colon + 1);
        kind.erase(0, kind.find_first_not_of(" \t"));
        kind.erase(kind.find_last_not_of(" \t") + 1);
        if (kind == "continuous") col.kind = ColumnKind::Continuous;
        else if (kind == "categorical") col.kind = ColumnKind::Categorical;
        else if (kind == "label") col.kind = ColumnKind::Label;
        else throw DataError("schema: unknown column kind '" + kind + "'");
        out.push_back(std::move(col));
    }
    std::size_t labels = 0;
    for (const auto& c : out) labels += c.kind == ColumnKind::Label ? 1 : 0;
    if (labels != 1) throw DataError("schema: exactly one label column required");
    return out;
}

inline std::vector<ColumnSchema> load_schema(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open schema file: " + path);
    return parse_schema(in);
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    for (auto& c : cells) {
        c.erase(0, c.find_first_not_of(" \t\r"));
        c.erase(c.find_last_not_of(" \t\r") + 1);
    }
    return cells;
}

inline double parse_cell(const std::string& cell, std::size_t row, const std::string& col) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(cell, &pos);
        if (pos != cell.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw DataError("unparseable cell '" + cell + "' at row " + std::to_string(row) +
                        ", column " + col);
    }
}

}  // namespace detail

// Fitted preprocessing state: min/max per continuous column (train side),
// observed categorical values in first-seen order. Applying the transform to
// new data reuses this state; unknown categorical values map to all-zero
// one-hot blocks and are counted, not fatal.
struct Preprocessor {
    std::vector<ColumnSchema> schema;
    std::map<std::size_t, std::pair<double, double>> min_max;       // by input column
    std::map<std::size_t, std::vector<std::string>> categories;     // by input column
    std::vector<std::string> output_names;

    std::size_t output_cols() const { return output_names.size(); }
};

struct RawTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

inline RawTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open csv file: " + path);
    RawTable t;
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty csv file: " + path);
    t.header = detail::split_csv_line(line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto cells = detail::split_csv_line(line);
        if (cells.size() != t.header.size()) {
            throw DataError("csv row " + std::to_string(t.rows.size() + 1) + " has " +
                            std::to_string(cells.size()) + " cells, expected " +
                            std::to_string(t.header.size()));
        }
        t.rows.push_back(std::move(cells));
    }
    return t;
}

inline Preprocessor fit_preprocessor(const RawTable& table,
                                     const std::vector<ColumnSchema>& schema) {
    if (table.header.size() != schema.size()) {
        throw DataError("csv has " + std::to_string(table.header.size()) +
                        " columns, schema has " + std::to_string(schema.size()));
    }
    Preprocessor prep;
    prep.schema = schema;
    for (std::size_t j = 0; j < schema.size(); ++j) {
        switch (schema[j].kind) {
            case ColumnKind::Label:
                break;
            case ColumnKind::Continuous: {
                double lo = 0.0, hi = 0.0;
                bool seen = false;
                for (std::size_t i = 0; i < table.rows.size(); ++i) {
                    const double v = detail::parse_cell(table.rows[i][j], i, schema[j].name);
                    lo = seen ? std::min(lo, v) : v;
                    hi = seen ? std::max(hi, v) : v;
                    seen = true;
                }
                prep.min_max[j] = {lo, hi};
                prep.output_names.push_back(schema[j].name);
                break;
            }
            case ColumnKind::Categorical: {
                std::vector<std::string> values;
                for (const auto& row : table.rows) {
                    const std::string& v = row[j];
                    if (std::find(values.begin(), values.end(), v) == values.end()) {
                        values.push_back(v);
                    }
                }
                for (const auto& v : values) {
                    prep.output_names.push_back(schema[j].name + "=" + v);
                }
                prep.categories[j] = std::move(values);
                break;
            }
        }
    }
    return prep;
}

struct TransformResult {
    Matrix features;
    std::vector<int> labels;
    std::size_t unknown_categorical = 0;  // values absent from the fitted categories
};

// Continuous columns min-max scaled to [-1,1] with the fitted statistics
// (constant columns map to 0); categoricals one-hot in fitted order.
inline TransformResult apply_preprocessor(const Preprocessor& prep, const RawTable& table) {
    if (table.header.size() != prep.schema.size()) {
        throw DataError("transform: column count mismatch");
    }
    TransformResult out;
    out.features = Matrix(table.rows.size(), prep.output_cols());
    out.labels.resize(table.rows.size());
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        std::size_t o = 0;
        for (std::size_t j = 0; j < prep.schema.size(); ++j) {
            switch (prep.schema[j].kind) {
                case ColumnKind::Label: {
                    const double v = detail::parse_cell(table.rows[i][j], i, prep.schema[j].name);
                    if (v != 0.0 && v != 1.0) {
                        throw DataError("label not in {0,1} at row " + std::to_string(i));
                    }
                    out.labels[i] = static_cast<int>(v);
                    break;
                }
                case ColumnKind::Continuous: {
                    const double v = detail::parse_cell(table.rows[i][j], i, prep.schema[j].name);
                    const auto [lo, hi] = prep.min_max.at(j);
                    const double span = hi - lo;
                    out.features(i, o++) = span > 0.0 ? 2.0 * (v - lo) / span - 1.0 : 0.0;
                    break;
                }
                case ColumnKind::Categorical: {
                    const auto& values = prep.categories.at(j);
                    const std::string& v = table.rows[i][j];
                    const auto it = std::find(values.begin(), values.end(), v);
                    if (it == values.end()) ++out.unknown_categorical;
                    for (std::size_t kk = 0; kk < values.size(); ++kk) {
                        out.features(i, o++) =
                            (it != values.end() &&
                             kk == static_cast<std::size_t>(it - values.begin()))
                                ? 1.0
                                : 0.0;
                    }
                    break;
                }
            }
        }
    }
    return out;
}

// Inverse of the continuous scaling, for verifying round-trips.
inline double inverse_scale(const Preprocessor& prep, std::size_t input_col, double scaled) {
    const auto [lo, hi] = prep.min_max.at(input_col);
    const double span = hi - lo;
    return span > 0.0 ? lo + (scaled + 1.0) / 2.0 * span : lo;
}

struct CsvDataset {
    LabeledDataset data;
    Preprocessor prep;
    std::size_t unknown_categorical = 0;
};

inline CsvDataset load_csv(const std::string& csv_path, const std::string& schema_path) {
    const auto schema = load_schema(schema_path);
    const RawTable table = read_csv(csv_path);
    CsvDataset out;
    out.prep = fit_preprocessor(table, schema);
    TransformResult t = apply_preprocessor(out.prep, table);
    out.data.features = std::move(t.features);
    out.data.classes = std::move(t.labels);
    out.unknown_categorical = t.unknown_categorical;
    return out;
}

// ---- versioned PU / evaluation containers ------------------------------
//
// SARPU-DATA v1
// rows <n> cols <d>
// prop_indices <k> <i...>
// columns s [y] [e]
// <d feature values> <s> [<y>] [<e>]     (one line per row, %.17g doubles)

namespace detail {

inline void write_matrix_row(std::ostream& os, std::span<const double> row) {
    for (std::size_t j = 0; j < row.size(); ++j) {
        if (j) os << " ";
        os << format_double(row[j]);
    }
}

inline std::string expect_token(std::istream& in, const char* what) {
    std::string tok;
    if (!(in >> tok)) throw DataError(std::string("unexpected end of file, wanted ") + what);
    return tok;
}

inline void expect_keyword(std::istream& in, const std::string& kw) {
    const std::string tok = expect_token(in, kw.c_str());
    if (tok != kw) throw DataError("malformed file: expected '" + kw + "', got '" + tok + "'");
}

}  // namespace detail

inline std::string pu_to_string(const PUDataset& pu) {
    std::ostringstream os;
    os << "SARPU-DATA v1\n";
    os << "rows " << pu.size() << " cols " << pu.features.cols << "\n";
    os << "prop_indices " << pu.propensity_attr_indices.size();
    for (std::size_t j : pu.propensity_attr_indices) os << " " << j;
    os << "\n";
    os << "columns s";
    if (pu.hidden_classes) os << " y";
    if (pu.true_propensity) os << " e";
    os << "\n";
    for (std::size_t i = 0; i < pu.size(); ++i) {
        detail::write_matrix_row(os, pu.features.row(i));
        os << " " << pu.observed[i];
        if (pu.hidden_classes) os << " " << (*pu.hidden_classes)[i];
        if (pu.true_propensity) os << " " << format_double((*pu.true_propensity)[i]);
        os << "\n";
    }
    return os.str();
}

inline PUDataset pu_from_stream(std::istream& in) {
    std::string magic, version;
    in >> magic >> version;
    if (magic != "SARPU-DATA" || version != "v1") {
        throw DataError("not a SARPU-DATA v1 file (got '" + magic + " " + version + "')");
    }
    detail::expect_keyword(in, "rows");
    std::size_t n = 0, d = 0;
    in >> n;
    detail::expect_keyword(in, "cols");
    in >> d;
    detail::expect_keyword(in, "prop_indices");
    std::size_t k = 0;
    in >> k;
    PUDataset pu;
    pu.propensity_attr_indices.resize(k);
    for (auto& j : pu.propensity_attr_indices) in >> j;
    detail::expect_keyword(in, "columns");
    detail::expect_keyword(in, "s");
    bool has_y = false, has_e = false;
    {
        std::string rest;
        std::getline(in, rest);
        std::istringstream cols(rest);
        std::string tok;
        while (cols >> tok) {
            if (tok == "y") has_y = true;
            else if (tok == "e") has_e = true;
            else throw DataError("unknown column tag '" + tok + "'");
        }
    }
    if (!in) throw DataError("malformed SARPU-DATA header");

    pu.features = Matrix(n, d);
    pu.observed.resize(n);
    if (has_y) pu.hidden_classes.emplace(n, 0);
    if (has_e) pu.true_propensity.emplace(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) in >> pu.features(i, j);
        in >> pu.observed[i];
        if (has_y) in >> (*pu.hidden_classes)[i];
        if (has_e) in >> (*pu.true_propensity)[i];
    }
    if (!in) throw DataError("truncated SARPU-DATA body");
    const auto problems = validate_pu(pu);
    if (!problems.empty()) throw DataError("invalid PU data: " + problems.front());
    return pu;
}

inline void save_pu(const std::string& path, const PUDataset& pu) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << pu_to_string(pu);
}

inline PUDataset load_pu(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    return pu_from_stream(in);
}

// SARPU-EVAL v1: supervised test side with true propensities.
inline std::string eval_to_string(const EvalDataset& ev) {
    std::ostringstream os;
    os << "SARPU-EVAL v1\n";
    os << "rows " << ev.features.rows << " cols " << ev.features.cols << "\n";
    os << "prop_indices " << ev.propensity_attr_indices.size();
    for (std::size_t j : ev.propensity_attr_indices) os << " " << j;
    os << "\n";
    for (std::size_t i = 0; i < ev.features.rows; ++i) {
        detail::write_matrix_row(os, ev.features.row(i));
        os << " " << ev.classes[i] << " " << format_double(ev.true_propensity[i]) << "\n";
    }
    return os.str();
}

inline EvalDataset eval_from_stream(std::istream& in) {
    std::string magic, version;
    in >> magic >> version;
    if (magic != "SARPU-EVAL" || version != "v1") {
        throw DataError("not a SARPU-EVAL v1 file (got '" + magic + " " + version + "')");
    }
    detail::expect_keyword(in, "rows");
    std::size_t n = 0, d = 0;
    in >> n;
    detail::expect_keyword(in, "cols");
    in >> d;
    detail::expect_keyword(in, "prop_indices");
    std::size_t k = 0;
    in >> k;
    EvalDataset ev;
    ev.propensity_attr_indices.resize(k);
    for (auto& j : ev.propensity_attr_indices) in >> j;
    ev.features = Matrix(n, d);
    ev.classes.resize(n);
    ev.true_propensity.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) in >> ev.features(i, j);
        in >> ev.classes[i] >> ev.true_propensity[i];
    }
    if (!in) throw DataError("truncated SARPU-EVAL body");
    return ev;
}

inline void save_eval(const std::string& path, const EvalDataset& ev) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << eval_to_string(ev);
}

inline EvalDataset load_eval(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    return eval_from_stream(in);
}

}  // namespace sarpu
