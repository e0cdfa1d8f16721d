#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "smuq/data.hpp"
#include "smuq/error.hpp"
#include "smuq/text.hpp"

namespace smuq {
namespace {

struct Row {
    std::size_t line = 0;
    long long time = 0;
    std::string label;
    double target = 0.0;
    bool observed = false;
    std::vector<double> forcings;
    std::vector<double> statics;
    std::optional<long long> regime;
};

bool is_missing(std::string_view field) {
    field = trim(field);
    return field.empty() || field == "nan" || field == "NaN" || field == "NA";
}

// Day count for YYYY-MM-DD, or nullopt if the field is not shaped like a date.
std::optional<long long> parse_iso_date(std::string_view text, std::size_t line) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
    const std::string where = "line " + std::to_string(line) + " time";
    const auto y = parse_int(text.substr(0, 4), where);
    const auto m = parse_int(text.substr(5, 2), where);
    const auto d = parse_int(text.substr(8, 2), where);
    const std::chrono::year_month_day ymd{std::chrono::year(static_cast<int>(y)),
                                          std::chrono::month(static_cast<unsigned>(m)),
                                          std::chrono::day(static_cast<unsigned>(d))};
    if (!ymd.ok()) throw Error(ErrorKind::parse, where + ": invalid date '" + std::string(text) + "'");
    return std::chrono::sys_days(ymd).time_since_epoch().count();
}

}  // namespace

Dataset parse_csv(std::string_view text, const CsvSchema& schema) {
    std::vector<std::string_view> lines;
    for (auto line : split_fields(text, '\n'))
        if (!trim(line).empty() || !lines.empty()) lines.push_back(line);
    while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
    if (lines.empty()) throw Error(ErrorKind::schema, "empty CSV");

    const auto header = split_fields(lines[0], ',');
    int col_id = -1, col_time = -1, col_target = -1, col_regime = -1;
    std::vector<int> forcing_cols, static_cols;
    std::vector<std::string> forcing_names, static_names;
    for (int c = 0; c < static_cast<int>(header.size()); ++c) {
        const std::string name(trim(header[c]));
        if (name == schema.cell_id) col_id = c;
        else if (name == schema.time) col_time = c;
        else if (name == schema.target) col_target = c;
        else if (name == schema.regime) col_regime = c;
        else if (name.starts_with(schema.static_prefix)) {
            static_cols.push_back(c);
            static_names.push_back(name.substr(schema.static_prefix.size()));
        } else {
            forcing_cols.push_back(c);
            forcing_names.push_back(name);
        }
    }
    if (col_id < 0 || col_time < 0 || col_target < 0)
        throw Error(ErrorKind::schema, "CSV header must contain '" + schema.cell_id + "', '" +
                                           schema.time + "' and '" + schema.target + "'");
    if (forcing_cols.empty()) throw Error(ErrorKind::schema, "CSV has no forcing columns");

    std::vector<std::string> order;
    std::map<std::string, std::vector<Row>> by_cell;
    std::optional<bool> dated;
    for (std::size_t l = 1; l < lines.size(); ++l) {
        const std::size_t line_no = l + 1;
        const auto fields = split_fields(lines[l], ',');
        if (fields.size() != header.size())
            throw Error(ErrorKind::parse, "line " + std::to_string(line_no) + ": expected " +
                                              std::to_string(header.size()) + " fields, got " +
                                              std::to_string(fields.size()));
        const std::string where = "line " + std::to_string(line_no);
        Row row;
        row.line = line_no;
        row.label = std::string(trim(fields[col_time]));
        auto date = parse_iso_date(row.label, line_no);
        if (dated && *dated != date.has_value())
            throw Error(ErrorKind::schema, where + ": mixed date and integer time values");
        dated = date.has_value();
        row.time = date ? *date : parse_int(row.label, where + " time");
        row.observed = !is_missing(fields[col_target]);
        row.target = row.observed ? parse_double(fields[col_target], where + " target") : std::nan("");
        if (row.observed && !std::isfinite(row.target))
            throw Error(ErrorKind::parse, where + ": non-finite target");
        for (int c : forcing_cols) {
            const double v = parse_double(fields[c], where + " " + std::string(trim(header[c])));
            if (!std::isfinite(v)) throw Error(ErrorKind::parse, where + ": non-finite forcing");
            row.forcings.push_back(v);
        }
        for (int c : static_cols) row.statics.push_back(parse_double(fields[c], where + " " + std::string(trim(header[c]))));
        if (col_regime >= 0) row.regime = parse_int(fields[col_regime], where + " regime");

        std::string id(trim(fields[col_id]));
        if (id.empty()) throw Error(ErrorKind::parse, where + ": empty cell id");
        auto [it, inserted] = by_cell.try_emplace(id);
        if (inserted) order.push_back(id);
        it->second.push_back(std::move(row));
    }
    if (order.empty()) throw Error(ErrorKind::schema, "CSV has no data rows");

    std::vector<long long> grid;
    std::vector<std::string> labels;
    std::vector<CellRecord> cells;
    for (const auto& id : order) {
        auto& rows = by_cell[id];
        std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.time < b.time; });
        for (std::size_t r = 1; r < rows.size(); ++r)
            if (rows[r].time == rows[r - 1].time)
                throw Error(ErrorKind::schema, "cell '" + id + "' repeats time '" + rows[r].label + "'");
        if (grid.empty()) {
            for (const auto& r : rows) {
                grid.push_back(r.time);
                labels.push_back(r.label);
            }
            for (std::size_t r = 2; r < grid.size(); ++r)
                if (grid[r] - grid[r - 1] != grid[1] - grid[0])
                    throw Error(ErrorKind::schema, "irregular time grid in cell '" + id + "'");
        } else {
            bool same = rows.size() == grid.size();
            for (std::size_t r = 0; same && r < rows.size(); ++r) same = rows[r].time == grid[r];
            if (!same) throw Error(ErrorKind::schema, "ragged time grid: cell '" + id + "' differs from '" + order.front() + "'");
        }

        const Index T = static_cast<Index>(rows.size());
        CellRecord cell;
        cell.cell_id = id;
        cell.forcings.resize(T, static_cast<Index>(forcing_cols.size()));
        cell.target.resize(T);
        cell.observed.resize(T);
        cell.static_attrs = Eigen::Map<const VectorXd>(rows[0].statics.data(), static_cast<Index>(rows[0].statics.size()));
        cell.regime_id = rows[0].regime ? static_cast<int>(*rows[0].regime) : -1;
        for (Index t = 0; t < T; ++t) {
            const auto& r = rows[t];
            for (std::size_t f = 0; f < r.forcings.size(); ++f) cell.forcings(t, static_cast<Index>(f)) = r.forcings[f];
            cell.target(t) = r.target;
            cell.observed(t) = r.observed;
            if (r.statics != rows[0].statics)
                throw Error(ErrorKind::schema, "line " + std::to_string(r.line) + ": static attributes of '" + id + "' are not constant");
            if (r.regime != rows[0].regime)
                throw Error(ErrorKind::schema, "line " + std::to_string(r.line) + ": regime of '" + id + "' is not constant");
        }
        cells.push_back(std::move(cell));
    }
    return Dataset(std::move(cells), std::move(forcing_names), std::move(static_names), std::move(labels),
                   *dated ? "day" : "step");
}

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot open '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_csv(buf.str(), schema);
}

std::string to_csv(const Dataset& data, const CsvSchema& schema) {
    const bool with_regime = std::any_of(data.cells().begin(), data.cells().end(),
                                         [](const CellRecord& c) { return c.regime_id != -1; });
    std::string out = schema.cell_id + "," + schema.time + "," + schema.target;
    for (const auto& f : data.forcing_names()) out += "," + f;
    for (const auto& s : data.static_names()) out += "," + schema.static_prefix + s;
    if (with_regime) out += "," + schema.regime;
    out += '\n';
    for (const auto& c : data.cells()) {
        std::string tail;
        for (Index a = 0; a < c.static_attrs.size(); ++a) tail += "," + format_double(c.static_attrs(a));
        if (with_regime) tail += "," + std::to_string(c.regime_id);
        for (Index t = 0; t < data.n_steps(); ++t) {
            out += c.cell_id;
            out += ',';
            out += data.time_labels()[static_cast<std::size_t>(t)];
            out += ',';
            if (c.observed(t)) out += format_double(c.target(t));
            for (Index f = 0; f < data.n_forcings(); ++f) {
                out += ',';
                out += format_double(c.forcings(t, f));
            }
            out += tail;
            out += '\n';
        }
    }
    return out;
}

void write_csv(const Dataset& data, const std::filesystem::path& path, const CsvSchema& schema) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::io, "cannot write '" + path.string() + "'");
    out << to_csv(data, schema);
    if (!out) throw Error(ErrorKind::io, "failed writing '" + path.string() + "'");
}

}  // namespace smuq
