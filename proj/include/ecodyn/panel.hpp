#pragma once

// Long-form indicator panels: ingestion, per-year standardization, composite
// indices, E/I joins and per-entity time averages.
//
// Missing observations are absent rows. Nothing here imputes.

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "ecodyn/error.hpp"
#include "ecodyn/io.hpp"
#include "ecodyn/stats.hpp"

namespace ecodyn {

struct PanelRow {
    std::string entity;
    int year = 0;
    double value = 0.0;

    friend bool operator==(const PanelRow&, const PanelRow&) = default;
};

/// Observations keyed by (entity, year), kept sorted by entity then year.
class PanelTable {
public:
    PanelTable() = default;

    /// Validates uniqueness of (entity, year) and finiteness of values.
    explicit PanelTable(std::vector<PanelRow> rows) : rows_(std::move(rows)) {
        std::sort(rows_.begin(), rows_.end(), [](const PanelRow& a, const PanelRow& b) {
            return std::tie(a.entity, a.year) < std::tie(b.entity, b.year);
        });
        for (std::size_t k = 0; k < rows_.size(); ++k) {
            if (!std::isfinite(rows_[k].value))
                throw InputError("non-finite value at (" + rows_[k].entity + ", " + std::to_string(rows_[k].year) + ")");
            if (k > 0 && rows_[k].entity == rows_[k - 1].entity && rows_[k].year == rows_[k - 1].year)
                throw DuplicateKeyError("duplicate key (" + rows_[k].entity + ", " + std::to_string(rows_[k].year) + ")");
        }
    }

    [[nodiscard]] const std::vector<PanelRow>& rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t size() const noexcept { return rows_.size(); }
    [[nodiscard]] bool empty() const noexcept { return rows_.empty(); }

    [[nodiscard]] std::vector<int> years() const {
        std::vector<int> ys;
        ys.reserve(rows_.size());
        for (const auto& r : rows_) ys.push_back(r.year);
        std::sort(ys.begin(), ys.end());
        ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
        return ys;
    }

    [[nodiscard]] std::vector<std::string> entities() const {
        std::vector<std::string> es;
        for (const auto& r : rows_)
            if (es.empty() || es.back() != r.entity) es.push_back(r.entity);
        return es;
    }

    [[nodiscard]] std::optional<double> value(const std::string& entity, int year) const {
        const auto it = std::lower_bound(rows_.begin(), rows_.end(), std::tie(entity, year),
                                         [](const PanelRow& r, const std::tuple<const std::string&, int&>& key) {
                                             return std::tie(r.entity, r.year) < key;
                                         });
        if (it != rows_.end() && it->entity == entity && it->year == year) return it->value;
        return std::nullopt;
    }

    /// entity -> value for one year.
    [[nodiscard]] std::map<std::string, double> cross_section(int year) const {
        std::map<std::string, double> out;
        for (const auto& r : rows_)
            if (r.year == year) out.emplace(r.entity, r.value);
        return out;
    }

    friend bool operator==(const PanelTable&, const PanelTable&) = default;

private:
    std::vector<PanelRow> rows_;
};

struct JoinedRow {
    std::string entity;
    int year = 0;
    double e = 0.0;
    double i = 0.0;
};

using JoinedPanel = std::vector<JoinedRow>;

struct EntityAverage {
    std::string entity;
    double e_mean = 0.0;
    double i_mean = 0.0;
    int n_years = 0;
};

using EntityAverages = std::vector<EntityAverage>;

struct PanelSchema {
    std::string entity_col = "entity";
    std::string year_col = "year";
    std::string value_col = "value";
    char delimiter = ',';
    std::optional<int> min_year;
    std::optional<int> max_year;
};

// --- ingestion --------------------------------------------------------------

/// Parses a delimited table with a header row. Blank value cells are absent
/// observations; any other unparsable cell is a ParseError carrying its line.
[[nodiscard]] inline PanelTable load_panel(std::istream& in, const PanelSchema& schema = {}) {
    io::LineReader reader(in);
    std::string line;
    if (!reader.next(line) || io::trim(line).empty()) throw InputError("empty table: no header row");
    const auto header = io::split_record(line, schema.delimiter, 1);
    const std::size_t ce = io::column_index(header, schema.entity_col);
    const std::size_t cy = io::column_index(header, schema.year_col);
    const std::size_t cv = io::column_index(header, schema.value_col);
    const std::size_t need = std::max({ce, cy, cv}) + 1;

    std::vector<PanelRow> rows;
    std::map<std::pair<std::string, int>, std::size_t> seen;
    while (reader.next(line)) {
        if (io::trim(line).empty()) continue;
        const std::size_t ln = reader.line_no();
        const auto cells = io::split_record(line, schema.delimiter, ln);
        if (cells.size() < need)
            throw ParseError(ln, "expected at least " + std::to_string(need) + " fields, got " + std::to_string(cells.size()));
        std::string entity(io::trim(cells[ce]));
        if (entity.empty()) throw ParseError(ln, "empty entity code");
        const auto year = io::parse_int(cells[cy]);
        if (!year) throw ParseError(ln, "year '" + cells[cy] + "' is not an integer");
        if ((schema.min_year && *year < *schema.min_year) || (schema.max_year && *year > *schema.max_year))
            throw ParseError(ln, "year " + std::to_string(*year) + " outside the declared range");
        if (io::trim(cells[cv]).empty()) continue;
        const auto value = io::parse_double(cells[cv]);
        if (!value) throw ParseError(ln, "value '" + cells[cv] + "' is not a finite number");
        const auto [it, fresh] = seen.emplace(std::make_pair(entity, *year), ln);
        if (!fresh)
            throw DuplicateKeyError("duplicate key (" + entity + ", " + std::to_string(*year) + ") at lines " +
                                    std::to_string(it->second) + " and " + std::to_string(ln));
        rows.push_back({std::move(entity), *year, *value});
    }
    if (rows.empty()) throw InputError("empty table: no observations");
    return PanelTable(std::move(rows));
}

[[nodiscard]] inline PanelTable load_panel_file(const std::filesystem::path& path, const PanelSchema& schema = {}) {
    auto in = io::open_input(path);
    return load_panel(in, schema);
}

/// Serializes in (entity, year) order, which the table already maintains.
inline void write_panel(std::ostream& out, const PanelTable& table, char delim = ',',
                        const std::string& value_col = "value") {
    out << "entity" << delim << "year" << delim << value_col << '\n';
    for (const auto& r : table.rows()) out << r.entity << delim << r.year << delim << io::format_double(r.value) << '\n';
}

// --- transforms ---------------------------------------------------------------

/// Per-year z-scores: mean 0 and sample (n - 1) variance 1 within every year.
[[nodiscard]] inline PanelTable standardize_by_year(const PanelTable& p) {
    std::map<int, std::vector<double>> by_year;
    for (const auto& r : p.rows()) by_year[r.year].push_back(r.value);

    std::map<int, std::pair<double, double>> moments;  // year -> (mean, sd)
    for (const auto& [year, vals] : by_year) {
        if (vals.size() < 3)
            throw InputError("year " + std::to_string(year) + " has " + std::to_string(vals.size()) +
                             " entities; standardization needs at least 3");
        const double m = stats::mean(vals);
        const double sd = std::sqrt(stats::sample_variance(vals));
        if (!(sd > 0.0)) throw InputError("year " + std::to_string(year) + " has zero variance");
        moments[year] = {m, sd};
    }

    std::vector<PanelRow> out;
    out.reserve(p.size());
    for (const auto& r : p.rows()) {
        const auto [m, sd] = moments.at(r.year);
        out.push_back({r.entity, r.year, (r.value - m) / sd});
    }
    return PanelTable(std::move(out));
}

/// Weighted mean across indicator panels, emitted only where every panel has the observation.
[[nodiscard]] inline PanelTable composite_index(std::span<const PanelTable> panels,
                                                std::optional<std::vector<double>> weights = std::nullopt) {
    if (panels.empty()) throw InputError("composite_index needs at least one panel");
    std::vector<double> w = weights ? *weights : std::vector<double>(panels.size(), 1.0 / static_cast<double>(panels.size()));
    if (w.size() != panels.size()) throw InputError("one weight per panel required");
    double total = 0.0;
    for (double x : w) {
        if (!std::isfinite(x) || x < 0.0) throw InputError("weights must be finite and non-negative");
        total += x;
    }
    if (std::abs(total - 1.0) > 1e-9) throw InputError("weights must sum to 1");

    std::vector<PanelRow> out;
    for (const auto& r : panels.front().rows()) {
        double acc = w[0] * r.value;
        bool complete = true;
        for (std::size_t k = 1; k < panels.size() && complete; ++k) {
            const auto v = panels[k].value(r.entity, r.year);
            if (v) acc += w[k] * *v;
            else complete = false;
        }
        if (complete) out.push_back({r.entity, r.year, acc});
    }
    if (out.empty()) throw InputError("composite_index: no (entity, year) is present in every panel");
    return PanelTable(std::move(out));
}

/// Inner join on (entity, year).
[[nodiscard]] inline JoinedPanel join_panels(const PanelTable& e_panel, const PanelTable& i_panel) {
    JoinedPanel out;
    const auto& a = e_panel.rows();
    const auto& b = i_panel.rows();
    std::size_t x = 0, y = 0;
    while (x < a.size() && y < b.size()) {
        const auto ka = std::tie(a[x].entity, a[x].year);
        const auto kb = std::tie(b[y].entity, b[y].year);
        if (ka < kb) ++x;
        else if (kb < ka) ++y;
        else {
            out.push_back({a[x].entity, a[x].year, a[x].value, b[y].value});
            ++x;
            ++y;
        }
    }
    if (out.empty()) throw InputError("join_panels: the panels share no (entity, year) keys");
    return out;
}

[[nodiscard]] inline EntityAverages time_average(const JoinedPanel& j) {
    std::map<std::string, std::tuple<double, double, int>> acc;
    for (const auto& r : j) {
        auto& [se, si, n] = acc[r.entity];
        se += r.e;
        si += r.i;
        ++n;
    }
    EntityAverages out;
    out.reserve(acc.size());
    for (const auto& [entity, sums] : acc) {
        const auto& [se, si, n] = sums;
        out.push_back({entity, se / n, si / n, n});
    }
    return out;
}

inline void write_joined(std::ostream& out, const JoinedPanel& j, char delim = ',') {
    out << "entity" << delim << "year" << delim << "e" << delim << "i" << '\n';
    for (const auto& r : j)
        out << r.entity << delim << r.year << delim << io::format_double(r.e) << delim << io::format_double(r.i) << '\n';
}

inline void write_averages(std::ostream& out, const EntityAverages& avgs, char delim = ',') {
    out << "entity" << delim << "e_mean" << delim << "i_mean" << delim << "n_years" << '\n';
    for (const auto& a : avgs)
        out << a.entity << delim << io::format_double(a.e_mean) << delim << io::format_double(a.i_mean) << delim
            << a.n_years << '\n';
}

[[nodiscard]] inline EntityAverages load_averages(std::istream& in, char delim = ',') {
    io::LineReader reader(in);
    std::string line;
    if (!reader.next(line)) throw InputError("empty averages table");
    const auto header = io::split_record(line, delim, 1);
    const std::size_t ce = io::column_index(header, "entity");
    const std::size_t cem = io::column_index(header, "e_mean");
    const std::size_t cim = io::column_index(header, "i_mean");
    std::optional<std::size_t> cn;
    for (std::size_t k = 0; k < header.size(); ++k)
        if (io::trim(header[k]) == "n_years") cn = k;

    EntityAverages out;
    while (reader.next(line)) {
        if (io::trim(line).empty()) continue;
        const auto cells = io::split_record(line, delim, reader.line_no());
        if (cells.size() < header.size()) throw ParseError(reader.line_no(), "short row");
        const auto e = io::parse_double(cells[cem]);
        const auto i = io::parse_double(cells[cim]);
        if (!e || !i) throw ParseError(reader.line_no(), "non-numeric mean");
        int n = 1;
        if (cn) {
            const auto parsed = io::parse_int(cells[*cn]);
            if (!parsed || *parsed < 1) throw ParseError(reader.line_no(), "n_years must be a positive integer");
            n = *parsed;
        }
        out.push_back({std::string(io::trim(cells[ce])), *e, *i, n});
    }
    if (out.empty()) throw InputError("empty averages table");
    return out;
}

/// Per-entity covariates in wide form: one row per entity, one column per covariate.
/// A blank cell means that entity lacks the covariate.
struct CovariateTable {
    std::vector<std::string> names;
    std::map<std::string, std::vector<std::optional<double>>> rows;

    [[nodiscard]] std::size_t column(const std::string& name) const {
        for (std::size_t k = 0; k < names.size(); ++k)
            if (names[k] == name) return k;
        throw InputError("unknown covariate '" + name + "'");
    }
};

[[nodiscard]] inline CovariateTable load_covariates(std::istream& in, const std::string& entity_col = "entity",
                                                    char delim = ',') {
    io::LineReader reader(in);
    std::string line;
    if (!reader.next(line)) throw InputError("empty covariate table");
    const auto header = io::split_record(line, delim, 1);
    const std::size_t ce = io::column_index(header, entity_col);
    CovariateTable t;
    std::vector<std::size_t> cols;
    for (std::size_t k = 0; k < header.size(); ++k)
        if (k != ce) {
            t.names.emplace_back(io::trim(header[k]));
            cols.push_back(k);
        }
    if (t.names.empty()) throw InputError("covariate table has no covariate columns");
    while (reader.next(line)) {
        if (io::trim(line).empty()) continue;
        const auto cells = io::split_record(line, delim, reader.line_no());
        if (cells.size() != header.size()) throw ParseError(reader.line_no(), "field count differs from header");
        std::vector<std::optional<double>> vals;
        for (std::size_t c : cols) {
            if (io::trim(cells[c]).empty()) {
                vals.emplace_back();
                continue;
            }
            const auto v = io::parse_double(cells[c]);
            if (!v) throw ParseError(reader.line_no(), "value '" + cells[c] + "' is not a finite number");
            vals.push_back(v);
        }
        std::string entity(io::trim(cells[ce]));
        if (!t.rows.emplace(entity, std::move(vals)).second)
            throw DuplicateKeyError("duplicate entity '" + entity + "' in covariate table");
    }
    if (t.rows.empty()) throw InputError("empty covariate table");
    return t;
}

}  // namespace ecodyn
