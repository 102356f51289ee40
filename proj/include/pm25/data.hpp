#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "pm25/csv.hpp"
#include "pm25/date.hpp"
#include "pm25/error.hpp"

namespace pm25 {

/// One day of observations. Meteorology is kept in the raw integer-scaled
/// units of the source tables (0.1 degC, 0.1 mm, 0.1 m/s); empty cells are nullopt.
struct DailyRecord {
    Date date;
    std::optional<double> pm;    ///< ug/m3
    std::optional<double> t;     ///< mean temperature
    std::optional<double> tmax;  ///< max temperature
    std::optional<double> tmin;  ///< min temperature
    std::optional<double> pc;    ///< 20:00-20:00 precipitation
    std::optional<double> w;     ///< max wind speed
    std::optional<double> ep;    ///< pan evaporation
    std::optional<double> hm;    ///< min relative humidity, %; never a regressor
};

/// Header names of the observation columns plus the trace-precipitation tokens.
struct ObservationSchema {
    std::string date = "date";
    std::string pm = "pm";
    std::string t = "t";
    std::string tmax = "tmax";
    std::string tmin = "tmin";
    std::string pc = "pc";
    std::string w = "w";
    std::string ep = "ep";
    std::string hm = "hm";
    std::set<std::string> trace_tokens = {"微量", "T", "trace"};
};

/// lpm = 10 ln(pm) class: -1 (lpm <= 35), 0 (35 < lpm <= 50), 1 (lpm > 50).
inline int id_from_lpm(double lpm) {
    if (lpm <= 35.0) return -1;
    if (lpm <= 50.0) return 0;
    return 1;
}

inline double lpm_from_pm(double pm) { return 10.0 * std::log(pm); }

/// Previous-day values carried by a frame row whose predecessor is the
/// immediately preceding calendar day.
struct LagValues {
    double lpm = 0.0;
    double trg = 0.0;
    double t = 0.0;
    double w = 0.0;
    double pc = 0.0;
    double ep = 0.0;
    int id = 0;
};

struct FrameRow {
    Date date;
    double pm = 0.0;
    double lpm = 0.0;
    double trg = 0.0;
    double t = 0.0;
    double w = 0.0;
    double pc = 0.0;
    double ep = 0.0;
    int id = 0;
    std::optional<LagValues> lag;
};

/// Regression frame. Rows are strictly increasing in date and complete.
struct ModelFrame {
    std::vector<FrameRow> rows;

    std::size_t size() const noexcept { return rows.size(); }
    bool empty() const noexcept { return rows.empty(); }

    std::size_t lag_pairs() const {
        return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](const FrameRow& r) { return r.lag.has_value(); }));
    }
};

/// Attaches lag values to every row whose predecessor row is exactly one day earlier.
inline void link_lags(ModelFrame& frame) {
    for (std::size_t k = 0; k < frame.rows.size(); ++k) {
        auto& row = frame.rows[k];
        row.lag.reset();
        if (k == 0) continue;
        const auto& prev = frame.rows[k - 1];
        if (row.date.days_since(prev.date) != 1) continue;
        row.lag = LagValues{prev.lpm, prev.trg, prev.t, prev.w, prev.pc, prev.ep, prev.id};
    }
}

/// Frame row from explicit predictors; lpm and id follow from pm.
inline FrameRow make_row(Date date, double pm, double trg, double t, double w, double pc, double ep) {
    if (!(pm > 0.0)) throw DomainError("nonpositive concentration on " + date.str());
    FrameRow r;
    r.date = date;
    r.pm = pm;
    r.lpm = lpm_from_pm(pm);
    r.trg = trg;
    r.t = t;
    r.w = w;
    r.pc = pc;
    r.ep = ep;
    r.id = id_from_lpm(r.lpm);
    return r;
}

struct RejectedRow {
    Date date;
    std::string reason;
};

struct FrameBuild {
    ModelFrame frame;
    std::vector<RejectedRow> rejected;

    std::size_t dropped() const noexcept { return rejected.size(); }
};

namespace detail {

inline double parse_cell(const std::string& cell, std::size_t row, const std::string& field, bool allow_negative,
                         const std::set<std::string>* trace_tokens = nullptr) {
    if (trace_tokens && trace_tokens->count(cell)) return 0.0;
    const auto v = csv::to_double(cell);
    if (!v) throw ParseError(row, field, "not a number: '" + cell + "'");
    if (!allow_negative && *v < 0.0) throw ParseError(row, field, "negative value " + cell);
    return *v;
}

inline std::map<std::string, std::size_t> header_index(const std::vector<std::string>& header) {
    std::map<std::string, std::size_t> idx;
    for (std::size_t i = 0; i < header.size(); ++i) idx.emplace(header[i], i);
    return idx;
}

}  // namespace detail

/// Reads an observation table with a header row. Empty cells become missing
/// values; a trace-precipitation token in the pc column reads as 0.
inline std::vector<DailyRecord> parse_observations(std::istream& in, const ObservationSchema& schema = {}) {
    std::string line;
    if (!csv::next_line(in, line, true)) throw SchemaError("observation table: missing header row");
    const auto idx = detail::header_index(csv::split(line));

    auto require = [&](const std::string& name) {
        const auto it = idx.find(name);
        if (it == idx.end()) throw SchemaError("observation table: missing required column '" + name + "'");
        return it->second;
    };
    const std::size_t c_date = require(schema.date);
    const std::size_t c_pm = require(schema.pm);
    const std::size_t c_t = require(schema.t);
    const std::size_t c_tmax = require(schema.tmax);
    const std::size_t c_tmin = require(schema.tmin);
    const std::size_t c_pc = require(schema.pc);
    const std::size_t c_w = require(schema.w);
    const std::size_t c_ep = require(schema.ep);
    const auto hm_it = idx.find(schema.hm);
    const std::size_t c_hm = hm_it == idx.end() ? std::string::npos : hm_it->second;

    std::vector<DailyRecord> out;
    std::size_t row = 0;
    while (csv::next_line(in, line)) {
        ++row;
        const auto cells = csv::split(line);
        auto cell = [&](std::size_t c, const std::string& name) -> const std::string& {
            static const std::string empty;
            if (c >= cells.size()) {
                if (name == schema.date) throw ParseError(row, name, "row is too short");
                return empty;
            }
            return cells[c];
        };
        auto optional_value = [&](std::size_t c, const std::string& name, bool allow_negative,
                                  const std::set<std::string>* tokens = nullptr) -> std::optional<double> {
            const auto& s = cell(c, name);
            if (s.empty() || s == "NA") return std::nullopt;
            return detail::parse_cell(s, row, name, allow_negative, tokens);
        };

        DailyRecord rec;
        const auto date = Date::parse(cell(c_date, schema.date));
        if (!date) throw ParseError(row, schema.date, "not an ISO date: '" + cell(c_date, schema.date) + "'");
        rec.date = *date;
        rec.pm = optional_value(c_pm, schema.pm, false);
        rec.t = optional_value(c_t, schema.t, true);
        rec.tmax = optional_value(c_tmax, schema.tmax, true);
        rec.tmin = optional_value(c_tmin, schema.tmin, true);
        rec.pc = optional_value(c_pc, schema.pc, false, &schema.trace_tokens);
        rec.w = optional_value(c_w, schema.w, false);
        rec.ep = optional_value(c_ep, schema.ep, false);
        if (c_hm != std::string::npos) rec.hm = optional_value(c_hm, schema.hm, false);
        if (rec.tmax && rec.tmin && *rec.tmax < *rec.tmin)
            throw ParseError(row, schema.tmax, "maximum temperature below minimum temperature");
        out.push_back(rec);
    }
    return out;
}

/// Derives the regression frame. Incomplete rows and nonpositive
/// concentrations are dropped and reported; input must be strictly increasing in date.
inline FrameBuild build_frame(const std::vector<DailyRecord>& records) {
    FrameBuild out;
    for (std::size_t k = 1; k < records.size(); ++k)
        if (!(records[k - 1].date < records[k].date))
            throw DataError("records not strictly increasing in date at " + records[k].date.str());

    for (const auto& rec : records) {
        std::string missing;
        auto need = [&](const std::optional<double>& v, const char* name) {
            if (!v) missing += missing.empty() ? name : std::string(",") + name;
        };
        need(rec.pm, "pm");
        need(rec.t, "t");
        need(rec.tmax, "tmax");
        need(rec.tmin, "tmin");
        need(rec.pc, "pc");
        need(rec.w, "w");
        need(rec.ep, "ep");
        if (!missing.empty()) {
            out.rejected.push_back({rec.date, "missing " + missing});
            continue;
        }
        if (!(*rec.pm > 0.0)) {
            out.rejected.push_back({rec.date, "nonpositive concentration"});
            continue;
        }
        out.frame.rows.push_back(make_row(rec.date, *rec.pm, *rec.tmax - *rec.tmin, *rec.t, *rec.w, *rec.pc, *rec.ep));
    }
    link_lags(out.frame);
    return out;
}

/// `date,lpm,trg,t,w,pc,ep,id`
inline void write_frame_csv(std::ostream& os, const ModelFrame& frame) {
    os << "date,lpm,trg,t,w,pc,ep,id\n";
    for (const auto& r : frame.rows)
        os << r.date.str() << ',' << csv::format(r.lpm) << ',' << csv::format(r.trg) << ',' << csv::format(r.t) << ','
           << csv::format(r.w) << ',' << csv::format(r.pc) << ',' << csv::format(r.ep) << ',' << r.id << '\n';
}

// ---------------------------------------------------------------------------
// Six-hourly forecast input

struct NcepTuple {
    int slot = 0;  ///< forecast hour, one of 0, 6, 12, 18
    double t = 0.0;
    double tmax = 0.0;
    double tmin = 0.0;
    double pc = 0.0;
    double w = 0.0;
};

struct NcepSixHourly {
    Date date;
    std::vector<NcepTuple> tuples;
};

/// Daily predictor row from aggregated forecasts.
struct PredictorRow {
    Date date;
    double t = 0.0;
    double tmax = 0.0;
    double tmin = 0.0;
    double trg = 0.0;
    double pc = 0.0;
    double w = 0.0;
};

/// Reads `date,slot,t,tmax,tmin,pc,w`, grouping tuples by date (sorted).
inline std::vector<NcepSixHourly> parse_ncep(std::istream& in) {
    std::string line;
    if (!csv::next_line(in, line, true)) throw SchemaError("forecast table: missing header row");
    const auto idx = detail::header_index(csv::split(line));
    const std::array<const char*, 7> names{"date", "slot", "t", "tmax", "tmin", "pc", "w"};
    std::array<std::size_t, 7> col{};
    for (std::size_t i = 0; i < names.size(); ++i) {
        const auto it = idx.find(names[i]);
        if (it == idx.end()) throw SchemaError(std::string("forecast table: missing required column '") + names[i] + "'");
        col[i] = it->second;
    }

    std::map<Date, NcepSixHourly> by_date;
    std::size_t row = 0;
    while (csv::next_line(in, line)) {
        ++row;
        const auto cells = csv::split(line);
        auto cell = [&](std::size_t i) -> const std::string& {
            if (col[i] >= cells.size()) throw ParseError(row, names[i], "row is too short");
            return cells[col[i]];
        };
        const auto date = Date::parse(cell(0));
        if (!date) throw ParseError(row, "date", "not an ISO date: '" + cell(0) + "'");
        const double slot = detail::parse_cell(cell(1), row, "slot", false);
        if (slot != 0.0 && slot != 6.0 && slot != 12.0 && slot != 18.0)
            throw ParseError(row, "slot", "expected one of 0,6,12,18");
        NcepTuple tup;
        tup.slot = static_cast<int>(slot);
        tup.t = detail::parse_cell(cell(2), row, "t", true);
        tup.tmax = detail::parse_cell(cell(3), row, "tmax", true);
        tup.tmin = detail::parse_cell(cell(4), row, "tmin", true);
        tup.pc = detail::parse_cell(cell(5), row, "pc", false);
        tup.w = detail::parse_cell(cell(6), row, "w", false);

        auto& day = by_date[*date];
        day.date = *date;
        for (const auto& existing : day.tuples)
            if (existing.slot == tup.slot)
                throw ParseError(row, "slot", "duplicate slot " + cell(1) + " for " + date->str());
        day.tuples.push_back(tup);
    }

    std::vector<NcepSixHourly> out;
    out.reserve(by_date.size());
    for (auto& [d, day] : by_date) out.push_back(std::move(day));
    return out;
}

/// Daily value: arithmetic mean of the four tuples for t, tmax, tmin, pc;
/// maximum for w; trg = mean(tmax) - mean(tmin).
inline PredictorRow aggregate_ncep(const NcepSixHourly& day) {
    if (day.tuples.size() != 4)
        throw DataError("aggregate_ncep: " + day.date.str() + " has " + std::to_string(day.tuples.size()) +
                        " six-hourly tuples, expected 4");
    PredictorRow out;
    out.date = day.date;
    out.w = day.tuples.front().w;
    for (const auto& tup : day.tuples) {
        out.t += tup.t;
        out.tmax += tup.tmax;
        out.tmin += tup.tmin;
        out.pc += tup.pc;
        out.w = std::max(out.w, tup.w);
    }
    out.t /= 4.0;
    out.tmax /= 4.0;
    out.tmin /= 4.0;
    out.pc /= 4.0;
    out.trg = out.tmax - out.tmin;
    return out;
}

/// `date,t,tmax,tmin,trg,pc,w`
inline void write_predictors_csv(std::ostream& os, const std::vector<PredictorRow>& rows) {
    os << "date,t,tmax,tmin,trg,pc,w\n";
    for (const auto& r : rows)
        os << r.date.str() << ',' << csv::format(r.t) << ',' << csv::format(r.tmax) << ',' << csv::format(r.tmin) << ','
           << csv::format(r.trg) << ',' << csv::format(r.pc) << ',' << csv::format(r.w) << '\n';
}

}  // namespace pm25
