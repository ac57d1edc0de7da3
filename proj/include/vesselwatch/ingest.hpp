#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "vesselwatch/csv.hpp"
#include "vesselwatch/error.hpp"
#include "vesselwatch/geo.hpp"

namespace vesselwatch {

using Timestamp = std::int64_t; // UTC seconds since the epoch

enum class VesselType { cargo, tanker, towing, tug, passenger, pilot, search_rescue, other };

inline constexpr VesselType kAllVesselTypes[] = {VesselType::cargo,     VesselType::tanker, VesselType::towing,
                                                 VesselType::tug,       VesselType::passenger,
                                                 VesselType::pilot,     VesselType::search_rescue,
                                                 VesselType::other};

inline std::string_view to_string(VesselType t) {
    switch (t) {
    case VesselType::cargo: return "cargo";
    case VesselType::tanker: return "tanker";
    case VesselType::towing: return "towing";
    case VesselType::tug: return "tug";
    case VesselType::passenger: return "passenger";
    case VesselType::pilot: return "pilot";
    case VesselType::search_rescue: return "search_rescue";
    case VesselType::other: return "other";
    }
    return "other";
}

// Accepts type names and numeric AIS ship-type codes. Unknown values yield nullopt.
inline std::optional<VesselType> parse_vessel_type(std::string_view s) {
    s = csv::trim(s);
    for (VesselType t : kAllVesselTypes) {
        if (s == to_string(t)) return t;
    }
    if (auto code = csv::parse_int(s)) {
        const auto c = *code;
        if (c == 31 || c == 32) return VesselType::towing;
        if (c == 52) return VesselType::tug;
        if (c == 50) return VesselType::pilot;
        if (c == 51) return VesselType::search_rescue;
        if (c >= 60 && c <= 69) return VesselType::passenger;
        if (c >= 70 && c <= 79) return VesselType::cargo;
        if (c >= 80 && c <= 89) return VesselType::tanker;
        return VesselType::other;
    }
    return std::nullopt;
}

struct AisRecord {
    std::string vessel_id;
    Timestamp timestamp = 0;
    double lat = 0.0;
    double lon = 0.0;
    double sog = 0.0;
    double cog = 0.0;
    std::optional<double> rot;
    std::optional<VesselType> vessel_type;
    std::optional<double> length;
};

struct TrackPoint {
    Timestamp timestamp = 0;
    double lat = 0.0;
    double lon = 0.0;
    double sog = 0.0;
    double cog = 0.0;
    double rot = 0.0;

    geo::GeoPoint position() const { return {lat, lon}; }
};

struct VesselMeta {
    std::string vessel_id;
    VesselType vessel_type = VesselType::other;
    std::optional<double> length;
    std::optional<std::string> cargo_class;
};

struct Trajectory {
    std::string vessel_id;
    int segment = 0; // index of the gap-split piece for this vessel
    VesselMeta meta;
    std::vector<TrackPoint> points;

    // Point at exactly `t`, or nullptr. Requires sorted points.
    const TrackPoint* at(Timestamp t) const {
        auto it = std::lower_bound(points.begin(), points.end(), t,
                                   [](const TrackPoint& p, Timestamp v) { return p.timestamp < v; });
        if (it == points.end() || it->timestamp != t) return nullptr;
        return &*it;
    }
};

// Column names for the CSV reader. Optional columns may be empty strings.
struct ColumnMap {
    std::string vessel_id = "MMSI";
    std::string timestamp = "BaseDateTime";
    std::string lat = "LAT";
    std::string lon = "LON";
    std::string sog = "SOG";
    std::string cog = "COG";
    std::string rot = "ROT";
    std::string vessel_type = "VesselType";
    std::string length = "Length";
};

struct Rejection {
    std::size_t line = 0;
    std::string reason;
};

inline std::string format_rejection(const Rejection& r) {
    return "line=" + std::to_string(r.line) + " reason=" + r.reason;
}

struct ParseResult {
    std::vector<AisRecord> records;
    std::vector<Rejection> rejections;
};

namespace detail {

inline std::optional<int> digits(std::string_view s, std::size_t pos, std::size_t n) {
    if (pos + n > s.size()) return std::nullopt;
    int v = 0;
    for (std::size_t i = pos; i < pos + n; ++i) {
        if (s[i] < '0' || s[i] > '9') return std::nullopt;
        v = v * 10 + (s[i] - '0');
    }
    return v;
}

} // namespace detail

// ISO-8601 "YYYY-MM-DDTHH:MM:SS" (optional trailing 'Z', 'T' or space separator) or integer epoch seconds.
inline std::optional<Timestamp> parse_timestamp(std::string_view s) {
    s = csv::trim(s);
    if (s.empty()) return std::nullopt;
    if (s.find('-', 1) == std::string_view::npos) return csv::parse_int(s);
    if (!s.empty() && s.back() == 'Z') s.remove_suffix(1);
    if (s.size() != 19 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':' ||
        s[16] != ':') {
        return std::nullopt;
    }
    auto y = detail::digits(s, 0, 4), mo = detail::digits(s, 5, 2), d = detail::digits(s, 8, 2);
    auto h = detail::digits(s, 11, 2), mi = detail::digits(s, 14, 2), se = detail::digits(s, 17, 2);
    if (!y || !mo || !d || !h || !mi || !se) return std::nullopt;
    if (*h > 23 || *mi > 59 || *se > 59) return std::nullopt;
    using namespace std::chrono;
    const year_month_day ymd{year{*y}, month{static_cast<unsigned>(*mo)}, day{static_cast<unsigned>(*d)}};
    if (!ymd.ok()) return std::nullopt;
    const auto days = sys_days{ymd}.time_since_epoch().count();
    return static_cast<Timestamp>(days) * 86400 + *h * 3600 + *mi * 60 + *se;
}

inline std::string format_timestamp(Timestamp t) {
    using namespace std::chrono;
    const auto secs = sys_seconds{seconds{t}};
    const auto dp = floor<days>(secs);
    const year_month_day ymd{dp};
    const hh_mm_ss hms{secs - dp};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                  static_cast<int>(hms.seconds().count()));
    return buf;
}

inline ParseResult parse_ais_csv(std::istream& in, const ColumnMap& columns = {}) {
    ParseResult result;
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (csv::is_comment_or_blank(line)) continue;
        header = csv::split_line(line);
        break;
    }
    if (header.empty()) throw InputError("missing header row");

    auto find_col = [&](const std::string& name, bool mandatory) -> std::optional<std::size_t> {
        if (name.empty()) {
            if (mandatory) throw InputError("column map leaves a mandatory column unnamed");
            return std::nullopt;
        }
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) {
            if (mandatory) throw InputError("missing column " + name);
            return std::nullopt;
        }
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t c_id = *find_col(columns.vessel_id, true);
    const std::size_t c_ts = *find_col(columns.timestamp, true);
    const std::size_t c_lat = *find_col(columns.lat, true);
    const std::size_t c_lon = *find_col(columns.lon, true);
    const std::size_t c_sog = *find_col(columns.sog, true);
    const std::size_t c_cog = *find_col(columns.cog, true);
    const auto c_rot = find_col(columns.rot, false);
    const auto c_type = find_col(columns.vessel_type, false);
    const auto c_len = find_col(columns.length, false);

    while (std::getline(in, line)) {
        ++line_no;
        if (csv::is_comment_or_blank(line)) continue;
        const auto f = csv::split_line(line);
        auto reject = [&](std::string reason) { result.rejections.push_back({line_no, std::move(reason)}); };
        auto field = [&](std::size_t c) -> std::string_view {
            return c < f.size() ? std::string_view(f[c]) : std::string_view();
        };

        AisRecord r;
        r.vessel_id = std::string(field(c_id));
        if (r.vessel_id.empty()) { reject("missing vessel_id"); continue; }
        auto ts = parse_timestamp(field(c_ts));
        if (!ts) { reject("bad timestamp"); continue; }
        r.timestamp = *ts;

        struct Num { std::size_t col; const char* name; double* dst; };
        const Num nums[] = {{c_lat, "lat", &r.lat}, {c_lon, "lon", &r.lon}, {c_sog, "sog", &r.sog}, {c_cog, "cog", &r.cog}};
        bool ok = true;
        for (const auto& n : nums) {
            auto v = csv::parse_double(field(n.col));
            if (!v || !std::isfinite(*v)) {
                reject(std::string("bad ") + n.name);
                ok = false;
                break;
            }
            *n.dst = *v;
        }
        if (!ok) continue;
        if (r.lat < -90.0 || r.lat > 90.0) { reject("lat out of range"); continue; }
        if (r.lon < -180.0 || r.lon >= 180.0) { reject("lon out of range"); continue; }
        if (r.sog < 0.0) { reject("sog out of range"); continue; }
        if (r.cog < 0.0 || r.cog >= 360.0) { reject("cog out of range"); continue; }

        if (c_rot && !csv::trim(field(*c_rot)).empty()) {
            auto v = csv::parse_double(field(*c_rot));
            if (!v || !std::isfinite(*v)) { reject("bad rot"); continue; }
            r.rot = *v;
        }
        if (c_type && !csv::trim(field(*c_type)).empty()) {
            r.vessel_type = parse_vessel_type(field(*c_type)).value_or(VesselType::other);
        }
        if (c_len && !csv::trim(field(*c_len)).empty()) {
            auto v = csv::parse_double(field(*c_len));
            if (!v || !std::isfinite(*v) || *v < 0.0) { reject("bad length"); continue; }
            r.length = *v;
        }
        result.records.push_back(std::move(r));
    }
    return result;
}

// Writes records in the canonical column layout read by parse_ais_csv with the default ColumnMap.
inline void write_ais_csv(std::ostream& out, const std::vector<AisRecord>& records) {
    out << "MMSI,BaseDateTime,LAT,LON,SOG,COG,ROT,VesselType,Length\n";
    for (const auto& r : records) {
        out << r.vessel_id << ',' << format_timestamp(r.timestamp) << ',' << csv::format_double(r.lat) << ','
            << csv::format_double(r.lon) << ',' << csv::format_double(r.sog) << ',' << csv::format_double(r.cog)
            << ',' << (r.rot ? csv::format_double(*r.rot) : "") << ','
            << (r.vessel_type ? to_string(*r.vessel_type) : "") << ','
            << (r.length ? csv::format_double(*r.length) : "") << '\n';
    }
}

inline std::vector<Trajectory> build_trajectories(const std::vector<AisRecord>& records, Timestamp gap_threshold) {
    std::map<std::string, std::vector<const AisRecord*>> by_vessel;
    for (const auto& r : records) by_vessel[r.vessel_id].push_back(&r);

    std::vector<Trajectory> out;
    for (auto& [id, recs] : by_vessel) {
        std::stable_sort(recs.begin(), recs.end(),
                         [](const AisRecord* a, const AisRecord* b) { return a->timestamp < b->timestamp; });
        VesselMeta meta{id, VesselType::other, std::nullopt, std::nullopt};
        for (const AisRecord* r : recs) {
            if (r->vessel_type) { meta.vessel_type = *r->vessel_type; break; }
        }
        for (const AisRecord* r : recs) {
            if (r->length) { meta.length = r->length; break; }
        }

        int segment = 0;
        Trajectory cur{id, segment, meta, {}};
        for (const AisRecord* r : recs) {
            if (!cur.points.empty()) {
                const Timestamp last = cur.points.back().timestamp;
                if (r->timestamp == last) continue; // keep the first of duplicate timestamps
                if (r->timestamp - last > gap_threshold) {
                    out.push_back(std::move(cur));
                    cur = Trajectory{id, ++segment, meta, {}};
                }
            }
            cur.points.push_back({r->timestamp, r->lat, r->lon, r->sog, r->cog, r->rot.value_or(0.0)});
        }
        if (!cur.points.empty()) out.push_back(std::move(cur));
    }
    return out;
}

// Recomputes rate of turn (degrees/minute) from consecutive course changes.
inline Trajectory derive_rot(Trajectory traj) {
    auto& pts = traj.points;
    if (pts.empty()) return traj;
    pts.front().rot = 0.0;
    for (std::size_t i = 1; i < pts.size(); ++i) {
        const double minutes = static_cast<double>(pts[i].timestamp - pts[i - 1].timestamp) / 60.0;
        pts[i].rot = geo::wrap180(pts[i].cog - pts[i - 1].cog) / minutes;
    }
    return traj;
}

namespace detail {

inline Timestamp floor_div(Timestamp a, Timestamp b) {
    Timestamp q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

} // namespace detail

// Resamples onto timestamps that are multiples of `step`, then recomputes rot.
inline Trajectory resample(const Trajectory& traj, Timestamp step) {
    if (step <= 0) throw InputError("resample step must be positive");
    const auto& in = traj.points;
    if (in.size() < 2) throw InputError("too short to resample");

    Trajectory out{traj.vessel_id, traj.segment, traj.meta, {}};
    const Timestamp t0 = in.front().timestamp;
    const Timestamp t1 = in.back().timestamp;
    Timestamp t = -detail::floor_div(-t0, step) * step;
    std::size_t k = 0;
    for (; t <= t1; t += step) {
        while (k + 1 < in.size() && in[k + 1].timestamp <= t) ++k;
        const TrackPoint& a = in[k];
        if (a.timestamp == t || k + 1 == in.size()) {
            out.points.push_back(a);
            continue;
        }
        const TrackPoint& b = in[k + 1];
        const double f = static_cast<double>(t - a.timestamp) / static_cast<double>(b.timestamp - a.timestamp);
        TrackPoint p;
        p.timestamp = t;
        p.lat = a.lat + f * (b.lat - a.lat);
        p.lon = geo::wrap180(a.lon + f * geo::wrap180(b.lon - a.lon));
        p.sog = a.sog + f * (b.sog - a.sog);
        p.cog = geo::wrap360(a.cog + f * geo::wrap180(b.cog - a.cog));
        out.points.push_back(p);
    }
    if (out.points.empty()) throw InputError("too short to resample");
    return derive_rot(std::move(out));
}

} // namespace vesselwatch
