#pragma once

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "vesselwatch/anomaly.hpp"
#include "vesselwatch/config.hpp"
#include "vesselwatch/csv.hpp"
#include "vesselwatch/engagement.hpp"
#include "vesselwatch/error.hpp"
#include "vesselwatch/ingest.hpp"
#include "vesselwatch/pipeline.hpp"
#include "vesselwatch/simgen.hpp"

// File formats and glue shared by the command-line tool and the end-to-end tests.
namespace vesselwatch {

inline std::string header_line(std::string_view schema, const std::string& config_hash) {
    return "# " + std::string(schema) + " config=" + config_hash + "\n";
}

inline constexpr std::string_view kTrackStoreHeader = "vessel_id,segment,vessel_type,length,timestamp,lat,lon,sog,cog,rot";

inline void write_track_store(std::ostream& out, const std::vector<Trajectory>& trajs) {
    out << kTrackStoreHeader << '\n';
    for (const auto& tr : trajs) {
        const std::string len = tr.meta.length ? csv::format_double(*tr.meta.length) : "";
        for (const auto& p : tr.points) {
            out << tr.vessel_id << ',' << tr.segment << ',' << to_string(tr.meta.vessel_type) << ',' << len << ','
                << p.timestamp << ',' << csv::format_double(p.lat) << ',' << csv::format_double(p.lon) << ','
                << csv::format_double(p.sog) << ',' << csv::format_double(p.cog) << ',' << csv::format_double(p.rot)
                << '\n';
        }
    }
}

inline std::vector<Trajectory> read_track_store(std::istream& in) {
    std::vector<Trajectory> out;
    std::string line;
    std::size_t line_no = 0;
    bool header = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (csv::is_comment_or_blank(line)) continue;
        if (header) {
            if (csv::trim(line) != kTrackStoreHeader) throw InputError("track store: unexpected header");
            header = false;
            continue;
        }
        const auto f = csv::split_line(line);
        auto fail = [&](const std::string& what) {
            throw InputError("track store line " + std::to_string(line_no) + ": " + what);
        };
        if (f.size() != 10) fail("expected 10 fields");
        const auto seg = csv::parse_int(f[1]);
        const auto type = parse_vessel_type(f[2]);
        const auto ts = csv::parse_int(f[4]);
        if (!seg || !type || !ts) fail("bad field");
        TrackPoint p{*ts, 0, 0, 0, 0, 0};
        double* dst[] = {&p.lat, &p.lon, &p.sog, &p.cog, &p.rot};
        for (std::size_t k = 0; k < 5; ++k) {
            const auto v = csv::parse_double(f[5 + k]);
            if (!v) fail("bad number");
            *dst[k] = *v;
        }
        if (out.empty() || out.back().vessel_id != f[0] || out.back().segment != *seg) {
            Trajectory tr{f[0], static_cast<int>(*seg), {f[0], *type, std::nullopt, std::nullopt}, {}};
            if (!f[3].empty()) {
                const auto len = csv::parse_double(f[3]);
                if (!len) fail("bad length");
                tr.meta.length = *len;
            }
            out.push_back(std::move(tr));
        } else if (p.timestamp <= out.back().points.back().timestamp) {
            fail("timestamps not increasing");
        }
        out.back().points.push_back(p);
    }
    if (header) throw InputError("track store: missing header");
    return out;
}

inline bool looks_like_track_store(std::istream& in) {
    std::string line;
    const auto start = in.tellg();
    bool result = false;
    while (std::getline(in, line)) {
        if (csv::is_comment_or_blank(line)) continue;
        result = csv::trim(line) == kTrackStoreHeader;
        break;
    }
    in.clear();
    in.seekg(start);
    return result;
}

struct IngestOutcome {
    std::vector<Trajectory> trajectories;
    std::vector<std::string> rejections; // "<file>: line=<n> reason=<text>"
};

// Raw AIS files: parse, segment, and resample onto the grid. Pieces too short to resample are dropped.
inline IngestOutcome ingest_files(const std::vector<std::string>& paths, const IngestSettings& settings) {
    IngestOutcome out;
    std::vector<AisRecord> records;
    for (const auto& path : paths) {
        std::ifstream in(path);
        if (!in) throw InputError("cannot open " + path);
        auto parsed = parse_ais_csv(in, settings.columns);
        for (const auto& r : parsed.rejections) out.rejections.push_back(path + ": " + format_rejection(r));
        records.insert(records.end(), parsed.records.begin(), parsed.records.end());
    }
    for (const auto& tr : build_trajectories(records, settings.gap_threshold)) {
        if (tr.points.size() < 2) continue;
        auto grid = resample(tr, settings.step);
        if (grid.points.size() >= 2) out.trajectories.push_back(std::move(grid));
    }
    return out;
}

// Accepts either a trajectory store or raw AIS CSV.
inline std::vector<Trajectory> load_tracks(const std::string& path, const IngestSettings& settings) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path);
    if (looks_like_track_store(in)) return read_track_store(in);
    in.close();
    return ingest_files({path}, settings).trajectories;
}

class TrackIndex {
public:
    explicit TrackIndex(const std::vector<Trajectory>& trajs) : trajs_(&trajs) {
        for (std::size_t i = 0; i < trajs.size(); ++i) by_id_[trajs[i].vessel_id].push_back(i);
    }

    // The segment of `vessel` with grid points at both ends of [t0, t1].
    const Trajectory& covering(const std::string& vessel, Timestamp t0, Timestamp t1) const {
        auto it = by_id_.find(vessel);
        if (it != by_id_.end()) {
            for (std::size_t i : it->second) {
                const auto& tr = (*trajs_)[i];
                if (tr.at(t0) && tr.at(t1)) return tr;
            }
        }
        throw InputError("no track of vessel " + vessel + " covers [" + std::to_string(t0) + ", " + std::to_string(t1) + "]");
    }

private:
    const std::vector<Trajectory>* trajs_;
    std::map<std::string, std::vector<std::size_t>> by_id_;
};

inline std::size_t class_index(const std::vector<ScenarioClass>& classes, const std::string& name) {
    for (const auto& c : classes) {
        if (c.name == name) return c.id;
    }
    throw InputError("unknown scenario class " + name);
}

inline std::vector<LabeledCandidate> labeled_corpus(const std::vector<Trajectory>& trajs,
                                                    const std::vector<simgen::ManifestRow>& labels,
                                                    const std::vector<ScenarioClass>& classes) {
    TrackIndex index(trajs);
    std::vector<LabeledCandidate> out;
    for (const auto& row : labels) {
        const auto& p = row.pair;
        out.push_back({p, index.covering(p.vessel_a, p.t_start, p.t_end), index.covering(p.vessel_b, p.t_start, p.t_end),
                       class_index(classes, row.class_name)});
    }
    return out;
}

struct Classification {
    CandidatePair pair;
    std::string class_name;
    std::vector<double> scores; // class * n + obs_type
};

inline void write_classifications_csv(std::ostream& out, const std::vector<Classification>& rows, const HmmBank& bank,
                                      const std::vector<ScenarioClass>& classes) {
    out << "pair,vessel_a,vessel_b,t_start,t_end,class";
    for (std::size_t y = 0; y < bank.m; ++y) {
        for (std::size_t x = 0; x < bank.n; ++x) out << ",score_" << classes[y].name << '_' << x;
    }
    out << '\n';
    for (const auto& r : rows) {
        out << r.pair.id() << ',' << r.pair.vessel_a << ',' << r.pair.vessel_b << ',' << r.pair.t_start << ','
            << r.pair.t_end << ',' << r.class_name;
        for (double s : r.scores) out << ',' << csv::format_double(s);
        out << '\n';
    }
}

inline std::vector<Classification> read_classifications_csv(std::istream& in) {
    std::vector<Classification> out;
    std::string line;
    std::size_t line_no = 0;
    bool header = true;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (csv::is_comment_or_blank(line)) continue;
        const auto f = csv::split_line(line);
        if (header) {
            if (f.size() < 6 || f[0] != "pair" || f[5] != "class") throw InputError("classification file: unexpected header");
            width = f.size();
            header = false;
            continue;
        }
        auto fail = [&](const std::string& what) {
            throw InputError("classification line " + std::to_string(line_no) + ": " + what);
        };
        if (f.size() != width) fail("wrong number of fields");
        const auto t0 = csv::parse_int(f[3]);
        const auto t1 = csv::parse_int(f[4]);
        if (!t0 || !t1) fail("bad interval");
        Classification c{{f[1], f[2], *t0, *t1}, f[5], {}};
        for (std::size_t k = 6; k < f.size(); ++k) {
            const auto v = csv::parse_double(f[k]);
            if (!v) fail("bad score");
            c.scores.push_back(*v);
        }
        out.push_back(std::move(c));
    }
    if (header) throw InputError("classification file: missing header");
    return out;
}

// Contextual facts for one classified candidate: scenario, pair, vessel types, zone membership.
inline std::vector<anomaly::Fact> context_facts(const Classification& c, const Trajectory& a, const Trajectory& b,
                                                const std::vector<anomaly::Zone>& zones) {
    const std::string id = c.pair.id();
    std::vector<anomaly::Fact> facts{
        {"scenario", {id, anomaly::class_atom(c.class_name)}},
        {"pair", {id, c.pair.vessel_a, c.pair.vessel_b}},
        {"type", {a.vessel_id, std::string(to_string(a.meta.vessel_type))}},
        {"type", {b.vessel_id, std::string(to_string(b.meta.vessel_type))}},
        {"has_type", {id, std::string(to_string(a.meta.vessel_type))}},
        {"has_type", {id, std::string(to_string(b.meta.vessel_type))}},
    };
    for (const auto& z : zones) {
        bool inside = false;
        for (const Trajectory* tr : {&a, &b}) {
            for (const auto& p : tr->points) {
                if (p.timestamp < c.pair.t_start || p.timestamp > c.pair.t_end) continue;
                inside = inside || anomaly::point_in_polygon(p.position(), z.vertices);
            }
        }
        if (inside) facts.push_back({"in_zone", {id, z.name}});
    }
    return facts;
}

inline std::vector<anomaly::Alert> build_alerts(const std::vector<Classification>& rows, const std::vector<Trajectory>& trajs,
                                                const anomaly::Program& program, const std::vector<anomaly::Fact>& extra,
                                                const Config& cfg) {
    TrackIndex index(trajs);
    std::vector<anomaly::Alert> alerts;
    for (const auto& r : rows) {
        const auto& p = r.pair;
        auto facts = context_facts(r, index.covering(p.vessel_a, p.t_start, p.t_end),
                                   index.covering(p.vessel_b, p.t_start, p.t_end), cfg.zones);
        facts.insert(facts.end(), program.facts.begin(), program.facts.end());
        facts.insert(facts.end(), extra.begin(), extra.end());
        const auto verdict = anomaly::verify_context(p.id(), facts, program.rules);
        alerts.push_back({p.id(), r.class_name, verdict, anomaly::calculate_impact(verdict, r.class_name, cfg.impact), 0});
    }
    return anomaly::rank_alerts(std::move(alerts));
}

inline std::string percent_or_na(const std::optional<double>& v) {
    if (!v) return "NA";
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << *v * 100.0;
    return s.str();
}

// Confusion matrix CSV (rows true, columns predicted) followed by a metrics block.
inline void write_evaluation_report(std::ostream& out, const ConfusionMatrix& cm, const Metrics& mt,
                                    const std::vector<ScenarioClass>& classes) {
    out << "true\\predicted";
    for (const auto& c : classes) out << ',' << c.name;
    out << '\n';
    for (std::size_t y = 0; y < cm.m; ++y) {
        out << classes[y].name;
        for (auto v : cm.counts[y]) out << ',' << v;
        out << '\n';
    }
    out << "\nclass,precision_pct,recall_pct\n";
    for (std::size_t y = 0; y < cm.m; ++y) {
        out << classes[y].name << ',' << percent_or_na(mt.precision[y]) << ',' << percent_or_na(mt.recall[y]) << '\n';
    }
    out << "accuracy_pct," << percent_or_na(mt.accuracy) << '\n';
}

} // namespace vesselwatch
