#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "vesselwatch/engagement.hpp"
#include "vesselwatch/geo.hpp"
#include "vesselwatch/ingest.hpp"
#include "vesselwatch/pipeline.hpp"

namespace vesselwatch::simgen {

struct Range {
    double lo = 0.0;
    double hi = 0.0;

    double draw(std::mt19937_64& rng) const {
        return lo == hi ? lo : std::uniform_real_distribution<double>(lo, hi)(rng);
    }
};

struct Noise {
    double position_m = 15.0;
    double sog_kn = 0.3;
    double cog_deg = 2.0;
};

// Approach -> engaged dwell -> depart script for a primary vessel (a) and a visitor (b).
// Vessel b pursues a station offset abeam of a; during the dwell it keeps that station.
struct ScenarioTemplate {
    std::size_t class_id = 0;
    std::string class_name;
    VesselType type_a = VesselType::cargo;
    VesselType type_b = VesselType::tug;
    Range length_a{100, 200};
    Range length_b{20, 40};
    Range speed_a_approach;  // knots
    Range speed_a_dwell;
    Range speed_a_depart;
    Range speed_b_approach;  // max pursuit speed
    Range speed_b_depart;
    Range turn_rate_a_dwell{0, 0}; // deg/min magnitude, sign drawn at random
    Range separation;        // meters, dwell station offset abeam of a
    Range dwell_duration;    // seconds
    Range approach_distance{1200, 1800};
    Range approach_bearing{60, 300}; // degrees relative to a's heading
    Range depart_turn{30, 60};       // degrees b turns away on departure
    double depart_duration = 600.0;
    double max_approach_duration = 3600.0;
    Noise noise;
};

// Nominal engaged separations are disjoint and at least 10 m apart across classes
// (B 10-20, C 30-45, A 60-100, E 150-260, D 280-400 m).
inline constexpr double kSeparationMargin = 10.0;

inline std::vector<ScenarioTemplate> default_templates() {
    using enum VesselType;
    std::vector<ScenarioTemplate> t(5);
    // A: cargo or tanker assisted by a tug; slow matched speeds, long dwell.
    t[0] = {0, "A", cargo, tug, {150, 300}, {25, 35}, {4, 6}, {3, 6}, {6, 8}, {8, 9.5}, {7, 9}, {0, 0},
            {60, 100}, {1200, 3600},
            {1200, 1800}, {60, 300}, {30, 60}, 600.0, 3600.0, Noise{}};
    // B: pilot boarding; fast pilot approach and departure, short dwell at close range.
    t[1] = {1, "B", cargo, pilot, {150, 300}, {15, 20}, {6, 8.5}, {6, 8.5}, {6, 8.5}, {14, 16}, {14, 16}, {0, 0},
            {10, 20}, {420, 720},
            {1200, 1800}, {60, 300}, {30, 60}, 600.0, 3600.0, Noise{}};
    // C: two tankers alongside, nearly stationary.
    t[2] = {2, "C", tanker, tanker, {180, 330}, {180, 330}, {0.3, 1.5}, {0.3, 1.5}, {0.3, 1.5}, {3, 5}, {4, 6},
            {0, 0}, {30, 45}, {1800, 3600},
            {1200, 1800}, {60, 300}, {30, 60}, 600.0, 3600.0, Noise{}};
    // D: two passenger vessels running in company at a few hundred meters.
    t[3] = {3, "D", passenger, passenger, {100, 200}, {100, 200}, {6, 8.5}, {6, 8.5}, {6, 8.5}, {12, 14},
            {8, 9.5}, {0, 0}, {280, 400}, {900, 1800},
            {1200, 1800}, {60, 300}, {30, 60}, 600.0, 3600.0, Noise{}};
    // E: two search and rescue vessels on a turning search pattern.
    t[4] = {4, "E", search_rescue, search_rescue, {15, 45}, {15, 45}, {3, 6}, {3, 6}, {5, 7}, {8, 9.5}, {7, 9},
            {6, 12}, {150, 260}, {1200, 2400},
            {1200, 1800}, {60, 300}, {30, 60}, 600.0, 3600.0, Noise{}};
    return t;
}

struct Placement {
    geo::GeoPoint origin{48.2, -123.5};
    Timestamp t0 = 1230768000; // 2009-01-01T00:00:00Z
    Timestamp step = 60;
    std::string id_a = "366000000";
    std::string id_b = "366000001";
};

struct GeneratedScenario {
    Trajectory traj_a;
    Trajectory traj_b;
    std::size_t label = 0;
    Timestamp dwell_start = 0; // grid-aligned scripted dwell
    Timestamp dwell_end = 0;
};

namespace detail {

struct Body {
    geo::LocalVector pos;
    double heading = 0.0; // degrees
    double speed = 0.0;   // knots
};

inline TrackPoint sample(const Body& b, Timestamp t, geo::GeoPoint origin, const Noise& noise, std::mt19937_64& rng) {
    std::normal_distribution<double> unit(0.0, 1.0);
    const geo::LocalVector jitter{noise.position_m * unit(rng), noise.position_m * unit(rng)};
    const auto p = geo::from_local(origin, b.pos + jitter);
    TrackPoint tp;
    tp.timestamp = t;
    tp.lat = std::clamp(p.lat, -90.0, 90.0);
    tp.lon = p.lon;
    tp.sog = std::max(0.0, b.speed + noise.sog_kn * unit(rng));
    tp.cog = geo::wrap360(b.heading + noise.cog_deg * unit(rng));
    return tp;
}

} // namespace detail

inline GeneratedScenario generate_scenario(const ScenarioTemplate& tpl, std::uint64_t seed, const Placement& place = {}) {
    std::mt19937_64 rng(seed);
    const double heading0 = Range{0, 360}.draw(rng);
    const double sa_app = tpl.speed_a_approach.draw(rng);
    const double sa_dwell = tpl.speed_a_dwell.draw(rng);
    const double sa_dep = tpl.speed_a_depart.draw(rng);
    const double sb_app = tpl.speed_b_approach.draw(rng);
    const double sb_dep = tpl.speed_b_depart.draw(rng);
    const double turn = tpl.turn_rate_a_dwell.draw(rng) * (Range{0, 1}.draw(rng) < 0.5 ? -1.0 : 1.0);
    const double sep = tpl.separation.draw(rng);
    const double dwell = std::round(tpl.dwell_duration.draw(rng));
    const double d0 = tpl.approach_distance.draw(rng);
    const double bearing0 = tpl.approach_bearing.draw(rng);
    const double side = Range{0, 1}.draw(rng) < 0.5 ? -1.0 : 1.0;
    const double dep_turn = tpl.depart_turn.draw(rng);
    const double len_a = std::round(tpl.length_a.draw(rng));
    const double len_b = std::round(tpl.length_b.draw(rng));

    detail::Body a{{0, 0}, heading0, sa_app};
    detail::Body b{d0 * geo::LocalVector{std::sin(geo::deg2rad(heading0 + bearing0)), std::cos(geo::deg2rad(heading0 + bearing0))},
                   0.0, 0.0};

    auto station = [&]() {
        const double h = geo::deg2rad(a.heading + side * 90.0);
        return a.pos + sep * geo::LocalVector{std::sin(h), std::cos(h)};
    };
    constexpr double kGain = 1.0 / 60.0;  // pursuit gain, 1/s
    constexpr double kCapture = 20.0;     // meters from station ends the approach

    GeneratedScenario out;
    out.label = tpl.class_id;
    out.traj_a = {place.id_a, 0, {place.id_a, tpl.type_a, len_a, std::nullopt}, {}};
    out.traj_b = {place.id_b, 0, {place.id_b, tpl.type_b, len_b, std::nullopt}, {}};

    enum class Phase { approach, dwell, depart };
    Phase phase = Phase::approach;
    double phase_start = 0.0;
    double dwell_start = -1.0, dwell_end = -1.0;
    std::mt19937_64 noise_rng(seed ^ 0x5bd1e995ULL);
    const double dt = 1.0;
    for (double t = 0.0;; t += dt) {
        // phase transitions
        if (phase == Phase::approach &&
            (geo::norm(station() - b.pos) < kCapture || t - phase_start >= tpl.max_approach_duration)) {
            phase = Phase::dwell;
            phase_start = dwell_start = t;
        } else if (phase == Phase::dwell && t - phase_start >= dwell) {
            phase = Phase::depart;
            phase_start = dwell_end = t;
        } else if (phase == Phase::depart && t - phase_start >= tpl.depart_duration) {
            break;
        }

        // commands
        double a_rate = 0.0; // deg/s
        if (phase == Phase::approach) a.speed = sa_app;
        else if (phase == Phase::dwell) { a.speed = sa_dwell; a_rate = turn / 60.0; }
        else a.speed = sa_dep;

        if (phase == Phase::depart) {
            b.heading = geo::wrap360(a.heading + side * dep_turn);
            b.speed = sb_dep;
        } else {
            const auto want = geo::velocity_vector(a.speed, a.heading) + kGain * (station() - b.pos);
            double v = geo::norm(want) / geo::kKnotToMps;
            if (phase == Phase::approach) v = std::min(v, sb_app);
            b.speed = v;
            if (geo::norm(want) > 1e-9) b.heading = geo::wrap360(geo::rad2deg(std::atan2(want.east, want.north)));
        }

        const auto ts = static_cast<Timestamp>(t);
        if (ts % place.step == 0) {
            const Timestamp stamp = place.t0 + ts;
            out.traj_a.points.push_back(detail::sample(a, stamp, place.origin, tpl.noise, noise_rng));
            out.traj_b.points.push_back(detail::sample(b, stamp, place.origin, tpl.noise, noise_rng));
        }

        // integrate
        a.heading = geo::wrap360(a.heading + a_rate * dt);
        a.pos = a.pos + dt * geo::velocity_vector(a.speed, a.heading);
        b.pos = b.pos + dt * geo::velocity_vector(b.speed, b.heading);
    }

    const auto step = place.step;
    auto ceil_grid = [&](double s) { return place.t0 + static_cast<Timestamp>(std::ceil(s / step)) * step; };
    auto floor_grid = [&](double s) { return place.t0 + static_cast<Timestamp>(std::floor(s / step)) * step; };
    out.dwell_start = ceil_grid(dwell_start);
    out.dwell_end = std::max(out.dwell_start, floor_grid(dwell_end));
    out.traj_a = derive_rot(std::move(out.traj_a));
    out.traj_b = derive_rot(std::move(out.traj_b));
    return out;
}

struct CorpusSpec {
    std::vector<std::size_t> counts = std::vector<std::size_t>(5, 200);
    geo::GeoPoint origin{48.2, -123.5};
    Timestamp step = 60;
    Timestamp base_time = 1230768000;
    std::uint64_t master_seed = 42;
    std::vector<ScenarioTemplate> templates = default_templates();
    EngagementParams engagement;
};

inline std::uint64_t sample_seed(std::uint64_t master, std::size_t cls, std::size_t index) {
    return vesselwatch::detail::mix_seed(vesselwatch::detail::mix_seed(master, cls), index);
}

struct ManifestRow {
    std::string sample_id;
    std::string class_name;
    std::uint64_t seed = 0;
    CandidatePair pair;
};

struct Corpus {
    std::vector<LabeledCandidate> samples;
    std::vector<ManifestRow> manifest;
};

// Placement depends only on (class, index): classes sit 40 km apart, samples 3 h apart.
inline Placement placement_for(const CorpusSpec& spec, std::size_t cls, std::size_t index, std::uint64_t seed) {
    std::mt19937_64 rng(vesselwatch::detail::mix_seed(seed, 0xC0FFEE));
    const geo::LocalVector offset{40000.0 * static_cast<double>(cls) + Range{-3000, 3000}.draw(rng),
                                  Range{-3000, 3000}.draw(rng)};
    Placement p;
    p.origin = geo::from_local(spec.origin, offset);
    p.t0 = spec.base_time + static_cast<Timestamp>(index) * 10800;
    p.step = spec.step;
    const std::uint64_t base = 366000000ULL + (cls * 100000ULL + index) * 2ULL;
    p.id_a = std::to_string(base);
    p.id_b = std::to_string(base + 1);
    return p;
}

// Candidate interval: the detected engagement overlapping the scripted dwell the most,
// falling back to the scripted dwell itself.
inline CandidatePair candidate_for(const GeneratedScenario& g, const EngagementParams& params) {
    const auto found = detect_candidates({g.traj_a, g.traj_b}, params);
    std::optional<CandidatePair> best;
    Timestamp best_overlap = -1;
    for (const auto& c : found) {
        const Timestamp overlap = std::min(c.t_end, g.dwell_end) - std::max(c.t_start, g.dwell_start);
        if (overlap > best_overlap) {
            best_overlap = overlap;
            best = c;
        }
    }
    if (best && best_overlap >= 0) return *best;
    return {g.traj_a.vessel_id, g.traj_b.vessel_id, g.dwell_start, std::max(g.dwell_end, g.dwell_start + 60)};
}

inline LabeledCandidate generate_sample(const CorpusSpec& spec, std::size_t cls, std::size_t index, ManifestRow* row = nullptr) {
    const std::uint64_t seed = sample_seed(spec.master_seed, cls, index);
    const auto& tpl = spec.templates.at(cls);
    auto g = generate_scenario(tpl, seed, placement_for(spec, cls, index, seed));
    const CandidatePair pair = candidate_for(g, spec.engagement);
    if (row) *row = {tpl.class_name + "-" + std::to_string(index), tpl.class_name, seed, pair};
    return {pair, std::move(g.traj_a), std::move(g.traj_b), cls};
}

inline Corpus generate_corpus(const CorpusSpec& spec) {
    if (spec.counts.size() > spec.templates.size()) throw InputError("corpus spec names more classes than templates");
    Corpus corpus;
    for (std::size_t cls = 0; cls < spec.counts.size(); ++cls) {
        for (std::size_t i = 0; i < spec.counts[cls]; ++i) {
            ManifestRow row;
            corpus.samples.push_back(generate_sample(spec, cls, i, &row));
            corpus.manifest.push_back(std::move(row));
        }
    }
    return corpus;
}

inline std::vector<AisRecord> to_ais_records(const std::vector<LabeledCandidate>& samples) {
    std::vector<AisRecord> out;
    for (const auto& s : samples) {
        for (const Trajectory* tr : {&s.traj_a, &s.traj_b}) {
            for (const auto& p : tr->points) {
                out.push_back({tr->vessel_id, p.timestamp, p.lat, p.lon, p.sog, p.cog, p.rot, tr->meta.vessel_type,
                               tr->meta.length});
            }
        }
    }
    return out;
}

inline void write_manifest_csv(std::ostream& out, const std::vector<ManifestRow>& rows) {
    out << "sample_id,class,seed,vessel_a,vessel_b,t_start,t_end\n";
    for (const auto& r : rows) {
        out << r.sample_id << ',' << r.class_name << ',' << r.seed << ',' << r.pair.vessel_a << ',' << r.pair.vessel_b
            << ',' << r.pair.t_start << ',' << r.pair.t_end << '\n';
    }
}

inline std::vector<ManifestRow> read_manifest_csv(std::istream& in) {
    std::vector<ManifestRow> rows;
    std::string line;
    bool header = true;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (csv::is_comment_or_blank(line)) continue;
        if (header) { header = false; continue; }
        const auto f = csv::split_line(line);
        auto fail = [&](const char* what) { throw InputError("manifest line " + std::to_string(line_no) + ": " + what); };
        if (f.size() < 7) fail("expected 7 fields");
        std::uint64_t seed = 0;
        const auto [p, ec] = std::from_chars(f[2].data(), f[2].data() + f[2].size(), seed);
        if (ec != std::errc{} || p != f[2].data() + f[2].size()) fail("bad seed");
        auto t0 = csv::parse_int(f[5]);
        auto t1 = csv::parse_int(f[6]);
        if (!t0 || !t1 || *t0 > *t1) fail("bad interval");
        CandidatePair pair{f[3], f[4], *t0, *t1};
        if (pair.vessel_b < pair.vessel_a) std::swap(pair.vessel_a, pair.vessel_b);
        rows.push_back({f[0], f[1], seed, pair});
    }
    return rows;
}

} // namespace vesselwatch::simgen
