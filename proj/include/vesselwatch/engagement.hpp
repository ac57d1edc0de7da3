#pragma once

#include <algorithm>
#include <functional>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "vesselwatch/csv.hpp"
#include "vesselwatch/error.hpp"
#include "vesselwatch/geo.hpp"
#include "vesselwatch/ingest.hpp"

namespace vesselwatch {

struct EngagementParams {
    double delta = 2000.0;       // DBSCAN epsilon, meters
    double delta_prime = 500.0;  // proximity range, meters
    double tau = 600.0;          // convergence horizon, seconds
    double theta_default = 10.0; // SoG threshold, knots
    std::map<VesselType, double> theta;
    Timestamp min_duration = 300;

    double theta_for(VesselType t) const {
        auto it = theta.find(t);
        return it == theta.end() ? theta_default : it->second;
    }

    void validate() const {
        if (!(delta_prime > 0.0) || !(delta_prime <= delta)) throw InputError("engagement: require 0 < delta_prime <= delta");
        if (!(tau > 0.0)) throw InputError("engagement: tau must be positive");
        if (!(theta_default > 0.0)) throw InputError("engagement: theta must be positive");
        for (const auto& [type, v] : theta) {
            if (!(v > 0.0)) throw InputError("engagement: theta for " + std::string(to_string(type)) + " must be positive");
        }
        if (min_duration < 0) throw InputError("engagement: min_duration must be >= 0");
    }
};

// Kinematic state of one vessel at one grid timestamp.
struct VesselState {
    std::string vessel_id;
    VesselType type = VesselType::other;
    geo::GeoPoint position;
    double sog = 0.0;
    double cog = 0.0;
};

struct Snapshot {
    Timestamp timestamp = 0;
    std::vector<VesselState> entries;
};

struct Cluster {
    Timestamp timestamp = 0;
    std::vector<std::string> members; // sorted
};

struct CandidatePair {
    std::string vessel_a; // vessel_a < vessel_b
    std::string vessel_b;
    Timestamp t_start = 0;
    Timestamp t_end = 0;

    std::string id() const { return "p" + vessel_a + "_" + vessel_b + "_" + std::to_string(t_start); }

    friend auto operator<=>(const CandidatePair&, const CandidatePair&) = default;
};

// DBSCAN over haversine distance. The query point counts toward its own neighborhood.
// Non-core points reached from a core point join the first cluster that reaches them.
inline std::vector<Cluster> cluster_vessels(const Snapshot& snap, double delta, std::size_t min_points = 2) {
    const std::size_t n = snap.entries.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return snap.entries[a].vessel_id < snap.entries[b].vessel_id;
    });

    auto region = [&](std::size_t i) {
        std::vector<std::size_t> out;
        for (std::size_t j : order) {
            if (geo::haversine_distance(snap.entries[i].position, snap.entries[j].position) <= delta) out.push_back(j);
        }
        return out;
    };

    constexpr int kUnvisited = -2;
    constexpr int kNoise = -1;
    std::vector<int> label(n, kUnvisited);
    int next_id = 0;
    for (std::size_t i : order) {
        if (label[i] != kUnvisited) continue;
        auto seeds = region(i);
        if (seeds.size() < min_points) {
            label[i] = kNoise;
            continue;
        }
        const int id = next_id++;
        label[i] = id;
        for (std::size_t k = 0; k < seeds.size(); ++k) {
            const std::size_t q = seeds[k];
            if (label[q] == kNoise) label[q] = id;
            if (label[q] != kUnvisited) continue;
            label[q] = id;
            auto more = region(q);
            if (more.size() >= min_points) seeds.insert(seeds.end(), more.begin(), more.end());
        }
    }

    std::vector<Cluster> clusters(static_cast<std::size_t>(next_id), Cluster{snap.timestamp, {}});
    for (std::size_t i : order) {
        if (label[i] >= 0) clusters[static_cast<std::size_t>(label[i])].members.push_back(snap.entries[i].vessel_id);
    }
    std::erase_if(clusters, [](const Cluster& c) { return c.members.size() < 2; });
    return clusters;
}

namespace detail {

inline geo::GeoPoint midpoint(geo::GeoPoint a, geo::GeoPoint b) {
    return {(a.lat + b.lat) / 2.0, geo::wrap180(a.lon + geo::wrap180(b.lon - a.lon) / 2.0)};
}

} // namespace detail

// Proximity: current separation within delta_prime.
inline bool proximity(const VesselState& a, const VesselState& b, double delta_prime) {
    return geo::haversine_distance(a.position, b.position) <= delta_prime;
}

// Converging: constant-velocity closest approach within `tau` seconds is within delta_prime.
inline bool converging(const VesselState& a, const VesselState& b, double delta_prime, double tau) {
    if (geo::haversine_distance(a.position, b.position) >= geo::kMaxLocalPatch / 2.0) return false;
    const auto mid = detail::midpoint(a.position, b.position);
    const auto r = geo::to_local(mid, b.position) - geo::to_local(mid, a.position);
    const auto w = geo::velocity_vector(b.sog, b.cog) - geo::velocity_vector(a.sog, a.cog);
    return geo::cpa(r, w, tau).min_distance <= delta_prime;
}

inline bool is_engaging(const VesselState& a, const VesselState& b, const EngagementParams& p) {
    return a.sog < p.theta_for(a.type) && b.sog < p.theta_for(b.type) &&
           (proximity(a, b, p.delta_prime) || converging(a, b, p.delta_prime, p.tau));
}

// Disjunction of engagement conditions; the slow-and-close/converging condition is always registered.
class EngagementPredicate {
public:
    using Condition = std::function<bool(const VesselState&, const VesselState&, const EngagementParams&)>;

    EngagementPredicate() { conditions_.emplace_back(is_engaging); }

    void add_condition(Condition c) { conditions_.push_back(std::move(c)); }

    bool operator()(const VesselState& a, const VesselState& b, const EngagementParams& p) const {
        return std::any_of(conditions_.begin(), conditions_.end(), [&](const Condition& c) { return c(a, b, p); });
    }

private:
    std::vector<Condition> conditions_;
};

inline VesselState state_at(const Trajectory& traj, const TrackPoint& p) {
    return {traj.vessel_id, traj.meta.vessel_type, p.position(), p.sog, p.cog};
}

// Grid step shared by all trajectories; nullopt when no trajectory has two points.
inline std::optional<Timestamp> common_grid_step(const std::vector<Trajectory>& trajectories) {
    std::optional<Timestamp> step;
    for (const auto& tr : trajectories) {
        for (std::size_t i = 1; i < tr.points.size(); ++i) {
            const Timestamp d = tr.points[i].timestamp - tr.points[i - 1].timestamp;
            if (!step) step = d;
            if (d != *step || d <= 0) throw InputError("mixed grid steps");
        }
    }
    return step;
}

inline std::vector<CandidatePair> detect_candidates(const std::vector<Trajectory>& trajectories,
                                                    const EngagementParams& params,
                                                    const EngagementPredicate& engaging = {}) {
    params.validate();
    const auto step = common_grid_step(trajectories);
    if (!step) return {};

    // timestamp -> (vessel_id -> state); first trajectory segment wins on a repeated vessel.
    std::map<Timestamp, std::map<std::string, VesselState>> timeline;
    for (const auto& tr : trajectories) {
        for (const auto& p : tr.points) timeline[p.timestamp].try_emplace(tr.vessel_id, state_at(tr, p));
    }

    struct Run { Timestamp start; Timestamp last; };
    std::map<std::pair<std::string, std::string>, Run> open;
    std::vector<CandidatePair> out;
    auto close = [&](const std::pair<std::string, std::string>& key, const Run& run) {
        if (run.last - run.start >= params.min_duration) out.push_back({key.first, key.second, run.start, run.last});
    };

    for (const auto& [t, states] : timeline) {
        Snapshot snap{t, {}};
        snap.entries.reserve(states.size());
        for (const auto& [id, s] : states) snap.entries.push_back(s);
        for (const auto& cluster : cluster_vessels(snap, params.delta)) {
            const auto& m = cluster.members;
            for (std::size_t i = 0; i < m.size(); ++i) {
                for (std::size_t j = i + 1; j < m.size(); ++j) {
                    if (!engaging(states.at(m[i]), states.at(m[j]), params)) continue;
                    auto key = std::make_pair(m[i], m[j]);
                    auto it = open.find(key);
                    if (it != open.end() && it->second.last + *step == t) {
                        it->second.last = t;
                    } else {
                        if (it != open.end()) close(key, it->second);
                        open[key] = Run{t, t};
                    }
                }
            }
        }
    }
    for (const auto& [key, run] : open) close(key, run);
    std::sort(out.begin(), out.end());
    return out;
}

inline void write_candidates_csv(std::ostream& out, const std::vector<CandidatePair>& cands) {
    out << "vessel_a,vessel_b,t_start,t_end\n";
    for (const auto& c : cands) out << c.vessel_a << ',' << c.vessel_b << ',' << c.t_start << ',' << c.t_end << '\n';
}

inline std::vector<CandidatePair> read_candidates_csv(std::istream& in) {
    std::vector<CandidatePair> out;
    std::string line;
    bool header = true;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (csv::is_comment_or_blank(line)) continue;
        if (header) { header = false; continue; }
        const auto f = csv::split_line(line);
        if (f.size() < 4) throw InputError("candidates line " + std::to_string(line_no) + ": expected 4 fields");
        auto t0 = csv::parse_int(f[2]);
        auto t1 = csv::parse_int(f[3]);
        if (!t0 || !t1 || *t0 > *t1) throw InputError("candidates line " + std::to_string(line_no) + ": bad interval");
        CandidatePair c{f[0], f[1], *t0, *t1};
        if (c.vessel_b < c.vessel_a) std::swap(c.vessel_a, c.vessel_b);
        out.push_back(std::move(c));
    }
    return out;
}

} // namespace vesselwatch
