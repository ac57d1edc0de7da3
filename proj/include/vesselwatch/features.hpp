#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vesselwatch/engagement.hpp"
#include "vesselwatch/error.hpp"
#include "vesselwatch/geo.hpp"
#include "vesselwatch/ingest.hpp"

namespace vesselwatch {

enum class FeatureKind { SoG_a, SoG_b, CoG_a, CoG_b, RoT_a, RoT_b, Distance, DeltaSoG, DeltaCoG, DeltaRoT };

inline constexpr std::size_t kFeatureCount = 10;

inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {
    "SoG_a", "SoG_b", "CoG_a", "CoG_b", "RoT_a", "RoT_b", "Distance", "DeltaSoG", "DeltaCoG", "DeltaRoT"};

inline std::string_view to_string(FeatureKind k) { return kFeatureNames[static_cast<std::size_t>(k)]; }

inline std::optional<FeatureKind> parse_feature_kind(std::string_view s) {
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
        if (kFeatureNames[i] == s) return static_cast<FeatureKind>(i);
    }
    return std::nullopt;
}

using FeatureValues = std::array<double, kFeatureCount>;

struct ObservationType {
    std::size_t id = 0;
    std::vector<FeatureKind> features;

    void validate() const {
        if (features.empty()) throw InputError("observation type " + std::to_string(id) + " has no features");
        for (std::size_t i = 0; i < features.size(); ++i) {
            for (std::size_t j = i + 1; j < features.size(); ++j) {
                if (features[i] == features[j]) {
                    throw InputError("observation type " + std::to_string(id) + " repeats feature " +
                                     std::string(to_string(features[i])));
                }
            }
        }
    }

    friend bool operator==(const ObservationType&, const ObservationType&) = default;
};

inline std::vector<ObservationType> default_observation_types() {
    using enum FeatureKind;
    return {{0, {Distance, DeltaSoG}}, {1, {DeltaCoG, DeltaRoT}}, {2, {SoG_a, SoG_b}}, {3, {Distance, DeltaCoG}}};
}

struct ObservationPoint {
    Timestamp timestamp = 0;
    std::vector<double> values;
};

struct ObservationSequence {
    CandidatePair pair;
    ObservationType obs_type;
    std::vector<ObservationPoint> points;
};

inline FeatureValues features_of(const TrackPoint& a, const TrackPoint& b) {
    FeatureValues v{};
    using enum FeatureKind;
    auto set = [&](FeatureKind k, double x) { v[static_cast<std::size_t>(k)] = x; };
    set(SoG_a, a.sog);
    set(SoG_b, b.sog);
    set(CoG_a, a.cog);
    set(CoG_b, b.cog);
    set(RoT_a, a.rot);
    set(RoT_b, b.rot);
    set(Distance, geo::haversine_distance(a.position(), b.position()));
    set(DeltaSoG, a.sog - b.sog);
    set(DeltaCoG, geo::wrap180(a.cog - b.cog));
    set(DeltaRoT, a.rot - b.rot);
    return v;
}

// All ten kinematic features of the pair at grid time t.
inline FeatureValues extract_features(const Trajectory& traj_a, const Trajectory& traj_b, const CandidatePair& pair,
                                      Timestamp t) {
    if (t < pair.t_start || t > pair.t_end) throw InputError("timestamp outside candidate interval");
    const TrackPoint* a = traj_a.at(t);
    const TrackPoint* b = traj_b.at(t);
    if (!a || !b) throw InputError("trajectory has no grid point at t=" + std::to_string(t));
    return features_of(*a, *b);
}

inline std::vector<double> select_features(const FeatureValues& all, const ObservationType& obs_type) {
    std::vector<double> out;
    out.reserve(obs_type.features.size());
    for (FeatureKind k : obs_type.features) out.push_back(all[static_cast<std::size_t>(k)]);
    return out;
}

// Grid timestamps covering the pair interval on trajectory `a`'s step.
inline std::vector<Timestamp> interval_grid(const Trajectory& a, const CandidatePair& pair) {
    if (a.points.size() < 2) throw InputError("trajectory " + a.vessel_id + " too short for observation");
    const Timestamp step = a.points[1].timestamp - a.points[0].timestamp;
    std::vector<Timestamp> grid;
    for (Timestamp t = pair.t_start; t <= pair.t_end; t += step) grid.push_back(t);
    return grid;
}

// Full feature rows over the pair interval; error names every missing timestamp.
inline std::vector<std::pair<Timestamp, FeatureValues>> feature_rows(const Trajectory& traj_a, const Trajectory& traj_b,
                                                                     const CandidatePair& pair) {
    std::vector<std::pair<Timestamp, FeatureValues>> rows;
    std::vector<Timestamp> missing;
    for (Timestamp t : interval_grid(traj_a, pair)) {
        const TrackPoint* a = traj_a.at(t);
        const TrackPoint* b = traj_b.at(t);
        if (!a || !b) {
            missing.push_back(t);
            continue;
        }
        rows.emplace_back(t, features_of(*a, *b));
    }
    if (!missing.empty()) {
        std::string msg = "coverage gap for " + pair.id() + " at t=";
        for (std::size_t i = 0; i < missing.size(); ++i) msg += (i ? "," : "") + std::to_string(missing[i]);
        throw InputError(msg);
    }
    if (rows.size() < 2) throw InputError("observation for " + pair.id() + " shorter than 2 points");
    return rows;
}

inline ObservationSequence build_observation(const Trajectory& traj_a, const Trajectory& traj_b,
                                             const CandidatePair& pair, const ObservationType& obs_type) {
    ObservationSequence seq{pair, obs_type, {}};
    for (const auto& [t, all] : feature_rows(traj_a, traj_b, pair)) {
        seq.points.push_back({t, select_features(all, obs_type)});
    }
    return seq;
}

struct Standardization {
    double mean = 0.0;
    double spread = 1.0;
};

struct Codebook {
    ObservationType obs_type;
    std::vector<Standardization> scale;
    std::vector<std::vector<double>> centroids; // in standardized space

    std::size_t size() const { return centroids.size(); }

    std::vector<double> standardize(std::span<const double> x) const {
        std::vector<double> z(x.size());
        for (std::size_t d = 0; d < x.size(); ++d) z[d] = (x[d] - scale[d].mean) / scale[d].spread;
        return z;
    }

    // Nearest centroid in standardized space; ties go to the lowest index.
    std::size_t nearest(std::span<const double> x) const {
        const auto z = standardize(x);
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < centroids.size(); ++k) {
            double d = 0.0;
            for (std::size_t j = 0; j < z.size(); ++j) {
                const double e = z[j] - centroids[k][j];
                d += e * e;
            }
            if (d < best_d) {
                best_d = d;
                best = k;
            }
        }
        return best;
    }
};

struct KMeansOptions {
    std::size_t max_iterations = 100;
    double tolerance = 1e-6;      // max centroid movement to stop
    double spread_floor = 1e-9;
};

// Within-cluster sum of squares recorded after each assignment step.
struct KMeansTrace {
    std::vector<double> wcss;
};

namespace detail {

inline double sq_dist(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double e = a[i] - b[i];
        s += e * e;
    }
    return s;
}

} // namespace detail

// Standardize, then k-means with k-means++ seeding. If the data holds fewer than K
// distinct points, the codebook keeps one centroid per distinct point.
inline Codebook fit_codebook(const std::vector<std::vector<double>>& training, std::size_t K, std::uint64_t seed,
                             const ObservationType& obs_type = {}, const KMeansOptions& opt = {},
                             KMeansTrace* trace = nullptr) {
    if (K == 0) throw InputError("codebook size must be >= 1");
    if (training.size() < K) {
        throw InputError("codebook needs at least " + std::to_string(K) + " training points, got " +
                         std::to_string(training.size()));
    }
    const std::size_t dim = training.front().size();
    for (const auto& x : training) {
        if (x.size() != dim) throw InputError("codebook training vectors differ in dimension");
    }

    Codebook cb{obs_type, std::vector<Standardization>(dim), {}};
    const double n = static_cast<double>(training.size());
    for (std::size_t d = 0; d < dim; ++d) {
        double mean = 0.0;
        for (const auto& x : training) mean += x[d];
        mean /= n;
        double var = 0.0;
        for (const auto& x : training) var += (x[d] - mean) * (x[d] - mean);
        cb.scale[d] = {mean, std::max(std::sqrt(var / n), opt.spread_floor)};
    }
    std::vector<std::vector<double>> z;
    z.reserve(training.size());
    for (const auto& x : training) z.push_back(cb.standardize(x));

    // k-means++ seeding
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto& cent = cb.centroids;
    cent.push_back(z[std::uniform_int_distribution<std::size_t>(0, z.size() - 1)(rng)]);
    std::vector<double> d2(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) d2[i] = detail::sq_dist(z[i], cent[0]);
    while (cent.size() < K) {
        double total = 0.0;
        for (double v : d2) total += v;
        if (!(total > 0.0)) break;
        double r = unit(rng) * total;
        std::size_t pick = z.size() - 1;
        for (std::size_t i = 0; i < z.size(); ++i) {
            if (d2[i] <= 0.0) continue;
            r -= d2[i];
            if (r < 0.0) {
                pick = i;
                break;
            }
        }
        while (d2[pick] <= 0.0) --pick; // rounding fell off the end
        cent.push_back(z[pick]);
        for (std::size_t i = 0; i < z.size(); ++i) d2[i] = std::min(d2[i], detail::sq_dist(z[i], cent.back()));
    }

    // Lloyd iterations
    const std::size_t k = cent.size();
    std::vector<std::size_t> assign(z.size(), 0);
    for (std::size_t iter = 0; iter < opt.max_iterations; ++iter) {
        double wcss = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c) {
                const double d = detail::sq_dist(z[i], cent[c]);
                if (d < best) {
                    best = d;
                    assign[i] = c;
                }
            }
            wcss += best;
        }
        if (trace) trace->wcss.push_back(wcss);

        std::vector<std::vector<double>> sum(k, std::vector<double>(dim, 0.0));
        std::vector<std::size_t> count(k, 0);
        for (std::size_t i = 0; i < z.size(); ++i) {
            ++count[assign[i]];
            for (std::size_t d = 0; d < dim; ++d) sum[assign[i]][d] += z[i][d];
        }
        double movement = 0.0;
        std::vector<bool> reseeded(z.size(), false);
        for (std::size_t c = 0; c < k; ++c) {
            std::vector<double> next = cent[c];
            if (count[c] > 0) {
                for (std::size_t d = 0; d < dim; ++d) next[d] = sum[c][d] / static_cast<double>(count[c]);
            } else {
                // Empty cluster: re-seed at the point farthest from its assigned centroid.
                std::size_t far = 0;
                double far_d = -1.0;
                for (std::size_t i = 0; i < z.size(); ++i) {
                    const double d = detail::sq_dist(z[i], cent[assign[i]]);
                    if (!reseeded[i] && d > far_d) {
                        far_d = d;
                        far = i;
                    }
                }
                reseeded[far] = true;
                next = z[far];
            }
            movement = std::max(movement, std::sqrt(detail::sq_dist(next, cent[c])));
            cent[c] = std::move(next);
        }
        if (movement < opt.tolerance) break;
    }
    return cb;
}

struct SymbolSequence {
    std::vector<std::size_t> symbols;
    ObservationType obs_type;
    CandidatePair pair;
};

inline SymbolSequence quantize(const ObservationSequence& seq, const Codebook& cb) {
    if (!(seq.obs_type.features == cb.obs_type.features)) throw InputError("codebook observation type mismatch");
    SymbolSequence out{{}, seq.obs_type, seq.pair};
    out.symbols.reserve(seq.points.size());
    for (const auto& p : seq.points) out.symbols.push_back(cb.nearest(p.values));
    return out;
}

} // namespace vesselwatch
