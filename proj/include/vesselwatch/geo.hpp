#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

#include "vesselwatch/error.hpp"

namespace vesselwatch::geo {

inline constexpr double kEarthRadius = 6'371'000.0;     // meters, spherical model
inline constexpr double kKnotToMps = 0.514444;          // 1 kn in m/s
inline constexpr double kMaxLocalPatch = 100'000.0;     // meters

struct GeoPoint {
    double lat = 0.0; // degrees [-90, 90]
    double lon = 0.0; // degrees [-180, 180)
};

struct LocalVector {
    double east = 0.0;
    double north = 0.0;

    friend LocalVector operator+(LocalVector a, LocalVector b) { return {a.east + b.east, a.north + b.north}; }
    friend LocalVector operator-(LocalVector a, LocalVector b) { return {a.east - b.east, a.north - b.north}; }
    friend LocalVector operator*(double s, LocalVector a) { return {s * a.east, s * a.north}; }
};

inline double dot(LocalVector a, LocalVector b) { return a.east * b.east + a.north * b.north; }
inline double norm(LocalVector a) { return std::hypot(a.east, a.north); }

inline double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

// Maps an angle difference in degrees onto [-180, 180).
inline double wrap180(double deg) {
    double w = std::fmod(deg + 180.0, 360.0);
    if (w < 0.0) w += 360.0;
    w -= 180.0;
    return w >= 180.0 ? w - 360.0 : w;
}

// Maps an angle in degrees onto [0, 360).
inline double wrap360(double deg) {
    double w = std::fmod(deg, 360.0);
    if (w < 0.0) w += 360.0;
    return w >= 360.0 ? 0.0 : w;
}

inline double haversine_distance(GeoPoint a, GeoPoint b) {
    const double phi1 = deg2rad(a.lat);
    const double phi2 = deg2rad(b.lat);
    const double dphi = phi2 - phi1;
    const double dlambda = deg2rad(b.lon - a.lon);
    const double s1 = std::sin(dphi / 2.0);
    const double s2 = std::sin(dlambda / 2.0);
    const double h = std::clamp(s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2, 0.0, 1.0);
    return 2.0 * kEarthRadius * std::asin(std::sqrt(h));
}

// Equirectangular projection onto the tangent plane at `origin`.
inline LocalVector to_local(GeoPoint origin, GeoPoint p) {
    if (haversine_distance(origin, p) >= kMaxLocalPatch) {
        throw InputError("patch too large");
    }
    const double dlon = wrap180(p.lon - origin.lon);
    return {kEarthRadius * std::cos(deg2rad(origin.lat)) * deg2rad(dlon),
            kEarthRadius * deg2rad(p.lat - origin.lat)};
}

// Inverse of to_local on the same patch.
inline GeoPoint from_local(GeoPoint origin, LocalVector v) {
    const double lat = origin.lat + rad2deg(v.north / kEarthRadius);
    const double lon = origin.lon + rad2deg(v.east / (kEarthRadius * std::cos(deg2rad(origin.lat))));
    double wrapped = wrap180(lon);
    return {lat, wrapped};
}

// Velocity in m/s from speed over ground (knots) and course over ground (degrees true).
inline LocalVector velocity_vector(double sog_knots, double cog_deg) {
    const double v = sog_knots * kKnotToMps;
    const double c = deg2rad(cog_deg);
    return {v * std::sin(c), v * std::cos(c)};
}

struct ClosestApproach {
    double t_star = 0.0;       // seconds from now
    double min_distance = 0.0; // meters
};

// Closest point of approach for relative position `rel_pos` moving at constant
// relative velocity `rel_vel`, restricted to [0, horizon].
inline ClosestApproach cpa(LocalVector rel_pos, LocalVector rel_vel, double horizon) {
    const double ww = dot(rel_vel, rel_vel);
    double t = 0.0;
    if (ww > 0.0) {
        t = std::clamp(-dot(rel_pos, rel_vel) / ww, 0.0, horizon);
    }
    return {t, norm(rel_pos + t * rel_vel)};
}

} // namespace vesselwatch::geo
