#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "vesselwatch/features.hpp"

using namespace vesselwatch;
using enum FeatureKind;

namespace {

Trajectory line(std::string id, Timestamp t0, std::size_t n, double sog, double cog, double lat = 48.0) {
    Trajectory tr;
    tr.vessel_id = id;
    tr.meta.vessel_id = id;
    for (std::size_t i = 0; i < n; ++i) {
        tr.points.push_back({t0 + static_cast<Timestamp>(i) * 60, lat + 1e-4 * static_cast<double>(i), -123.0, sog, cog, 0.0});
    }
    return tr;
}

double at(const FeatureValues& v, FeatureKind k) { return v[static_cast<std::size_t>(k)]; }

Codebook manual(std::vector<std::vector<double>> centroids) {
    const std::size_t dim = centroids.front().size();
    return {ObservationType{0, std::vector<FeatureKind>(dim == 1 ? 1 : 2, Distance)}, std::vector<Standardization>(dim),
            std::move(centroids)};
}

} // namespace

TEST(Extract, DeltaSpeed) {
    const auto a = line("a", 0, 3, 7, 0), b = line("b", 0, 3, 4, 0);
    const auto v = extract_features(a, b, {"a", "b", 0, 120}, 60);
    EXPECT_EQ(at(v, DeltaSoG), 3.0);
    EXPECT_EQ(at(v, SoG_a), 7.0);
    EXPECT_EQ(at(v, SoG_b), 4.0);
}

TEST(Extract, DeltaCourseWraps) {
    const auto v = extract_features(line("a", 0, 2, 1, 10), line("b", 0, 2, 1, 350), {"a", "b", 0, 60}, 0);
    EXPECT_DOUBLE_EQ(at(v, DeltaCoG), 20.0);
}

TEST(Extract, IdenticalStatesGiveZeros) {
    const auto a = line("a", 0, 2, 5, 45);
    auto b = a;
    b.vessel_id = "b";
    const auto v = extract_features(a, b, {"a", "b", 0, 60}, 60);
    for (auto k : {Distance, DeltaSoG, DeltaCoG, DeltaRoT}) EXPECT_EQ(at(v, k), 0.0);
}

TEST(Extract, OutsideIntervalThrows) {
    const auto a = line("a", 0, 5, 1, 0), b = line("b", 0, 5, 1, 0);
    EXPECT_THROW(extract_features(a, b, {"a", "b", 60, 120}, 180), InputError);
}

TEST(Observation, CountsPoints) {
    const auto a = line("a", 0, 20, 3, 0), b = line("b", 0, 20, 5, 90, 48.001);
    const auto seq = build_observation(a, b, {"a", "b", 60, 660}, {0, {Distance, DeltaSoG}});
    ASSERT_EQ(seq.points.size(), 11u);
    for (const auto& p : seq.points) {
        ASSERT_EQ(p.values.size(), 2u);
        EXPECT_EQ(p.values[1], -2.0);
    }
    EXPECT_EQ(seq.points.front().timestamp, 60);
    EXPECT_EQ(seq.points.back().timestamp, 660);
}

TEST(Observation, ConstantSpeedIsConstant) {
    const auto a = line("a", 0, 10, 6.5, 0), b = line("b", 0, 10, 2, 0);
    for (const auto& p : build_observation(a, b, {"a", "b", 0, 540}, {0, {SoG_a}}).points) EXPECT_EQ(p.values[0], 6.5);
}

TEST(Observation, SwappingRolesIsAntisymmetric) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> sog(0, 12), cog(0, 360);
    Trajectory a = line("a", 0, 30, 0, 0), b = line("b", 0, 30, 0, 0, 48.002);
    for (std::size_t i = 0; i < 30; ++i) {
        a.points[i].sog = sog(rng);
        a.points[i].cog = cog(rng);
        b.points[i].sog = sog(rng);
        b.points[i].cog = i == 7 ? geo::wrap360(a.points[i].cog + 180.0) : cog(rng);
    }
    a = derive_rot(a);
    b = derive_rot(b);
    const ObservationType ot{0, {DeltaSoG, DeltaCoG, DeltaRoT, Distance}};
    const auto ab = build_observation(a, b, {"a", "b", 0, 1740}, ot);
    const auto ba = build_observation(b, a, {"a", "b", 0, 1740}, ot);
    for (std::size_t i = 0; i < ab.points.size(); ++i) {
        EXPECT_EQ(ab.points[i].values[0], -ba.points[i].values[0]);
        EXPECT_DOUBLE_EQ(std::abs(ab.points[i].values[1]), std::abs(ba.points[i].values[1]));
        EXPECT_LE(std::abs(ab.points[i].values[1]), 180.0);
        EXPECT_EQ(ab.points[i].values[2], -ba.points[i].values[2]);
        EXPECT_EQ(ab.points[i].values[3], ba.points[i].values[3]);
    }
}

TEST(Observation, CoverageGapNamesTimestamps) {
    auto a = line("a", 0, 10, 1, 0);
    const auto b = line("b", 0, 10, 1, 0);
    a.points.erase(a.points.begin() + 4);
    a.points.erase(a.points.begin() + 5);
    // Grid step is read from the first two points, which are intact.
    try {
        build_observation(a, b, {"a", "b", 0, 540}, {0, {Distance}});
        FAIL();
    } catch (const InputError& e) {
        EXPECT_NE(std::string(e.what()).find("at t=240,360"), std::string::npos) << e.what();
    }
}

TEST(Observation, CommutesWithResampling) {
    std::mt19937_64 rng(12);
    Trajectory a = line("a", 120, 25, 0, 0), b = line("b", 120, 25, 0, 0, 48.003);
    for (std::size_t i = 0; i < 25; ++i) {
        a.points[i].sog = static_cast<double>(rng() % 100) / 10.0;
        b.points[i].cog = static_cast<double>(rng() % 360);
    }
    a = derive_rot(a);
    b = derive_rot(b);
    const CandidatePair pair{"a", "b", 180, 1440};
    const ObservationType ot{0, {SoG_a, CoG_b, RoT_b, Distance, DeltaCoG}};
    const auto direct = build_observation(a, b, pair, ot);
    const auto resampled = build_observation(resample(a, 60), resample(b, 60), pair, ot);
    ASSERT_EQ(direct.points.size(), resampled.points.size());
    for (std::size_t i = 0; i < direct.points.size(); ++i) EXPECT_EQ(direct.points[i].values, resampled.points[i].values);
}

TEST(Codebook, SingleCentroidAtMean) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g(5.0, 2.0);
    std::vector<std::vector<double>> pts;
    for (int i = 0; i < 50; ++i) pts.push_back({g(rng), g(rng) * 10});
    const auto cb = fit_codebook(pts, 1, 3);
    ASSERT_EQ(cb.size(), 1u);
    EXPECT_NEAR(cb.centroids[0][0], 0.0, 1e-12);
    EXPECT_NEAR(cb.centroids[0][1], 0.0, 1e-12);
    EXPECT_GT(cb.scale[1].spread, cb.scale[0].spread);
}

TEST(Codebook, TwoBlobsMatchExhaustiveSplit) {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g(0.0, 0.1);
    std::vector<std::vector<double>> pts;
    for (int i = 0; i < 16; ++i) {
        const double c = (rng() % 2) ? 10.0 : -10.0;
        pts.push_back({c + g(rng), c + g(rng)});
    }
    const auto cb = fit_codebook(pts, 2, 9);
    const auto best = oracle::best_two_partition(pts);
    const std::size_t first = cb.nearest(pts[0]);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        EXPECT_EQ(cb.nearest(pts[i]) == first, best[i] == best[0]) << i;
        EXPECT_EQ(best[i] == best[0], (pts[i][0] > 0) == (pts[0][0] > 0));
    }
}

TEST(Codebook, DeterministicForSeed) {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<std::vector<double>> pts;
    for (int i = 0; i < 300; ++i) pts.push_back({u(rng), u(rng), u(rng)});
    const auto a = fit_codebook(pts, 16, 77), b = fit_codebook(pts, 16, 77);
    EXPECT_EQ(a.centroids, b.centroids);
    EXPECT_EQ(a.centroids.size(), 16u);
}

TEST(Codebook, WithinClusterScatterNeverIncreases) {
    for (std::uint64_t s = 0; s < 20; ++s) {
        std::mt19937_64 rng(s);
        std::normal_distribution<double> g(0.0, 1.0);
        std::vector<std::vector<double>> pts;
        for (int i = 0; i < 200; ++i) pts.push_back({g(rng) + (i % 3) * 2.0, g(rng)});
        KMeansTrace trace;
        fit_codebook(pts, 8, s, {}, {}, &trace);
        ASSERT_FALSE(trace.wcss.empty());
        for (std::size_t i = 1; i < trace.wcss.size(); ++i) EXPECT_LE(trace.wcss[i], trace.wcss[i - 1] + 1e-9);
    }
}

TEST(Codebook, TooFewPointsThrows) {
    EXPECT_THROW(fit_codebook({{1.0}, {2.0}}, 3, 0), InputError);
}

TEST(Codebook, FewerDistinctPointsThanK) {
    const auto cb = fit_codebook({{1.0}, {1.0}, {2.0}, {2.0}}, 3, 0);
    EXPECT_EQ(cb.size(), 2u);
}

TEST(Quantize, ExactMatchTiesAndIdentity) {
    auto cb = manual({{0, 0}, {1, 0}, {5, 5}, {3, 0}, {-1, 0}, {9, 9}});
    ObservationSequence seq{{}, cb.obs_type, {}};
    seq.points.push_back({0, {3, 0}});
    for (const auto& c : cb.centroids) seq.points.push_back({0, c});
    const auto q = quantize(seq, cb);
    EXPECT_EQ(q.symbols[0], 3u);
    for (std::size_t k = 0; k < cb.size(); ++k) EXPECT_EQ(q.symbols[1 + k], k);

    auto tie = manual({{10, 10}, {1, 0}, {10, -10}, {9, 9}, {-1, 0}});
    EXPECT_EQ(tie.nearest(std::vector<double>{0, 0}), 1u);
}

TEST(Quantize, TypeMismatchRejected) {
    auto cb = manual({{0, 0}});
    ObservationSequence seq{{}, {0, {SoG_a, SoG_b}}, {{0, {0, 0}}}};
    EXPECT_THROW(quantize(seq, cb), InputError);
}
