#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "vesselwatch/simgen.hpp"
#include "vesselwatch/workflow.hpp"

using namespace vesselwatch;
using namespace vesselwatch::simgen;

namespace {

std::string dump(const std::vector<Trajectory>& trajs) {
    std::ostringstream out;
    write_track_store(out, trajs);
    return out.str();
}

std::string dump(const LabeledCandidate& s) {
    return dump({s.traj_a, s.traj_b}) + s.pair.id() + "/" + std::to_string(s.pair.t_end) + "/" + std::to_string(s.label);
}

void expect_well_formed(const Trajectory& tr, Timestamp step) {
    ASSERT_GE(tr.points.size(), 2u);
    for (std::size_t i = 0; i < tr.points.size(); ++i) {
        const auto& p = tr.points[i];
        if (i) { EXPECT_EQ(p.timestamp - tr.points[i - 1].timestamp, step) << tr.vessel_id; }
        EXPECT_TRUE(std::isfinite(p.lat) && std::isfinite(p.lon));
        EXPECT_LE(std::abs(p.lat), 90.0);
        EXPECT_LE(std::abs(p.lon), 180.0);
        EXPECT_GE(p.sog, 0.0);
        EXPECT_GE(p.cog, 0.0);
        EXPECT_LT(p.cog, 360.0);
    }
}

} // namespace

TEST(Scenario, Deterministic) {
    const auto tpl = default_templates()[0];
    const auto a = generate_scenario(tpl, 11), b = generate_scenario(tpl, 11), c = generate_scenario(tpl, 12);
    EXPECT_EQ(dump({a.traj_a, a.traj_b}), dump({b.traj_a, b.traj_b}));
    EXPECT_EQ(a.dwell_start, b.dwell_start);
    EXPECT_NE(dump({a.traj_a, a.traj_b}), dump({c.traj_a, c.traj_b}));
}

TEST(Scenario, TypesAndLabelFollowTemplate) {
    for (const auto& tpl : default_templates()) {
        const auto g = generate_scenario(tpl, 3);
        EXPECT_EQ(g.label, tpl.class_id);
        EXPECT_EQ(g.traj_a.meta.vessel_type, tpl.type_a);
        EXPECT_EQ(g.traj_b.meta.vessel_type, tpl.type_b);
        EXPECT_LT(g.dwell_start, g.dwell_end);
        EXPECT_EQ(g.dwell_start % 60, 0);
    }
}

TEST(Scenario, DetectedCandidateCoversTugAssistDwell) {
    const auto tpl = default_templates()[0];
    const EngagementParams params;
    CorpusSpec spec;
    for (std::size_t i = 0; i < 20; ++i) {
        const auto seed = sample_seed(42, 0, i);
        const auto g = generate_scenario(tpl, seed, placement_for(spec, 0, i, seed));
        const auto found = detect_candidates({g.traj_a, g.traj_b}, params);
        ASSERT_FALSE(found.empty()) << "sample " << i;
        const auto c = candidate_for(g, params);
        const double overlap = static_cast<double>(std::min(c.t_end, g.dwell_end) - std::max(c.t_start, g.dwell_start));
        EXPECT_GE(overlap, 0.8 * static_cast<double>(g.dwell_end - g.dwell_start)) << "sample " << i;
    }
}

TEST(Scenario, NoiselessDwellStaysEngaged) {
    const double delta_prime = EngagementParams{}.delta_prime;
    for (auto tpl : default_templates()) {
        tpl.noise = {0.0, 0.0, 0.0};
        for (std::uint64_t seed = 0; seed < 200; ++seed) {
            const auto g = generate_scenario(tpl, seed);
            double sum = 0.0;
            std::size_t n = 0;
            for (const auto& pa : g.traj_a.points) {
                if (pa.timestamp < g.dwell_start || pa.timestamp > g.dwell_end) continue;
                const auto* pb = g.traj_b.at(pa.timestamp);
                ASSERT_NE(pb, nullptr);
                const double d = geo::haversine_distance(pa.position(), pb->position());
                EXPECT_LE(d, delta_prime) << tpl.class_name << " seed " << seed << " t=" << pa.timestamp;
                sum += d;
                ++n;
            }
            ASSERT_GT(n, 0u);
            const double mean = sum / static_cast<double>(n);
            EXPECT_GE(mean, tpl.separation.lo - kSeparationMargin / 2) << tpl.class_name << " seed " << seed;
            EXPECT_LE(mean, tpl.separation.hi + kSeparationMargin / 2) << tpl.class_name << " seed " << seed;
        }
    }
}

TEST(Scenario, SeparationBandsDoNotOverlap) {
    auto t = default_templates();
    std::sort(t.begin(), t.end(), [](const auto& x, const auto& y) { return x.separation.lo < y.separation.lo; });
    for (std::size_t i = 1; i < t.size(); ++i) {
        EXPECT_GE(t[i].separation.lo - t[i - 1].separation.hi, kSeparationMargin) << t[i].class_name;
    }
}

TEST(Scenario, WellFormedUnderFuzz) {
    const auto templates = default_templates();
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        const auto& tpl = templates[seed % templates.size()];
        Placement place;
        place.origin = {-60.0 + 0.12 * static_cast<double>(seed), -179.9 + 0.3599 * static_cast<double>(seed)};
        place.step = seed % 2 ? 60 : 30;
        place.t0 = 1230768000 + static_cast<Timestamp>(seed) * 600;
        const auto g = generate_scenario(tpl, seed, place);
        expect_well_formed(g.traj_a, place.step);
        expect_well_formed(g.traj_b, place.step);
        EXPECT_EQ(g.traj_a.vessel_id, place.id_a);
        EXPECT_EQ(g.traj_b.vessel_id, place.id_b);
    }
}

TEST(Corpus, CountsAndLabels) {
    CorpusSpec spec;
    spec.counts = {3, 0, 2, 1, 4};
    const auto corpus = generate_corpus(spec);
    ASSERT_EQ(corpus.samples.size(), 10u);
    ASSERT_EQ(corpus.manifest.size(), 10u);
    std::vector<std::size_t> seen(5, 0);
    for (const auto& s : corpus.samples) ++seen[s.label];
    EXPECT_EQ(seen, spec.counts);
    EXPECT_EQ(corpus.manifest[0].sample_id, "A-0");
    EXPECT_EQ(corpus.manifest[3].sample_id, "C-0");
    EXPECT_EQ(corpus.manifest[3].class_name, "C");
}

TEST(Corpus, VesselIdsAndTimesDoNotCollide) {
    const auto corpus = fixture::small_corpus(4);
    std::set<std::string> ids;
    for (const auto& s : corpus.samples) {
        EXPECT_TRUE(ids.insert(s.traj_a.vessel_id).second);
        EXPECT_TRUE(ids.insert(s.traj_b.vessel_id).second);
        EXPECT_EQ(s.pair.vessel_a, s.traj_a.vessel_id);
        EXPECT_LE(s.pair.t_start, s.pair.t_end);
    }
}

TEST(Corpus, OrderIndependent) {
    CorpusSpec spec;
    spec.counts = {4, 4, 4, 4, 4};
    const auto corpus = generate_corpus(spec);
    EXPECT_EQ(dump(generate_sample(spec, 3, 2)), dump(corpus.samples[3 * 4 + 2]));
    CorpusSpec smaller = spec;
    smaller.counts = {1, 0, 3, 0, 0};
    const auto part = generate_corpus(smaller);
    EXPECT_EQ(dump(part.samples[0]), dump(corpus.samples[0]));
    EXPECT_EQ(dump(part.samples[3]), dump(corpus.samples[8 + 2]));
}

TEST(Corpus, MasterSeedMatters) {
    CorpusSpec a, b;
    a.counts = b.counts = {1, 1, 1, 1, 1};
    b.master_seed = 43;
    EXPECT_EQ(dump(generate_corpus(a).samples[2]), dump(generate_corpus(a).samples[2]));
    EXPECT_NE(dump(generate_corpus(a).samples[2]), dump(generate_corpus(b).samples[2]));
}

TEST(Manifest, RoundTripAndRegeneration) {
    CorpusSpec spec;
    spec.counts = {2, 2, 2, 2, 2};
    const auto corpus = generate_corpus(spec);
    std::ostringstream out;
    write_manifest_csv(out, corpus.manifest);
    std::istringstream in("# simulate config=0\n" + out.str());
    const auto rows = read_manifest_csv(in);
    ASSERT_EQ(rows.size(), corpus.manifest.size());
    const auto templates = default_templates();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        EXPECT_EQ(rows[i].sample_id, corpus.manifest[i].sample_id);
        EXPECT_EQ(rows[i].seed, corpus.manifest[i].seed);
        EXPECT_EQ(rows[i].pair, corpus.manifest[i].pair);
        // The recorded seed alone regenerates the scenario.
        const std::size_t cls = corpus.samples[i].label;
        const std::size_t idx = i % 2;
        const auto g = generate_scenario(templates[cls], rows[i].seed, placement_for(spec, cls, idx, rows[i].seed));
        EXPECT_EQ(dump({g.traj_a, g.traj_b}), dump({corpus.samples[i].traj_a, corpus.samples[i].traj_b}));
    }
}

TEST(Manifest, RejectsBadRows) {
    std::istringstream bad_seed("sample_id,class,seed,vessel_a,vessel_b,t_start,t_end\nA-0,A,x1,1,2,0,60\n");
    EXPECT_THROW(read_manifest_csv(bad_seed), InputError);
    std::istringstream bad_interval("sample_id,class,seed,vessel_a,vessel_b,t_start,t_end\nA-0,A,1,1,2,60,0\n");
    EXPECT_THROW(read_manifest_csv(bad_interval), InputError);
}

TEST(Records, FlattenEveryPoint) {
    const auto corpus = fixture::small_corpus(1);
    std::size_t points = 0;
    for (const auto& s : corpus.samples) points += s.traj_a.points.size() + s.traj_b.points.size();
    const auto recs = to_ais_records(corpus.samples);
    ASSERT_EQ(recs.size(), points);
    EXPECT_EQ(recs.front().vessel_id, corpus.samples[0].traj_a.vessel_id);
    EXPECT_EQ(recs.front().vessel_type, corpus.samples[0].traj_a.meta.vessel_type);
}
