#include <random>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "vesselwatch/model_io.hpp"
#include "vesselwatch/pipeline.hpp"

using namespace vesselwatch;

namespace {

struct Trained {
    simgen::Corpus corpus;
    std::vector<ScenarioClass> classes = default_scenario_classes();
    PipelineConfig cfg;
    HmmBank bank;
    svm::SvmModel model;
};

const Trained& trained() {
    static const Trained t = [] {
        Trained t;
        t.corpus = fixture::small_corpus(10);
        t.bank = train_bank(t.corpus.samples, t.classes, t.cfg);
        t.model = train_classifier(t.bank, t.corpus.samples, t.cfg);
        return t;
    }();
    return t;
}

LabeledCandidate shifted(LabeledCandidate c, double dlon) {
    for (auto* tr : {&c.traj_a, &c.traj_b}) {
        for (auto& p : tr->points) p.lon += dlon;
    }
    return c;
}

} // namespace

TEST(Metrics, PublishedConfusionMatrix) {
    ConfusionMatrix cm(5);
    cm.counts = {{43592, 473, 31, 60, 32}, {688, 1673, 1, 8, 2}, {56, 0, 196, 0, 0}, {89, 15, 0, 550, 17}, {72, 13, 0, 23, 270}};
    const auto mt = metrics(cm);
    const double precision[] = {97.97, 76.95, 85.96, 85.80, 84.11};
    const double recall[] = {98.65, 70.53, 77.78, 81.97, 71.43};
    for (std::size_t c = 0; c < 5; ++c) {
        ASSERT_TRUE(mt.precision[c] && mt.recall[c]);
        EXPECT_NEAR(*mt.precision[c] * 100.0, precision[c], 0.01);
        EXPECT_NEAR(*mt.recall[c] * 100.0, recall[c], 0.01);
    }
    EXPECT_NEAR(mt.accuracy * 100.0, 96.70, 0.01);

    std::ostringstream out;
    write_evaluation_report(out, cm, mt, default_scenario_classes());
    EXPECT_NE(out.str().find("A,97.97,98.65\n"), std::string::npos);
    EXPECT_NE(out.str().find("accuracy_pct,96.70\n"), std::string::npos);
}

TEST(Metrics, IdentityMatrix) {
    ConfusionMatrix cm(3);
    for (std::size_t c = 0; c < 3; ++c) cm.counts[c][c] = 1;
    const auto mt = metrics(cm);
    for (std::size_t c = 0; c < 3; ++c) {
        EXPECT_EQ(mt.precision[c], 1.0);
        EXPECT_EQ(mt.recall[c], 1.0);
    }
    EXPECT_EQ(mt.accuracy, 1.0);
}

TEST(Metrics, UndefinedPrecisionIsAbsent) {
    ConfusionMatrix cm(2);
    cm.counts = {{3, 0}, {2, 0}};
    const auto mt = metrics(cm);
    EXPECT_FALSE(mt.precision[1]);
    EXPECT_EQ(mt.recall[1], 0.0);
    EXPECT_EQ(percent_or_na(mt.precision[1]), "NA");
}

TEST(Metrics, AccuracyIsRecallWeightedByClassShare) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        ConfusionMatrix cm(4);
        for (auto& row : cm.counts) {
            for (auto& v : row) v = rng() % 50;
            row[rng() % 4] += 1;
        }
        const auto mt = metrics(cm);
        double weighted = 0.0;
        for (std::size_t c = 0; c < 4; ++c) {
            weighted += *mt.recall[c] * static_cast<double>(cm.row_sum(c)) / static_cast<double>(cm.total());
        }
        EXPECT_NEAR(mt.accuracy, weighted, 1e-12);
    }
}

TEST(Bank, Shape) {
    const auto& t = trained();
    EXPECT_EQ(t.bank.m, 5u);
    EXPECT_EQ(t.bank.n, 4u);
    EXPECT_EQ(t.bank.codebooks.size(), 4u);
    std::size_t count = 0;
    for (const auto& row : t.bank.models) {
        for (const auto& h : row) {
            EXPECT_FALSE(hmm::validate(h));
            ++count;
        }
    }
    EXPECT_EQ(count, 20u);
    EXPECT_EQ(t.model.pairs.size(), 10u);
    EXPECT_EQ(t.model.dim, 20u);
}

TEST(Bank, Deterministic) {
    const auto& t = trained();
    EXPECT_EQ(train_bank(t.corpus.samples, t.classes, t.cfg), t.bank);
}

TEST(Bank, MissingClassNamed) {
    auto corpus = fixture::small_corpus(3).samples;
    std::erase_if(corpus, [](const LabeledCandidate& c) { return c.label == 3; });
    try {
        train_bank(corpus, default_scenario_classes(), PipelineConfig{});
        FAIL();
    } catch (const InputError& e) {
        EXPECT_STREQ(e.what(), "class D has 0 samples");
    }
}

TEST(Score, ShapeAndPurity) {
    const auto& t = trained();
    const auto& c = t.corpus.samples[7];
    const auto a = score(t.bank, c), b = score(t.bank, c);
    EXPECT_EQ(a.values.size(), 20u);
    EXPECT_EQ(a.values, b.values);
    for (double v : a.values) EXPECT_TRUE(std::isfinite(v));
    EXPECT_EQ(a.candidate_id, c.pair.id());
}

TEST(Score, ZeroProbabilityUsesSentinel) {
    const auto& t = trained();
    const auto& c = t.corpus.samples[3];
    HmmBank bank = t.bank;
    std::vector<bool> used(bank.codebooks[1].size(), false);
    const auto seq = quantize(build_observation(c.traj_a, c.traj_b, c.pair, bank.obs_types[1]), bank.codebooks[1]);
    for (auto s : seq.symbols) used[s] = true;
    const auto unused = static_cast<std::size_t>(std::find(used.begin(), used.end(), false) - used.begin());
    ASSERT_LT(unused, used.size());
    for (auto& row : bank.models[2][1].B) {
        std::fill(row.begin(), row.end(), 0.0);
        row[unused] = 1.0;
    }
    const auto lv = score(bank, c);
    EXPECT_EQ(lv.values[2 * 4 + 1], kZeroProbabilitySentinel);
    EXPECT_EQ(lv.values[2 * 4 + 0], score(t.bank, c).values[2 * 4 + 0]);
}

TEST(Score, InvariantToTranslationAndRelabeling) {
    const auto& t = trained();
    for (std::size_t i : {0u, 15u, 33u}) {
        const auto& c = t.corpus.samples[i];
        const auto base = score(t.bank, c).values;
        const auto moved = score(t.bank, shifted(c, 0.04)).values;
        for (std::size_t k = 0; k < base.size(); ++k) EXPECT_NEAR(base[k], moved[k], 1e-9);

        auto renamed = c;
        renamed.traj_a.vessel_id = renamed.pair.vessel_a = "a" + c.pair.vessel_a;
        renamed.traj_b.vessel_id = renamed.pair.vessel_b = "b" + c.pair.vessel_b;
        EXPECT_EQ(score(t.bank, renamed).values, base);
    }
}

TEST(Score, CoverageGapThrows) {
    const auto& t = trained();
    auto c = t.corpus.samples[0];
    c.traj_b.points.erase(c.traj_b.points.begin() + static_cast<std::ptrdiff_t>(c.traj_b.points.size() / 2));
    c.pair.t_start = c.traj_a.points.front().timestamp;
    c.pair.t_end = c.traj_a.points.back().timestamp;
    EXPECT_THROW(score(t.bank, c), InputError);
}

TEST(Classify, FreshSamplesOfEachClass) {
    const auto& t = trained();
    simgen::CorpusSpec spec;
    for (std::size_t cls = 0; cls < 5; ++cls) {
        const auto fresh = simgen::generate_sample(spec, cls, 150);
        EXPECT_EQ(classify(t.bank, t.model, fresh), cls);
        EXPECT_EQ(classify(t.bank, t.model, shifted(fresh, -0.03)), cls);
    }
}

TEST(Classify, DimensionMismatch) {
    const auto& t = trained();
    auto model = t.model;
    model.dim = 12;
    EXPECT_THROW(classify(t.bank, model, t.corpus.samples[0]), InputError);
}

TEST(Folds, StratifiedPartition) {
    std::vector<std::size_t> labels;
    const std::size_t sizes[] = {23, 10, 57, 11, 30};
    for (std::size_t c = 0; c < 5; ++c) labels.insert(labels.end(), sizes[c], c);
    std::shuffle(labels.begin(), labels.end(), std::mt19937_64(4));
    const auto folds = stratified_folds(labels, 5, 10, 42);
    ASSERT_EQ(folds.size(), 10u);
    std::set<std::size_t> seen;
    for (std::size_t c = 0; c < 5; ++c) {
        std::size_t lo = SIZE_MAX, hi = 0;
        for (const auto& f : folds) {
            const auto n = static_cast<std::size_t>(std::count_if(f.begin(), f.end(), [&](std::size_t i) { return labels[i] == c; }));
            lo = std::min(lo, n);
            hi = std::max(hi, n);
        }
        EXPECT_LE(hi - lo, 1u);
    }
    std::size_t total = 0;
    for (const auto& f : folds) {
        total += f.size();
        seen.insert(f.begin(), f.end());
    }
    EXPECT_EQ(total, labels.size());
    EXPECT_EQ(seen.size(), labels.size());
    EXPECT_EQ(stratified_folds(labels, 5, 10, 42), folds);
}

TEST(Folds, SmallClassRejected) {
    const std::vector<std::size_t> labels{0, 0, 0, 1, 1};
    const auto classes = default_scenario_classes();
    try {
        stratified_folds(labels, 2, 3, 1, &classes);
        FAIL();
    } catch (const InputError& e) {
        EXPECT_STREQ(e.what(), "class B has 2 samples, fewer than k=3");
    }
}

TEST(CrossValidate, ReproducibleAndComplete) {
    const auto corpus = fixture::small_corpus(6, 9).samples;
    const auto classes = default_scenario_classes();
    PipelineConfig cfg;
    const auto a = cross_validate(corpus, classes, cfg, 3);
    const auto b = cross_validate(corpus, classes, cfg, 3, 3);
    EXPECT_EQ(a.confusion, b.confusion);
    EXPECT_EQ(a.folds, b.folds);
    EXPECT_EQ(a.confusion.total(), corpus.size());
    for (std::size_t c = 0; c < 5; ++c) EXPECT_EQ(a.confusion.row_sum(c), 6u);
    EXPECT_LE(a.max_kkt_violation, cfg.svm.kkt_tolerance);
    for (double v : a.max_dual_infeasibility) EXPECT_LE(v, 1e-6);
}

TEST(ModelFile, RoundTripIsExact) {
    const auto& t = trained();
    io::ModelFile mf{t.classes, t.bank, t.model};
    std::stringstream ss;
    ss << "# vesselwatch-model/1 config=0\n";
    io::write_model(ss, mf);
    const auto back = io::read_model(ss);
    EXPECT_EQ(back.bank, t.bank);
    EXPECT_EQ(back.svm, t.model);
    ASSERT_EQ(back.classes.size(), 5u);
    EXPECT_EQ(back.classes[1].types_b, t.classes[1].types_b);
    EXPECT_EQ(classify(back.bank, back.svm, t.corpus.samples[5]), classify(t.bank, t.model, t.corpus.samples[5]));
}

TEST(ModelFile, SchemaMismatchRejected) {
    const auto& t = trained();
    std::stringstream ss;
    io::write_model(ss, {t.classes, t.bank, t.model});
    std::string text = ss.str();
    text.replace(text.find("vesselwatch-model/1"), 19, "vesselwatch-model/9");
    std::istringstream in(text);
    try {
        io::read_model(in);
        FAIL();
    } catch (const InputError& e) {
        EXPECT_NE(std::string(e.what()).find("schema-version mismatch"), std::string::npos);
    }
    std::istringstream junk("{ not json");
    EXPECT_THROW(io::read_model(junk), InputError);
}
