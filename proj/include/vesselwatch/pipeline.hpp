#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "vesselwatch/engagement.hpp"
#include "vesselwatch/error.hpp"
#include "vesselwatch/features.hpp"
#include "vesselwatch/hmm.hpp"
#include "vesselwatch/ingest.hpp"
#include "vesselwatch/svm.hpp"

namespace vesselwatch {

struct ScenarioClass {
    std::size_t id = 0;
    std::string name;
    std::vector<VesselType> types_a;
    std::vector<VesselType> types_b;

    // Unordered match of the two vessel types against the definition.
    bool matches(VesselType a, VesselType b) const {
        auto has = [](const std::vector<VesselType>& v, VesselType t) { return std::find(v.begin(), v.end(), t) != v.end(); };
        return (has(types_a, a) && has(types_b, b)) || (has(types_a, b) && has(types_b, a));
    }
};

inline std::vector<ScenarioClass> default_scenario_classes() {
    using enum VesselType;
    return {
        {0, "A", {cargo, tanker}, {towing, tug}},
        {1, "B", {cargo, tanker, passenger}, {pilot}},
        {2, "C", {tanker}, {tanker}},
        {3, "D", {passenger}, {passenger}},
        {4, "E", {search_rescue}, {search_rescue}},
    };
}

inline void validate_classes(const std::vector<ScenarioClass>& classes) {
    for (std::size_t i = 0; i < classes.size(); ++i) {
        if (classes[i].id != i) throw InputError("scenario class ids must be dense and ordered");
        for (std::size_t j = 0; j < i; ++j) {
            if (classes[j].name == classes[i].name) throw InputError("duplicate scenario class " + classes[i].name);
            if (classes[j].types_a == classes[i].types_a && classes[j].types_b == classes[i].types_b) {
                throw InputError("scenario classes " + classes[j].name + " and " + classes[i].name + " share a definition");
            }
        }
    }
}

struct LabeledCandidate {
    CandidatePair pair;
    Trajectory traj_a;
    Trajectory traj_b;
    std::size_t label = 0;
};

struct PipelineConfig {
    std::vector<ObservationType> obs_types = default_observation_types();
    std::size_t num_states = 4;   // N
    std::size_t num_symbols = 16; // K
    std::size_t max_jump = 2;     // J
    hmm::TrainConfig hmm_train;
    svm::SvmConfig svm;
    std::uint64_t seed = 42;
};

// m x n grid of HMMs (scenario class x observation type) with one codebook per observation type.
struct HmmBank {
    std::size_t m = 0;
    std::size_t n = 0;
    std::vector<ObservationType> obs_types;
    std::vector<Codebook> codebooks;
    std::vector<std::vector<hmm::Hmm>> models; // models[class][obs_type]

    friend bool operator==(const HmmBank& a, const HmmBank& b) {
        if (a.m != b.m || a.n != b.n || a.obs_types != b.obs_types || a.models != b.models) return false;
        if (a.codebooks.size() != b.codebooks.size()) return false;
        for (std::size_t i = 0; i < a.codebooks.size(); ++i) {
            const auto &x = a.codebooks[i], &y = b.codebooks[i];
            if (!(x.obs_type == y.obs_type) || x.centroids != y.centroids || x.scale.size() != y.scale.size()) return false;
            for (std::size_t d = 0; d < x.scale.size(); ++d) {
                if (x.scale[d].mean != y.scale[d].mean || x.scale[d].spread != y.scale[d].spread) return false;
            }
        }
        return true;
    }
};

inline constexpr double kZeroProbabilitySentinel = -1e9;

struct LikelihoodVector {
    std::vector<double> values; // index class * n + obs_type
    std::string candidate_id;
};

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL + (b << 6) + (b >> 2);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Feature rows of one candidate, computed once and shared across observation types and folds.
struct Prepared {
    std::vector<FeatureValues> rows;
    std::size_t label = 0;
    std::string id;
};

inline Prepared prepare(const LabeledCandidate& c) {
    Prepared p{{}, c.label, c.pair.id()};
    for (auto& [t, row] : feature_rows(c.traj_a, c.traj_b, c.pair)) p.rows.push_back(row);
    return p;
}

inline std::vector<std::size_t> symbols_of(const Prepared& p, const Codebook& cb) {
    std::vector<std::size_t> out;
    out.reserve(p.rows.size());
    for (const auto& row : p.rows) out.push_back(cb.nearest(select_features(row, cb.obs_type)));
    return out;
}

inline void check_config(const PipelineConfig& cfg) {
    if (cfg.obs_types.empty()) throw InputError("at least one observation type is required");
    for (std::size_t i = 0; i < cfg.obs_types.size(); ++i) {
        if (cfg.obs_types[i].id != i) throw InputError("observation type ids must be 0..n-1 in order");
        cfg.obs_types[i].validate();
    }
    if (cfg.num_states < 1 || cfg.num_symbols < 1 || cfg.max_jump < 1) throw InputError("HMM sizes must be >= 1");
}

inline HmmBank train_bank_prepared(const std::vector<const Prepared*>& corpus, const std::vector<ScenarioClass>& classes,
                                   const PipelineConfig& cfg) {
    check_config(cfg);
    const std::size_t m = classes.size(), n = cfg.obs_types.size();
    std::vector<std::size_t> counts(m, 0);
    for (const Prepared* p : corpus) {
        if (p->label >= m) throw InputError("label out of range for candidate " + p->id);
        ++counts[p->label];
    }
    for (std::size_t y = 0; y < m; ++y) {
        if (counts[y] < 2) {
            throw InputError("class " + classes[y].name + " has " + std::to_string(counts[y]) + " samples");
        }
    }

    HmmBank bank{m, n, cfg.obs_types, {}, std::vector<std::vector<hmm::Hmm>>(m)};
    for (std::size_t x = 0; x < n; ++x) {
        std::vector<std::vector<double>> points;
        for (const Prepared* p : corpus) {
            for (const auto& row : p->rows) points.push_back(select_features(row, cfg.obs_types[x]));
        }
        const std::size_t K = std::min(cfg.num_symbols, points.size());
        bank.codebooks.push_back(fit_codebook(points, K, mix_seed(cfg.seed, 1000 + x), cfg.obs_types[x]));
    }
    for (std::size_t y = 0; y < m; ++y) {
        for (std::size_t x = 0; x < n; ++x) {
            std::vector<std::vector<std::size_t>> seqs;
            for (const Prepared* p : corpus) {
                if (p->label == y) seqs.push_back(symbols_of(*p, bank.codebooks[x]));
            }
            hmm::TrainConfig tc = cfg.hmm_train;
            tc.seed = mix_seed(cfg.seed, y * 131 + x);
            bank.models[y].push_back(
                hmm::baum_welch(seqs, cfg.num_states, bank.codebooks[x].size(), cfg.max_jump, tc).model);
        }
    }
    return bank;
}

inline LikelihoodVector score_prepared(const HmmBank& bank, const Prepared& p) {
    LikelihoodVector lv{std::vector<double>(bank.m * bank.n), p.id};
    const double T = static_cast<double>(p.rows.size());
    for (std::size_t x = 0; x < bank.n; ++x) {
        const auto symbols = symbols_of(p, bank.codebooks[x]);
        for (std::size_t y = 0; y < bank.m; ++y) {
            const double ll = hmm::forward_log_likelihood(bank.models[y][x], symbols);
            lv.values[y * bank.n + x] = std::isfinite(ll) ? ll / T : kZeroProbabilitySentinel;
        }
    }
    return lv;
}

} // namespace detail

inline HmmBank train_bank(const std::vector<LabeledCandidate>& corpus, const std::vector<ScenarioClass>& classes,
                          const PipelineConfig& cfg) {
    std::vector<detail::Prepared> prepared;
    prepared.reserve(corpus.size());
    for (const auto& c : corpus) prepared.push_back(detail::prepare(c));
    std::vector<const detail::Prepared*> ptrs;
    for (const auto& p : prepared) ptrs.push_back(&p);
    return detail::train_bank_prepared(ptrs, classes, cfg);
}

// Length-normalized log-likelihood of the candidate under every model in the bank.
inline LikelihoodVector score(const HmmBank& bank, const LabeledCandidate& candidate) {
    return detail::score_prepared(bank, detail::prepare(candidate));
}

inline svm::SvmModel train_classifier(const HmmBank& bank, const std::vector<LabeledCandidate>& corpus,
                                      const PipelineConfig& cfg) {
    std::vector<svm::LabeledVector> data;
    for (const auto& c : corpus) data.push_back({score(bank, c).values, c.label});
    return svm::train_multiclass(data, cfg.svm, bank.m);
}

inline std::size_t classify(const HmmBank& bank, const svm::SvmModel& model, const LabeledCandidate& candidate) {
    if (model.dim != bank.m * bank.n || model.num_classes != bank.m) throw InputError("model and HMM bank dimensions differ");
    return svm::predict(model, score(bank, candidate).values).label;
}

struct ConfusionMatrix {
    std::size_t m = 0;
    std::vector<std::vector<std::uint64_t>> counts; // [true][predicted]

    explicit ConfusionMatrix(std::size_t classes = 0)
        : m(classes), counts(classes, std::vector<std::uint64_t>(classes, 0)) {}

    std::uint64_t row_sum(std::size_t c) const {
        std::uint64_t s = 0;
        for (auto v : counts[c]) s += v;
        return s;
    }
    std::uint64_t column_sum(std::size_t c) const {
        std::uint64_t s = 0;
        for (const auto& row : counts) s += row[c];
        return s;
    }
    std::uint64_t total() const {
        std::uint64_t s = 0;
        for (std::size_t c = 0; c < m; ++c) s += row_sum(c);
        return s;
    }

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

struct Metrics {
    std::vector<std::optional<double>> precision; // absent when nothing was predicted as the class
    std::vector<std::optional<double>> recall;    // absent when the class has no samples
    double accuracy = 0.0;
};

inline Metrics metrics(const ConfusionMatrix& cm) {
    Metrics out;
    std::uint64_t trace = 0;
    for (std::size_t c = 0; c < cm.m; ++c) {
        const auto col = cm.column_sum(c), row = cm.row_sum(c);
        out.precision.push_back(col ? std::optional<double>(static_cast<double>(cm.counts[c][c]) / static_cast<double>(col))
                                    : std::nullopt);
        out.recall.push_back(row ? std::optional<double>(static_cast<double>(cm.counts[c][c]) / static_cast<double>(row))
                                 : std::nullopt);
        trace += cm.counts[c][c];
    }
    const auto total = cm.total();
    out.accuracy = total ? static_cast<double>(trace) / static_cast<double>(total) : 0.0;
    return out;
}

struct CvResult {
    ConfusionMatrix confusion;
    Metrics metrics;
    std::vector<std::vector<std::size_t>> folds; // corpus indices of each test fold
    double max_kkt_violation = 0.0;              // over every binary SVM trained in any fold
    std::vector<double> max_dual_infeasibility;  // per fold: max |sum alpha y| and bound excess
};

// Stratified folds: per class, indices shuffled under `seed` and dealt round-robin.
inline std::vector<std::vector<std::size_t>> stratified_folds(const std::vector<std::size_t>& labels, std::size_t m,
                                                              std::size_t k, std::uint64_t seed,
                                                              const std::vector<ScenarioClass>* classes = nullptr) {
    if (k < 2) throw InputError("cross validation needs k >= 2");
    std::vector<std::vector<std::size_t>> by_class(m);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= m) throw InputError("label out of range");
        by_class[labels[i]].push_back(i);
    }
    std::vector<std::vector<std::size_t>> folds(k);
    for (std::size_t y = 0; y < m; ++y) {
        if (by_class[y].size() < k) {
            const std::string name = classes ? (*classes)[y].name : std::to_string(y);
            throw InputError("class " + name + " has " + std::to_string(by_class[y].size()) + " samples, fewer than k=" +
                             std::to_string(k));
        }
        std::mt19937_64 rng(detail::mix_seed(seed, 7000 + y));
        std::shuffle(by_class[y].begin(), by_class[y].end(), rng);
        for (std::size_t r = 0; r < by_class[y].size(); ++r) folds[r % k].push_back(by_class[y][r]);
    }
    for (auto& f : folds) std::sort(f.begin(), f.end());
    return folds;
}

inline CvResult cross_validate(const std::vector<LabeledCandidate>& corpus, const std::vector<ScenarioClass>& classes,
                               const PipelineConfig& cfg, std::size_t k = 10, std::size_t jobs = 1) {
    const std::size_t m = classes.size();
    std::vector<std::size_t> labels;
    for (const auto& c : corpus) labels.push_back(c.label);
    CvResult result{ConfusionMatrix(m), {}, stratified_folds(labels, m, k, cfg.seed, &classes), 0.0,
                    std::vector<double>(k, 0.0)};

    std::vector<detail::Prepared> prepared;
    prepared.reserve(corpus.size());
    for (const auto& c : corpus) prepared.push_back(detail::prepare(c));

    struct FoldOutcome {
        std::vector<std::pair<std::size_t, std::size_t>> predictions; // (true, predicted)
        double kkt = 0.0;
        double infeasibility = 0.0;
    };
    std::vector<FoldOutcome> outcomes(k);

    auto run_fold = [&](std::size_t f) {
        std::vector<bool> test(corpus.size(), false);
        for (std::size_t i : result.folds[f]) test[i] = true;
        std::vector<const detail::Prepared*> train;
        for (std::size_t i = 0; i < corpus.size(); ++i) {
            if (!test[i]) train.push_back(&prepared[i]);
        }
        const HmmBank bank = detail::train_bank_prepared(train, classes, cfg);
        std::vector<svm::LabeledVector> data;
        for (const auto* p : train) data.push_back({detail::score_prepared(bank, *p).values, p->label});
        const auto trained = svm::train_multiclass_detailed(data, cfg.svm, m);
        FoldOutcome& out = outcomes[f];
        for (const auto& bt : trained.binaries) {
            if (bt.X.empty()) continue;
            out.kkt = std::max(out.kkt, svm::kkt_violation(bt.X, bt.y, trained.model.kernel, bt.solution.alpha,
                                                           bt.solution.b, bt.C_pos, bt.C_neg));
            double balance = 0.0;
            for (std::size_t i = 0; i < bt.y.size(); ++i) {
                const double C = bt.y[i] > 0 ? bt.C_pos : bt.C_neg;
                balance += bt.solution.alpha[i] * bt.y[i];
                out.infeasibility = std::max({out.infeasibility, -bt.solution.alpha[i], bt.solution.alpha[i] - C});
            }
            out.infeasibility = std::max(out.infeasibility, std::abs(balance));
        }
        for (std::size_t i : result.folds[f]) {
            const auto lv = detail::score_prepared(bank, prepared[i]);
            out.predictions.emplace_back(prepared[i].label, svm::predict(trained.model, lv.values).label);
        }
    };

    if (jobs <= 1) {
        for (std::size_t f = 0; f < k; ++f) run_fold(f);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::exception_ptr> errors(k);
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < std::min(jobs, k); ++w) {
            pool.emplace_back([&] {
                for (std::size_t f; (f = next++) < k;) {
                    try {
                        run_fold(f);
                    } catch (...) {
                        errors[f] = std::current_exception();
                    }
                }
            });
        }
        for (auto& t : pool) t.join();
        for (auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }

    for (std::size_t f = 0; f < k; ++f) {
        for (const auto& [t, p] : outcomes[f].predictions) ++result.confusion.counts[t][p];
        result.max_kkt_violation = std::max(result.max_kkt_violation, outcomes[f].kkt);
        result.max_dual_infeasibility[f] = outcomes[f].infeasibility;
    }
    result.metrics = metrics(result.confusion);
    return result;
}

} // namespace vesselwatch
