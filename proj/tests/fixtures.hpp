#pragma once
// Shared fixtures for the unit and acceptance suites.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "vesselwatch/anomaly.hpp"
#include "vesselwatch/config.hpp"
#include "vesselwatch/simgen.hpp"
#include "vesselwatch/svm.hpp"
#include "vesselwatch/workflow.hpp"

#ifndef VESSELWATCH_DATA_DIR
#define VESSELWATCH_DATA_DIR "data"
#endif

namespace fixture {

using namespace vesselwatch;

inline std::string data_path(const std::string& rel) { return std::string(VESSELWATCH_DATA_DIR) + "/" + rel; }

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::vector<std::filesystem::path> shipped_rulesets() {
    std::vector<std::filesystem::path> out;
    for (const auto& e : std::filesystem::directory_iterator(data_path("rules"))) {
        if (e.path().extension() == ".rules") out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

struct SmoInstance {
    std::vector<std::vector<double>> X;
    std::vector<int> y;
    svm::Kernel kernel;
    double C = 1.0;
    std::string name;
};

// Every subset of 2 to 4 points drawn from six fixed labeled points that contains both
// classes, under three kernels and three values of C.
inline std::vector<SmoInstance> smo_instances() {
    const std::vector<std::vector<double>> pts{{0.0, 0.0}, {1.0, 1.0}, {2.0, 0.0}, {0.0, 2.0}, {1.0, 0.5}, {1.5, 1.5}};
    const std::vector<int> labels{1, 1, -1, -1, 1, -1};
    const std::vector<std::pair<svm::Kernel, std::string>> kernels{
        {{svm::KernelType::linear, 0.0}, "linear"}, {{svm::KernelType::rbf, 0.5}, "rbf0.5"}, {{svm::KernelType::rbf, 2.0}, "rbf2"}};
    std::vector<SmoInstance> out;
    for (unsigned mask = 0; mask < 64; ++mask) {
        const int count = __builtin_popcount(mask);
        if (count < 2 || count > 4) continue;
        SmoInstance base;
        bool pos = false, neg = false;
        std::string ids;
        for (int i = 0; i < 6; ++i) {
            if (!(mask & (1u << i))) continue;
            base.X.push_back(pts[static_cast<std::size_t>(i)]);
            base.y.push_back(labels[static_cast<std::size_t>(i)]);
            (labels[static_cast<std::size_t>(i)] > 0 ? pos : neg) = true;
            ids += std::to_string(i);
        }
        if (!pos || !neg) continue;
        for (const auto& [k, kname] : kernels) {
            for (double C : {0.1, 1.0, 10.0}) {
                SmoInstance inst = base;
                inst.kernel = k;
                inst.C = C;
                inst.name = "points " + ids + " " + kname + " C=" + std::to_string(C);
                out.push_back(std::move(inst));
            }
        }
    }
    return out;
}

// Small labeled corpus: `per_class` samples of every default class.
inline simgen::Corpus small_corpus(std::size_t per_class, std::uint64_t seed = 42) {
    simgen::CorpusSpec spec;
    spec.counts.assign(5, per_class);
    spec.master_seed = seed;
    return simgen::generate_corpus(spec);
}

struct AnomalyScenario {
    std::vector<Trajectory> tracks;
    std::vector<Classification> rows;
    Config config;
    std::string offending_pair;
};

// One Class-B engagement whose pilot boat is re-typed as cargo, alongside correctly typed
// samples of every class. Impacts are chosen so a confirmed alert outranks the conflict on
// impact alone.
inline AnomalyScenario anomaly_scenario(std::uint64_t seed = 42) {
    AnomalyScenario s;
    s.config = default_config();
    s.config.impact.impact = {{"A", 0.9}, {"B", 0.3}, {"C", 0.8}, {"D", 0.7}, {"E", 0.6}};
    s.config.impact.conflict_impact = 0.75;
    simgen::CorpusSpec spec;
    spec.master_seed = seed;
    for (std::size_t cls = 0; cls < 5; ++cls) {
        for (std::size_t idx = 0; idx < 2; ++idx) {
            auto sample = simgen::generate_sample(spec, cls, idx);
            if (cls == 1 && idx == 0) {
                sample.traj_b.meta.vessel_type = VesselType::cargo;
                s.offending_pair = sample.pair.id();
            }
            s.rows.push_back({sample.pair, s.config.classes[cls].name, {}});
            s.tracks.push_back(std::move(sample.traj_a));
            s.tracks.push_back(std::move(sample.traj_b));
        }
    }
    return s;
}

inline anomaly::Program default_rules() { return anomaly::parse_program(slurp(data_path("rules/default.rules"))); }

} // namespace fixture
