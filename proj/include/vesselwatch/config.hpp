#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vesselwatch/anomaly.hpp"
#include "vesselwatch/engagement.hpp"
#include "vesselwatch/error.hpp"
#include "vesselwatch/ingest.hpp"
#include "vesselwatch/model_io.hpp"
#include "vesselwatch/pipeline.hpp"
#include "vesselwatch/simgen.hpp"

namespace vesselwatch {

struct IngestSettings {
    ColumnMap columns;
    Timestamp step = 60;
    Timestamp gap_threshold = 600;
};

struct SimulateSettings {
    std::vector<std::size_t> counts = std::vector<std::size_t>(5, 200);
    geo::GeoPoint origin{48.2, -123.5};
    Timestamp base_time = 1230768000;
    simgen::Noise noise;
};

struct Config {
    IngestSettings ingest;
    EngagementParams engagement;
    std::vector<ScenarioClass> classes = default_scenario_classes();
    PipelineConfig pipeline;
    std::size_t cv_folds = 10;
    anomaly::ImpactTable impact;
    std::string rules_path; // resolved against the config file's directory
    std::vector<anomaly::Zone> zones;
    SimulateSettings simulate;

    std::vector<std::string> class_names() const {
        std::vector<std::string> out;
        for (const auto& c : classes) out.push_back(c.name);
        return out;
    }

    // Simgen corpus spec, with class templates matched to the configured classes by name.
    simgen::CorpusSpec corpus_spec() const {
        simgen::CorpusSpec spec;
        spec.counts = simulate.counts;
        spec.origin = simulate.origin;
        spec.step = ingest.step;
        spec.base_time = simulate.base_time;
        spec.master_seed = pipeline.seed;
        spec.engagement = engagement;
        spec.templates.clear();
        const auto all = simgen::default_templates();
        if (simulate.counts.size() > classes.size()) throw InputError("simulate.counts lists more classes than configured");
        for (std::size_t i = 0; i < simulate.counts.size(); ++i) {
            const auto& c = classes[i];
            auto it = std::find_if(all.begin(), all.end(), [&](const auto& t) { return t.class_name == c.name; });
            if (it == all.end()) throw InputError("no simulation template for class " + c.name);
            auto tpl = *it;
            tpl.class_id = c.id;
            tpl.noise = simulate.noise;
            spec.templates.push_back(tpl);
        }
        return spec;
    }
};

inline Config default_config() {
    Config c;
    for (const auto& cls : c.classes) c.impact.impact[cls.name] = 0.5;
    return c;
}

namespace detail {

using nlohmann::json;

inline void allow_keys(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
    if (!j.is_object()) throw InputError("config: " + where + " must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : keys) ok = ok || it.key() == k;
        if (!ok) throw InputError("config: unknown key " + where + "." + it.key());
    }
}

template <class T>
void read_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

inline VesselType vessel_type_of(const json& j) {
    const auto s = j.get<std::string>();
    auto t = parse_vessel_type(s);
    if (!t) throw InputError("config: unknown vessel type " + s);
    return *t;
}

inline json types_json(const std::vector<VesselType>& v) {
    json a = json::array();
    for (auto t : v) a.push_back(std::string(to_string(t)));
    return a;
}

} // namespace detail

inline nlohmann::json to_json(const Config& c) {
    using nlohmann::json;
    const auto& col = c.ingest.columns;
    json theta = json::object();
    for (const auto& [t, v] : c.engagement.theta) theta[std::string(to_string(t))] = v;
    json classes = json::array();
    for (const auto& cls : c.classes) {
        classes.push_back({{"name", cls.name}, {"types_a", detail::types_json(cls.types_a)},
                           {"types_b", detail::types_json(cls.types_b)}});
    }
    json obs = json::array();
    for (const auto& t : c.pipeline.obs_types) {
        json f = json::array();
        for (auto k : t.features) f.push_back(std::string(to_string(k)));
        obs.push_back(f);
    }
    json zones = json::array();
    for (const auto& z : c.zones) {
        json poly = json::array();
        for (const auto& p : z.vertices) poly.push_back({p.lat, p.lon});
        zones.push_back({{"name", z.name}, {"polygon", poly}});
    }
    const auto& svm = c.pipeline.svm;
    return {
        {"ingest",
         {{"columns",
           {{"vessel_id", col.vessel_id}, {"timestamp", col.timestamp}, {"lat", col.lat}, {"lon", col.lon},
            {"sog", col.sog}, {"cog", col.cog}, {"rot", col.rot}, {"vessel_type", col.vessel_type},
            {"length", col.length}}},
          {"step", c.ingest.step},
          {"gap_threshold", c.ingest.gap_threshold}}},
        {"engagement",
         {{"delta", c.engagement.delta},
          {"delta_prime", c.engagement.delta_prime},
          {"tau", c.engagement.tau},
          {"theta_default", c.engagement.theta_default},
          {"theta", theta},
          {"min_duration", c.engagement.min_duration}}},
        {"classes", classes},
        {"observation_types", obs},
        {"hmm",
         {{"N", c.pipeline.num_states},
          {"K", c.pipeline.num_symbols},
          {"J", c.pipeline.max_jump},
          {"max_iterations", c.pipeline.hmm_train.max_iterations},
          {"ll_tolerance", c.pipeline.hmm_train.ll_tolerance},
          {"emission_floor", c.pipeline.hmm_train.emission_floor}}},
        {"svm",
         {{"C", svm.C},
          {"kernel", svm.kernel.type == svm::KernelType::rbf ? "rbf" : "linear"},
          {"gamma", svm.kernel.gamma},
          {"kkt_tolerance", svm.kkt_tolerance},
          {"max_passes", svm.max_passes},
          {"class_weight", svm.class_weight}}},
        {"cv_folds", c.cv_folds},
        {"impact", {{"classes", c.impact.impact}, {"conflict", c.impact.conflict_impact}}},
        {"rules", c.rules_path},
        {"zones", zones},
        {"simulate",
         {{"counts", c.simulate.counts},
          {"origin", {c.simulate.origin.lat, c.simulate.origin.lon}},
          {"base_time", c.simulate.base_time},
          {"noise",
           {{"position_m", c.simulate.noise.position_m},
            {"sog_kn", c.simulate.noise.sog_kn},
            {"cog_deg", c.simulate.noise.cog_deg}}}}},
        {"seed", c.pipeline.seed},
    };
}

// Overlays `j` on the defaults. Unknown keys and invalid values are input errors.
inline Config config_from_json(const nlohmann::json& j) {
    using nlohmann::json;
    using detail::allow_keys;
    using detail::read_if;
    Config c = default_config();
    try {
        allow_keys(j, {"ingest", "engagement", "classes", "observation_types", "hmm", "svm", "cv_folds", "impact", "rules",
                       "zones", "simulate", "seed"},
                   "<root>");
        if (j.contains("ingest")) {
            const auto& s = j.at("ingest");
            allow_keys(s, {"columns", "step", "gap_threshold"}, "ingest");
            if (s.contains("columns")) {
                const auto& m = s.at("columns");
                allow_keys(m, {"vessel_id", "timestamp", "lat", "lon", "sog", "cog", "rot", "vessel_type", "length"},
                           "ingest.columns");
                auto& col = c.ingest.columns;
                read_if(m, "vessel_id", col.vessel_id);
                read_if(m, "timestamp", col.timestamp);
                read_if(m, "lat", col.lat);
                read_if(m, "lon", col.lon);
                read_if(m, "sog", col.sog);
                read_if(m, "cog", col.cog);
                read_if(m, "rot", col.rot);
                read_if(m, "vessel_type", col.vessel_type);
                read_if(m, "length", col.length);
            }
            read_if(s, "step", c.ingest.step);
            read_if(s, "gap_threshold", c.ingest.gap_threshold);
        }
        if (c.ingest.step <= 0) throw InputError("config: ingest.step must be positive");
        if (c.ingest.gap_threshold <= 0) throw InputError("config: ingest.gap_threshold must be positive");

        if (j.contains("engagement")) {
            const auto& s = j.at("engagement");
            allow_keys(s, {"delta", "delta_prime", "tau", "theta_default", "theta", "min_duration"}, "engagement");
            auto& e = c.engagement;
            read_if(s, "delta", e.delta);
            read_if(s, "delta_prime", e.delta_prime);
            read_if(s, "tau", e.tau);
            read_if(s, "theta_default", e.theta_default);
            read_if(s, "min_duration", e.min_duration);
            if (s.contains("theta")) {
                e.theta.clear();
                for (auto it = s.at("theta").begin(); it != s.at("theta").end(); ++it) {
                    e.theta[detail::vessel_type_of(json(it.key()))] = it.value().get<double>();
                }
            }
        }
        c.engagement.validate();

        if (j.contains("classes")) {
            c.classes.clear();
            for (const auto& cj : j.at("classes")) {
                allow_keys(cj, {"name", "types_a", "types_b"}, "classes[]");
                ScenarioClass cls{c.classes.size(), cj.at("name").get<std::string>(), {}, {}};
                for (const auto& t : cj.at("types_a")) cls.types_a.push_back(detail::vessel_type_of(t));
                for (const auto& t : cj.at("types_b")) cls.types_b.push_back(detail::vessel_type_of(t));
                c.classes.push_back(std::move(cls));
            }
            if (c.classes.size() < 2) throw InputError("config: at least two scenario classes are required");
            c.impact.impact.clear();
            for (const auto& cls : c.classes) c.impact.impact[cls.name] = 0.5;
        }
        validate_classes(c.classes);

        if (j.contains("observation_types")) {
            c.pipeline.obs_types.clear();
            for (const auto& oj : j.at("observation_types")) {
                ObservationType t{c.pipeline.obs_types.size(), {}};
                for (const auto& f : oj) {
                    auto k = parse_feature_kind(f.get<std::string>());
                    if (!k) throw InputError("config: unknown feature " + f.get<std::string>());
                    t.features.push_back(*k);
                }
                c.pipeline.obs_types.push_back(std::move(t));
            }
        }
        if (j.contains("hmm")) {
            const auto& s = j.at("hmm");
            allow_keys(s, {"N", "K", "J", "max_iterations", "ll_tolerance", "emission_floor"}, "hmm");
            read_if(s, "N", c.pipeline.num_states);
            read_if(s, "K", c.pipeline.num_symbols);
            read_if(s, "J", c.pipeline.max_jump);
            read_if(s, "max_iterations", c.pipeline.hmm_train.max_iterations);
            read_if(s, "ll_tolerance", c.pipeline.hmm_train.ll_tolerance);
            read_if(s, "emission_floor", c.pipeline.hmm_train.emission_floor);
        }
        vesselwatch::detail::check_config(c.pipeline);
        {
            const auto& h = c.pipeline.hmm_train;
            if (!(h.emission_floor > 0.0) || h.emission_floor * static_cast<double>(c.pipeline.num_symbols) >= 1.0) {
                throw InputError("config: hmm.emission_floor must be in (0, 1/K)");
            }
            if (!(h.ll_tolerance >= 0.0)) throw InputError("config: hmm.ll_tolerance must be >= 0");
        }

        if (j.contains("svm")) {
            const auto& s = j.at("svm");
            allow_keys(s, {"C", "kernel", "gamma", "kkt_tolerance", "max_passes", "class_weight"}, "svm");
            auto& v = c.pipeline.svm;
            read_if(s, "C", v.C);
            if (s.contains("kernel")) {
                const auto k = s.at("kernel").get<std::string>();
                if (k != "rbf" && k != "linear") throw InputError("config: svm.kernel must be rbf or linear");
                v.kernel.type = k == "rbf" ? svm::KernelType::rbf : svm::KernelType::linear;
            }
            read_if(s, "gamma", v.kernel.gamma);
            read_if(s, "kkt_tolerance", v.kkt_tolerance);
            read_if(s, "max_passes", v.max_passes);
            read_if(s, "class_weight", v.class_weight);
        }
        {
            const auto& v = c.pipeline.svm;
            if (!(v.C > 0.0)) throw InputError("config: svm.C must be positive");
            if (!(v.kernel.gamma >= 0.0)) throw InputError("config: svm.gamma must be >= 0");
            if (!(v.kkt_tolerance > 0.0)) throw InputError("config: svm.kkt_tolerance must be positive");
            for (double w : v.class_weight) {
                if (!(w > 0.0)) throw InputError("config: svm.class_weight entries must be positive");
            }
        }

        read_if(j, "cv_folds", c.cv_folds);
        if (c.cv_folds < 2) throw InputError("config: cv_folds must be >= 2");

        if (j.contains("impact")) {
            const auto& s = j.at("impact");
            allow_keys(s, {"classes", "conflict"}, "impact");
            read_if(s, "conflict", c.impact.conflict_impact);
            if (s.contains("classes")) {
                c.impact.impact.clear();
                for (auto it = s.at("classes").begin(); it != s.at("classes").end(); ++it) {
                    c.impact.impact[it.key()] = it.value().get<double>();
                }
            }
        }
        c.impact.validate(c.class_names());

        read_if(j, "rules", c.rules_path);
        if (j.contains("zones")) {
            for (const auto& zj : j.at("zones")) {
                allow_keys(zj, {"name", "polygon"}, "zones[]");
                anomaly::Zone z{zj.at("name").get<std::string>(), {}};
                for (const auto& p : zj.at("polygon")) {
                    if (p.size() != 2) throw InputError("config: zone vertex must be [lat, lon]");
                    z.vertices.push_back({p[0].get<double>(), p[1].get<double>()});
                }
                if (z.vertices.size() < 3) throw InputError("config: zone " + z.name + " needs at least 3 vertices");
                c.zones.push_back(std::move(z));
            }
        }

        if (j.contains("simulate")) {
            const auto& s = j.at("simulate");
            allow_keys(s, {"counts", "origin", "base_time", "noise"}, "simulate");
            read_if(s, "counts", c.simulate.counts);
            if (s.contains("origin")) {
                const auto& o = s.at("origin");
                if (o.size() != 2) throw InputError("config: simulate.origin must be [lat, lon]");
                c.simulate.origin = {o[0].get<double>(), o[1].get<double>()};
            }
            read_if(s, "base_time", c.simulate.base_time);
            if (s.contains("noise")) {
                const auto& n = s.at("noise");
                allow_keys(n, {"position_m", "sog_kn", "cog_deg"}, "simulate.noise");
                read_if(n, "position_m", c.simulate.noise.position_m);
                read_if(n, "sog_kn", c.simulate.noise.sog_kn);
                read_if(n, "cog_deg", c.simulate.noise.cog_deg);
            }
        }
        const auto& n = c.simulate.noise;
        if (!(n.position_m >= 0.0 && n.sog_kn >= 0.0 && n.cog_deg >= 0.0)) {
            throw InputError("config: simulate.noise values must be >= 0");
        }
        if (c.simulate.base_time % c.ingest.step != 0) {
            throw InputError("config: simulate.base_time must be a multiple of ingest.step");
        }

        read_if(j, "seed", c.pipeline.seed);
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("config: ") + e.what());
    }
    return c;
}

// Reads a config file; a relative rules path is resolved against the file's directory and must exist.
inline Config load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config " + path.string());
    Config c = config_from_json(io::read_json_document(in));
    if (!c.rules_path.empty()) {
        std::filesystem::path rp(c.rules_path);
        if (rp.is_relative()) rp = path.parent_path() / rp;
        if (!std::filesystem::exists(rp)) throw InputError("config: rules file not found: " + rp.string());
        c.rules_path = rp.lexically_normal().string();
    }
    return c;
}

// FNV-1a over the canonical JSON dump of the effective configuration.
inline std::string config_hash(const Config& c) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : to_json(c).dump()) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace vesselwatch
