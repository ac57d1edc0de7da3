#pragma once

#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vesselwatch/csv.hpp"
#include "vesselwatch/error.hpp"
#include "vesselwatch/features.hpp"
#include "vesselwatch/hmm.hpp"
#include "vesselwatch/pipeline.hpp"
#include "vesselwatch/svm.hpp"

namespace vesselwatch::io {

using nlohmann::json;

inline constexpr const char* kModelSchema = "vesselwatch-model/1";

// JSON text in which every floating-point number carries 17 significant digits.
inline void write_json17(std::ostream& out, const json& j, int indent = 0) {
    const std::string pad(static_cast<std::size_t>(indent), ' ');
    const std::string inner(static_cast<std::size_t>(indent + 2), ' ');
    switch (j.type()) {
    case json::value_t::number_float:
        out << csv::format_double17(j.get<double>());
        break;
    case json::value_t::object: {
        if (j.empty()) { out << "{}"; break; }
        out << "{\n";
        std::size_t i = 0;
        for (auto it = j.begin(); it != j.end(); ++it, ++i) {
            out << inner << json(it.key()).dump() << ": ";
            write_json17(out, it.value(), indent + 2);
            out << (i + 1 < j.size() ? ",\n" : "\n");
        }
        out << pad << "}";
        break;
    }
    case json::value_t::array: {
        if (j.empty()) { out << "[]"; break; }
        bool scalar = true;
        for (const auto& v : j) scalar = scalar && !v.is_structured();
        if (scalar) {
            out << "[";
            for (std::size_t i = 0; i < j.size(); ++i) {
                if (i) out << ", ";
                write_json17(out, j[i], indent);
            }
            out << "]";
        } else {
            out << "[\n";
            for (std::size_t i = 0; i < j.size(); ++i) {
                out << inner;
                write_json17(out, j[i], indent + 2);
                out << (i + 1 < j.size() ? ",\n" : "\n");
            }
            out << pad << "]";
        }
        break;
    }
    default:
        out << j.dump();
    }
}

// Parses JSON after dropping leading '#' comment lines.
inline json read_json_document(std::istream& in) {
    std::stringstream body;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.front() == '#') continue;
        body << line << '\n';
    }
    try {
        return json::parse(body.str());
    } catch (const json::exception& e) {
        throw InputError(std::string("malformed JSON: ") + e.what());
    }
}

inline json floats(const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(x);
    return a;
}

inline json floats(const std::vector<std::vector<double>>& m) {
    json a = json::array();
    for (const auto& row : m) a.push_back(floats(row));
    return a;
}

inline std::vector<double> vec(const json& j) {
    std::vector<double> out;
    for (const auto& v : j) out.push_back(v.get<double>());
    return out;
}

inline std::vector<std::vector<double>> mat(const json& j) {
    std::vector<std::vector<double>> out;
    for (const auto& row : j) out.push_back(vec(row));
    return out;
}

inline json to_json(const ObservationType& t) {
    json f = json::array();
    for (auto k : t.features) f.push_back(std::string(to_string(k)));
    return {{"id", t.id}, {"features", f}};
}

inline ObservationType obs_type_from_json(const json& j) {
    ObservationType t{j.at("id").get<std::size_t>(), {}};
    for (const auto& f : j.at("features")) {
        auto k = parse_feature_kind(f.get<std::string>());
        if (!k) throw InputError("unknown feature " + f.get<std::string>());
        t.features.push_back(*k);
    }
    t.validate();
    return t;
}

inline json to_json(const hmm::Hmm& m) {
    return {{"N", m.num_states}, {"K", m.num_symbols}, {"J", m.max_jump},
            {"pi", floats(m.pi)}, {"A", floats(m.A)}, {"B", floats(m.B)}};
}

inline hmm::Hmm hmm_from_json(const json& j) {
    hmm::Hmm m{j.at("N").get<std::size_t>(), j.at("K").get<std::size_t>(), j.at("J").get<std::size_t>(),
               vec(j.at("pi")), mat(j.at("A")), mat(j.at("B"))};
    if (auto bad = hmm::validate(m)) throw InputError("model file: invalid HMM: " + *bad);
    return m;
}

inline json to_json(const Codebook& cb) {
    json scale = json::array();
    for (const auto& s : cb.scale) scale.push_back({{"mean", s.mean}, {"spread", s.spread}});
    return {{"obs_type", cb.obs_type.id}, {"scale", scale}, {"centroids", floats(cb.centroids)}};
}

inline json to_json(const svm::SvmModel& m) {
    json pairs = json::array();
    for (const auto& p : m.pairs) {
        pairs.push_back({{"positive", p.positive}, {"negative", p.negative}, {"b", p.b},
                         {"coef", floats(p.coef)}, {"support_vectors", floats(p.support_vectors)}});
    }
    return {{"num_classes", m.num_classes},
            {"dim", m.dim},
            {"kernel", m.kernel.type == svm::KernelType::rbf ? "rbf" : "linear"},
            {"gamma", m.kernel.gamma},
            {"scale_lo", floats(m.scale.lo)},
            {"scale_hi", floats(m.scale.hi)},
            {"pairs", pairs}};
}

inline svm::SvmModel svm_from_json(const json& j) {
    svm::SvmModel m;
    m.num_classes = j.at("num_classes").get<std::size_t>();
    m.dim = j.at("dim").get<std::size_t>();
    const auto kernel = j.at("kernel").get<std::string>();
    if (kernel != "rbf" && kernel != "linear") throw InputError("model file: unknown kernel " + kernel);
    m.kernel = {kernel == "rbf" ? svm::KernelType::rbf : svm::KernelType::linear, j.at("gamma").get<double>()};
    m.scale = {vec(j.at("scale_lo")), vec(j.at("scale_hi"))};
    for (const auto& p : j.at("pairs")) {
        m.pairs.push_back({p.at("positive").get<std::size_t>(), p.at("negative").get<std::size_t>(),
                           mat(p.at("support_vectors")), vec(p.at("coef")), p.at("b").get<double>()});
    }
    return m;
}

inline json to_json(const ScenarioClass& c) {
    json a = json::array(), b = json::array();
    for (auto t : c.types_a) a.push_back(std::string(to_string(t)));
    for (auto t : c.types_b) b.push_back(std::string(to_string(t)));
    return {{"id", c.id}, {"name", c.name}, {"types_a", a}, {"types_b", b}};
}

inline ScenarioClass class_from_json(const json& j) {
    ScenarioClass c{j.at("id").get<std::size_t>(), j.at("name").get<std::string>(), {}, {}};
    auto types = [](const json& arr) {
        std::vector<VesselType> out;
        for (const auto& t : arr) {
            auto v = parse_vessel_type(t.get<std::string>());
            if (!v) throw InputError("unknown vessel type " + t.get<std::string>());
            out.push_back(*v);
        }
        return out;
    };
    c.types_a = types(j.at("types_a"));
    c.types_b = types(j.at("types_b"));
    return c;
}

struct ModelFile {
    std::vector<ScenarioClass> classes;
    HmmBank bank;
    svm::SvmModel svm;
};

inline json to_json(const ModelFile& mf) {
    json classes = json::array(), obs = json::array(), codebooks = json::array(), grid = json::array();
    for (const auto& c : mf.classes) classes.push_back(to_json(c));
    for (const auto& t : mf.bank.obs_types) obs.push_back(to_json(t));
    for (const auto& cb : mf.bank.codebooks) codebooks.push_back(to_json(cb));
    for (const auto& row : mf.bank.models) {
        json r = json::array();
        for (const auto& h : row) r.push_back(to_json(h));
        grid.push_back(r);
    }
    return {{"schema", kModelSchema}, {"classes", classes}, {"obs_types", obs},
            {"codebooks", codebooks}, {"hmm_bank", grid}, {"svm", to_json(mf.svm)}};
}

inline void write_model(std::ostream& out, const ModelFile& mf) {
    write_json17(out, to_json(mf));
    out << '\n';
}

inline ModelFile read_model(std::istream& in) {
    const json j = read_json_document(in);
    try {
        if (!j.is_object() || j.value("schema", std::string()) != kModelSchema) {
            throw InputError("schema-version mismatch: expected " + std::string(kModelSchema));
        }
        ModelFile mf;
        for (const auto& c : j.at("classes")) mf.classes.push_back(class_from_json(c));
        validate_classes(mf.classes);
        for (const auto& t : j.at("obs_types")) mf.bank.obs_types.push_back(obs_type_from_json(t));
        mf.bank.m = mf.classes.size();
        mf.bank.n = mf.bank.obs_types.size();
        for (const auto& cj : j.at("codebooks")) {
            Codebook cb;
            const auto id = cj.at("obs_type").get<std::size_t>();
            if (id >= mf.bank.n) throw InputError("model file: codebook names unknown observation type");
            cb.obs_type = mf.bank.obs_types[id];
            for (const auto& s : cj.at("scale")) cb.scale.push_back({s.at("mean").get<double>(), s.at("spread").get<double>()});
            cb.centroids = mat(cj.at("centroids"));
            mf.bank.codebooks.push_back(std::move(cb));
        }
        for (const auto& row : j.at("hmm_bank")) {
            std::vector<hmm::Hmm> r;
            for (const auto& h : row) r.push_back(hmm_from_json(h));
            mf.bank.models.push_back(std::move(r));
        }
        mf.svm = svm_from_json(j.at("svm"));
        if (mf.bank.codebooks.size() != mf.bank.n || mf.bank.models.size() != mf.bank.m) {
            throw InputError("model file: HMM bank shape does not match class/observation tables");
        }
        for (const auto& row : mf.bank.models) {
            if (row.size() != mf.bank.n) throw InputError("model file: incomplete HMM bank row");
        }
        if (mf.svm.dim != mf.bank.m * mf.bank.n || mf.svm.num_classes != mf.bank.m) {
            throw InputError("model file: SVM dimensions do not match the HMM bank");
        }
        return mf;
    } catch (const json::exception& e) {
        throw InputError(std::string("model file: ") + e.what());
    }
}

} // namespace vesselwatch::io
