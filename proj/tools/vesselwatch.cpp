// vesselwatch: batch command-line front end.
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#if __has_include(<CLI11.hpp>)
#include <CLI11.hpp>
#else
#include <CLI/CLI.hpp>
#endif
#include <nlohmann/json.hpp>

#include "vesselwatch/config.hpp"
#include "vesselwatch/model_io.hpp"
#include "vesselwatch/workflow.hpp"

namespace fs = std::filesystem;
using namespace vesselwatch;
using nlohmann::json;

namespace {

struct Globals {
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string out_dir = ".";
    std::size_t jobs = 1;
};

class Run {
public:
    Run(std::string command, const Globals& g) : command_(std::move(command)), g_(g) {
        cfg_ = g.config_path.empty() ? default_config() : load_config(g.config_path);
        if (g.seed_set) cfg_.pipeline.seed = g.seed;
        hash_ = config_hash(cfg_);
        fs::create_directories(g.out_dir);
        if (!g.config_path.empty()) note_input(g.config_path);
    }

    const Config& cfg() const { return cfg_; }
    const std::string& hash() const { return hash_; }

    std::string read_input(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw InputError("cannot open " + path);
        std::stringstream ss;
        ss << in.rdbuf();
        inputs_[path] = digest(ss.str());
        return ss.str();
    }

    void note_input(const std::string& path) { read_input(path); }

    // Writes `<out>/<name>` through a temporary file and rename.
    void write_output(const std::string& name, const std::string& schema, const std::string& body) {
        const fs::path target = fs::path(g_.out_dir) / name;
        const fs::path tmp = target.string() + ".tmp";
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out) throw InputError("cannot write " + tmp.string());
            out << header_line(schema, hash_) << body;
            if (!out) throw InputError("write failed for " + tmp.string());
        }
        fs::rename(tmp, target);
        outputs_.push_back(target.string());
    }

    void finish() {
        const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        json report = {{"command", command_},
                       {"config_hash", hash_},
                       {"inputs", inputs_},
                       {"outputs", outputs_},
                       {"timings", {{"total_seconds", elapsed}}}};
        const fs::path target = fs::path(g_.out_dir) / "run_report.json";
        const fs::path tmp = target.string() + ".tmp";
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            out << report.dump(2) << '\n';
        }
        fs::rename(tmp, target);
    }

    static std::string digest(const std::string& bytes) {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (unsigned char c : bytes) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
        char buf[32];
        std::snprintf(buf, sizeof buf, "fnv1a64:%016llx", static_cast<unsigned long long>(h));
        return buf;
    }

private:
    std::string command_;
    Globals g_;
    Config cfg_;
    std::string hash_;
    std::map<std::string, std::string> inputs_;
    std::vector<std::string> outputs_;
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::vector<Trajectory> tracks_from(Run& run, const std::string& path) {
    run.note_input(path);
    return load_tracks(path, run.cfg().ingest);
}

std::vector<simgen::ManifestRow> labels_from(Run& run, const std::string& path) {
    std::istringstream in(run.read_input(path));
    return simgen::read_manifest_csv(in);
}

io::ModelFile model_from(Run& run, const std::string& path) {
    std::istringstream in(run.read_input(path));
    auto mf = io::read_model(in);
    if (mf.classes.size() != run.cfg().classes.size()) throw InputError("model classes differ from the configured classes");
    return mf;
}

void cmd_ingest(Run& run, const std::vector<std::string>& inputs) {
    for (const auto& p : inputs) run.note_input(p);
    const auto outcome = ingest_files(inputs, run.cfg().ingest);
    std::ostringstream tracks, rejects;
    write_track_store(tracks, outcome.trajectories);
    for (const auto& r : outcome.rejections) rejects << r << '\n';
    run.write_output("tracks.csv", "vesselwatch-tracks/1", tracks.str());
    run.write_output("rejections.log", "vesselwatch-rejections/1", rejects.str());
}

void cmd_engage(Run& run, const std::string& tracks_path) {
    const auto trajs = tracks_from(run, tracks_path);
    std::ostringstream out;
    write_candidates_csv(out, detect_candidates(trajs, run.cfg().engagement));
    run.write_output("candidates.csv", "vesselwatch-candidates/1", out.str());
}

void cmd_simulate(Run& run) {
    const auto corpus = simgen::generate_corpus(run.cfg().corpus_spec());
    std::ostringstream ais, manifest;
    write_ais_csv(ais, simgen::to_ais_records(corpus.samples));
    simgen::write_manifest_csv(manifest, corpus.manifest);
    run.write_output("ais.csv", "vesselwatch-ais/1", ais.str());
    run.write_output("manifest.csv", "vesselwatch-manifest/1", manifest.str());
}

void cmd_train(Run& run, const std::string& tracks_path, const std::string& labels_path) {
    const auto& cfg = run.cfg();
    const auto trajs = tracks_from(run, tracks_path);
    const auto corpus = labeled_corpus(trajs, labels_from(run, labels_path), cfg.classes);
    io::ModelFile mf{cfg.classes, train_bank(corpus, cfg.classes, cfg.pipeline), {}};
    mf.svm = train_classifier(mf.bank, corpus, cfg.pipeline);
    std::ostringstream out;
    io::write_model(out, mf);
    run.write_output("model.json", io::kModelSchema, out.str());
}

void cmd_classify(Run& run, const std::string& model_path, const std::string& tracks_path,
                  const std::string& candidates_path) {
    const auto mf = model_from(run, model_path);
    const auto trajs = tracks_from(run, tracks_path);
    std::istringstream cin(run.read_input(candidates_path));
    const auto candidates = read_candidates_csv(cin);
    TrackIndex index(trajs);
    std::vector<Classification> rows;
    for (const auto& p : candidates) {
        const LabeledCandidate c{p, index.covering(p.vessel_a, p.t_start, p.t_end),
                                 index.covering(p.vessel_b, p.t_start, p.t_end), 0};
        auto lv = score(mf.bank, c);
        const auto label = svm::predict(mf.svm, lv.values).label;
        rows.push_back({p, mf.classes[label].name, std::move(lv.values)});
    }
    std::ostringstream out;
    write_classifications_csv(out, rows, mf.bank, mf.classes);
    run.write_output("classifications.csv", "vesselwatch-classifications/1", out.str());
}

void cmd_evaluate(Run& run, const std::string& tracks_path, const std::string& labels_path, std::size_t k,
                  std::size_t jobs) {
    const auto& cfg = run.cfg();
    const auto trajs = tracks_from(run, tracks_path);
    const auto corpus = labeled_corpus(trajs, labels_from(run, labels_path), cfg.classes);
    const auto cv = cross_validate(corpus, cfg.classes, cfg.pipeline, k ? k : cfg.cv_folds, jobs);
    std::ostringstream out;
    write_evaluation_report(out, cv.confusion, cv.metrics, cfg.classes);
    run.write_output("evaluation.csv", "vesselwatch-evaluation/1", out.str());
    std::cout << out.str();
}

void cmd_alert(Run& run, const std::string& classifications_path, const std::string& tracks_path,
               const std::string& rules_path, const std::vector<std::string>& fact_paths) {
    const auto& cfg = run.cfg();
    std::istringstream cin(run.read_input(classifications_path));
    const auto rows = read_classifications_csv(cin);
    const auto trajs = tracks_from(run, tracks_path);
    const std::string rp = rules_path.empty() ? cfg.rules_path : rules_path;
    anomaly::Program program;
    if (!rp.empty()) program = anomaly::parse_program(run.read_input(rp));
    std::vector<anomaly::Fact> extra;
    for (const auto& fp : fact_paths) {
        const auto p = anomaly::parse_program(run.read_input(fp));
        if (!p.rules.empty()) throw InputError(fp + ": facts file contains rules");
        extra.insert(extra.end(), p.facts.begin(), p.facts.end());
    }
    std::ostringstream out;
    anomaly::write_alerts_csv(out, build_alerts(rows, trajs, program, extra, cfg));
    run.write_output("alerts.csv", "vesselwatch-alerts/1", out.str());
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"vesselwatch: engagement detection, scenario classification and anomaly alerts for AIS tracks"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--config", g.config_path, "Config file (JSON)")->check(CLI::ExistingFile);
    auto* seed_opt = app.add_option("--seed", g.seed, "Master seed (overrides the config)");
    app.add_option("--out", g.out_dir, "Output directory");
    app.add_option("--jobs", g.jobs, "Worker threads")->check(CLI::PositiveNumber);

    std::vector<std::string> ingest_inputs;
    auto* ingest = app.add_subcommand("ingest", "Raw AIS CSV -> trajectory store");
    ingest->add_option("inputs", ingest_inputs, "AIS CSV files")->required()->check(CLI::ExistingFile);

    std::string tracks, labels, model, candidates, classifications, rules;
    std::vector<std::string> facts;
    std::size_t folds = 0;

    auto* engage = app.add_subcommand("engage", "Trajectories -> candidate pairs");
    engage->add_option("--tracks", tracks, "Trajectory store or AIS CSV")->required()->check(CLI::ExistingFile);

    auto* simulate = app.add_subcommand("simulate", "Synthetic labeled AIS corpus");

    auto* train = app.add_subcommand("train", "Labeled candidates -> model file");
    train->add_option("--tracks", tracks, "Trajectory store or AIS CSV")->required()->check(CLI::ExistingFile);
    train->add_option("--labels", labels, "Label manifest CSV")->required()->check(CLI::ExistingFile);

    auto* classify = app.add_subcommand("classify", "Candidates -> scenario classes");
    classify->add_option("--model", model, "Model file")->required()->check(CLI::ExistingFile);
    classify->add_option("--tracks", tracks, "Trajectory store or AIS CSV")->required()->check(CLI::ExistingFile);
    classify->add_option("--candidates", candidates, "Candidates CSV")->required()->check(CLI::ExistingFile);

    auto* evaluate = app.add_subcommand("evaluate", "Stratified k-fold cross validation");
    evaluate->add_option("--tracks", tracks, "Trajectory store or AIS CSV")->required()->check(CLI::ExistingFile);
    evaluate->add_option("--labels", labels, "Label manifest CSV")->required()->check(CLI::ExistingFile);
    evaluate->add_option("-k,--folds", folds, "Number of folds (default from config)");

    auto* alert = app.add_subcommand("alert", "Classifications + context -> ranked alerts");
    alert->add_option("--classifications", classifications, "Classification CSV")->required()->check(CLI::ExistingFile);
    alert->add_option("--tracks", tracks, "Trajectory store or AIS CSV")->required()->check(CLI::ExistingFile);
    alert->add_option("--rules", rules, "Rule file (default from config)")->check(CLI::ExistingFile);
    alert->add_option("--facts", facts, "Extra ground facts")->check(CLI::ExistingFile);

    auto* print_config = app.add_subcommand("print-config", "Print the effective configuration");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::string msg = e.what();
        for (auto& ch : msg) {
            if (ch == '\n') ch = ' ';
        }
        std::cerr << "vesselwatch: " << msg << '\n';
        return 1;
    }
    g.seed_set = seed_opt->count() > 0;

    try {
        const std::string name = app.get_subcommands().front()->get_name();
        Run run(name, g);
        if (print_config->parsed()) {
            io::write_json17(std::cout, to_json(run.cfg()));
            std::cout << "\nconfig hash " << run.hash() << '\n';
            return 0;
        }
        if (ingest->parsed()) cmd_ingest(run, ingest_inputs);
        if (engage->parsed()) cmd_engage(run, tracks);
        if (simulate->parsed()) cmd_simulate(run);
        if (train->parsed()) cmd_train(run, tracks, labels);
        if (classify->parsed()) cmd_classify(run, model, tracks, candidates);
        if (evaluate->parsed()) cmd_evaluate(run, tracks, labels, folds, g.jobs);
        if (alert->parsed()) cmd_alert(run, classifications, tracks, rules, facts);
        run.finish();
        return 0;
    } catch (const InputError& e) {
        std::cerr << "vesselwatch: error: " << e.what() << '\n';
        return 1;
    } catch (const InvariantError& e) {
        std::cerr << "vesselwatch: internal error: " << e.what() << '\n';
        return 2;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "vesselwatch: error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "vesselwatch: internal error: " << e.what() << '\n';
        return 2;
    }
}
