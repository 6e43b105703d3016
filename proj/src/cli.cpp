#include "trajfuse/cli.hpp"

#include "trajfuse/fusion.hpp"
#include "trajfuse/io.hpp"
#include "trajfuse/metrics.hpp"
#include "trajfuse/parallel.hpp"
#include "trajfuse/synth.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>

namespace trajfuse::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

struct RunConfig {
    std::string manifest;
    std::vector<std::string> predictions;
    std::vector<std::string> fused;
    std::string ground_truth;
    std::string strategy = "weighted";
    std::vector<std::string> strategies;
    double tau = fusion::kDefaultTau;
    std::string primary_model;
    std::vector<double> k_list = metrics::kDefaultKList;
    double k_percent = 10.0;
    std::string metric = "ade";
    std::string sort_key = "independent";
    double confidence_floor = 0.5;
    std::string format = "csv";
    std::string out;
    unsigned threads = 0;

    std::size_t samples = synth::default_scenario_config().sample_count;
    std::uint64_t seed = synth::default_scenario_config().seed;
    std::size_t horizon = synth::default_scenario_config().horizon;
    double dt = synth::default_scenario_config().dt;
    std::vector<double> mix;
    double noise = synth::default_scenario_config().noise_sigma;
    std::vector<std::string> predictor_specs;
};

void warn(const std::string& message) {
    std::cerr << json{{"warning", message}}.dump() << '\n';
}

fs::path output_path(const std::string& out, const std::string& default_name) {
    if (!out.empty()) return out;
    if (const char* dir = std::getenv(kOutDirEnv); dir != nullptr && *dir != '\0') return fs::path(dir) / default_name;
    return default_name;
}

void validate_k(double k) {
    if (!(k > 0.0 && k <= 100.0)) throw InvalidInput("K percentages must lie in (0, 100], got " + std::to_string(k));
}

metrics::Metric parse_metric(const std::string& name) {
    if (name == "ade") return metrics::Metric::ade;
    if (name == "fde") return metrics::Metric::fde;
    throw InvalidInput("unknown metric '" + name + "'");
}

metrics::SortKey parse_sort_key(const std::string& name) {
    if (name == "independent") return metrics::SortKey::independent;
    if (name == "ade") return metrics::SortKey::ade;
    throw InvalidInput("unknown sort key '" + name + "'");
}

std::string extension(io::ReportFormat f) { return f == io::ReportFormat::csv ? "csv" : "json"; }

// Loads members from every prediction dump and scores their most-likely
// modes, plus every fused file, against ground truth. Streams record by record.
metrics::ErrorLedger score_inputs(const RunConfig& cfg) {
    if (cfg.ground_truth.empty()) throw InvalidInput("--ground-truth is required");
    if (cfg.predictions.empty() && cfg.fused.empty()) {
        throw InvalidInput("at least one --predictions or --fused file is required");
    }
    const auto manifest = io::load_manifest(cfg.manifest);

    std::map<std::string, core::Trajectory> truth;
    {
        io::GroundTruthReader reader(cfg.ground_truth, manifest);
        while (auto rec = reader.next()) truth.emplace(rec->sample_id, std::move(rec->trajectory));
    }

    metrics::ErrorLedger ledger;
    std::size_t unmatched = 0;
    auto score = [&](const std::string& method, const std::string& sample_id, const core::Trajectory& pred) {
        const auto it = truth.find(sample_id);
        if (it == truth.end()) {
            ++unmatched;
            return;
        }
        ledger.add(method, sample_id, {core::ade(pred, it->second), core::fde(pred, it->second)});
    };

    for (const auto& path : cfg.predictions) {
        io::PredictionReader reader(path, manifest);
        while (auto out = reader.next()) {
            out->validate();
            score(out->model_id, out->sample_id, core::select_most_likely(*out).trajectory);
        }
    }
    for (const auto& path : cfg.fused) {
        io::FusedReader reader(path);
        std::optional<std::string> method;
        while (auto f = reader.next()) {
            const auto id = synth::ensemble_method_id(f->strategy);
            if (method && *method != id) throw InvalidInput("fused file '" + path + "' mixes strategies");
            method = id;
            if (f->trajectory.horizon() != manifest.horizon) {
                throw HorizonMismatch("fused file '" + path + "' sample '" + f->sample_id + "' has horizon " +
                                      std::to_string(f->trajectory.horizon()));
            }
            score(id, f->sample_id, f->trajectory);
        }
    }
    if (unmatched > 0) warn(std::to_string(unmatched) + " prediction records have no ground truth and were skipped");
    for (const auto& method : ledger.methods()) {
        const auto missing = truth.size() - ledger.rows(method).size();
        if (missing > 0) {
            warn("method '" + method + "' is missing " + std::to_string(missing) + " samples; they are excluded");
        }
    }
    return ledger;
}

int cmd_fuse(const RunConfig& cfg, const CLI::App& sub) {
    const auto strategy = fusion::parse_strategy(cfg.strategy);
    if (strategy != fusion::Strategy::threshold) {
        if (sub.count("--tau") > 0) throw InvalidInput("--tau only applies to --strategy threshold");
        if (sub.count("--primary-model") > 0) throw InvalidInput("--primary-model only applies to --strategy threshold");
    }
    if (cfg.predictions.empty()) throw InvalidInput("at least one --predictions file is required");
    const auto manifest = io::load_manifest(cfg.manifest);

    fusion::FuseOptions opts;
    opts.strategy = strategy;
    opts.tau = cfg.tau;
    if (strategy == fusion::Strategy::threshold) {
        if (!std::isfinite(cfg.tau) || cfg.tau < 0.0) throw InvalidInput("--tau must be nonnegative");
        opts.primary_model_id = cfg.primary_model.empty() ? manifest.model_ids.at(0) : cfg.primary_model;
        if (!manifest.has_model(*opts.primary_model_id)) {
            throw InvalidInput("primary model '" + *opts.primary_model_id + "' is not in the manifest");
        }
    }

    std::map<std::string, core::Sample> grouped;
    for (const auto& path : cfg.predictions) {
        io::PredictionReader reader(path, manifest);
        while (auto out = reader.next()) {
            auto& sample = grouped[out->sample_id];
            sample.sample_id = out->sample_id;
            sample.outputs.push_back(std::move(*out));
        }
    }
    std::vector<const core::Sample*> ordered;
    ordered.reserve(grouped.size());
    for (const auto& [_, s] : grouped) ordered.push_back(&s);

    const auto fused = parallel_map(ordered.size(), cfg.threads,
                                    [&](std::size_t i) { return fusion::fuse(*ordered[i], opts); });
    for (const auto& f : fused) {
        for (const auto& w : f.warnings) warn(w);
        if (f.weights.size() < manifest.model_ids.size()) {
            warn("sample '" + f.sample_id + "' fused " + std::to_string(f.weights.size()) + " of " +
                 std::to_string(manifest.model_ids.size()) + " members");
        }
    }
    io::write_fused(output_path(cfg.out, "fused.ndjson"), fused);
    return kExitOk;
}

int cmd_eval(const RunConfig& cfg) {
    const auto format = io::parse_report_format(cfg.format);
    for (double k : cfg.k_list) validate_k(k);
    const auto sort_key = parse_sort_key(cfg.sort_key);
    const auto ledger = score_inputs(cfg);
    const auto rows = metrics::summary_table(ledger, cfg.k_list, sort_key);
    io::write_summary(output_path(cfg.out, "summary." + extension(format)), rows, cfg.k_list, format);
    return kExitOk;
}

int cmd_overlap(const RunConfig& cfg) {
    const auto format = io::parse_report_format(cfg.format);
    validate_k(cfg.k_percent);
    const auto metric = parse_metric(cfg.metric);
    const auto ledger = score_inputs(cfg);
    std::map<std::string, std::set<std::string>> sets;
    for (const auto& method : ledger.methods()) {
        sets[method] = metrics::top_k_error(ledger, method, metric, cfg.k_percent).id_set();
    }
    const auto report = metrics::overlap_report(sets);
    io::write_overlap(output_path(cfg.out, "overlap." + extension(format)), report, cfg.k_percent, format);
    return kExitOk;
}

int cmd_flags(const RunConfig& cfg) {
    const auto format = io::parse_report_format(cfg.format);
    if (cfg.fused.empty()) throw InvalidInput("--fused is required");
    if (!std::isfinite(cfg.confidence_floor)) throw InvalidInput("--confidence-floor must be finite");

    std::vector<std::pair<std::string, double>> flagged;
    std::size_t total = 0;
    for (const auto& path : cfg.fused) {
        io::FusedReader reader(path);
        while (auto f = reader.next()) {
            ++total;
            if (fusion::flag_low_confidence(*f, cfg.confidence_floor)) flagged.emplace_back(f->sample_id, f->confidence);
        }
    }
    std::sort(flagged.begin(), flagged.end());

    std::string content;
    if (format == io::ReportFormat::json) {
        json doc;
        doc["confidence_floor"] = cfg.confidence_floor;
        doc["total"] = total;
        doc["flagged_count"] = flagged.size();
        json list = json::array();
        for (const auto& [id, c] : flagged) list.push_back(json{{"sample_id", id}, {"confidence", c}});
        doc["flagged"] = list;
        content = doc.dump(2) + "\n";
    } else {
        content = "sample_id,confidence\n";
        char buf[64];
        for (const auto& [id, c] : flagged) {
            std::snprintf(buf, sizeof buf, "%.17g", c);
            content += id + "," + buf + "\n";
        }
    }
    io::write_text(output_path(cfg.out, "flags." + extension(format)), content);
    return kExitOk;
}

// "id:kind:sigma:modes:temperature"
synth::PredictorSpec parse_predictor(const std::string& text) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        const auto pos = text.find(':', start);
        parts.push_back(text.substr(start, pos - start));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    if (parts.size() != 5) throw InvalidInput("--predictor expects id:kind:sigma:modes:temperature, got '" + text + "'");
    synth::PredictorSpec spec;
    spec.model_id = parts[0];
    spec.kind = synth::parse_predictor_kind(parts[1]);
    try {
        spec.noise_sigma = std::stod(parts[2]);
        const long modes = std::stol(parts[3]);
        if (modes < 1) throw InvalidInput("--predictor mode count must be at least 1");
        spec.mode_count = static_cast<std::size_t>(modes);
        spec.temperature = std::stod(parts[4]);
    } catch (const std::logic_error&) {
        throw InvalidInput("--predictor has a malformed number in '" + text + "'");
    }
    spec.validate();
    return spec;
}

int cmd_synth(const RunConfig& cfg) {
    const auto format = io::parse_report_format(cfg.format);
    for (double k : cfg.k_list) validate_k(k);

    auto config = synth::default_scenario_config();
    config.sample_count = cfg.samples;
    config.seed = cfg.seed;
    config.horizon = cfg.horizon;
    config.dt = cfg.dt;
    config.noise_sigma = cfg.noise;
    if (!cfg.mix.empty()) {
        if (cfg.mix.size() != 3) throw InvalidInput("--mix expects three proportions: straight,turn,lane_change");
        config.mix = {cfg.mix[0], cfg.mix[1], cfg.mix[2]};
    }
    config.validate();

    std::vector<synth::PredictorSpec> bank;
    for (const auto& s : cfg.predictor_specs) bank.push_back(parse_predictor(s));
    if (bank.empty()) bank = synth::default_predictor_bank();

    synth::ExperimentOptions opts;
    if (!cfg.strategies.empty()) {
        opts.strategies.clear();
        for (const auto& s : cfg.strategies) opts.strategies.push_back(fusion::parse_strategy(s));
    }
    if (!cfg.primary_model.empty()) opts.primary_model_id = cfg.primary_model;
    opts.tau = cfg.tau;
    opts.k_list = cfg.k_list;
    opts.sort_key = parse_sort_key(cfg.sort_key);
    opts.threads = cfg.threads;

    const auto result = synth::synth_experiment(config, bank, opts);

    const auto dir = output_path(cfg.out, "synth_out");
    io::write_manifest(dir / "manifest.json", result.manifest);
    std::vector<io::GroundTruthRecord> gt;
    gt.reserve(result.scenarios.size());
    for (const auto& sc : result.scenarios) gt.push_back({sc.sample_id, sc.ground_truth});
    io::write_ground_truth(dir / "ground_truth.ndjson", gt);
    for (const auto& spec : bank) {
        std::vector<core::ModelOutput> mine;
        for (const auto& o : result.outputs) {
            if (o.model_id == spec.model_id) mine.push_back(o);
        }
        io::write_predictions(dir / ("predictions_" + spec.model_id + ".ndjson"), mine);
    }
    for (const auto& [strategy, fused] : result.fused) {
        io::write_fused(dir / ("fused_" + std::string(fusion::to_string(strategy)) + ".ndjson"), fused);
    }
    io::write_summary(dir / ("summary." + extension(format)), result.summary, opts.k_list, format);

    std::map<std::string, std::set<std::string>> sets;
    for (const auto& spec : bank) {
        sets[spec.model_id] = metrics::top_k_error(result.ledger, spec.model_id, metrics::Metric::ade, cfg.k_percent).id_set();
    }
    io::write_overlap(dir / ("overlap." + extension(format)), metrics::overlap_report(sets), cfg.k_percent, format);
    for (const auto& w : result.warnings) warn(w);
    return kExitOk;
}

void add_threads(CLI::App& sub, RunConfig& cfg) {
    sub.add_option("--threads", cfg.threads, "Worker threads; 0 uses every core, 1 runs serially")
        ->capture_default_str();
}

void add_format(CLI::App& sub, RunConfig& cfg) {
    sub.add_option("--format", cfg.format, "Report format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
}

void add_k_list(CLI::App& sub, RunConfig& cfg) {
    sub.add_option("--k-list", cfg.k_list, "Comma-separated Top-K percentages")->delimiter(',')->capture_default_str();
}

void add_scoring_inputs(CLI::App& sub, RunConfig& cfg) {
    sub.add_option("--manifest", cfg.manifest, "Dataset manifest (JSON)")->required();
    sub.add_option("--ground-truth", cfg.ground_truth, "Ground-truth dump (NDJSON)")->required();
    sub.add_option("--predictions", cfg.predictions, "Model prediction dumps (NDJSON)");
    sub.add_option("--fused", cfg.fused, "Fused prediction files (NDJSON) to score as extra methods");
    sub.add_option("--out", cfg.out, "Output file");
    add_format(sub, cfg);
}

int report_error(const std::string& kind, const std::string& message, int code) {
    std::cerr << json{{"error", kind}, {"message", message}}.dump() << '\n';
    return code;
}

}  // namespace

int run(const std::vector<std::string>& args) {
    RunConfig cfg;
    CLI::App app{"Confidence-weighted ensemble fusion and long-tail evaluation of trajectory predictions", "trajfuse"};
    app.set_config("--config", "", "TOML/INI file supplying option values (command-line flags take precedence)");
    app.require_subcommand(1);

    auto* fuse = app.add_subcommand("fuse", "Fuse the most-likely modes of several models per sample");
    fuse->add_option("--manifest", cfg.manifest, "Dataset manifest (JSON)")->required();
    fuse->add_option("--predictions", cfg.predictions, "Model prediction dumps (NDJSON)")->required();
    fuse->add_option("--strategy", cfg.strategy, "Ensemble strategy")
        ->check(CLI::IsMember({"weighted", "simple", "threshold"}))
        ->capture_default_str();
    fuse->add_option("--tau", cfg.tau, "Primary-model confidence threshold (threshold strategy)")->capture_default_str();
    fuse->add_option("--primary-model", cfg.primary_model,
                     "Primary model for the threshold strategy (defaults to the first manifest model)");
    fuse->add_option("--out", cfg.out, "Output fused-prediction file (NDJSON)");
    add_threads(*fuse, cfg);

    auto* eval = app.add_subcommand("eval", "Most-likely ADE/FDE summary with Top-K% long-tail columns");
    add_scoring_inputs(*eval, cfg);
    add_k_list(*eval, cfg);
    eval->add_option("--sort-key", cfg.sort_key, "independent: FDE columns rank by FDE; ade: rank both by ADE")
        ->check(CLI::IsMember({"independent", "ade"}))
        ->capture_default_str();

    auto* overlap = app.add_subcommand("overlap", "Overlap of each method's Top-K% hardest samples");
    add_scoring_inputs(*overlap, cfg);
    overlap->add_option("--k", cfg.k_percent, "Top-K percentage defining each long-tail set")->capture_default_str();
    overlap->add_option("--metric", cfg.metric, "Metric ranking the samples")
        ->check(CLI::IsMember({"ade", "fde"}))
        ->capture_default_str();

    auto* synth_cmd = app.add_subcommand("synth", "Run the seeded synthetic experiment end to end");
    synth_cmd->add_option("--samples", cfg.samples, "Number of scenarios")->capture_default_str();
    synth_cmd->add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
    synth_cmd->add_option("--horizon", cfg.horizon, "Future timesteps")->capture_default_str();
    synth_cmd->add_option("--dt", cfg.dt, "Timestep, seconds")->capture_default_str();
    synth_cmd->add_option("--mix", cfg.mix, "Maneuver proportions straight,turn,lane_change (sum to 1)")
        ->delimiter(',');
    synth_cmd->add_option("--noise", cfg.noise, "Ground-truth observation noise sigma, meters")->capture_default_str();
    synth_cmd->add_option("--predictor", cfg.predictor_specs,
                          "Predictor id:kind:sigma:modes:temperature (repeatable; default bank when omitted)");
    synth_cmd->add_option("--strategy", cfg.strategies, "Strategies to run (repeatable; default all)")
        ->check(CLI::IsMember({"weighted", "simple", "threshold"}));
    synth_cmd->add_option("--tau", cfg.tau, "Threshold strategy tau")->capture_default_str();
    synth_cmd->add_option("--primary-model", cfg.primary_model, "Threshold strategy primary model (default: first)");
    synth_cmd->add_option("--k", cfg.k_percent, "Top-K percentage for the overlap report")->capture_default_str();
    synth_cmd->add_option("--sort-key", cfg.sort_key, "Summary FDE ranking")
        ->check(CLI::IsMember({"independent", "ade"}))
        ->capture_default_str();
    synth_cmd->add_option("--out", cfg.out, "Output directory");
    add_k_list(*synth_cmd, cfg);
    add_format(*synth_cmd, cfg);
    add_threads(*synth_cmd, cfg);

    auto* flags = app.add_subcommand("flags", "List samples whose fused confidence is below a floor");
    flags->add_option("--fused", cfg.fused, "Fused prediction files (NDJSON)")->required();
    flags->add_option("--confidence-floor", cfg.confidence_floor, "Flag confidences strictly below this value")
        ->capture_default_str();
    flags->add_option("--out", cfg.out, "Output file");
    add_format(*flags, cfg);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    if (!reversed.empty()) reversed.pop_back();  // program name
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return report_error("UsageError", e.what(), kExitValidation);
    }

    try {
        if (fuse->parsed()) return cmd_fuse(cfg, *fuse);
        if (eval->parsed()) return cmd_eval(cfg);
        if (overlap->parsed()) return cmd_overlap(cfg);
        if (synth_cmd->parsed()) return cmd_synth(cfg);
        if (flags->parsed()) return cmd_flags(cfg);
    } catch (const IoError& e) {
        return report_error(e.kind(), e.what(), kExitIo);
    } catch (const Error& e) {
        return report_error(e.kind(), e.what(), kExitValidation);
    } catch (const std::exception& e) {
        return report_error("InternalError", e.what(), kExitValidation);
    }
    return report_error("UsageError", "no subcommand given", kExitValidation);
}

int run(int argc, char** argv) { return run(std::vector<std::string>(argv, argv + argc)); }

}  // namespace trajfuse::cli
