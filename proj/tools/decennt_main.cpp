// Command-line driver: dataset synthesis, training, evaluation,
// explanation artifacts, and the PCC / logistic-regression baselines.
// Exit codes: 0 success, 1 usage, 2 validation, 3 IO.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "decennt/data.hpp"
#include "decennt/eval.hpp"
#include "decennt/io_util.hpp"
#include "decennt/model.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace decennt;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitValidation = 2;
constexpr int kExitIo = 3;

int exit_code_for(const Error& e) {
    switch (e.kind()) {
        case Error::Kind::Io:
            return kExitIo;
        case Error::Kind::Usage:
            return kExitUsage;
        default:
            return kExitValidation;
    }
}

AlphaMode parse_alpha_mode(const std::string& text) {
    if (text == "softmax") return AlphaMode::Softmax;
    if (text == "relu-raw") return AlphaMode::ReluRaw;
    throw Error::config("alpha mode must be 'softmax' or 'relu-raw'");
}

void apply_config_file(TrainConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error::io("cannot open config file: " + path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        auto not_space = [](unsigned char ch) { return !std::isspace(ch); };
        line.erase(line.begin(), std::find_if(line.begin(), line.end(), not_space));
        line.erase(std::find_if(line.rbegin(), line.rend(), not_space).base(), line.end());
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw Error::config("config line " + std::to_string(lineno) + " is not key=value");
        }
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        try {
            if (key == "l1_lambda") {
                cfg.l1_lambda = std::stod(value);
            } else if (key == "learning_rate") {
                cfg.learning_rate = std::stod(value);
            } else if (key == "plateau_factor") {
                cfg.plateau_factor = std::stod(value);
            } else if (key == "plateau_patience") {
                cfg.plateau_patience = std::stoul(value);
            } else if (key == "early_stop_patience") {
                cfg.early_stop_patience = std::stoul(value);
            } else if (key == "lr_floor") {
                cfg.lr_floor = std::stod(value);
            } else if (key == "batch_size") {
                cfg.batch_size = std::stoul(value);
            } else if (key == "folds") {
                cfg.folds = std::stoul(value);
            } else if (key == "trials") {
                cfg.trials = std::stoul(value);
            } else if (key == "max_epochs") {
                cfg.max_epochs = std::stoul(value);
            } else if (key == "seed") {
                cfg.seed = std::stoull(value);
            } else if (key == "alpha_mode") {
                cfg.alpha_mode = parse_alpha_mode(value);
            } else if (key == "gamma_ratio") {
                cfg.gamma_ratio = std::stod(value);
            } else if (key == "lstm_hidden") {
                cfg.lstm_hidden = std::stoul(value);
            } else if (key == "attn_dim") {
                cfg.attn_dim = std::stoul(value);
            } else if (key == "classifier_hidden") {
                cfg.classifier_hidden = std::stoul(value);
            } else if (key == "scale_scores") {
                cfg.scale_scores = value == "1" || value == "true";
            } else {
                throw Error::config("unknown config key: " + key);
            }
        } catch (const Error&) {
            throw;
        } catch (const std::exception&) {
            throw Error::config("config line " + std::to_string(lineno) + " has a malformed value");
        }
    }
}

std::string artifact_header(std::uint64_t config_hash, std::uint64_t seed) {
    std::ostringstream os;
    os << "rows=receiver cols=sender; config=" << hash_hex(config_hash) << " seed=" << seed;
    return os.str();
}

struct CommonOpts {
    std::string config_file;
    std::string data_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::size_t jobs = 1;
    std::string alpha_mode;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool need_data = true) {
    cmd->add_option("--config", opts.config_file, "flat key=value training config file");
    auto* data = cmd->add_option("--data", opts.data_path, "DCNT dataset file");
    if (need_data) data->required();
    cmd->add_option("--out", opts.out_dir, "output directory")->required();
    cmd->add_option("--seed", opts.seed, "base RNG seed")->each([&](const std::string&) { opts.seed_set = true; });
    cmd->add_option("--jobs", opts.jobs, "parallel fold x trial workers");
    cmd->add_option("--alpha-mode", opts.alpha_mode, "softmax|relu-raw");
}

TrainConfig build_train_config(const CommonOpts& opts) {
    TrainConfig cfg;
    if (!opts.config_file.empty()) apply_config_file(cfg, opts.config_file);
    if (opts.seed_set) cfg.seed = opts.seed;
    if (!opts.alpha_mode.empty()) cfg.alpha_mode = parse_alpha_mode(opts.alpha_mode);
    return cfg;
}

// --- synth ----------------------------------------------------------------

int run_synth_keyword(const KeywordSpec& spec, std::uint64_t seed, const std::string& out_path) {
    auto ds = synth_keyword_dataset(spec, seed);
    save_dataset(out_path, ds);
    json manifest{
        {"kind", "keyword"},
        {"samples", spec.count},
        {"components", spec.components},
        {"timepoints", spec.timepoints},
        {"keyword_len", spec.keyword_len},
        {"snr", spec.snr},
        {"seed", seed},
    };
    std::ostringstream cfgtext;
    cfgtext << "keyword;" << spec.count << ";" << spec.components << ";" << spec.timepoints << ";"
            << spec.keyword_len << ";" << format_full(spec.snr) << ";" << seed;
    manifest["config_hash"] = hash_hex(fnv1a64(cfgtext.str()));
    atomic_write_text(out_path + ".manifest.json", manifest.dump(2) + "\n");
    std::cout << "wrote " << ds.samples.size() << " samples to " << out_path << "\n";
    return kExitOk;
}

int run_synth_svar(std::size_t n, std::size_t timepoints, std::size_t count_per_class, std::size_t edges,
                   double coupling, double sigma, std::size_t reversed_regime, std::uint64_t seed,
                   const std::string& out_path) {
    auto spec = make_svar_benchmark(n, timepoints, edges, coupling, sigma, seed);
    auto svar = synth_svar_dataset(spec, reversed_regime, seed, count_per_class);
    save_dataset(out_path, svar.dataset);

    auto regime_json = [](const SwitchingVarSpec& s) {
        json regimes = json::array();
        for (const auto& reg : s.regimes) {
            regimes.push_back(json{
                {"start", reg.start},
                {"adjacency", reg.adjacency.data},
                {"coefficients", reg.coefficients.data},
            });
        }
        return regimes;
    };
    json manifest{
        {"kind", "svar"},
        {"components", n},
        {"timepoints", timepoints},
        {"count_per_class", count_per_class},
        {"edges_per_regime", edges},
        {"coupling", coupling},
        {"noise_scale", sigma},
        {"reversed_regime", reversed_regime},
        {"seed", seed},
        {"class0_regimes", regime_json(svar.class0)},
        {"class1_regimes", regime_json(svar.class1)},
    };
    std::ostringstream cfgtext;
    cfgtext << "svar;" << n << ";" << timepoints << ";" << count_per_class << ";" << edges << ";"
            << format_full(coupling) << ";" << format_full(sigma) << ";" << reversed_regime << ";" << seed;
    manifest["config_hash"] = hash_hex(fnv1a64(cfgtext.str()));
    atomic_write_text(out_path + ".manifest.json", manifest.dump(2) + "\n");
    std::cout << "wrote " << svar.dataset.samples.size() << " samples to " << out_path << "\n";
    return kExitOk;
}

// --- train ------------------------------------------------------------------

int run_train(const CommonOpts& opts) {
    TrainConfig cfg = build_train_config(opts);
    cfg.validate();
    auto dataset = load_dataset(opts.data_path);
    const std::uint64_t config_hash = fnv1a64(cfg.canonical_text());

    fs::create_directories(opts.out_dir);
    auto sink = [&](const TrialResult& tr, DecenntModel& model) {
        char name[64];
        std::snprintf(name, sizeof name, "fold%zu_trial%zu", tr.fold, tr.trial);
        save_checkpoint((fs::path(opts.out_dir) / (std::string(name) + ".ckpt")).string(), model, config_hash,
                        tr.seed);
        atomic_write_text((fs::path(opts.out_dir) / (std::string(name) + "_history.jsonl")).string(),
                          history_jsonl(tr.history, config_hash, tr.seed));
    };
    auto cv = cross_validate(cfg, dataset, opts.jobs, sink);
    atomic_write_text((fs::path(opts.out_dir) / "metrics.json").string(),
                      cross_val_json(cv, "train", config_hash, cfg.seed));
    std::cout << "mean AUC " << cv.mean_auc << " +/- " << cv.std_auc << " over " << cv.trials.size()
              << " trials\n";
    return kExitOk;
}

// --- eval -------------------------------------------------------------------

int run_eval(const std::string& checkpoint_path, const CommonOpts& opts) {
    auto loaded = load_checkpoint(checkpoint_path);
    auto dataset = load_dataset(opts.data_path);
    if (dataset.components != loaded.model.config().components ||
        dataset.timepoints != loaded.model.config().timepoints) {
        throw Error::validation("eval: dataset shape does not match the checkpointed model");
    }
    std::vector<double> scores;
    std::vector<int> labels;
    for (const auto& s : dataset.samples) {
        auto fwd = loaded.model.forward(s);
        scores.push_back(DecenntModel::positive_score(fwd.logits));
        labels.push_back(s.label);
    }
    auto report = classification_report(scores, labels);
    json out = json::parse(metrics_json(report));
    out["config_hash"] = hash_hex(loaded.config_hash);
    out["seed"] = loaded.seed;
    fs::create_directories(opts.out_dir);
    atomic_write_text((fs::path(opts.out_dir) / "metrics.json").string(), out.dump(2) + "\n");
    std::cout << "AUC " << report.auc << " accuracy " << report.accuracy << "\n";
    return kExitOk;
}

// --- explain ----------------------------------------------------------------

int run_explain(const std::string& checkpoint_path, const CommonOpts& opts, double top_percent,
                double edges_percent) {
    auto loaded = load_checkpoint(checkpoint_path);
    auto dataset = load_dataset(opts.data_path);
    auto& model = loaded.model;
    if (dataset.components != model.config().components || dataset.timepoints != model.config().timepoints) {
        throw Error::validation("explain: dataset shape does not match the checkpointed model");
    }
    fs::create_directories(opts.out_dir);
    const std::string header = artifact_header(loaded.config_hash, loaded.seed);

    const std::size_t n = model.config().components;
    const std::size_t timepoints = model.config().timepoints;

    Matrix alpha_rows(dataset.samples.size(), timepoints);
    Matrix mask_rows(dataset.samples.size(), timepoints, 0.0);
    ConfusionCounts loc_counts;
    bool any_mask = false;

    std::vector<const Sample*> cohort;
    for (const auto& s : dataset.samples) cohort.push_back(&s);

    for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
        auto fwd = model.forward(dataset.samples[i]);
        for (std::size_t t = 0; t < timepoints; ++t) alpha_rows.at(i, t) = fwd.attention.alpha[t];
        const auto mask = attention_threshold(fwd.attention);
        for (std::size_t t = 0; t < timepoints; ++t) mask_rows.at(i, t) = mask[t] ? 1.0 : 0.0;
        if (dataset.samples[i].event_mask) {
            any_mask = true;
            const auto c = localization_stats(mask, *dataset.samples[i].event_mask);
            loc_counts.tp += c.tp;
            loc_counts.fp += c.fp;
            loc_counts.tn += c.tn;
            loc_counts.fn += c.fn;
        }
    }
    atomic_write_text((fs::path(opts.out_dir) / "alpha.csv").string(), matrix_csv(alpha_rows, header));
    atomic_write_text((fs::path(opts.out_dir) / "attention_mask.csv").string(), matrix_csv(mask_rows, header));

    std::span<DecenntModel> one_model(&model, 1);
    auto enc = mean_enc(one_model, cohort, edges_percent);
    atomic_write_text((fs::path(opts.out_dir) / "wf_mean.csv").string(), matrix_csv(enc.mean_graph, header));
    std::string edge_csv = "# source,target,weight; " + header + "\n";
    for (const auto& e : enc.top_edges) {
        edge_csv += std::to_string(e.source) + "," + std::to_string(e.target) + "," + format_full(e.weight) + "\n";
    }
    atomic_write_text((fs::path(opts.out_dir) / "edges.csv").string(), edge_csv);

    json out{
        {"config_hash", hash_hex(loaded.config_hash)},
        {"seed", loaded.seed},
        {"top_percent", top_percent},
        {"edges_percent", edges_percent},
        {"edges_listed", enc.top_edges.size()},
    };
    if (any_mask) {
        json loc{{"tp", loc_counts.tp}, {"fp", loc_counts.fp}, {"tn", loc_counts.tn}, {"fn", loc_counts.fn}};
        loc["precision"] = loc_counts.precision() ? json(*loc_counts.precision()) : json(nullptr);
        loc["sensitivity"] = loc_counts.sensitivity() ? json(*loc_counts.sensitivity()) : json(nullptr);
        loc["specificity"] = loc_counts.specificity() ? json(*loc_counts.specificity()) : json(nullptr);
        out["localization"] = loc;
    } else {
        out["localization"] = nullptr;
    }

    // ablation probe on a deterministic stratified half split
    const auto fold_of = split_folds(dataset, 2, loaded.seed);
    std::vector<const Sample*> probe_train, probe_test;
    for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
        (fold_of[i] == 0 ? probe_train : probe_test).push_back(&dataset.samples[i]);
    }
    const double fraction = top_percent / 100.0;
    out["ablation"] = json{
        {"fraction", fraction},
        {"top_auc", ablation_topk(model, probe_train, probe_test, fraction, AblationSide::Top)},
        {"bottom_auc", ablation_topk(model, probe_train, probe_test, fraction, AblationSide::Bottom)},
    };
    atomic_write_text((fs::path(opts.out_dir) / "explain.json").string(), out.dump(2) + "\n");
    std::cout << "explained " << dataset.samples.size() << " samples, " << enc.top_edges.size() << " edges\n";
    return kExitOk;
}

// --- baselines ----------------------------------------------------------------

int run_baseline_pcc(const CommonOpts& opts) {
    auto dataset = load_dataset(opts.data_path);
    auto fnc = pcc_fnc(dataset.samples);
    fs::create_directories(opts.out_dir);
    const std::uint64_t h = fnv1a64("pcc;" + opts.data_path);
    atomic_write_text((fs::path(opts.out_dir) / "fnc.csv").string(),
                      matrix_csv(fnc, "symmetric FNC in [0,1]; config=" + hash_hex(h) + " seed=0"));
    std::cout << "wrote mean FNC (" << fnc.rows << "x" << fnc.cols << ")\n";
    return kExitOk;
}

int run_baseline_lr(const CommonOpts& opts) {
    auto dataset = load_dataset(opts.data_path);
    const std::uint64_t seed = opts.seed_set ? opts.seed : 0;
    const auto fold_of = split_folds(dataset, 2, seed);

    std::vector<std::vector<double>> train_x, test_x;
    std::vector<int> train_y, test_y;
    for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
        auto& dst_x = fold_of[i] == 0 ? train_x : test_x;
        auto& dst_y = fold_of[i] == 0 ? train_y : test_y;
        dst_x.push_back(dataset.samples[i].series.data);  // flattened raw series
        dst_y.push_back(dataset.samples[i].label);
    }
    auto probe = fit_logistic_probe(train_x, train_y);
    std::vector<double> scores;
    for (const auto& f : test_x) scores.push_back(probe.score(f));
    const auto report = classification_report(scores, test_y);

    json out = json::parse(metrics_json(report));
    out["kind"] = "logistic-regression-raw-series";
    out["features"] = dataset.components * dataset.timepoints;
    out["config_hash"] = hash_hex(fnv1a64("lr;" + std::to_string(seed)));
    out["seed"] = seed;
    fs::create_directories(opts.out_dir);
    atomic_write_text((fs::path(opts.out_dir) / "report.json").string(), out.dump(2) + "\n");
    std::cout << "LR baseline AUC " << report.auc << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DECENNT: dynamic effective connectivity estimation from multivariate time series"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    synth->require_subcommand(1);

    KeywordSpec kw;
    std::uint64_t synth_seed = 0;
    std::string synth_out;
    auto* synth_kw = synth->add_subcommand("keyword", "keyword-in-noise spectrogram benchmark");
    synth_kw->add_option("--samples", kw.count, "total sample count (balanced)")->required();
    synth_kw->add_option("--n", kw.components, "channels")->required();
    synth_kw->add_option("--T", kw.timepoints, "timepoints")->required();
    synth_kw->add_option("--K", kw.keyword_len, "keyword length")->required();
    synth_kw->add_option("--snr", kw.snr, "template strength before renormalization");
    synth_kw->add_option("--seed", synth_seed, "generator seed");
    synth_kw->add_option("--out", synth_out, "output DCNT file")->required();

    std::size_t svar_n = 6, svar_T = 64, svar_count = 100, svar_edges = 5, svar_rev = 1;
    double svar_coupling = 0.8, svar_sigma = 1.0;
    auto* synth_svar = synth->add_subcommand("svar", "switching-VAR benchmark with known directed edges");
    synth_svar->add_option("--n", svar_n, "components");
    synth_svar->add_option("--T", svar_T, "timepoints");
    synth_svar->add_option("--count", svar_count, "samples per class")->required();
    synth_svar->add_option("--edges", svar_edges, "directed edges per regime");
    synth_svar->add_option("--coupling", svar_coupling, "edge coefficient before stability scaling");
    synth_svar->add_option("--sigma", svar_sigma, "innovation noise scale");
    synth_svar->add_option("--reversed-regime", svar_rev, "regime whose edges flip for class 1");
    synth_svar->add_option("--seed", synth_seed, "generator seed");
    synth_svar->add_option("--out", synth_out, "output DCNT file")->required();

    // train
    CommonOpts train_opts;
    auto* train_cmd = app.add_subcommand("train", "cross-validated training with per-trial checkpoints");
    add_common(train_cmd, train_opts);

    // eval
    CommonOpts eval_opts;
    std::string eval_ckpt;
    auto* eval_cmd = app.add_subcommand("eval", "score a dataset with a trained checkpoint");
    eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
    add_common(eval_cmd, eval_opts);

    // explain
    CommonOpts explain_opts;
    std::string explain_ckpt;
    double top_percent = 5.0, edges_percent = 10.0;
    auto* explain_cmd = app.add_subcommand("explain", "attention traces, final graph, edges, ablation");
    explain_cmd->add_option("--checkpoint", explain_ckpt, "checkpoint file")->required();
    explain_cmd->add_option("--top-percent", top_percent, "timepoint fraction for threshold/ablation");
    explain_cmd->add_option("--edges-percent", edges_percent, "directed-edge fraction to list");
    add_common(explain_cmd, explain_opts);

    // baseline
    auto* baseline = app.add_subcommand("baseline", "reference methods");
    baseline->require_subcommand(1);
    CommonOpts pcc_opts;
    auto* baseline_pcc = baseline->add_subcommand("pcc", "mean Pearson FNC matrix");
    add_common(baseline_pcc, pcc_opts);
    CommonOpts lr_opts;
    auto* baseline_lr = baseline->add_subcommand("lr", "logistic regression on raw flattened series");
    add_common(baseline_lr, lr_opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (synth_kw->parsed()) return run_synth_keyword(kw, synth_seed, synth_out);
        if (synth_svar->parsed()) {
            return run_synth_svar(svar_n, svar_T, svar_count, svar_edges, svar_coupling, svar_sigma, svar_rev,
                                  synth_seed, synth_out);
        }
        if (train_cmd->parsed()) return run_train(train_opts);
        if (eval_cmd->parsed()) return run_eval(eval_ckpt, eval_opts);
        if (explain_cmd->parsed()) return run_explain(explain_ckpt, explain_opts, top_percent, edges_percent);
        if (baseline_pcc->parsed()) return run_baseline_pcc(pcc_opts);
        if (baseline_lr->parsed()) return run_baseline_lr(lr_opts);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
    return kExitUsage;
}
