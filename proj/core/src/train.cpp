#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <sstream>
#include <thread>

#include "decennt/error.hpp"
#include "decennt/io_util.hpp"
#include "decennt/model.hpp"

namespace decennt {

namespace {

struct EvalOutcome {
    double loss = 0.0;  // mean cross-entropy + lambda * L1
    double auc = 0.0;
    std::vector<double> scores;
    std::vector<int> labels;
};

EvalOutcome evaluate_split(DecenntModel& model, const SampleRefs& refs, double lambda,
                           std::size_t batch_size) {
    EvalOutcome out;
    out.scores.reserve(refs.size());
    out.labels.reserve(refs.size());
    double ce_sum = 0.0;
    for (std::size_t pos = 0; pos < refs.size(); pos += batch_size) {
        const std::size_t take = std::min(batch_size, refs.size() - pos);
        std::span<const Sample* const> batch(refs.data() + pos, take);
        Tape tape(false);
        auto res = model.forward_batch_taped(tape, batch, false);
        for (std::size_t i = 0; i < take; ++i) {
            const std::array<double, 2> lg{res.logits->at(i, 0), res.logits->at(i, 1)};
            const double score = DecenntModel::positive_score(lg);
            const int label = batch[i]->label;
            out.scores.push_back(score);
            out.labels.push_back(label);
            const double picked = label == 1 ? score : 1.0 - score;
            ce_sum += -std::log(std::max(picked, 1e-300));
        }
    }
    double l1 = 0.0;
    for (const auto& p : model.parameters()) {
        for (double v : p->values) l1 += std::abs(v);
    }
    out.loss = ce_sum / static_cast<double>(refs.size()) + lambda * l1;
    out.auc = auc_roc(out.scores, out.labels);
    return out;
}

}  // namespace

void TrainConfig::validate() const {
    if (l1_lambda < 0.0) throw Error::config("train config: lambda must be nonnegative");
    if (learning_rate <= 0.0 || lr_floor <= 0.0) throw Error::config("train config: learning rates must be positive");
    if (plateau_factor <= 0.0 || plateau_factor >= 1.0) throw Error::config("train config: plateau factor must lie in (0,1)");
    if (plateau_patience == 0 || early_stop_patience == 0) throw Error::config("train config: patience values must be positive");
    if (batch_size == 0 || trials == 0 || max_epochs == 0) throw Error::config("train config: counts must be positive");
    if (folds < 2) throw Error::config("train config: folds must be at least 2");
    if (gamma_ratio <= 0.0) throw Error::config("train config: gamma must be positive");
    if (lstm_hidden == 0 || attn_dim == 0 || classifier_hidden == 0) {
        throw Error::config("train config: layer widths must be positive");
    }
}

ModelConfig TrainConfig::model_config(std::size_t components, std::size_t timepoints) const {
    ModelConfig mc;
    mc.components = components;
    mc.timepoints = timepoints;
    mc.lstm_hidden = lstm_hidden;
    mc.attn_dim = attn_dim;
    mc.classifier_hidden = classifier_hidden;
    mc.gamma_ratio = gamma_ratio;
    mc.alpha_mode = alpha_mode;
    mc.scale_scores = scale_scores;
    return mc;
}

std::string TrainConfig::canonical_text() const {
    std::ostringstream os;
    os << "l1_lambda=" << format_full(l1_lambda) << ";lr=" << format_full(learning_rate)
       << ";plateau_factor=" << format_full(plateau_factor) << ";plateau_patience=" << plateau_patience
       << ";early_stop_patience=" << early_stop_patience << ";lr_floor=" << format_full(lr_floor)
       << ";batch_size=" << batch_size << ";folds=" << folds << ";trials=" << trials
       << ";max_epochs=" << max_epochs << ";seed=" << seed
       << ";alpha_mode=" << (alpha_mode == AlphaMode::Softmax ? "softmax" : "relu-raw")
       << ";gamma=" << format_full(gamma_ratio) << ";lstm_hidden=" << lstm_hidden
       << ";attn_dim=" << attn_dim << ";classifier_hidden=" << classifier_hidden
       << ";scale_scores=" << (scale_scores ? 1 : 0);
    return os.str();
}

FitResult fit(DecenntModel& model, const TrainConfig& cfg, const SampleRefs& train, const SampleRefs& val,
              std::uint64_t seed) {
    cfg.validate();
    if (train.empty() || val.empty()) throw Error::input("fit: train and validation splits must be nonempty");

    AdamOptimizer opt(model.parameters());
    Rng shuffle_rng(derive_seed(seed, 0x5348554656ULL));

    FitResult result;
    double best_val = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> best_snapshot = model.snapshot();
    std::size_t best_epoch = 0;
    std::size_t epochs_since_best = 0;
    std::size_t plateau_counter = 0;
    double lr = cfg.learning_rate;

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    const auto params = model.parameters();
    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t pos = 0; pos < order.size(); pos += cfg.batch_size) {
            const std::size_t take = std::min(cfg.batch_size, order.size() - pos);
            std::vector<const Sample*> batch(take);
            std::vector<int> labels(take);
            for (std::size_t i = 0; i < take; ++i) {
                batch[i] = train[order[pos + i]];
                labels[i] = batch[i]->label;
            }
            Tape tape;
            auto res = model.forward_batch_taped(tape, batch, true);
            auto loss = model_loss(tape, res.logits, labels, params, cfg.l1_lambda);
            epoch_loss += loss->values[0] * static_cast<double>(take);
            tape.backward(loss);
            opt.arm();
            opt.step(lr);
        }
        epoch_loss /= static_cast<double>(train.size());

        auto val_out = evaluate_split(model, val, cfg.l1_lambda, cfg.batch_size);
        result.history.push_back({epoch, epoch_loss, val_out.loss, lr, val_out.auc});

        if (val_out.loss < best_val) {
            best_val = val_out.loss;
            best_epoch = epoch;
            best_snapshot = model.snapshot();
            epochs_since_best = 0;
            plateau_counter = 0;
        } else {
            ++epochs_since_best;
            ++plateau_counter;
            if (plateau_counter >= cfg.plateau_patience) {
                lr = std::max(lr * cfg.plateau_factor, cfg.lr_floor);
                plateau_counter = 0;
            }
            if (epochs_since_best >= cfg.early_stop_patience) break;
        }
    }

    model.restore(best_snapshot);
    result.best_epoch = best_epoch;
    result.best_val_loss = best_val;
    return result;
}

CrossValResult cross_validate(const TrainConfig& cfg, const Dataset& dataset, std::size_t jobs,
                              const TrialSink& sink) {
    cfg.validate();
    dataset.validate();
    if (dataset.samples.size() < cfg.folds * 2) {
        throw Error::validation("cross_validate: dataset smaller than two samples per fold");
    }

    const auto fold_of = split_folds(dataset, cfg.folds, cfg.seed);
    const std::size_t k = cfg.folds;

    // every fold must carry both classes; split_folds guarantees it, the
    // check stays as the contract's error surface
    for (std::size_t f = 0; f < k; ++f) {
        std::size_t c0 = 0, c1 = 0;
        for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
            if (fold_of[i] == f) (dataset.samples[i].label == 0 ? c0 : c1)++;
        }
        if (c0 == 0 || c1 == 0) throw Error::stratification("cross_validate: a fold lost one class");
    }

    struct Task {
        std::size_t fold;
        std::size_t trial;
    };
    std::vector<Task> tasks;
    for (std::size_t f = 0; f < k; ++f) {
        for (std::size_t t = 0; t < cfg.trials; ++t) tasks.push_back({f, t});
    }

    CrossValResult result;
    result.trials.resize(tasks.size());

    auto run_task = [&](std::size_t idx) {
        const auto [f, trial] = tasks[idx];
        const std::size_t val_fold = (f + 1) % k;
        SampleRefs train, val, test;
        for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
            const Sample* s = &dataset.samples[i];
            if (fold_of[i] == f) {
                test.push_back(s);
            } else if (fold_of[i] == val_fold) {
                val.push_back(s);
            } else {
                train.push_back(s);
            }
        }
        const std::uint64_t trial_seed = derive_seed(cfg.seed, f + 1, trial + 1);
        auto model = DecenntModel::init(cfg.model_config(dataset.components, dataset.timepoints), trial_seed);
        auto fit_out = fit(model, cfg, train, val, trial_seed);

        auto test_out = evaluate_split(model, test, cfg.l1_lambda, cfg.batch_size);
        TrialResult tr;
        tr.fold = f;
        tr.trial = trial;
        tr.seed = trial_seed;
        tr.metrics = classification_report(test_out.scores, test_out.labels);
        tr.best_epoch = fit_out.best_epoch;
        tr.best_val_loss = fit_out.best_val_loss;
        tr.history = std::move(fit_out.history);
        result.trials[idx] = std::move(tr);
        if (sink) sink(result.trials[idx], model);
    };

    const std::size_t workers = std::max<std::size_t>(1, std::min(jobs, tasks.size()));
    if (workers == 1) {
        for (std::size_t i = 0; i < tasks.size(); ++i) run_task(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (;;) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= tasks.size()) return;
                    run_task(i);
                }
            });
        }
        for (auto& th : pool) th.join();
    }

    // aggregate in sorted (fold, trial) order, identical for any job count
    double sum_auc = 0.0, sum_acc = 0.0;
    for (const auto& tr : result.trials) {
        sum_auc += tr.metrics.auc;
        sum_acc += tr.metrics.accuracy;
    }
    const double m = static_cast<double>(result.trials.size());
    result.mean_auc = sum_auc / m;
    result.mean_accuracy = sum_acc / m;
    double var_auc = 0.0, var_acc = 0.0;
    for (const auto& tr : result.trials) {
        var_auc += (tr.metrics.auc - result.mean_auc) * (tr.metrics.auc - result.mean_auc);
        var_acc += (tr.metrics.accuracy - result.mean_accuracy) * (tr.metrics.accuracy - result.mean_accuracy);
    }
    result.std_auc = std::sqrt(var_auc / m);
    result.std_accuracy = std::sqrt(var_acc / m);
    return result;
}

}  // namespace decennt
