#pragma once

#include <array>
#include <functional>
#include <span>
#include <string>

#include "decennt/connectivity.hpp"
#include "decennt/data.hpp"
#include "decennt/encoder.hpp"
#include "decennt/metrics.hpp"
#include "decennt/temporal.hpp"

namespace decennt {

// Two-layer head reading the flattened final graph.
struct ClassifierParams {
    TensorPtr w1;  // [n^2 x hidden]
    TensorPtr b1;  // [hidden]
    TensorPtr w2;  // [hidden x 2]
    TensorPtr b2;  // [2]

    static ClassifierParams init(std::size_t graph_size, std::size_t hidden, Rng& rng);
    std::vector<TensorPtr> parameters() const;
};

struct ModelConfig {
    std::size_t components = 0;
    std::size_t timepoints = 0;
    std::size_t lstm_hidden = 64;  // per direction
    std::size_t attn_dim = 64;
    std::size_t classifier_hidden = 64;
    double gamma_ratio = 0.25;
    AlphaMode alpha_mode = AlphaMode::Softmax;
    bool scale_scores = false;
};

struct ModelParams {
    BiLstmEncoder encoder;
    AttentionParams attention;
    GtaParams gta;
    ClassifierParams classifier;

    // every learnable tensor exactly once
    std::vector<TensorPtr> all() const;
};

struct ForwardResult {
    std::array<double, 2> logits{};
    DynamicGraph graph;
    TemporalAttention attention;
};

struct BatchTapedResult {
    TensorPtr logits;       // [batch x 2]
    TensorPtr graphs;       // [batch*T x n^2], per-sample blocks of T rows
    TensorPtr scores;       // [batch x T]
    TensorPtr alpha;        // [batch x T]
    TensorPtr final_graph;  // [batch x n^2]
};

class DecenntModel {
public:
    DecenntModel() = default;

    static DecenntModel init(const ModelConfig& cfg, std::uint64_t seed);
    static DecenntModel from_parts(const ModelConfig& cfg, ModelParams params);

    const ModelConfig& config() const { return cfg_; }
    ModelParams& params() { return params_; }
    const ModelParams& params() const { return params_; }
    std::vector<TensorPtr> parameters() const { return params_.all(); }

    // Full taped pass over a batch; the classifier reads W^f only. With
    // compute_updated the per-timepoint updated embeddings are built and
    // immediately dropped (they feed nothing downstream).
    BatchTapedResult forward_batch_taped(Tape& tape, std::span<const Sample* const> batch, bool training,
                                         bool compute_updated = false);

    // Inference on one sample with running batch-norm statistics.
    ForwardResult forward(const Sample& sample, bool compute_updated = false);

    // Score of the positive class from a logits pair.
    static double positive_score(const std::array<double, 2>& logits);

    // Deep copy / restore of every learnable value and running statistic.
    std::vector<std::vector<double>> snapshot() const;
    void restore(const std::vector<std::vector<double>>& snap);

private:
    ModelConfig cfg_;
    ModelParams params_;
};

// Mean cross-entropy plus lambda * L1 of the registered parameters.
TensorPtr model_loss(Tape& tape, const TensorPtr& logits, std::span<const int> labels,
                     std::span<const TensorPtr> params, double lambda);

class AdamOptimizer {
public:
    explicit AdamOptimizer(std::vector<TensorPtr> params, double beta1 = 0.9, double beta2 = 0.999,
                           double eps = 1e-8);

    // Mark gradients as freshly populated by a backward pass.
    void arm();
    // Bias-corrected update; zeroes gradients afterward. Rejected when no
    // backward pass has run since the last step.
    void step(double lr);
    void zero_grad();
    std::size_t steps_taken() const { return steps_; }

private:
    struct Slot {
        TensorPtr param;
        std::vector<double> m;
        std::vector<double> v;
    };
    std::vector<Slot> slots_;
    double beta1_, beta2_, eps_;
    std::size_t steps_ = 0;
    bool armed_ = false;
};

struct TrainConfig {
    double l1_lambda = 1e-6;
    double learning_rate = 1e-4;
    double plateau_factor = 0.5;
    std::size_t plateau_patience = 5;
    std::size_t early_stop_patience = 15;
    double lr_floor = 1e-6;
    std::size_t batch_size = 32;
    std::size_t folds = 4;
    std::size_t trials = 10;
    std::size_t max_epochs = 200;
    std::uint64_t seed = 0;
    AlphaMode alpha_mode = AlphaMode::Softmax;
    double gamma_ratio = 0.25;
    std::size_t lstm_hidden = 64;
    std::size_t attn_dim = 64;
    std::size_t classifier_hidden = 64;
    bool scale_scores = false;

    void validate() const;
    ModelConfig model_config(std::size_t components, std::size_t timepoints) const;
    std::string canonical_text() const;  // hashed into artifacts
};

struct EpochStats {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
    double lr = 0.0;
    double val_auc = 0.0;
};

struct FitResult {
    std::vector<EpochStats> history;
    std::size_t best_epoch = 0;
    double best_val_loss = 0.0;
};

using SampleRefs = std::vector<const Sample*>;

// Minibatch training with plateau LR halving and early stopping; the
// model is left at the best-validation-loss snapshot.
FitResult fit(DecenntModel& model, const TrainConfig& cfg, const SampleRefs& train, const SampleRefs& val,
              std::uint64_t seed);

struct TrialResult {
    std::size_t fold = 0;
    std::size_t trial = 0;
    std::uint64_t seed = 0;
    MetricsReport metrics;
    std::size_t best_epoch = 0;
    double best_val_loss = 0.0;
    std::vector<EpochStats> history;
};

struct CrossValResult {
    std::vector<TrialResult> trials;  // sorted by (fold, trial)
    double mean_auc = 0.0, std_auc = 0.0;
    double mean_accuracy = 0.0, std_accuracy = 0.0;
};

// Invoked once per finished trial; used by the CLI to persist checkpoints.
using TrialSink = std::function<void(const TrialResult&, DecenntModel&)>;

CrossValResult cross_validate(const TrainConfig& cfg, const Dataset& dataset, std::size_t jobs = 1,
                              const TrialSink& sink = nullptr);

// --- checkpoint container ----------------------------------------------

void save_checkpoint(const std::string& path, const DecenntModel& model, std::uint64_t config_hash,
                     std::uint64_t seed);

struct LoadedCheckpoint {
    DecenntModel model;
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace decennt
