#include <json.hpp>

#include "decennt/eval.hpp"
#include "decennt/io_util.hpp"

namespace decennt {

namespace {

using nlohmann::json;

json counts_json(const ConfusionCounts& c) {
    return json{{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}};
}

json optional_json(const std::optional<double>& v) {
    if (!v) return nullptr;
    return *v;
}

json report_json(const MetricsReport& m) {
    return json{
        {"auc", m.auc},
        {"accuracy", m.accuracy},
        {"precision", optional_json(m.precision)},
        {"recall", optional_json(m.recall)},
        {"specificity", optional_json(m.specificity)},
        {"counts", counts_json(m.counts)},
    };
}

}  // namespace

std::string metrics_json(const MetricsReport& m) { return report_json(m).dump(2) + "\n"; }

std::string cross_val_json(const CrossValResult& cv, const std::string& task, std::uint64_t config_hash,
                           std::uint64_t seed) {
    json folds = json::array();
    for (const auto& tr : cv.trials) {
        folds.push_back(json{
            {"fold", tr.fold},
            {"trial", tr.trial},
            {"seed", tr.seed},
            {"best_epoch", tr.best_epoch},
            {"best_val_loss", tr.best_val_loss},
            {"metrics", report_json(tr.metrics)},
        });
    }
    json out{
        {"task", task},
        {"config_hash", hash_hex(config_hash)},
        {"seed", seed},
        {"per_fold", folds},
        {"aggregate",
         json{{"mean_auc", cv.mean_auc},
              {"std_auc", cv.std_auc},
              {"mean_accuracy", cv.mean_accuracy},
              {"std_accuracy", cv.std_accuracy}}},
    };
    return out.dump(2) + "\n";
}

std::string history_jsonl(const std::vector<EpochStats>& history, std::uint64_t config_hash,
                          std::uint64_t seed) {
    std::string out;
    for (const auto& e : history) {
        json row{
            {"epoch", e.epoch},      {"train_loss", e.train_loss}, {"val_loss", e.val_loss},
            {"lr", e.lr},            {"val_auc", e.val_auc},       {"config_hash", hash_hex(config_hash)},
            {"seed", seed},
        };
        out += row.dump() + "\n";
    }
    return out;
}

}  // namespace decennt
