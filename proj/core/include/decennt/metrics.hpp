#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "decennt/data.hpp"

namespace decennt {

struct ConfusionCounts {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

    std::size_t total() const { return tp + fp + tn + fn; }
    std::optional<double> precision() const {
        if (tp + fp == 0) return std::nullopt;
        return static_cast<double>(tp) / static_cast<double>(tp + fp);
    }
    std::optional<double> sensitivity() const {
        if (tp + fn == 0) return std::nullopt;
        return static_cast<double>(tp) / static_cast<double>(tp + fn);
    }
    std::optional<double> specificity() const {
        if (tn + fp == 0) return std::nullopt;
        return static_cast<double>(tn) / static_cast<double>(tn + fp);
    }
    double accuracy() const {
        return total() == 0 ? 0.0 : static_cast<double>(tp + tn) / static_cast<double>(total());
    }
};

struct MetricsReport {
    double auc = 0.0;
    double accuracy = 0.0;
    std::optional<double> precision;
    std::optional<double> recall;       // sensitivity
    std::optional<double> specificity;
    ConfusionCounts counts;
};

// Probability that a random positive outscores a random negative, ties
// counted one half (Mann-Whitney with midranks).
double auc_roc(std::span<const double> scores, std::span<const int> labels);

// Confusion from thresholding scores at 0.5 plus the ranking AUC.
MetricsReport classification_report(std::span<const double> scores, std::span<const int> labels);

// Per-timepoint confusion of an attention mask against the ground truth.
ConfusionCounts localization_stats(const std::vector<bool>& attended, const std::vector<std::uint8_t>& truth);

// Mean Pearson correlation matrix over a cohort, affinely mapped from
// [-1,1] to [0,1]; symmetric with unit diagonal.
Matrix pcc_fnc(std::span<const Sample> cohort);

// Plain logistic-regression probe trained by full-batch gradient descent.
struct LogisticProbe {
    std::vector<double> weights;
    double bias = 0.0;
    std::vector<double> feature_mean;
    std::vector<double> feature_scale;

    double score(std::span<const double> features) const;
};

LogisticProbe fit_logistic_probe(const std::vector<std::vector<double>>& features, std::span<const int> labels,
                                 double l2 = 1e-4, std::size_t steps = 500, double lr = 0.1);

}  // namespace decennt
