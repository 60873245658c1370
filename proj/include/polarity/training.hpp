#pragma once

#include "polarity/corpus.hpp"
#include "polarity/embed.hpp"
#include "polarity/nnet.hpp"

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace polarity::training {

enum class ModelKind {
    Polarity,  // Left = 0, Right = 1; Neutral rows ignored
    Neutral    // Left/Right = 0 (biased), Neutral = 1
};

std::string_view to_string(ModelKind kind);

struct SampleSet {
    std::vector<nnet::Sample> samples;
    std::size_t skipped_no_coverage = 0;
};

/// Embeds each example as a whole text. Rows without any in-vocabulary token are skipped.
SampleSet build_samples(std::span<const corpus::LabeledExample> examples, const embed::WordVectorTable& table,
                        embed::PoolingMode mode, ModelKind kind);

double model_accuracy(const nnet::MlpModel& model, std::span<const nnet::Sample> samples);

struct TrainedModel {
    nnet::MlpModel model;
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
    std::size_t train_count = 0;
    std::size_t test_count = 0;
};

/// Stratified split of `examples`, then SGD from a seeded init on the train side.
TrainedModel train_classifier(std::span<const corpus::LabeledExample> examples,
                              const embed::WordVectorTable& table, embed::PoolingMode mode, ModelKind kind,
                              const nnet::TrainConfig& cfg, double train_fraction = 0.8);

struct GridSpace {
    std::vector<double> learning_rates;
    std::vector<std::vector<std::size_t>> hidden_sizes;
    std::vector<double> l2s;
};

struct GridResult {
    nnet::TrainConfig best;
    double best_mean_accuracy = 0.0;
    struct Entry {
        nnet::TrainConfig cfg;
        double mean_accuracy = 0.0;
    };
    std::vector<Entry> entries;
};

/// k-fold cross-validated grid search; ties go to the model with fewer parameters.
GridResult grid_search(std::span<const nnet::Sample> samples, std::size_t input_dim, const GridSpace& space,
                       const nnet::TrainConfig& base, int folds = 5);

}  // namespace polarity::training
