#include "polarity/training.hpp"

#include <algorithm>
#include <array>
#include <numeric>
#include <random>
#include <stdexcept>

namespace polarity::training {

std::string_view to_string(ModelKind kind) { return kind == ModelKind::Polarity ? "polarity" : "neutral"; }

SampleSet build_samples(std::span<const corpus::LabeledExample> examples, const embed::WordVectorTable& table,
                        embed::PoolingMode mode, ModelKind kind) {
    SampleSet set;
    for (const auto& ex : examples) {
        int y = 0;
        if (kind == ModelKind::Polarity) {
            if (ex.label == corpus::Label::Neutral) continue;
            y = ex.label == corpus::Label::Right ? 1 : 0;
        } else {
            y = ex.label == corpus::Label::Neutral ? 1 : 0;
        }
        auto vec = embed::embed_text(table, ex.text, mode);
        if (vec.covered_tokens == 0) {
            ++set.skipped_no_coverage;
            continue;
        }
        set.samples.push_back({std::move(vec.values), y});
    }
    return set;
}

double model_accuracy(const nnet::MlpModel& model, std::span<const nnet::Sample> samples) {
    if (samples.empty()) return 0.0;
    std::size_t hits = 0;
    for (const auto& s : samples) {
        hits += nnet::forward(model, s.x).label == s.y ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(samples.size());
}

TrainedModel train_classifier(std::span<const corpus::LabeledExample> examples,
                              const embed::WordVectorTable& table, embed::PoolingMode mode, ModelKind kind,
                              const nnet::TrainConfig& cfg, double train_fraction) {
    const auto usable = kind == ModelKind::Polarity
                            ? corpus::filter_labels(examples, {corpus::Label::Left, corpus::Label::Right})
                            : std::vector<corpus::LabeledExample>(examples.begin(), examples.end());
    const auto split = corpus::split(usable, train_fraction, cfg.seed);
    const auto train = build_samples(split.train, table, mode, kind);
    const auto test = build_samples(split.test, table, mode, kind);
    if (train.samples.empty()) {
        throw std::runtime_error("no training example has an in-vocabulary token");
    }

    auto init = nnet::init_model(table.dim(), cfg.hidden_sizes, cfg.seed);
    TrainedModel out;
    out.model = nnet::train_sgd(init, train.samples, cfg);
    out.model.metadata.embedding_dim = table.dim();
    out.model.metadata.pooling_mode = std::string(embed::to_string(mode));
    out.train_accuracy = model_accuracy(out.model, train.samples);
    out.test_accuracy = model_accuracy(out.model, test.samples);
    out.train_count = train.samples.size();
    out.test_count = test.samples.size();
    return out;
}

GridResult grid_search(std::span<const nnet::Sample> samples, std::size_t input_dim, const GridSpace& space,
                       const nnet::TrainConfig& base, int folds) {
    if (folds < 2) throw std::invalid_argument("grid search needs at least 2 folds");
    if (samples.size() < static_cast<std::size_t>(folds)) {
        throw std::invalid_argument("fewer samples than folds");
    }

    // Stratified fold assignment: shuffle each class, then deal round-robin.
    std::vector<int> fold_of(samples.size());
    {
        std::mt19937_64 rng(base.seed);
        std::array<std::vector<std::size_t>, 2> by_class;
        for (std::size_t i = 0; i < samples.size(); ++i) by_class[samples[i].y == 1 ? 1 : 0].push_back(i);
        int next = 0;
        for (auto& group : by_class) {
            std::shuffle(group.begin(), group.end(), rng);
            for (std::size_t i : group) {
                fold_of[i] = next;
                next = (next + 1) % folds;
            }
        }
    }

    auto lrs = space.learning_rates.empty() ? std::vector<double>{base.learning_rate} : space.learning_rates;
    auto hiddens = space.hidden_sizes.empty() ? std::vector<std::vector<std::size_t>>{base.hidden_sizes}
                                              : space.hidden_sizes;
    auto l2s = space.l2s.empty() ? std::vector<double>{base.l2} : space.l2s;

    GridResult result;
    std::size_t best_params = 0;
    bool have_best = false;
    for (double lr : lrs) {
        for (const auto& hidden : hiddens) {
            for (double l2 : l2s) {
                nnet::TrainConfig cfg = base;
                cfg.learning_rate = lr;
                cfg.hidden_sizes = hidden;
                cfg.l2 = l2;

                double total = 0.0;
                std::size_t params = 0;
                for (int f = 0; f < folds; ++f) {
                    std::vector<nnet::Sample> train;
                    std::vector<nnet::Sample> valid;
                    for (std::size_t i = 0; i < samples.size(); ++i) {
                        (fold_of[i] == f ? valid : train).push_back(samples[i]);
                    }
                    auto model = nnet::train_sgd(nnet::init_model(input_dim, cfg.hidden_sizes, cfg.seed), train, cfg);
                    params = model.parameter_count();
                    total += model_accuracy(model, valid);
                }
                const double mean = total / folds;
                result.entries.push_back({cfg, mean});
                if (!have_best || mean > result.best_mean_accuracy ||
                    (mean == result.best_mean_accuracy && params < best_params)) {
                    result.best = cfg;
                    result.best_mean_accuracy = mean;
                    best_params = params;
                    have_best = true;
                }
            }
        }
    }
    return result;
}

}  // namespace polarity::training
