#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace polarity::nnet {

class NnetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public NnetError {
public:
    using NnetError::NnetError;
};

/// A model file that is unreadable, has the wrong version, or breaks the layer chain.
class ModelFormatError : public NnetError {
public:
    using NnetError::NnetError;
};

class TrainingDiverged : public NnetError {
public:
    TrainingDiverged(int epoch, std::size_t step, double learning_rate);
    int epoch;
    std::size_t step;
    double learning_rate;
};

/// Dense row-major matrix.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    std::span<const double> row(std::size_t r) const { return std::span<const double>(data).subspan(r * cols, cols); }

    bool operator==(const Matrix&) const = default;
};

enum class Activation { Rectifier, Identity };

struct LayerParams {
    Matrix weights;  // fan_out x fan_in
    std::vector<double> biases;
    Activation activation = Activation::Rectifier;

    std::size_t fan_in() const { return weights.cols; }
    std::size_t fan_out() const { return weights.rows; }

    bool operator==(const LayerParams&) const = default;
};

struct ModelMetadata {
    std::size_t embedding_dim = 0;
    std::string pooling_mode = "average";
    std::string trained_on;
    std::string created_at;

    bool operator==(const ModelMetadata&) const = default;
};

struct MlpModel {
    std::size_t input_dim = 0;
    std::vector<LayerParams> layers;  // hidden layers, Rectifier
    LayerParams head;                 // Identity, fan_out 1
    ModelMetadata metadata;

    std::size_t parameter_count() const;
    /// Throws DimensionError if the chain, head shape, or finiteness invariants are broken.
    void validate() const;

    bool operator==(const MlpModel&) const = default;
};

struct TrainConfig {
    double learning_rate = 0.05;
    int epochs = 20;
    std::uint64_t seed = 42;
    double l2 = 1e-4;
    std::vector<std::size_t> hidden_sizes{64, 32};
};

struct Prediction {
    double probability = 0.5;
    int label = 0;  // 1 iff probability > 0.5
};

struct Sample {
    std::vector<double> x;
    int y = 0;
};

/// Same shape as the model's layers followed by the head.
struct Gradient {
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;
};

inline constexpr double kProbabilityEpsilon = 1e-12;

double sigmoid(double z);

Prediction forward(const MlpModel& model, std::span<const double> x);

double log_loss(double probability, int y);

double dataset_loss(const MlpModel& model, std::span<const Sample> data);

Gradient gradient(const MlpModel& model, std::span<const double> x, int y);

MlpModel init_model(std::size_t input_dim, std::span<const std::size_t> hidden_sizes, std::uint64_t seed);

/// Called after each epoch with the mean per-example loss observed during that epoch.
using EpochObserver = std::function<void(int epoch, double mean_loss)>;

MlpModel train_sgd(const MlpModel& init, std::span<const Sample> data, const TrainConfig& cfg,
                   const EpochObserver& observer = {});

std::string serialize_model(const MlpModel& model);
MlpModel deserialize_model(std::string_view text);
void save_model(const MlpModel& model, const std::filesystem::path& path);
MlpModel load_model(const std::filesystem::path& path);

}  // namespace polarity::nnet
