#include "polarity/nnet.hpp"

#include "polarity/fileio.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace polarity::nnet {

namespace {

std::string_view activation_name(Activation a) {
    return a == Activation::Rectifier ? "rectifier" : "identity";
}

Activation parse_activation(const std::string& name) {
    if (name == "rectifier") return Activation::Rectifier;
    if (name == "identity") return Activation::Identity;
    throw ModelFormatError("unknown activation '" + name + "'");
}

void check_finite(std::span<const double> values, const char* what) {
    if (!std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); })) {
        throw DimensionError(std::string(what) + " contains a non-finite value");
    }
}

void affine(const LayerParams& layer, std::span<const double> in, std::vector<double>& out) {
    out.resize(layer.fan_out());
    for (std::size_t r = 0; r < layer.fan_out(); ++r) {
        const auto w = layer.weights.row(r);
        double z = layer.biases[r];
        for (std::size_t c = 0; c < w.size(); ++c) {
            z += w[c] * in[c];
        }
        out[r] = z;
    }
}

double clamp_probability(double p) {
    return std::clamp(p, kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
}

// Pre-activations of every hidden layer plus the head logit.
struct Trace {
    std::vector<std::vector<double>> pre;
    std::vector<std::vector<double>> post;  // post[0] is the input
    double logit = 0.0;
};

void run(const MlpModel& model, std::span<const double> x, Trace& trace) {
    if (x.size() != model.input_dim) {
        throw DimensionError("input has dimension " + std::to_string(x.size()) + ", model expects " +
                             std::to_string(model.input_dim));
    }
    const std::size_t depth = model.layers.size();
    trace.pre.resize(depth);
    trace.post.resize(depth + 1);
    trace.post[0].assign(x.begin(), x.end());
    for (std::size_t t = 0; t < depth; ++t) {
        affine(model.layers[t], trace.post[t], trace.pre[t]);
        trace.post[t + 1] = trace.pre[t];
        if (model.layers[t].activation == Activation::Rectifier) {
            for (auto& v : trace.post[t + 1]) v = std::max(0.0, v);
        }
    }
    std::vector<double> head_out;
    affine(model.head, trace.post[depth], head_out);
    trace.logit = head_out[0];
}

Gradient zero_gradient(const MlpModel& model) {
    Gradient g;
    for (const auto& layer : model.layers) {
        g.weights.emplace_back(layer.fan_out(), layer.fan_in());
        g.biases.emplace_back(layer.fan_out(), 0.0);
    }
    g.weights.emplace_back(model.head.fan_out(), model.head.fan_in());
    g.biases.emplace_back(model.head.fan_out(), 0.0);
    return g;
}

// Fills `g` with the gradient of the log-loss at (x, y) and returns that loss.
double backprop(const MlpModel& model, std::span<const double> x, int y, Trace& trace, Gradient& g) {
    run(model, x, trace);
    const double p = clamp_probability(sigmoid(trace.logit));
    const double loss = log_loss(p, y);
    const std::size_t depth = model.layers.size();

    // Output delta for sigmoid + log-loss.
    std::vector<double> delta{p - static_cast<double>(y)};
    const LayerParams* upper = &model.head;
    for (std::size_t t = depth + 1; t-- > 0;) {
        const auto& input = trace.post[t];
        auto& gw = g.weights[t];
        auto& gb = g.biases[t];
        for (std::size_t r = 0; r < delta.size(); ++r) {
            gb[r] = delta[r];
            for (std::size_t c = 0; c < input.size(); ++c) {
                gw(r, c) = delta[r] * input[c];
            }
        }
        if (t == 0) break;

        // Propagate through `upper` into layer t-1's pre-activation.
        const auto& layer = model.layers[t - 1];
        std::vector<double> next(layer.fan_out(), 0.0);
        for (std::size_t r = 0; r < delta.size(); ++r) {
            const auto w = upper->weights.row(r);
            for (std::size_t c = 0; c < w.size(); ++c) {
                next[c] += w[c] * delta[r];
            }
        }
        if (layer.activation == Activation::Rectifier) {
            for (std::size_t c = 0; c < next.size(); ++c) {
                if (!(trace.pre[t - 1][c] > 0.0)) next[c] = 0.0;
            }
        }
        delta = std::move(next);
        upper = &layer;
    }
    return loss;
}

template <typename F>
void for_each_param(MlpModel& model, const Gradient& g, F&& f) {
    for (std::size_t t = 0; t <= model.layers.size(); ++t) {
        LayerParams& layer = t < model.layers.size() ? model.layers[t] : model.head;
        for (std::size_t i = 0; i < layer.weights.data.size(); ++i) {
            f(layer.weights.data[i], g.weights[t].data[i]);
        }
        for (std::size_t i = 0; i < layer.biases.size(); ++i) {
            f(layer.biases[i], g.biases[t][i]);
        }
    }
}

nlohmann::json layer_to_json(const LayerParams& layer) {
    nlohmann::json weights = nlohmann::json::array();
    for (std::size_t r = 0; r < layer.weights.rows; ++r) {
        const auto row = layer.weights.row(r);
        weights.push_back(std::vector<double>(row.begin(), row.end()));
    }
    return {{"weights", std::move(weights)},
            {"biases", layer.biases},
            {"activation", activation_name(layer.activation)}};
}

LayerParams layer_from_json(const nlohmann::json& j) {
    LayerParams layer;
    const auto& weights = j.at("weights");
    if (!weights.is_array()) throw ModelFormatError("weights must be a 2-D array");
    const std::size_t rows = weights.size();
    const std::size_t cols = rows == 0 ? 0 : weights.at(0).size();
    layer.weights = Matrix(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        const auto& row = weights.at(r);
        if (!row.is_array() || row.size() != cols) {
            throw ModelFormatError("weight matrix rows have inconsistent lengths");
        }
        for (std::size_t c = 0; c < cols; ++c) {
            layer.weights(r, c) = row.at(c).get<double>();
        }
    }
    layer.biases = j.at("biases").get<std::vector<double>>();
    layer.activation = parse_activation(j.at("activation").get<std::string>());
    return layer;
}

}  // namespace

TrainingDiverged::TrainingDiverged(int epoch_, std::size_t step_, double lr)
    : NnetError("non-finite loss at epoch " + std::to_string(epoch_) + ", step " + std::to_string(step_) +
                " (learning_rate " + std::to_string(lr) + ")"),
      epoch(epoch_),
      step(step_),
      learning_rate(lr) {}

std::size_t MlpModel::parameter_count() const {
    std::size_t n = head.weights.data.size() + head.biases.size();
    for (const auto& layer : layers) {
        n += layer.weights.data.size() + layer.biases.size();
    }
    return n;
}

void MlpModel::validate() const {
    if (input_dim == 0) {
        throw DimensionError("input_dim must be positive");
    }
    std::size_t expected_in = input_dim;
    for (std::size_t t = 0; t <= layers.size(); ++t) {
        const LayerParams& layer = t < layers.size() ? layers[t] : head;
        const std::string name = t < layers.size() ? "layer " + std::to_string(t) : "head";
        if (layer.weights.data.size() != layer.weights.rows * layer.weights.cols) {
            throw DimensionError(name + ": weight storage does not match its shape");
        }
        if (layer.fan_in() != expected_in) {
            throw DimensionError(name + ": fan_in " + std::to_string(layer.fan_in()) + " does not chain with " +
                                 std::to_string(expected_in));
        }
        if (layer.biases.size() != layer.fan_out()) {
            throw DimensionError(name + ": bias length " + std::to_string(layer.biases.size()) +
                                 " differs from fan_out " + std::to_string(layer.fan_out()));
        }
        if (layer.fan_out() == 0) {
            throw DimensionError(name + ": fan_out must be positive");
        }
        check_finite(layer.weights.data, (name + " weights").c_str());
        check_finite(layer.biases, (name + " biases").c_str());
        expected_in = layer.fan_out();
    }
    if (head.fan_out() != 1) {
        throw DimensionError("head fan_out must be 1");
    }
    if (head.activation != Activation::Identity) {
        throw DimensionError("head activation must be identity");
    }
}

double sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

Prediction forward(const MlpModel& model, std::span<const double> x) {
    check_finite(x, "input");
    Trace trace;
    run(model, x, trace);
    Prediction p;
    p.probability = clamp_probability(sigmoid(trace.logit));
    p.label = p.probability > 0.5 ? 1 : 0;
    return p;
}

double log_loss(double probability, int y) {
    const double p = clamp_probability(probability);
    return y == 1 ? -std::log(p) : -std::log(1.0 - p);
}

double dataset_loss(const MlpModel& model, std::span<const Sample> data) {
    if (data.empty()) {
        throw NnetError("dataset_loss needs at least one example");
    }
    double total = 0.0;
    for (const auto& s : data) {
        total += log_loss(forward(model, s.x).probability, s.y);
    }
    return total;
}

Gradient gradient(const MlpModel& model, std::span<const double> x, int y) {
    Gradient g = zero_gradient(model);
    Trace trace;
    backprop(model, x, y, trace, g);
    return g;
}

MlpModel init_model(std::size_t input_dim, std::span<const std::size_t> hidden_sizes, std::uint64_t seed) {
    if (input_dim == 0) {
        throw DimensionError("input_dim must be at least 1");
    }
    std::mt19937_64 rng(seed);
    auto make_layer = [&](std::size_t fan_in, std::size_t fan_out, Activation act) {
        if (fan_out == 0) throw DimensionError("hidden layer sizes must be positive");
        LayerParams layer;
        layer.weights = Matrix(fan_out, fan_in);
        layer.biases.assign(fan_out, 0.0);
        layer.activation = act;
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (auto& w : layer.weights.data) w = dist(rng);
        return layer;
    };

    MlpModel model;
    model.input_dim = input_dim;
    model.metadata.embedding_dim = input_dim;
    std::size_t fan_in = input_dim;
    for (std::size_t width : hidden_sizes) {
        model.layers.push_back(make_layer(fan_in, width, Activation::Rectifier));
        fan_in = width;
    }
    model.head = make_layer(fan_in, 1, Activation::Identity);
    return model;
}

MlpModel train_sgd(const MlpModel& init, std::span<const Sample> data, const TrainConfig& cfg,
                   const EpochObserver& observer) {
    if (data.empty()) {
        throw NnetError("training data is empty");
    }
    if (!(cfg.learning_rate > 0.0)) {
        throw NnetError("learning_rate must be positive");
    }
    if (cfg.epochs < 1) {
        throw NnetError("epochs must be at least 1");
    }
    if (cfg.l2 < 0.0) {
        throw NnetError("l2 must be nonnegative");
    }
    init.validate();
    for (const auto& s : data) {
        if (s.x.size() != init.input_dim) {
            throw DimensionError("training example has dimension " + std::to_string(s.x.size()) +
                                 ", model expects " + std::to_string(init.input_dim));
        }
    }

    MlpModel model = init;
    Gradient g = zero_gradient(model);
    Trace trace;
    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);

    const double lr = cfg.learning_rate;
    const double l2 = cfg.l2;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t step = 0; step < order.size(); ++step) {
            const Sample& s = data[order[step]];
            const double loss = backprop(model, s.x, s.y, trace, g);
            if (!std::isfinite(loss) || !std::isfinite(trace.logit)) {
                throw TrainingDiverged(epoch, step, lr);
            }
            epoch_loss += loss;
            if (l2 > 0.0) {
                for_each_param(model, g, [&](double& p, double grad) { p -= lr * (grad + l2 * p); });
            } else {
                for_each_param(model, g, [&](double& p, double grad) { p -= lr * grad; });
            }
        }
        if (observer) {
            observer(epoch, epoch_loss / static_cast<double>(data.size()));
        }
    }
    return model;
}

std::string serialize_model(const MlpModel& model) {
    model.validate();
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& layer : model.layers) {
        layers.push_back(layer_to_json(layer));
    }
    nlohmann::json doc{
        {"format_version", 1},
        {"input_dim", model.input_dim},
        {"layers", std::move(layers)},
        {"head", layer_to_json(model.head)},
        {"metadata",
         {{"embedding_dim", model.metadata.embedding_dim},
          {"pooling_mode", model.metadata.pooling_mode},
          {"trained_on", model.metadata.trained_on},
          {"created_at", model.metadata.created_at}}},
    };
    return doc.dump(1) + "\n";
}

MlpModel deserialize_model(std::string_view text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ModelFormatError(std::string("model file is not valid structured text: ") + e.what());
    }
    MlpModel model;
    try {
        if (!doc.is_object()) throw ModelFormatError("model document must be an object");
        const int version = doc.at("format_version").get<int>();
        if (version != 1) {
            throw ModelFormatError("unsupported model format_version " + std::to_string(version));
        }
        model.input_dim = doc.at("input_dim").get<std::size_t>();
        for (const auto& layer : doc.at("layers")) {
            model.layers.push_back(layer_from_json(layer));
        }
        model.head = layer_from_json(doc.at("head"));
        if (doc.contains("metadata")) {
            const auto& meta = doc["metadata"];
            model.metadata.embedding_dim = meta.value("embedding_dim", model.input_dim);
            model.metadata.pooling_mode = meta.value("pooling_mode", std::string("average"));
            model.metadata.trained_on = meta.value("trained_on", std::string());
            model.metadata.created_at = meta.value("created_at", std::string());
        }
    } catch (const nlohmann::json::exception& e) {
        throw ModelFormatError(std::string("malformed model file: ") + e.what());
    }
    model.validate();
    return model;
}

void save_model(const MlpModel& model, const std::filesystem::path& path) {
    write_file_atomic(path, serialize_model(model));
}

MlpModel load_model(const std::filesystem::path& path) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const IoError& e) {
        throw ModelFormatError(e.what());
    }
    try {
        return deserialize_model(text);
    } catch (const DimensionError& e) {
        throw DimensionError(path.string() + ": " + e.what());
    } catch (const NnetError& e) {
        throw ModelFormatError(path.string() + ": " + e.what());
    }
}

}  // namespace polarity::nnet
