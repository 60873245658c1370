#include "polarity/nnet.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

using namespace polarity::nnet;

namespace {

double& param(MlpModel& m, std::size_t layer, bool bias, std::size_t i) {
    LayerParams& lp = layer < m.layers.size() ? m.layers[layer] : m.head;
    return bias ? lp.biases[i] : lp.weights.data[i];
}

double grad_at(const Gradient& g, std::size_t layer, bool bias, std::size_t i) {
    return bias ? g.biases[layer][i] : g.weights[layer].data[i];
}

std::size_t count_at(const MlpModel& m, std::size_t layer, bool bias) {
    const LayerParams& lp = layer < m.layers.size() ? m.layers[layer] : m.head;
    return bias ? lp.biases.size() : lp.weights.data.size();
}

// Smallest |pre-activation| over all hidden units; finite differences are unreliable near a kink.
double min_abs_preactivation(const MlpModel& m, std::span<const double> x) {
    std::vector<double> a(x.begin(), x.end());
    double smallest = INFINITY;
    for (const auto& layer : m.layers) {
        std::vector<double> next(layer.fan_out());
        for (std::size_t r = 0; r < layer.fan_out(); ++r) {
            double z = layer.biases[r];
            for (std::size_t c = 0; c < layer.fan_in(); ++c) z += layer.weights(r, c) * a[c];
            smallest = std::min(smallest, std::abs(z));
            next[r] = std::max(0.0, z);
        }
        a = std::move(next);
    }
    return smallest;
}

std::vector<Sample> blobs(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.5);
    std::vector<Sample> out;
    for (std::size_t i = 0; i < n; ++i) {
        const int y = int(i % 2);
        const double c = y == 1 ? 2.0 : -2.0;
        out.push_back({{c + noise(rng), c + noise(rng)}, y});
    }
    return out;
}

}  // namespace

TEST_CASE("sigmoid is stable at the extremes") {
    CHECK(sigmoid(0.0) == 0.5);
    CHECK(sigmoid(800.0) == 1.0);
    CHECK(sigmoid(-800.0) >= 0.0);
    CHECK(std::isfinite(sigmoid(-800.0)));
    CHECK(sigmoid(-3.0) == doctest::Approx(1.0 - sigmoid(3.0)));
}

TEST_CASE("forward on hand-built models") {
    auto m = init_model(3, std::vector<std::size_t>{}, 1);
    std::fill(m.head.weights.data.begin(), m.head.weights.data.end(), 0.0);
    std::vector<double> x{4.0, -2.0, 9.0};
    CHECK(forward(m, x).probability == 0.5);
    CHECK(forward(m, x).label == 0);

    MlpModel one = init_model(1, std::vector<std::size_t>{}, 1);
    one.head.weights.data = {1.0};
    std::vector<double> zero{0.0};
    std::vector<double> big{50.0};
    CHECK(forward(one, zero).probability == 0.5);
    CHECK(forward(one, big).probability > 1.0 - 1e-12 - 1e-15);
    CHECK(forward(one, big).label == 1);

    auto h = init_model(2, std::vector<std::size_t>{3}, 2);
    for (auto& w : h.layers[0].weights.data) w = -std::abs(w) - 0.1;
    h.head.biases[0] = 0.7;
    std::vector<double> pos{1.0, 2.0};
    CHECK(forward(h, pos).probability == doctest::Approx(sigmoid(0.7)).epsilon(1e-15));
}

TEST_CASE("probabilities stay inside the open interval") {
    MlpModel m = init_model(1, std::vector<std::size_t>{}, 1);
    m.head.weights.data = {1.0};
    for (double v : {-1e6, -40.0, 40.0, 1e6}) {
        std::vector<double> x{v};
        const double p = forward(m, x).probability;
        CHECK(p > 0.0);
        CHECK(p < 1.0);
    }
}

TEST_CASE("forward rejects wrong input sizes") {
    auto m = init_model(3, std::vector<std::size_t>{2}, 1);
    std::vector<double> x{1.0};
    CHECK_THROWS_AS(forward(m, x), DimensionError);
    CHECK_THROWS_AS(gradient(m, x, 1), DimensionError);
}

TEST_CASE("log loss values") {
    CHECK(log_loss(0.5, 1) == doctest::Approx(0.693147).epsilon(1e-6));
    CHECK(log_loss(1.0, 1) < 1e-11);
    CHECK(log_loss(0.9, 0) == doctest::Approx(2.302585).epsilon(1e-6));
    CHECK(std::isfinite(log_loss(0.0, 1)));
    CHECK(std::isfinite(log_loss(1.0, 0)));
}

TEST_CASE("dataset loss sums per-example losses") {
    auto m = init_model(2, std::vector<std::size_t>{3}, 5);
    Sample s{{0.3, -0.8}, 1};
    std::vector<Sample> one{s};
    std::vector<Sample> two{s, s};
    const double single = log_loss(forward(m, s.x).probability, 1);
    CHECK(dataset_loss(m, one) == single);
    CHECK(dataset_loss(m, two) == 2.0 * single);
}

TEST_CASE("confident model has near-zero loss and gradient") {
    MlpModel m = init_model(1, std::vector<std::size_t>{}, 1);
    m.head.weights.data = {100.0};
    std::vector<Sample> data{{{1.0}, 1}, {{-1.0}, 0}};
    CHECK(dataset_loss(m, data) < 1e-6);
    for (const auto& s : data) {
        auto g = gradient(m, s.x, s.y);
        CHECK(std::abs(g.weights[0].data[0]) < 1e-6);
        CHECK(std::abs(g.biases[0][0]) < 1e-6);
    }
}

TEST_CASE("logistic regression bias gradient is p - y") {
    auto m = init_model(3, std::vector<std::size_t>{}, 9);
    std::vector<double> x{0.2, -1.0, 0.5};
    const double p = forward(m, x).probability;
    CHECK(gradient(m, x, 1).biases[0][0] == doctest::Approx(p - 1.0));
    CHECK(gradient(m, x, 0).biases[0][0] == doctest::Approx(p));
}

TEST_CASE("analytic gradients match central differences") {
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> n01;
    const std::vector<std::vector<std::size_t>> archs{{}, {3}, {4, 3}};
    int draws = 0;
    while (draws < 120) {
        const auto& arch = archs[draws % archs.size()];
        const std::size_t dim = 2 + rng() % 3;
        auto m = init_model(dim, arch, rng());
        for (auto& l : m.layers) {
            for (auto& b : l.biases) b = 0.1 * n01(rng);
        }
        std::vector<double> x(dim);
        for (auto& v : x) v = n01(rng);
        if (min_abs_preactivation(m, x) < 1e-4) continue;
        const int y = int(rng() % 2);
        const auto g = gradient(m, x, y);
        const double h = 1e-5;
        for (std::size_t layer = 0; layer <= m.layers.size(); ++layer) {
            for (bool bias : {false, true}) {
                for (std::size_t i = 0; i < count_at(m, layer, bias); ++i) {
                    MlpModel plus = m, minus = m;
                    param(plus, layer, bias, i) += h;
                    param(minus, layer, bias, i) -= h;
                    const double numeric =
                        (log_loss(forward(plus, x).probability, y) - log_loss(forward(minus, x).probability, y)) /
                        (2 * h);
                    const double analytic = grad_at(g, layer, bias, i);
                    const double rel = std::abs(analytic - numeric) /
                                       std::max({std::abs(analytic), std::abs(numeric), 1e-6});
                    CHECK(rel < 1e-4);
                }
            }
        }
        ++draws;
    }
}

TEST_CASE("init_model shapes and determinism") {
    auto lr = init_model(4, std::vector<std::size_t>{}, 1);
    CHECK(lr.layers.empty());
    CHECK(lr.head.fan_in() == 4);
    CHECK(lr.head.fan_out() == 1);
    CHECK(lr.parameter_count() == 5);

    std::vector<std::size_t> hidden{5, 3};
    auto a = init_model(4, hidden, 7);
    auto b = init_model(4, hidden, 7);
    CHECK(a == b);
    CHECK_FALSE(a == init_model(4, hidden, 8));
    CHECK(a.parameter_count() == 4 * 5 + 5 + 5 * 3 + 3 + 3 + 1);
    const double limit = std::sqrt(6.0 / (4 + 5));
    for (double w : a.layers[0].weights.data) CHECK(std::abs(w) <= limit);
    for (const auto& l : a.layers) {
        for (double bias : l.biases) CHECK(bias == 0.0);
    }
    CHECK(a.head.biases[0] == 0.0);
    CHECK(a.head.activation == Activation::Identity);
}

TEST_CASE("tiny learning rate barely moves the parameters") {
    auto init = init_model(2, std::vector<std::size_t>{4}, 3);
    auto data = blobs(50, 1);
    TrainConfig cfg;
    cfg.learning_rate = 1e-9;
    cfg.epochs = 1;
    cfg.hidden_sizes = {4};
    auto out = train_sgd(init, data, cfg);
    for (std::size_t i = 0; i < init.layers[0].weights.data.size(); ++i) {
        CHECK(std::abs(out.layers[0].weights.data[i] - init.layers[0].weights.data[i]) < 1e-6);
    }
}

TEST_CASE("blobs are learnable and training is deterministic") {
    auto data = blobs(1000, 42);
    TrainConfig cfg;
    cfg.hidden_sizes = {8};
    auto init = init_model(2, cfg.hidden_sizes, 42);
    std::vector<double> losses;
    auto a = train_sgd(init, data, cfg, [&](int, double loss) { losses.push_back(loss); });
    CHECK(losses.size() == 20);
    CHECK(losses.back() < losses.front());
    std::size_t correct = 0;
    for (const auto& s : data) correct += forward(a, s.x).label == s.y;
    CHECK(double(correct) / data.size() >= 0.99);
    CHECK(train_sgd(init, data, cfg) == a);
}

TEST_CASE("long SGD on a convex case lowers the dataset loss") {
    auto data = blobs(200, 3);
    TrainConfig cfg;
    cfg.hidden_sizes = {};
    cfg.epochs = 50;
    auto init = init_model(2, cfg.hidden_sizes, 1);
    auto trained = train_sgd(init, data, cfg);
    CHECK(dataset_loss(trained, data) <= dataset_loss(init, data));
}

TEST_CASE("divergence is reported") {
    std::vector<Sample> data{{{1e200, -1e200}, 1}, {{-1e200, 1e200}, 0}};
    TrainConfig cfg;
    cfg.hidden_sizes = {};
    cfg.learning_rate = 1e10;
    auto init = init_model(2, cfg.hidden_sizes, 1);
    CHECK_THROWS_AS(train_sgd(init, data, cfg), TrainingDiverged);
}

TEST_CASE("bad train configs are rejected") {
    auto init = init_model(2, std::vector<std::size_t>{}, 1);
    auto data = blobs(10, 1);
    TrainConfig cfg;
    cfg.learning_rate = 0.0;
    CHECK_THROWS(train_sgd(init, data, cfg));
    cfg = TrainConfig{};
    cfg.epochs = 0;
    CHECK_THROWS(train_sgd(init, data, cfg));
    cfg = TrainConfig{};
    CHECK_THROWS(train_sgd(init, std::vector<Sample>{}, cfg));
}

TEST_CASE("model files round-trip bit for bit") {
    std::vector<std::size_t> hidden{6, 4};
    auto m = init_model(5, hidden, 11);
    m.metadata.trained_on = "unit";
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n01;
    for (auto& b : m.layers[0].biases) b = n01(rng) / 3.0;
    auto path = std::filesystem::temp_directory_path() / "polarity_model_roundtrip.json";
    save_model(m, path);
    auto back = load_model(path);
    CHECK(back == m);
    for (int i = 0; i < 100; ++i) {
        std::vector<double> x(5);
        for (auto& v : x) v = 3.0 * n01(rng);
        CHECK(forward(back, x).probability == forward(m, x).probability);
    }
}

TEST_CASE("corrupt and inconsistent model files fail cleanly") {
    CHECK_THROWS_AS(deserialize_model("{not json"), ModelFormatError);
    CHECK_THROWS_AS(deserialize_model("{}"), ModelFormatError);

    auto m = init_model(3, std::vector<std::size_t>{2}, 1);
    auto text = serialize_model(m);
    auto version = text;
    version.replace(version.find("\"format_version\": 1"), 19, "\"format_version\": 2");
    CHECK_THROWS_AS(deserialize_model(version), ModelFormatError);

    auto broken = m;
    broken.input_dim = 4;
    std::string bad = serialize_model(m);
    bad.replace(bad.find("\"input_dim\": 3"), 14, "\"input_dim\": 4");
    CHECK_THROWS_AS(deserialize_model(bad), DimensionError);
    CHECK_THROWS_AS(broken.validate(), DimensionError);

    auto path = std::filesystem::temp_directory_path() / "polarity_model_broken.json";
    std::ofstream(path) << bad;
    try {
        load_model(path);
        FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
        CHECK(std::string(e.what()).find(path.string()) != std::string::npos);
    }
    CHECK_THROWS(load_model("/nonexistent/model.json"));
}
