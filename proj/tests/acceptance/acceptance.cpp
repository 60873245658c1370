// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include "polarity/cascade.hpp"
#include "polarity/corpus.hpp"
#include "polarity/eval.hpp"
#include "polarity/http_server.hpp"
#include "polarity/nnet.hpp"
#include "polarity/service.hpp"
#include "polarity/training.hpp"

#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

using namespace polarity;
using json = nlohmann::json;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void criterion(const std::string& name, double limit_seconds, const std::function<Outcome()>& body) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs >= limit_seconds) {
        o.pass = false;
        o.detail += " [over time limit " + std::to_string(int(limit_seconds)) + " s]";
    }
    std::printf("%s  %-22s %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failures;
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

// ---- gradients -------------------------------------------------------------

Outcome gradient_check() {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> n01;
    const std::vector<std::vector<std::size_t>> archs{{}, {3}, {4, 3}};
    const double h = 1e-5;
    int draws = 0, resampled = 0;
    std::size_t components = 0;
    double worst = 0.0;
    while (draws < 150) {
        const auto& arch = archs[draws % archs.size()];
        const std::size_t dim = 2 + rng() % 4;
        auto model = nnet::init_model(dim, arch, rng());
        for (auto& layer : model.layers) {
            for (auto& b : layer.biases) b = 0.1 * n01(rng);
        }
        model.head.biases[0] = 0.1 * n01(rng);
        std::vector<double> x(dim);
        for (auto& v : x) v = n01(rng);

        // Stay away from rectifier kinks, where central differences are not the derivative.
        bool near_kink = false;
        std::vector<double> a = x;
        for (const auto& layer : model.layers) {
            std::vector<double> next(layer.fan_out());
            for (std::size_t r = 0; r < layer.fan_out(); ++r) {
                double z = layer.biases[r];
                for (std::size_t c = 0; c < layer.fan_in(); ++c) z += layer.weights(r, c) * a[c];
                near_kink |= std::abs(z) < 1e-4;
                next[r] = std::max(0.0, z);
            }
            a = std::move(next);
        }
        if (near_kink) {
            ++resampled;
            continue;
        }

        const int y = int(rng() % 2);
        const auto g = nnet::gradient(model, x, y);
        auto loss = [&](const nnet::MlpModel& m) { return nnet::log_loss(nnet::forward(m, x).probability, y); };
        for (std::size_t l = 0; l <= model.layers.size(); ++l) {
            for (int part = 0; part < 2; ++part) {
                auto target = [&](nnet::MlpModel& m) -> std::vector<double>& {
                    auto& lp = l < m.layers.size() ? m.layers[l] : m.head;
                    return part == 0 ? lp.weights.data : lp.biases;
                };
                const auto& analytic = part == 0 ? g.weights[l].data : g.biases[l];
                for (std::size_t i = 0; i < analytic.size(); ++i) {
                    auto plus = model, minus = model;
                    target(plus)[i] += h;
                    target(minus)[i] -= h;
                    const double numeric = (loss(plus) - loss(minus)) / (2 * h);
                    const double rel = std::abs(analytic[i] - numeric) /
                                       std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
                    worst = std::max(worst, rel);
                    ++components;
                }
            }
        }
        ++draws;
    }
    return {worst < 1e-4, std::to_string(draws) + " draws, " + std::to_string(components) +
                              " components, max rel err " + fmt("%.2e", worst) + ", " + std::to_string(resampled) +
                              " kink draws resampled"};
}

// ---- blobs -----------------------------------------------------------------

std::vector<nnet::Sample> blob_points(std::mt19937_64& rng, std::size_t n) {
    std::normal_distribution<double> noise(0.0, 0.5);
    std::vector<nnet::Sample> out;
    for (std::size_t i = 0; i < n; ++i) {
        const int y = int(i % 2);
        const double c = y ? 2.0 : -2.0;
        out.push_back({{c + noise(rng), c + noise(rng)}, y});
    }
    return out;
}

Outcome trainability() {
    std::mt19937_64 rng(42);
    const auto train = blob_points(rng, 1000);
    const auto test = blob_points(rng, 1000);
    nnet::TrainConfig cfg;
    cfg.hidden_sizes = {8};
    cfg.epochs = 20;
    cfg.seed = 42;
    auto model = nnet::train_sgd(nnet::init_model(2, cfg.hidden_sizes, cfg.seed), train, cfg);
    const double tr = training::model_accuracy(model, train);
    const double te = training::model_accuracy(model, test);
    return {tr >= 0.99 && te >= 0.98, "train " + fmt("%.4f", tr) + ", test " + fmt("%.4f", te) + " after 20 epochs"};
}

// ---- synthetic corpus experiments ------------------------------------------

struct Synth {
    corpus::VocabSpec vocab;
    std::vector<corpus::LabeledExample> data;
    corpus::DatasetSplit split;
    embed::WordVectorTable table;
    nnet::MlpModel polarity;
    nnet::MlpModel neutral;
    double neutral_test_accuracy = 0.0;
    double polarity_test_accuracy = 0.0;
};

Synth& synth() {
    static Synth s = [] {
        Synth out;
        out.vocab = corpus::make_synth_vocab(40, 40);
        out.data = corpus::synth_corpus(500, out.vocab, 42);
        std::vector<std::string> tokens = out.vocab.left;
        tokens.insert(tokens.end(), out.vocab.right.begin(), out.vocab.right.end());
        tokens.insert(tokens.end(), out.vocab.neutral.begin(), out.vocab.neutral.end());
        out.table = embed::make_random_table(tokens, 50, 42);
        out.split = corpus::split(out.data, 0.8, 42);

        const nnet::TrainConfig cfg;
        const auto mode = embed::PoolingMode::Average;
        auto fit = [&](training::ModelKind kind, double& test_acc) {
            const auto train = training::build_samples(out.split.train, out.table, mode, kind);
            const auto test = training::build_samples(out.split.test, out.table, mode, kind);
            auto m = nnet::train_sgd(nnet::init_model(out.table.dim(), cfg.hidden_sizes, cfg.seed), train.samples, cfg);
            test_acc = training::model_accuracy(m, test.samples);
            return m;
        };
        out.polarity = fit(training::ModelKind::Polarity, out.polarity_test_accuracy);
        out.neutral = fit(training::ModelKind::Neutral, out.neutral_test_accuracy);
        return out;
    }();
    return s;
}

Outcome neutral_detector() {
    const auto& s = synth();
    return {s.neutral_test_accuracy >= 0.95,
            "held-out biased-vs-neutral accuracy " + fmt("%.4f", s.neutral_test_accuracy) + " on " +
                std::to_string(s.split.test.size()) + " examples (polarity " + fmt("%.4f", s.polarity_test_accuracy) + ")"};
}

Outcome dilution() {
    const auto& s = synth();
    const auto polar = corpus::filter_labels(s.split.test, {corpus::Label::Left, corpus::Label::Right});
    const auto pool = corpus::filter_labels(s.split.test, {corpus::Label::Neutral});
    cascade::PolarityClassifier polarity(s.polarity, s.table);
    cascade::ModelNeutralDetector detector(s.neutral, s.table);
    const std::vector<std::uint64_t> seeds{42};
    const cascade::CascadeConfig cfg;
    const auto curve = eval::dilution_experiment(polarity, detector, polar, pool, seeds, cfg, 5, "synth");

    std::vector<std::string> pool_texts;
    for (const auto& ex : pool) pool_texts.push_back(ex.text);
    cascade::MembershipDetector oracle(pool_texts);
    const auto flat = eval::dilution_experiment(polarity, oracle, polar, pool, seeds, cfg, 5, "synth");

    const auto& k0 = curve.points.front();
    const auto& k5 = curve.points.back();
    const double tepc_drop = 100.0 * (k0.tepc_accuracy - k5.tepc_accuracy);
    const double two_step_shift = 100.0 * std::abs(k0.two_step_accuracy - k5.two_step_accuracy);
    bool constant = true;
    for (const auto& p : flat.points) constant &= p.two_step_accuracy == flat.points.front().two_step_accuracy;

    std::string detail = "TEPC " + fmt("%.3f", k0.tepc_accuracy) + "->" + fmt("%.3f", k5.tepc_accuracy) + " (drop " +
                         fmt("%.1f", tepc_drop) + " pts), two-step " + fmt("%.3f", k0.two_step_accuracy) + "->" +
                         fmt("%.3f", k5.two_step_accuracy) + " (shift " + fmt("%.1f", two_step_shift) +
                         " pts), oracle column " + (constant ? "constant at " + fmt("%.3f", flat.points[0].two_step_accuracy)
                                                             : std::string("NOT constant"));
    return {tepc_drop >= 10.0 && two_step_shift <= 2.0 && constant, detail};
}

Outcome filter_identity() {
    const auto& s = synth();
    cascade::PolarityClassifier polarity(s.polarity, s.table);
    cascade::ModelNeutralDetector detector(s.neutral, s.table);
    std::mt19937_64 rng(1000);
    // Texts use only polar vocabulary; a draw the detector filters anyway is redrawn and counted.
    int identical = 0, redrawn = 0, mismatched = 0, accepted = 0;
    while (accepted < 1000) {
        std::string text;
        const int sentences = 1 + int(rng() % 4);
        for (int j = 0; j < sentences; ++j) {
            const auto& words = rng() % 2 ? s.vocab.left : s.vocab.right;
            const int len = 5 + int(rng() % 8);
            std::string sentence;
            for (int w = 0; w < len; ++w) sentence += (w ? " " : "") + words[rng() % words.size()];
            sentence[0] = char(std::toupper(static_cast<unsigned char>(sentence[0])));
            const char* end[] = {".", "!", "?", "."};
            text += (j ? (rng() % 3 ? " " : "\n  ") : "") + sentence + end[rng() % 4];
        }
        const auto verdict = cascade::two_step_predict(polarity, detector, text, cascade::CascadeConfig{});
        if (!verdict.dropped.empty()) {
            ++redrawn;
            continue;
        }
        ++accepted;
        std::string joined;
        for (const auto& sentence : textproc::split_sentences(text).sentences) joined += (joined.empty() ? "" : " ") + sentence;
        const auto direct = cascade::tepc_predict(s.polarity, s.table, joined, embed::PoolingMode::Average);
        if (verdict.final->probability_right == direct.probability_right && verdict.final->score == direct.score &&
            verdict.final->bucket == direct.bucket) {
            ++identical;
        } else {
            ++mismatched;
        }
    }
    return {identical == 1000, std::to_string(identical) + "/1000 bit-identical, " + std::to_string(mismatched) +
                                   " mismatched, " + std::to_string(redrawn) + " draws redrawn after a detector false positive"};
}

// ---- spearman --------------------------------------------------------------

eval::RankedEvalSet ranked(const std::vector<double>& h, const std::vector<double>& m) {
    eval::RankedEvalSet set;
    for (std::size_t i = 0; i < h.size(); ++i) set.items.push_back({"r" + std::to_string(i), h[i], m[i]});
    return set;
}

std::vector<double> naive_ranks(const std::vector<double>& v) {
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        double below = 0, equal = 0;
        for (double w : v) {
            below += w < v[i];
            equal += w == v[i];
        }
        r[i] = below + (equal + 1.0) / 2.0;
    }
    return r;
}

double naive_pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = double(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

Outcome spearman() {
    const double fixture = eval::spearman_rho(ranked({1, 2, 3, 4}, {1, 3, 2, 4}));
    const double same = eval::spearman_rho(ranked({1, 2, 3, 4, 5}, {1, 2, 3, 4, 5}));
    const double reversed = eval::spearman_rho(ranked({1, 2, 3}, {3, 2, 1}));

    std::mt19937_64 rng(31);
    int datasets = 0;
    double worst = 0.0;
    while (datasets < 100) {
        const std::size_t n = 4 + rng() % 60;
        std::vector<double> h(n), m(n);
        for (auto& v : h) v = double(rng() % 7);
        for (auto& v : m) v = double(rng() % 7) / 2.0;
        h[n - 1] = h[0];  // at least one tie
        const auto rh = naive_ranks(h), rm = naive_ranks(m);
        if (std::adjacent_find(rh.begin(), rh.end(), std::not_equal_to<>()) == rh.end()) continue;
        if (std::adjacent_find(rm.begin(), rm.end(), std::not_equal_to<>()) == rm.end()) continue;
        worst = std::max(worst, std::abs(eval::spearman_rho(ranked(h, m)) - naive_pearson(rh, rm)));
        ++datasets;
    }
    const bool ok = fixture == 0.8 && same == 1.0 && reversed == -1.0 && worst <= 1e-12;
    return {ok, "fixture " + fmt("%.16g", fixture) + ", identical " + fmt("%g", same) + ", reversed " +
                    fmt("%g", reversed) + ", ties max |diff| " + fmt("%.1e", worst) + " over 100 datasets"};
}

// ---- PCA / EVR -------------------------------------------------------------

Outcome pca() {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> n01;

    std::vector<std::vector<double>> wide(300, std::vector<double>(20));
    for (auto& p : wide) {
        for (std::size_t j = 0; j < p.size(); ++j) p[j] = n01(rng) * (1.0 + j);
    }
    const auto full = eval::pca_evr(wide, 20);
    const double sum = std::accumulate(full.ratios.begin(), full.ratios.end(), 0.0);

    std::vector<std::vector<double>> line;
    for (int i = 0; i < 50; ++i) {
        const double t = n01(rng);
        line.push_back({t, -2 * t, 0.5 * t});
    }
    const double rank1 = eval::pca_evr(line, 3).ratios[0];

    std::mt19937_64 iso_rng(2024);
    std::vector<std::vector<double>> iso(10000);
    for (auto& p : iso) p = {n01(iso_rng), n01(iso_rng)};
    double mx = 0, my = 0;
    for (const auto& p : iso) {
        mx += p[0];
        my += p[1];
    }
    mx /= iso.size();
    my /= iso.size();
    double a = 0, b = 0, d = 0;
    for (const auto& p : iso) {
        a += (p[0] - mx) * (p[0] - mx);
        b += (p[0] - mx) * (p[1] - my);
        d += (p[1] - my) * (p[1] - my);
    }
    const double disc = std::sqrt((a - d) * (a - d) + 4 * b * b);
    const double oracle1 = (a + d + disc) / 2 / (a + d);
    const double oracle2 = (a + d - disc) / 2 / (a + d);
    const auto iso_report = eval::pca_evr(iso, 2);
    const double oracle_gap =
        std::max(std::abs(iso_report.ratios[0] - oracle1), std::abs(iso_report.ratios[1] - oracle2));
    const bool iso_ok = std::abs(iso_report.ratios[0] - 0.5) <= 0.03 && std::abs(iso_report.ratios[1] - 0.5) <= 0.03 &&
                        oracle_gap <= 1e-6;

    const auto& s = synth();
    std::vector<std::vector<double>> left, right, biased, neutral;
    for (const auto& ex : s.data) {
        auto v = embed::embed_text(s.table, ex.text, embed::PoolingMode::Average).values;
        if (ex.label == corpus::Label::Neutral) {
            neutral.push_back(std::move(v));
            continue;
        }
        (ex.label == corpus::Label::Left ? left : right).push_back(v);
        biased.push_back(std::move(v));
    }
    const auto lr = eval::pca_evr(eval::difference_sample(left, right, 500, 42), 50, eval::Contrast::LeftRight);
    const auto bn = eval::pca_evr(eval::difference_sample(biased, neutral, 500, 42), 50, eval::Contrast::BiasNeutral);

    const bool ok = std::abs(sum - 1.0) <= 1e-9 && std::abs(rank1 - 1.0) <= 1e-9 && iso_ok &&
                    bn.ratios[0] > lr.ratios[0];
    return {ok, "sum-1 " + fmt("%.1e", sum - 1.0) + ", rank-1 first " + fmt("%.12f", rank1) + ", isotropic " +
                    fmt("%.4f", iso_report.ratios[0]) + "/" + fmt("%.4f", iso_report.ratios[1]) + " (oracle gap " +
                    fmt("%.1e", oracle_gap) + "), first EVR bias-neutral " + fmt("%.4f", bn.ratios[0]) +
                    " vs left-right " + fmt("%.4f", lr.ratios[0])};
}

// ---- serialization ---------------------------------------------------------

Outcome serialization() {
    std::mt19937_64 rng(99);
    std::normal_distribution<double> n01;
    std::vector<std::size_t> hidden{64, 32};
    auto model = nnet::init_model(50, hidden, 5);
    for (auto& layer : model.layers) {
        for (auto& b : layer.biases) b = n01(rng) * 0.3;
    }
    model.head.biases[0] = n01(rng);
    const auto path = std::filesystem::temp_directory_path() / "polarity_acceptance_model.json";
    nnet::save_model(model, path);
    const auto loaded = nnet::load_model(path);
    int identical = 0;
    for (int i = 0; i < 100; ++i) {
        std::vector<double> x(50);
        for (auto& v : x) v = n01(rng) * 2.0;
        identical += nnet::forward(model, x).probability == nnet::forward(loaded, x).probability;
    }
    return {identical == 100, std::to_string(identical) + "/100 predictions bit-identical after save/load"};
}

// ---- service contract ------------------------------------------------------

Outcome service_contract() {
    const auto& s = synth();
    auto words = [](const std::vector<std::string>& v, std::size_t start, std::size_t n) {
        std::string out;
        for (std::size_t i = 0; i < n; ++i) out += (i ? " " : "") + v[(start + i) % v.size()];
        return out;
    };
    const std::string article = "<html><head><script>x()</script></head><body><nav>home</nav><p>" +
                                words(s.vocab.right, 0, 9) + ".</p><p>" + words(s.vocab.neutral, 4, 7) + ".</p><p>" +
                                words(s.vocab.right, 11, 8) + ".</p></body></html>";

    httplib::Server stub;
    stub.Get("/article", [&](const httplib::Request&, httplib::Response& res) { res.set_content(article, "text/html"); });
    const int stub_port = stub.bind_to_any_port("127.0.0.1");
    std::thread stub_thread([&] { stub.listen_after_bind(); });
    stub.wait_until_ready();

    auto registry = service::ModelRegistry::from_parts(s.polarity, s.neutral, s.table, cascade::CascadeConfig{});
    service::HttpServer api(std::make_shared<service::PredictService>(registry), {"127.0.0.1", 0, {}});
    const int port = api.bind();
    std::thread api_thread([&] { api.run(); });
    api.wait_until_ready();

    httplib::Client c("127.0.0.1", port);
    std::vector<std::string> problems;
    auto expect = [&](bool cond, const std::string& what) {
        if (!cond) problems.push_back(what);
    };

    auto health = c.Get("/healthz");
    expect(health && health->status == 200 && json::parse(health->body)["model_id"] == registry->model_id, "healthz");

    const std::string text = words(s.vocab.right, 2, 10) + ". " + words(s.vocab.neutral, 0, 8) + ".";
    auto post = c.Post("/api/v1/predict?detail=1", json{{"text", text}}.dump(), "application/json");
    if (post && post->status == 200) {
        auto j = json::parse(post->body);
        expect(j["score"].get<double>() > 0.2, "POST text score on the right");
        expect(j["kept_count"] == 1 && j["dropped_count"] == 1, "POST text kept/dropped");
        expect(j["sentences"].size() == 2, "POST text audit");
    } else {
        problems.push_back("POST text status");
    }

    const std::string url = "http://127.0.0.1:" + std::to_string(stub_port) + "/article";
    auto get = c.Get("/api/v1/predict?url=" + httplib::detail::encode_query_param(url));
    if (get && get->status == 200) {
        auto j = json::parse(get->body);
        expect(j["score"].get<double>() > 0.2 && j["kept_count"].get<int>() + j["dropped_count"].get<int>() == 3,
               "GET url verdict");
    } else {
        problems.push_back("GET url status");
    }

    auto both = c.Post("/api/v1/predict", json{{"text", "a"}, {"url", url}}.dump(), "application/json");
    expect(both && both->status / 100 == 4 && json::parse(both->body)["error"]["code"] == "bad_request", "both fields");

    auto big = c.Post("/api/v1/predict", json{{"text", std::string(service::kMiB + 1, 'x')}}.dump(), "application/json");
    expect(big && big->status == 413 && json::parse(big->body)["error"]["code"] == "payload_too_large", "oversized body");

    api.stop();
    api_thread.join();
    stub.stop();
    stub_thread.join();

    std::string detail = problems.empty() ? "healthz, POST text, GET url, both-fields 400, oversized 413" : "failed:";
    for (const auto& p : problems) detail += " " + p + ";";
    return {problems.empty(), detail};
}

}  // namespace

int main() {
    criterion("gradient-correctness", 10, gradient_check);
    criterion("trainability", 30, trainability);
    criterion("neutral-detector", 120, neutral_detector);
    criterion("dilution", 300, dilution);
    criterion("filter-identity", 60, filter_identity);
    criterion("spearman-rho", 60, spearman);
    criterion("pca-evr", 60, pca);
    criterion("serialization", 60, serialization);
    criterion("service-contract", 30, service_contract);
    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
