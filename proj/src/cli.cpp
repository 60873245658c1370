#include "polarity/cli.hpp"

#include "polarity/cascade.hpp"
#include "polarity/corpus.hpp"
#include "polarity/embed.hpp"
#include "polarity/eval.hpp"
#include "polarity/fileio.hpp"
#include "polarity/hashing.hpp"
#include "polarity/http_server.hpp"
#include "polarity/nnet.hpp"
#include "polarity/service.hpp"
#include "polarity/training.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <pthread.h>
#include <signal.h>

#include <atomic>
#include <chrono>
#include <ctime>
#include <iostream>
#include <sstream>
#include <thread>

namespace polarity::cli {

namespace {

/// Bad input from the operator: missing files, unparsable data, inconsistent dimensions.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct GlobalOptions {
    std::string embeddings;
    std::uint64_t seed = 42;
    bool quiet = false;
};

struct SynthOptions {
    std::string out;
    int per_class = 500;
    std::size_t polar_vocab = 40;
    std::size_t neutral_vocab = 40;
    std::size_t dim = 50;
};

struct TrainOptions {
    std::string kind;
    std::vector<std::string> data;
    std::string out;
    double learning_rate = 0.05;
    int epochs = 20;
    double l2 = 1e-4;
    std::string hidden = "64,32";
    std::string pooling = "average";
    double train_fraction = 0.8;
    bool grid = false;
    std::vector<double> grid_lr;
    std::vector<std::string> grid_hidden;
    std::vector<double> grid_l2;
    int folds = 5;
};

struct CascadeFlags {
    double threshold = 0.5;
    double min_kept = 0.0;
    std::string pooling = "average";
    std::string fusion = "fused";
};

struct PredictOptions {
    std::string polarity_model;
    std::string neutral_model;
    std::string text;
    std::string file;
    std::string mode = "two-step";
    std::string output = "plain";
    std::string abbreviations;
    CascadeFlags cascade;
};

struct DiluteOptions {
    std::string polarity_model;
    std::string neutral_model;
    bool oracle = false;
    std::string test;
    std::string pool;
    int max_k = 5;
    std::vector<std::uint64_t> seeds;
    std::string out;
    CascadeFlags cascade;
};

struct EvrOptions {
    std::vector<std::string> data;
    std::string contrast = "bias-neutral";
    std::size_t samples = 500;
    std::size_t components = 0;
    std::string pooling = "average";
    std::string out;
};

struct SpearmanOptions {
    std::string input;
    std::string out;
};

struct ServeOptions {
    std::string polarity_model;
    std::string neutral_model;
    std::string listen = "127.0.0.1:8080";
    double fetch_timeout = 10.0;
    std::string cache_dir;
    int cache_ttl = 3600;
    CascadeFlags cascade;
};

template <typename F>
auto as_input(const std::string& what, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const InputError&) {
        throw;
    } catch (const std::exception& e) {
        throw InputError(what + ": " + e.what());
    }
}

embed::PoolingMode parse_pooling_flag(const std::string& text) {
    auto mode = embed::parse_pooling(text);
    if (!mode) throw InputError("unknown pooling mode '" + text + "' (use average or max)");
    return *mode;
}

std::vector<std::size_t> parse_sizes(const std::string& text) {
    std::vector<std::size_t> sizes;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) {
        if (part.empty()) continue;
        try {
            std::size_t used = 0;
            const long v = std::stol(part, &used);
            if (used != part.size() || v <= 0) throw std::invalid_argument(part);
            sizes.push_back(static_cast<std::size_t>(v));
        } catch (const std::exception&) {
            throw InputError("invalid layer size '" + part + "' in '" + text + "'");
        }
    }
    return sizes;
}

embed::WordVectorTable load_embeddings(const GlobalOptions& g) {
    if (g.embeddings.empty()) throw InputError("--embeddings is required");
    return as_input("loading vector table", [&] { return embed::load_table(g.embeddings); });
}

nnet::MlpModel load_model_file(const std::string& path, const embed::WordVectorTable& table) {
    auto model = as_input("loading model " + path, [&] { return nnet::load_model(path); });
    if (model.input_dim != table.dim()) {
        throw InputError("model " + path + " expects dimension " + std::to_string(model.input_dim) +
                         " but the vector table has dimension " + std::to_string(table.dim()));
    }
    return model;
}

std::vector<corpus::LabeledExample> load_data(const std::vector<std::string>& paths) {
    std::vector<corpus::LabeledExample> all;
    for (const auto& p : paths) {
        auto part = as_input("loading dataset", [&] { return corpus::load_jsonl(p); });
        all.insert(all.end(), part.begin(), part.end());
    }
    return all;
}

cascade::CascadeConfig make_cascade_config(const CascadeFlags& f) {
    cascade::CascadeConfig cfg;
    cfg.neutral_threshold = f.threshold;
    cfg.min_kept_fraction = f.min_kept;
    cfg.pooling = parse_pooling_flag(f.pooling);
    if (f.fusion == "fused") {
        cfg.fusion = cascade::FusionMode::Fused;
    } else if (f.fusion == "vote") {
        cfg.fusion = cascade::FusionMode::SentenceVote;
    } else {
        throw InputError("unknown fusion mode '" + f.fusion + "' (use fused or vote)");
    }
    as_input("cascade configuration", [&] {
        cfg.validate();
        return 0;
    });
    return cfg;
}

void add_cascade_flags(CLI::App* app, CascadeFlags& f) {
    app->add_option("--threshold", f.threshold, "Neutral probability above which a sentence is dropped")
        ->capture_default_str();
    app->add_option("--min-kept", f.min_kept, "Minimum kept-sentence fraction before answering all-neutral")
        ->capture_default_str();
    app->add_option("--pooling", f.pooling, "Word pooling: average or max")->capture_default_str();
    app->add_option("--fusion", f.fusion, "Kept-sentence fusion: fused or vote")->capture_default_str();
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string fmt(const char* format, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, format, v);
    return buf;
}

// ---------------------------------------------------------------------------

int cmd_synth(const GlobalOptions& g, const SynthOptions& o, std::ostream& out) {
    if (g.embeddings.empty()) throw InputError("--embeddings names the vector table to write");
    const auto vocab = as_input("synthetic vocabulary", [&] { return corpus::make_synth_vocab(o.polar_vocab, o.neutral_vocab); });
    const auto data = as_input("synthetic corpus", [&] { return corpus::synth_corpus(o.per_class, vocab, g.seed); });

    std::vector<std::string> tokens = vocab.left;
    tokens.insert(tokens.end(), vocab.right.begin(), vocab.right.end());
    tokens.insert(tokens.end(), vocab.neutral.begin(), vocab.neutral.end());
    const auto table = embed::make_random_table(tokens, o.dim, g.seed);

    write_file_atomic(o.out, corpus::to_jsonl(data));
    write_file_atomic(g.embeddings, table.to_text());
    if (!g.quiet) {
        out << "wrote " << data.size() << " examples to " << o.out << " and " << table.vocab_size() << "x"
            << table.dim() << " vectors to " << g.embeddings << "\n";
    }
    return kExitOk;
}

int cmd_train(const GlobalOptions& g, const TrainOptions& o, std::ostream& out) {
    training::ModelKind kind;
    if (o.kind == "polarity") {
        kind = training::ModelKind::Polarity;
    } else if (o.kind == "neutral") {
        kind = training::ModelKind::Neutral;
    } else {
        throw InputError("--kind must be polarity or neutral");
    }
    const auto mode = parse_pooling_flag(o.pooling);
    const auto table = load_embeddings(g);
    const auto data = load_data(o.data);

    nnet::TrainConfig cfg;
    cfg.learning_rate = o.learning_rate;
    cfg.epochs = o.epochs;
    cfg.l2 = o.l2;
    cfg.seed = g.seed;
    cfg.hidden_sizes = parse_sizes(o.hidden);

    if (o.grid) {
        training::GridSpace space;
        space.learning_rates = o.grid_lr;
        space.l2s = o.grid_l2;
        for (const auto& h : o.grid_hidden) {
            space.hidden_sizes.push_back(h == "none" ? std::vector<std::size_t>{} : parse_sizes(h));
        }
        const auto usable = kind == training::ModelKind::Polarity
                                ? corpus::filter_labels(data, {corpus::Label::Left, corpus::Label::Right})
                                : data;
        const auto split = as_input("splitting data", [&] { return corpus::split(usable, o.train_fraction, g.seed); });
        const auto samples = training::build_samples(split.train, table, mode, kind);
        const auto result = as_input("grid search", [&] {
            return training::grid_search(samples.samples, table.dim(), space, cfg, o.folds);
        });
        if (!g.quiet) {
            for (const auto& e : result.entries) {
                std::string hidden;
                for (auto h : e.cfg.hidden_sizes) hidden += (hidden.empty() ? "" : ",") + std::to_string(h);
                out << "grid lr=" << e.cfg.learning_rate << " hidden=[" << hidden << "] l2=" << e.cfg.l2
                    << " cv_accuracy=" << fmt("%.4f", e.mean_accuracy) << "\n";
            }
        }
        cfg = result.best;
    }

    auto trained = as_input("training", [&] {
        return training::train_classifier(data, table, mode, kind, cfg, o.train_fraction);
    });
    trained.model.metadata.trained_on = std::string(training::to_string(kind)) + ":" +
                                        [&] {
                                            std::string joined;
                                            for (const auto& p : o.data) joined += (joined.empty() ? "" : ",") + p;
                                            return joined;
                                        }();
    trained.model.metadata.created_at = utc_timestamp();
    nnet::save_model(trained.model, o.out);

    out << "kind=" << o.kind << " train_accuracy=" << fmt("%.4f", trained.train_accuracy)
        << " test_accuracy=" << fmt("%.4f", trained.test_accuracy) << " train=" << trained.train_count
        << " test=" << trained.test_count << " model=" << o.out << "\n";
    return kExitOk;
}

std::string read_all(std::istream& in) {
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool is_blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

int cmd_predict(const GlobalOptions& g, const PredictOptions& o, std::istream& in, std::ostream& out) {
    std::string text;
    if (!o.text.empty()) {
        text = o.text;
    } else if (!o.file.empty()) {
        text = as_input("reading input", [&] { return read_file(o.file); });
    } else {
        text = read_all(in);
    }
    if (is_blank(text)) throw InputError("input text is empty");

    const bool two_step = o.mode == "two-step";
    if (!two_step && o.mode != "tepc") throw InputError("--mode must be tepc or two-step");
    if (o.output != "plain" && o.output != "structured") throw InputError("--output must be plain or structured");
    if (two_step && o.neutral_model.empty()) throw InputError("--neutral-model is required for two-step mode");

    const auto cfg = make_cascade_config(o.cascade);
    const auto table = load_embeddings(g);
    const auto polarity_model = load_model_file(o.polarity_model, table);
    textproc::AbbreviationSet abbreviations = textproc::AbbreviationSet::defaults();
    if (!o.abbreviations.empty()) {
        abbreviations = as_input("loading abbreviations", [&] { return textproc::AbbreviationSet::load(o.abbreviations); });
    }

    cascade::PolarityClassifier polarity(polarity_model, table, cfg.pooling);
    std::optional<cascade::PolarityScore> score;
    std::string status;  // bucket name, "all_neutral" or "no_signal"
    cascade::CascadeVerdict verdict;
    std::size_t total = 0;

    if (two_step) {
        const auto neutral_model = load_model_file(o.neutral_model, table);
        cascade::ModelNeutralDetector detector(neutral_model, table, cfg.pooling);
        try {
            verdict = cascade::two_step_predict(polarity, detector, text, cfg, abbreviations);
            score = verdict.final;
            status = verdict.final ? std::string(cascade::to_string(verdict.final->bucket)) : "all_neutral";
        } catch (const cascade::NoSignalError&) {
            status = "no_signal";
        }
        total = verdict.sentence_count();
    } else {
        const auto seq = textproc::split_sentences(text, abbreviations);
        total = seq.sentences.size();
        try {
            score = polarity.predict(text);
            status = std::string(cascade::to_string(score->bucket));
        } catch (const cascade::NoSignalError&) {
            status = "no_signal";
        }
        for (std::size_t i = 0; i < seq.sentences.size(); ++i) {
            verdict.kept.push_back({i, seq.sentences[i], 0.0, false});
        }
        verdict.fused_text = text;
    }
    const std::size_t kept = score ? (two_step ? verdict.kept.size() : total) : (two_step ? verdict.kept.size() : 0);

    if (o.output == "plain") {
        out << "score=" << (score ? fmt("%+.2f", score->score) : std::string("none")) << " bucket=" << status
            << " kept=" << kept << "/" << total << "\n";
        return kExitOk;
    }

    // One dataset-compatible record: id/text/label plus the verdict.
    auto audit = [](const std::vector<cascade::SentenceAudit>& list) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& s : list) {
            arr.push_back({{"index", s.index},
                           {"text", s.text},
                           {"neutral_probability", s.neutral_probability},
                           {"no_coverage", s.no_coverage}});
        }
        return arr;
    };
    nlohmann::json record;
    record["id"] = "predict-" + sha256_hex(text).substr(0, 12);
    record["text"] = text;
    record["label"] = score ? (score->probability_right > 0.5 ? "right" : "left") : "neutral";
    record["mode"] = o.mode;
    record["status"] = status;
    record["score"] = score ? nlohmann::json(score->score) : nlohmann::json(nullptr);
    record["probability_right"] = score ? nlohmann::json(score->probability_right) : nlohmann::json(nullptr);
    record["bucket"] = status;
    record["kept"] = audit(verdict.kept);
    record["dropped"] = audit(verdict.dropped);
    record["fused_text"] = verdict.fused_text;
    out << record.dump() << "\n";
    return kExitOk;
}

int cmd_dilute(const GlobalOptions& g, const DiluteOptions& o, std::ostream& out) {
    const auto cfg = make_cascade_config(o.cascade);
    const auto table = load_embeddings(g);
    const auto polarity_model = load_model_file(o.polarity_model, table);
    const auto test = load_data({o.test});
    const auto pool_data = load_data({o.pool});
    const auto polar = corpus::filter_labels(test, {corpus::Label::Left, corpus::Label::Right});
    const auto pool = corpus::filter_labels(pool_data, {corpus::Label::Neutral});
    if (polar.empty()) throw InputError("no left/right examples in " + o.test);
    if (pool.empty() && o.max_k > 0) throw InputError("no neutral examples in " + o.pool);

    std::unique_ptr<cascade::NeutralDetector> detector;
    std::optional<nnet::MlpModel> neutral_model;
    if (o.oracle) {
        std::vector<std::string> texts;
        for (const auto& ex : pool) texts.push_back(ex.text);
        detector = std::make_unique<cascade::MembershipDetector>(texts);
    } else {
        if (o.neutral_model.empty()) throw InputError("--neutral-model or --oracle is required");
        neutral_model = load_model_file(o.neutral_model, table);
        detector = std::make_unique<cascade::ModelNeutralDetector>(*neutral_model, table, cfg.pooling);
    }
    cascade::PolarityClassifier polarity(polarity_model, table, cfg.pooling);
    const std::vector<std::uint64_t> seeds = o.seeds.empty() ? std::vector<std::uint64_t>{g.seed} : o.seeds;
    const auto curve = eval::dilution_experiment(polarity, *detector, polar, pool, seeds, cfg, o.max_k, o.test);

    write_file_atomic(o.out, eval::dilution_csv(curve));
    const auto& first = curve.points.front();
    const auto& last = curve.points.back();
    out << "dilution k=0..." << last.k << " tepc " << fmt("%.4f", first.tepc_accuracy) << "->"
        << fmt("%.4f", last.tepc_accuracy) << " two_step " << fmt("%.4f", first.two_step_accuracy) << "->"
        << fmt("%.4f", last.two_step_accuracy) << (o.oracle ? " (oracle detector)" : "") << " csv=" << o.out << "\n";
    return kExitOk;
}

int cmd_evr(const GlobalOptions& g, const EvrOptions& o, std::ostream& out) {
    const auto mode = parse_pooling_flag(o.pooling);
    eval::Contrast contrast;
    if (o.contrast == "left-right") {
        contrast = eval::Contrast::LeftRight;
    } else if (o.contrast == "bias-neutral") {
        contrast = eval::Contrast::BiasNeutral;
    } else {
        throw InputError("--contrast must be left-right or bias-neutral");
    }
    const auto table = load_embeddings(g);
    const auto data = load_data(o.data);

    std::vector<std::vector<double>> first;
    std::vector<std::vector<double>> second;
    for (const auto& ex : data) {
        auto vec = embed::embed_text(table, ex.text, mode);
        if (vec.covered_tokens == 0) continue;
        if (contrast == eval::Contrast::LeftRight) {
            if (ex.label == corpus::Label::Left) first.push_back(std::move(vec.values));
            if (ex.label == corpus::Label::Right) second.push_back(std::move(vec.values));
        } else {
            (ex.label == corpus::Label::Neutral ? second : first).push_back(std::move(vec.values));
        }
    }
    const auto diffs = as_input("sampling differences", [&] {
        return eval::difference_sample(first, second, o.samples, g.seed);
    });
    const std::size_t components = o.components == 0 ? std::min(table.dim(), diffs.size()) : o.components;
    const auto report = as_input("PCA", [&] { return eval::pca_evr(diffs, components, contrast); });
    write_file_atomic(o.out, eval::evr_csv(report));

    double sum = 0.0;
    for (double r : report.ratios) sum += r;
    out << "evr contrast=" << eval::to_string(contrast) << " samples=" << report.sample_count
        << " first=" << fmt("%.6f", report.ratios.front()) << " sum=" << fmt("%.12f", sum) << " csv=" << o.out << "\n";
    return kExitOk;
}

int cmd_spearman(const SpearmanOptions& o, std::ostream& out) {
    const auto set = as_input("reading ranked set", [&] { return eval::parse_ranked_csv(read_file(o.input)); });
    const double rho = as_input("spearman", [&] { return eval::spearman_rho(set); });
    if (!o.out.empty()) {
        write_file_atomic(o.out, "n,spearman_rho\n" + std::to_string(set.items.size()) + "," + fmt("%.17g", rho) + "\n");
    }
    out << "spearman_rho=" << fmt("%.6g", rho) << " n=" << set.items.size() << "\n";
    return kExitOk;
}

int cmd_serve(const GlobalOptions& g, const ServeOptions& o, std::ostream& out, std::ostream& err) {
    const auto cfg = make_cascade_config(o.cascade);
    if (g.embeddings.empty()) throw InputError("--embeddings is required");
    const auto registry = as_input("loading models", [&] {
        return service::ModelRegistry::load(o.polarity_model, o.neutral_model, g.embeddings, cfg);
    });

    service::ServiceOptions svc_opts;
    svc_opts.fetch.timeout = std::chrono::milliseconds(static_cast<long long>(o.fetch_timeout * 1000));
    if (!o.cache_dir.empty()) {
        svc_opts.cache_dir = o.cache_dir;
        svc_opts.cache_ttl = std::chrono::seconds(o.cache_ttl);
    }
    auto svc = std::make_shared<service::PredictService>(registry, svc_opts);

    service::ServerOptions srv_opts;
    const auto colon = o.listen.rfind(':');
    if (colon == std::string::npos) throw InputError("--listen must be host:port");
    srv_opts.host = o.listen.substr(0, colon);
    try {
        srv_opts.port = std::stoi(o.listen.substr(colon + 1));
    } catch (const std::exception&) {
        throw InputError("invalid port in --listen '" + o.listen + "'");
    }
    if (!g.quiet) {
        srv_opts.access_log = [&err](const std::string& line) { err << line << std::endl; };
    }

    // Route SIGINT/SIGTERM to a waiter thread; worker threads inherit the blocked mask.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    service::HttpServer server(svc, srv_opts);
    int port = 0;
    try {
        port = server.bind();
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        pthread_sigmask(SIG_UNBLOCK, &signals, nullptr);
        return kExitInternal;
    }
    out << "listening on " << srv_opts.host << ":" << port << " model_id=" << registry->model_id << std::endl;

    std::atomic<bool> finished{false};
    std::thread waiter([&] {
        int sig = 0;
        sigwait(&signals, &sig);
        if (finished) return;
        server.wait_until_ready();
        server.stop();
    });
    server.run();
    finished = true;
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
    pthread_sigmask(SIG_UNBLOCK, &signals, nullptr);
    if (!g.quiet) out << "shut down" << std::endl;
    return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err) {
    CLI::App app{"Political polarity of long-form text via neutral-sentence filtering", "polarity"};
    app.require_subcommand(1);

    GlobalOptions g;
    app.add_option("--embeddings", g.embeddings, "Word-vector table (text format)")->envname("POLARITY_EMBEDDINGS");
    app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
    app.add_flag("--quiet", g.quiet, "Suppress progress output");

    SynthOptions synth;
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic disjoint-vocabulary corpus and vector table");
    synth_cmd->add_option("--out", synth.out, "Corpus output (.jsonl)")->required();
    synth_cmd->add_option("--per-class", synth.per_class, "Examples per label")->capture_default_str();
    synth_cmd->add_option("--polar-vocab", synth.polar_vocab, "Tokens per polar class")->capture_default_str();
    synth_cmd->add_option("--neutral-vocab", synth.neutral_vocab, "Neutral tokens")->capture_default_str();
    synth_cmd->add_option("--dim", synth.dim, "Vector dimension")->capture_default_str();

    TrainOptions train;
    auto* train_cmd = app.add_subcommand("train", "Train the polarity classifier or the neutral detector");
    train_cmd->add_option("--kind", train.kind, "polarity or neutral")->required();
    train_cmd->add_option("--data", train.data, "Dataset file(s) (.jsonl)")->required();
    train_cmd->add_option("--out", train.out, "Model output path")->required();
    train_cmd->add_option("--lr", train.learning_rate, "Learning rate")->capture_default_str();
    train_cmd->add_option("--epochs", train.epochs, "Epochs")->capture_default_str();
    train_cmd->add_option("--l2", train.l2, "L2 regularization")->capture_default_str();
    train_cmd->add_option("--hidden", train.hidden, "Hidden layer sizes, comma separated")->capture_default_str();
    train_cmd->add_option("--pooling", train.pooling, "average or max")->capture_default_str();
    train_cmd->add_option("--train-fraction", train.train_fraction, "Train share of the split")->capture_default_str();
    train_cmd->add_flag("--grid", train.grid, "Grid search with k-fold cross-validation before the final fit");
    train_cmd->add_option("--grid-lr", train.grid_lr, "Learning rates to search");
    train_cmd->add_option("--grid-hidden", train.grid_hidden, "Architectures to search, e.g. 64,32 32 none");
    train_cmd->add_option("--grid-l2", train.grid_l2, "L2 strengths to search");
    train_cmd->add_option("--folds", train.folds, "Cross-validation folds")->capture_default_str();

    PredictOptions predict;
    auto* predict_cmd = app.add_subcommand("predict", "Score text with the single-step or two-step classifier");
    predict_cmd->add_option("--polarity-model", predict.polarity_model, "Polarity model file")->required();
    predict_cmd->add_option("--neutral-model", predict.neutral_model, "Neutral detector model file");
    predict_cmd->add_option("--text", predict.text, "Text to score");
    predict_cmd->add_option("--file", predict.file, "File to score (default: stdin)");
    predict_cmd->add_option("--mode", predict.mode, "tepc or two-step")->capture_default_str();
    predict_cmd->add_option("--output", predict.output, "plain or structured")->capture_default_str();
    predict_cmd->add_option("--abbreviations", predict.abbreviations, "Abbreviation list, one per line");
    add_cascade_flags(predict_cmd, predict.cascade);

    auto* experiment_cmd = app.add_subcommand("experiment", "Run an evaluation experiment");
    experiment_cmd->require_subcommand(1);

    DiluteOptions dilute;
    auto* dilute_cmd = experiment_cmd->add_subcommand("dilute", "Accuracy under k = 0..max-k neutral sentences");
    dilute_cmd->add_option("--polarity-model", dilute.polarity_model, "Polarity model file")->required();
    dilute_cmd->add_option("--neutral-model", dilute.neutral_model, "Neutral detector model file");
    dilute_cmd->add_flag("--oracle", dilute.oracle, "Use a pool-membership detector instead of a model");
    dilute_cmd->add_option("--test", dilute.test, "Polar test examples (.jsonl)")->required();
    dilute_cmd->add_option("--pool", dilute.pool, "Neutral pool (.jsonl)")->required();
    dilute_cmd->add_option("--max-k", dilute.max_k, "Largest dilution level")->capture_default_str();
    dilute_cmd->add_option("--seeds", dilute.seeds, "Dilution seeds (default: --seed)");
    dilute_cmd->add_option("--out", dilute.out, "CSV output")->required();
    add_cascade_flags(dilute_cmd, dilute.cascade);

    EvrOptions evr;
    auto* evr_cmd = experiment_cmd->add_subcommand("evr", "Explained variance ratios of embedding differences");
    evr_cmd->add_option("--data", evr.data, "Dataset file(s) (.jsonl)")->required();
    evr_cmd->add_option("--contrast", evr.contrast, "left-right or bias-neutral")->capture_default_str();
    evr_cmd->add_option("--samples", evr.samples, "Number of sampled differences")->capture_default_str();
    evr_cmd->add_option("--components", evr.components, "Components to report (default: all)");
    evr_cmd->add_option("--pooling", evr.pooling, "average or max")->capture_default_str();
    evr_cmd->add_option("--out", evr.out, "CSV output")->required();

    SpearmanOptions spearman;
    auto* spearman_cmd = experiment_cmd->add_subcommand("spearman", "Rank correlation of human and machine scores");
    spearman_cmd->add_option("--input", spearman.input, "CSV with id,human_score,machine_score")->required();
    spearman_cmd->add_option("--out", spearman.out, "Optional CSV output");

    ServeOptions serve;
    auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP inference service");
    serve_cmd->add_option("--polarity-model", serve.polarity_model, "Polarity model file")
        ->required()
        ->envname("POLARITY_POLARITY_MODEL");
    serve_cmd->add_option("--neutral-model", serve.neutral_model, "Neutral detector model file")
        ->required()
        ->envname("POLARITY_NEUTRAL_MODEL");
    serve_cmd->add_option("--listen", serve.listen, "host:port (port 0 picks a free port)")
        ->capture_default_str()
        ->envname("POLARITY_LISTEN");
    serve_cmd->add_option("--fetch-timeout", serve.fetch_timeout, "URL fetch timeout in seconds")
        ->capture_default_str()
        ->envname("POLARITY_FETCH_TIMEOUT");
    serve_cmd->add_option("--cache-dir", serve.cache_dir, "Enable the on-disk response cache in this directory")
        ->envname("POLARITY_CACHE_DIR");
    serve_cmd->add_option("--cache-ttl", serve.cache_ttl, "Cache entry lifetime in seconds")->capture_default_str();
    add_cascade_flags(serve_cmd, serve.cascade);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (*synth_cmd) return cmd_synth(g, synth, out);
        if (*train_cmd) return cmd_train(g, train, out);
        if (*predict_cmd) return cmd_predict(g, predict, in, out);
        if (*dilute_cmd) return cmd_dilute(g, dilute, out);
        if (*evr_cmd) return cmd_evr(g, evr, out);
        if (*spearman_cmd) return cmd_spearman(spearman, out);
        if (*serve_cmd) return cmd_serve(g, serve, out, err);
    } catch (const InputError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitUsage;
}

}  // namespace polarity::cli
