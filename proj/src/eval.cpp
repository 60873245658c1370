#include "polarity/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_set>

namespace polarity::eval {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

void normalize(std::vector<double>& v) {
    const double n = std::sqrt(dot(v, v));
    if (n > 0.0) {
        for (auto& x : v) x /= n;
    }
}

void project_out(std::vector<double>& v, const std::vector<std::vector<double>>& basis) {
    // Two Gram-Schmidt passes keep the basis orthonormal to rounding.
    for (int pass = 0; pass < 2; ++pass) {
        for (const auto& b : basis) {
            const double c = dot(v, b);
            for (std::size_t i = 0; i < v.size(); ++i) v[i] -= c * b[i];
        }
    }
}

std::vector<double> multiply(const std::vector<double>& m, std::size_t dim, const std::vector<double>& v) {
    std::vector<double> out(dim, 0.0);
    for (std::size_t r = 0; r < dim; ++r) {
        out[r] = dot(std::span<const double>(m).subspan(r * dim, dim), v);
    }
    return out;
}

std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        std::size_t comma = line.find(',', pos);
        auto field = line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
        while (!field.empty() && std::isspace(static_cast<unsigned char>(field.front()))) field.remove_prefix(1);
        while (!field.empty() && std::isspace(static_cast<unsigned char>(field.back()))) field.remove_suffix(1);
        out.push_back(field);
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    return out;
}

double parse_double(std::string_view field, std::size_t line) {
    try {
        std::size_t used = 0;
        std::string s(field);
        double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw EvalError("line " + std::to_string(line) + ": cannot parse number '" + std::string(field) + "'");
    }
}

}  // namespace

ConvergenceError::ConvergenceError(std::size_t component_, int iterations)
    : EvalError("power iteration did not converge for component " + std::to_string(component_) + " within " +
                std::to_string(iterations) + " iterations"),
      component(component_) {}

double accuracy(std::span<const int> predictions, std::span<const int> truth) {
    if (predictions.size() != truth.size()) {
        throw EvalError("accuracy: " + std::to_string(predictions.size()) + " predictions vs " +
                        std::to_string(truth.size()) + " labels");
    }
    if (predictions.empty()) {
        throw EvalError("accuracy of an empty sequence is undefined");
    }
    std::size_t hits = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        hits += predictions[i] == truth[i] ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(truth.size());
}

void RankedEvalSet::validate() const {
    std::unordered_set<std::string> ids;
    for (const auto& item : items) {
        if (!ids.insert(item.id).second) {
            throw EvalError("duplicate id '" + item.id + "' in ranked evaluation set");
        }
        if (!std::isfinite(item.human_score) || !std::isfinite(item.machine_score)) {
            throw EvalError("non-finite score for id '" + item.id + "'");
        }
    }
}

std::vector<double> fractional_ranks(std::span<const double> values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i + 1;
        while (j < order.size() && values[order[j]] == values[order[i]]) ++j;
        // Positions i..j-1 hold equal values; 1-based ranks i+1..j average to (i+1+j)/2.
        const double rank = static_cast<double>(i + 1 + j) / 2.0;
        for (std::size_t k = i; k < j; ++k) ranks[order[k]] = rank;
        i = j;
    }
    return ranks;
}

double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) {
        throw EvalError("pearson needs two equal-length columns of at least 2 values");
    }
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) {
        throw UndefinedCorrelation("correlation is undefined for a constant column");
    }
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double spearman_rho(const RankedEvalSet& set) {
    set.validate();
    const std::size_t n = set.items.size();
    if (n < 2) {
        throw EvalError("spearman_rho needs at least 2 items, got " + std::to_string(n));
    }
    std::vector<double> human(n);
    std::vector<double> machine(n);
    for (std::size_t i = 0; i < n; ++i) {
        human[i] = set.items[i].human_score;
        machine[i] = set.items[i].machine_score;
    }
    const auto rh = fractional_ranks(human);
    const auto rm = fractional_ranks(machine);

    auto has_ties = [](std::vector<double> r) {
        std::sort(r.begin(), r.end());
        return std::adjacent_find(r.begin(), r.end()) != r.end();
    };
    if (has_ties(rh) || has_ties(rm)) {
        return pearson(rh, rm);
    }
    double sum_d2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = rh[i] - rm[i];
        sum_d2 += d * d;
    }
    const double nn = static_cast<double>(n);
    return 1.0 - 6.0 * sum_d2 / (nn * nn * nn - nn);
}

RankedEvalSet parse_ranked_csv(std::string_view contents) {
    RankedEvalSet set;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (pos < contents.size()) {
        std::size_t end = contents.find('\n', pos);
        if (end == std::string_view::npos) end = contents.size();
        std::string_view line = contents.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

        const auto fields = split_csv_line(line);
        if (!header_seen) {
            header_seen = true;
            if (fields.size() != 3 || fields[0] != "id" || fields[1] != "human_score" ||
                fields[2] != "machine_score") {
                throw EvalError("expected header 'id,human_score,machine_score'");
            }
            continue;
        }
        if (fields.size() != 3) {
            throw EvalError("line " + std::to_string(line_no) + ": expected 3 fields");
        }
        set.items.push_back({std::string(fields[0]), parse_double(fields[1], line_no),
                             parse_double(fields[2], line_no)});
    }
    set.validate();
    return set;
}

DilutionCurve dilution_experiment(const cascade::PolarityClassifier& polarity,
                                  const cascade::NeutralDetector& detector,
                                  std::span<const corpus::LabeledExample> polar_test,
                                  std::span<const corpus::LabeledExample> neutral_pool,
                                  std::span<const std::uint64_t> seeds, const cascade::CascadeConfig& cfg,
                                  int max_k, std::string corpus_id) {
    if (polar_test.empty()) {
        throw EvalError("dilution experiment needs at least one polar test example");
    }
    if (seeds.empty()) {
        throw EvalError("dilution experiment needs at least one seed");
    }
    if (max_k < 0) {
        throw EvalError("max_k must be >= 0");
    }

    DilutionCurve curve;
    curve.corpus_id = std::move(corpus_id);
    curve.seed = seeds.front();

    for (int k = 0; k <= max_k; ++k) {
        std::vector<int> truth;
        std::vector<int> tepc;
        std::vector<int> two_step;
        // k = 0 is the undiluted corpus, identical for every seed.
        const std::size_t rounds = k == 0 ? 1 : seeds.size();
        for (std::size_t s = 0; s < rounds; ++s) {
            const auto diluted = corpus::build_diluted(
                polar_test, neutral_pool, corpus::DilutionSpec{k, seeds[s] + static_cast<std::uint64_t>(k)});
            for (const auto& ex : diluted) {
                const int y = ex.label == corpus::Label::Right ? 1 : 0;
                truth.push_back(y);
                int tepc_label = 1 - y;
                try {
                    tepc_label = polarity.predict(ex.text).probability_right > 0.5 ? 1 : 0;
                } catch (const cascade::NoSignalError&) {
                }
                tepc.push_back(tepc_label);

                int cascade_label = 1 - y;
                try {
                    const auto verdict = cascade::two_step_predict(polarity, detector, ex.text, cfg);
                    if (verdict.final) {
                        cascade_label = verdict.final->probability_right > 0.5 ? 1 : 0;
                    }
                } catch (const cascade::NoSignalError&) {
                }
                two_step.push_back(cascade_label);
            }
        }
        curve.points.push_back({k, accuracy(tepc, truth), accuracy(two_step, truth)});
    }
    return curve;
}

std::string_view to_string(Contrast contrast) {
    return contrast == Contrast::LeftRight ? "left_right" : "bias_neutral";
}

EvrReport pca_evr(std::span<const std::vector<double>> vectors, std::size_t components, Contrast contrast,
                  const PowerIterationOptions& options) {
    if (vectors.size() < 2) {
        throw EvalError("PCA needs at least 2 vectors, got " + std::to_string(vectors.size()));
    }
    const std::size_t dim = vectors.front().size();
    if (dim == 0) {
        throw EvalError("PCA vectors must be nonempty");
    }
    for (const auto& v : vectors) {
        if (v.size() != dim) throw EvalError("PCA vectors have inconsistent dimensions");
    }
    if (components == 0 || components > std::min(dim, vectors.size())) {
        throw EvalError("components must lie in [1, min(D, count)] = [1, " +
                        std::to_string(std::min(dim, vectors.size())) + "]");
    }

    const std::size_t n = vectors.size();
    std::vector<double> mean(dim, 0.0);
    for (const auto& v : vectors) {
        for (std::size_t j = 0; j < dim; ++j) mean[j] += v[j];
    }
    for (auto& m : mean) m /= static_cast<double>(n);

    std::vector<double> cov(dim * dim, 0.0);
    std::vector<double> centered(dim);
    for (const auto& v : vectors) {
        for (std::size_t j = 0; j < dim; ++j) centered[j] = v[j] - mean[j];
        for (std::size_t r = 0; r < dim; ++r) {
            for (std::size_t c = r; c < dim; ++c) {
                cov[r * dim + c] += centered[r] * centered[c];
            }
        }
    }
    for (std::size_t r = 0; r < dim; ++r) {
        for (std::size_t c = r; c < dim; ++c) {
            cov[r * dim + c] /= static_cast<double>(n - 1);
            cov[c * dim + r] = cov[r * dim + c];
        }
    }
    double trace = 0.0;
    for (std::size_t j = 0; j < dim; ++j) trace += cov[j * dim + j];
    if (!(trace > 0.0)) {
        throw EvalError("sample has zero total variance");
    }

    std::vector<double> deflated = cov;
    std::vector<std::vector<double>> basis;
    std::vector<double> eigenvalues;
    std::mt19937_64 rng(0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> normal(0.0, 1.0);

    for (std::size_t comp = 0; comp < components; ++comp) {
        std::vector<double> v(dim);
        for (auto& x : v) x = normal(rng);
        project_out(v, basis);
        normalize(v);

        double lambda = 0.0;
        bool converged = false;
        for (int iter = 0; iter < options.max_iterations; ++iter) {
            auto w = multiply(deflated, dim, v);
            project_out(w, basis);
            const double next_lambda = dot(v, w);
            const double norm = std::sqrt(dot(w, w));
            if (norm <= 1e-300) {
                // Remaining spectrum is numerically zero; any orthonormal direction will do.
                lambda = 0.0;
                converged = true;
                break;
            }
            for (auto& x : w) x /= norm;
            v = std::move(w);
            if (iter > 0 && std::abs(next_lambda - lambda) <= options.tolerance * trace) {
                lambda = next_lambda;
                converged = true;
                break;
            }
            lambda = next_lambda;
        }
        if (!converged) {
            throw ConvergenceError(comp, options.max_iterations);
        }
        project_out(v, basis);
        normalize(v);

        const auto cv = multiply(cov, dim, v);
        eigenvalues.push_back(std::max(0.0, dot(v, cv)));
        const double deflate = dot(v, multiply(deflated, dim, v));
        for (std::size_t r = 0; r < dim; ++r) {
            for (std::size_t c = 0; c < dim; ++c) {
                deflated[r * dim + c] -= deflate * v[r] * v[c];
            }
        }
        basis.push_back(std::move(v));
    }

    EvrReport report;
    report.sample_count = n;
    report.contrast = contrast;
    for (double ev : eigenvalues) report.ratios.push_back(ev / trace);
    std::sort(report.ratios.begin(), report.ratios.end(), std::greater<>());
    return report;
}

std::vector<std::vector<double>> difference_sample(std::span<const std::vector<double>> a,
                                                   std::span<const std::vector<double>> b, std::size_t n,
                                                   std::uint64_t seed) {
    if (a.empty() || b.empty()) {
        throw EvalError("difference_sample needs two nonempty groups");
    }
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick_a(0, a.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_b(0, b.size() - 1);
    std::vector<std::vector<double>> out;
    out.reserve(n);
    for (std::size_t s = 0; s < n; ++s) {
        const auto& va = a[pick_a(rng)];
        const auto& vb = b[pick_b(rng)];
        if (va.size() != vb.size()) throw EvalError("difference_sample vectors have inconsistent dimensions");
        std::vector<double> d(va.size());
        for (std::size_t j = 0; j < d.size(); ++j) d[j] = va[j] - vb[j];
        out.push_back(std::move(d));
    }
    return out;
}

std::string dilution_csv(const DilutionCurve& curve) {
    std::string out = "k,tepc_accuracy,two_step_accuracy\n";
    char buf[96];
    for (const auto& p : curve.points) {
        std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f\n", p.k, p.tepc_accuracy, p.two_step_accuracy);
        out += buf;
    }
    return out;
}

std::string evr_csv(const EvrReport& report) {
    std::string out = "component,ratio\n";
    char buf[64];
    for (std::size_t i = 0; i < report.ratios.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i + 1, report.ratios[i]);
        out += buf;
    }
    return out;
}

}  // namespace polarity::eval
