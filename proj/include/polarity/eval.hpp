#pragma once

#include "polarity/cascade.hpp"
#include "polarity/corpus.hpp"

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace polarity::eval {

class EvalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A correlation whose denominator vanishes (a constant score column).
class UndefinedCorrelation : public EvalError {
public:
    using EvalError::EvalError;
};

class ConvergenceError : public EvalError {
public:
    ConvergenceError(std::size_t component, int iterations);
    std::size_t component;
};

double accuracy(std::span<const int> predictions, std::span<const int> truth);

struct RankedItem {
    std::string id;
    double human_score = 0.0;
    double machine_score = 0.0;
};

struct RankedEvalSet {
    std::vector<RankedItem> items;

    /// Unique ids and finite scores.
    void validate() const;
};

/// Ascending 1-based ranks; tied values share the mean of the ranks they span.
std::vector<double> fractional_ranks(std::span<const double> values);

double pearson(std::span<const double> x, std::span<const double> y);

/// Rank correlation between the human and machine columns. Without ties this is
/// 1 - 6 sum(d^2) / (N^3 - N); with ties it is the Pearson correlation of the fractional ranks.
double spearman_rho(const RankedEvalSet& set);

/// Parses CSV with header `id,human_score,machine_score`.
RankedEvalSet parse_ranked_csv(std::string_view contents);

struct DilutionPoint {
    int k = 0;
    double tepc_accuracy = 0.0;
    double two_step_accuracy = 0.0;
};

struct DilutionCurve {
    std::vector<DilutionPoint> points;
    std::string corpus_id;
    std::uint64_t seed = 0;
};

/// Accuracy of single-step and two-step prediction on polar test examples diluted with
/// k = 0..max_k neutral sentences. Accuracies pool every seed's diluted corpus. Texts that
/// yield no polarity (no signal, or every sentence filtered) count as misclassified.
DilutionCurve dilution_experiment(const cascade::PolarityClassifier& polarity,
                                  const cascade::NeutralDetector& detector,
                                  std::span<const corpus::LabeledExample> polar_test,
                                  std::span<const corpus::LabeledExample> neutral_pool,
                                  std::span<const std::uint64_t> seeds, const cascade::CascadeConfig& cfg,
                                  int max_k = 5, std::string corpus_id = {});

enum class Contrast { LeftRight, BiasNeutral };

std::string_view to_string(Contrast contrast);

struct EvrReport {
    std::vector<double> ratios;  // descending
    std::size_t sample_count = 0;
    Contrast contrast = Contrast::LeftRight;
};

struct PowerIterationOptions {
    double tolerance = 1e-10;
    int max_iterations = 10000;
};

/// Explained variance ratios of the top `components` principal components, using the
/// sample covariance (divisor n - 1) and power iteration with deflation.
EvrReport pca_evr(std::span<const std::vector<double>> vectors, std::size_t components,
                  Contrast contrast = Contrast::LeftRight, const PowerIterationOptions& options = {});

/// n differences a_i - b_j with i and j drawn uniformly and independently.
std::vector<std::vector<double>> difference_sample(std::span<const std::vector<double>> a,
                                                   std::span<const std::vector<double>> b, std::size_t n,
                                                   std::uint64_t seed);

std::string dilution_csv(const DilutionCurve& curve);
std::string evr_csv(const EvrReport& report);

}  // namespace polarity::eval
