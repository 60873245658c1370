#pragma once

#include "polarity/embed.hpp"
#include "polarity/nnet.hpp"
#include "polarity/textproc.hpp"

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace polarity::cascade {

class CascadeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The text contains no in-vocabulary token, so the polarity classifier has nothing to score.
class NoSignalError : public CascadeError {
public:
    using CascadeError::CascadeError;
};

enum class Bucket { StronglyLeft, SlightlyLeft, Neutral, SlightlyRight, StronglyRight };

std::string_view to_string(Bucket bucket);

/// Five-point scale over score = 2p - 1 with edges at -0.6, -0.2, +0.2, +0.6.
Bucket bucket_for(double score);

struct PolarityScore {
    double probability_right = 0.5;
    double score = 0.0;
    Bucket bucket = Bucket::Neutral;

    static PolarityScore from_probability(double probability_right);
};

enum class FusionMode {
    Fused,        // re-embed the kept sentences as one text
    SentenceVote  // mean of per-sentence right-probabilities
};

struct CascadeConfig {
    double neutral_threshold = 0.5;
    double min_kept_fraction = 0.0;
    embed::PoolingMode pooling = embed::PoolingMode::Average;
    FusionMode fusion = FusionMode::Fused;

    void validate() const;
};

struct NeutralJudgement {
    double probability = 0.5;  // probability that the sentence is neutral
    bool no_coverage = false;  // no in-vocabulary token; reported as neutral
};

/// Probability reported for sentences the detector cannot see at all.
inline constexpr double kNoCoverageNeutralProbability = 1.0 - nnet::kProbabilityEpsilon;

/// Whole-text embed-and-classify. The model's positive class is Right.
PolarityScore tepc_predict(const nnet::MlpModel& polarity_model, const embed::WordVectorTable& table,
                           std::string_view text, embed::PoolingMode mode);

NeutralJudgement neutral_predict(const nnet::MlpModel& neutral_model, const embed::WordVectorTable& table,
                                 std::string_view sentence, embed::PoolingMode mode);

/// Non-owning binding of a polarity model to its vector table.
class PolarityClassifier {
public:
    PolarityClassifier(const nnet::MlpModel& model, const embed::WordVectorTable& table,
                       embed::PoolingMode mode = embed::PoolingMode::Average);

    PolarityScore predict(std::string_view text) const;
    embed::PoolingMode pooling() const { return mode_; }

private:
    const nnet::MlpModel* model_;
    const embed::WordVectorTable* table_;
    embed::PoolingMode mode_;
};

class NeutralDetector {
public:
    virtual ~NeutralDetector() = default;
    virtual NeutralJudgement judge(std::string_view sentence) const = 0;
};

class ModelNeutralDetector final : public NeutralDetector {
public:
    ModelNeutralDetector(const nnet::MlpModel& model, const embed::WordVectorTable& table,
                         embed::PoolingMode mode = embed::PoolingMode::Average);

    NeutralJudgement judge(std::string_view sentence) const override;

private:
    const nnet::MlpModel* model_;
    const embed::WordVectorTable* table_;
    embed::PoolingMode mode_;
};

/// Declares a sentence neutral iff it is one of the sentences of a known pool text.
/// Comparison ignores surrounding whitespace and trailing terminal punctuation.
class MembershipDetector final : public NeutralDetector {
public:
    explicit MembershipDetector(std::span<const std::string> pool_texts);

    NeutralJudgement judge(std::string_view sentence) const override;

private:
    std::unordered_set<std::string> members_;
};

struct SentenceAudit {
    std::size_t index = 0;  // position in the input's sentence sequence
    std::string text;
    double neutral_probability = 0.0;
    bool no_coverage = false;
};

struct CascadeVerdict {
    std::optional<PolarityScore> final;  // empty means AllNeutral
    std::vector<SentenceAudit> kept;
    std::vector<SentenceAudit> dropped;
    std::string fused_text;

    bool all_neutral() const { return !final.has_value(); }
    std::size_t sentence_count() const { return kept.size() + dropped.size(); }
};

CascadeVerdict two_step_predict(const PolarityClassifier& polarity, const NeutralDetector& detector,
                                std::string_view text, const CascadeConfig& cfg,
                                const textproc::AbbreviationSet& abbreviations =
                                    textproc::AbbreviationSet::defaults());

CascadeVerdict two_step_predict(const nnet::MlpModel& polarity_model, const nnet::MlpModel& neutral_model,
                                const embed::WordVectorTable& table, std::string_view text,
                                const CascadeConfig& cfg);

struct BatchError {
    std::string code;  // "empty_input", "no_signal", "invalid_input"
    std::string message;
};

struct BatchItem {
    std::optional<CascadeVerdict> verdict;
    std::optional<BatchError> error;
};

/// Order-preserving map of two_step_predict; a failing item records its error and the rest proceed.
std::vector<BatchItem> batch_predict(const PolarityClassifier& polarity, const NeutralDetector& detector,
                                     std::span<const std::string> texts, const CascadeConfig& cfg);

}  // namespace polarity::cascade
