#include "polarity/cascade.hpp"

#include <algorithm>
#include <thread>

namespace polarity::cascade {

namespace {

bool is_blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

std::string membership_key(std::string_view s) {
    auto is_trim = [](char c) {
        return std::isspace(static_cast<unsigned char>(c)) != 0 || c == '.' || c == '!' || c == '?';
    };
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && is_trim(s.back())) s.remove_suffix(1);
    return std::string(s);
}

void check_dims(const nnet::MlpModel& model, const embed::WordVectorTable& table, const char* role) {
    if (model.input_dim != table.dim()) {
        throw CascadeError(std::string(role) + " model expects dimension " + std::to_string(model.input_dim) +
                           " but the vector table has dimension " + std::to_string(table.dim()));
    }
}

}  // namespace

std::string_view to_string(Bucket bucket) {
    switch (bucket) {
        case Bucket::StronglyLeft: return "strongly_left";
        case Bucket::SlightlyLeft: return "slightly_left";
        case Bucket::Neutral: return "neutral";
        case Bucket::SlightlyRight: return "slightly_right";
        case Bucket::StronglyRight: return "strongly_right";
    }
    return "neutral";
}

Bucket bucket_for(double score) {
    if (score < -0.6) return Bucket::StronglyLeft;
    if (score < -0.2) return Bucket::SlightlyLeft;
    if (score <= 0.2) return Bucket::Neutral;
    if (score <= 0.6) return Bucket::SlightlyRight;
    return Bucket::StronglyRight;
}

PolarityScore PolarityScore::from_probability(double probability_right) {
    PolarityScore s;
    s.probability_right = probability_right;
    s.score = 2.0 * probability_right - 1.0;
    s.bucket = bucket_for(s.score);
    return s;
}

void CascadeConfig::validate() const {
    if (!(neutral_threshold > 0.0 && neutral_threshold < 1.0)) {
        throw CascadeError("neutral_threshold must lie in (0, 1)");
    }
    if (!(min_kept_fraction >= 0.0 && min_kept_fraction <= 1.0)) {
        throw CascadeError("min_kept_fraction must lie in [0, 1]");
    }
}

PolarityScore tepc_predict(const nnet::MlpModel& polarity_model, const embed::WordVectorTable& table,
                           std::string_view text, embed::PoolingMode mode) {
    if (is_blank(text)) {
        throw CascadeError("input text is empty");
    }
    check_dims(polarity_model, table, "polarity");
    const auto tokens = textproc::tokenize_words(text);
    const auto vec = embed::embed_sentence(table, tokens, mode);
    if (vec.covered_tokens == 0) {
        throw NoSignalError("no in-vocabulary token in text (" + std::to_string(vec.total_tokens) + " tokens)");
    }
    return PolarityScore::from_probability(nnet::forward(polarity_model, vec.values).probability);
}

NeutralJudgement neutral_predict(const nnet::MlpModel& neutral_model, const embed::WordVectorTable& table,
                                 std::string_view sentence, embed::PoolingMode mode) {
    check_dims(neutral_model, table, "neutral");
    const auto tokens = textproc::tokenize_words(sentence);
    const auto vec = embed::embed_sentence(table, tokens, mode);
    if (vec.covered_tokens == 0) {
        return {kNoCoverageNeutralProbability, true};
    }
    return {nnet::forward(neutral_model, vec.values).probability, false};
}

PolarityClassifier::PolarityClassifier(const nnet::MlpModel& model, const embed::WordVectorTable& table,
                                       embed::PoolingMode mode)
    : model_(&model), table_(&table), mode_(mode) {
    check_dims(model, table, "polarity");
}

PolarityScore PolarityClassifier::predict(std::string_view text) const {
    return tepc_predict(*model_, *table_, text, mode_);
}

ModelNeutralDetector::ModelNeutralDetector(const nnet::MlpModel& model, const embed::WordVectorTable& table,
                                           embed::PoolingMode mode)
    : model_(&model), table_(&table), mode_(mode) {
    check_dims(model, table, "neutral");
}

NeutralJudgement ModelNeutralDetector::judge(std::string_view sentence) const {
    return neutral_predict(*model_, *table_, sentence, mode_);
}

MembershipDetector::MembershipDetector(std::span<const std::string> pool_texts) {
    for (const auto& text : pool_texts) {
        for (const auto& sentence : textproc::split_sentences(text).sentences) {
            members_.insert(membership_key(sentence));
        }
    }
}

NeutralJudgement MembershipDetector::judge(std::string_view sentence) const {
    const bool member = members_.count(membership_key(sentence)) > 0;
    return {member ? kNoCoverageNeutralProbability : nnet::kProbabilityEpsilon, false};
}

CascadeVerdict two_step_predict(const PolarityClassifier& polarity, const NeutralDetector& detector,
                                std::string_view text, const CascadeConfig& cfg,
                                const textproc::AbbreviationSet& abbreviations) {
    cfg.validate();
    if (is_blank(text)) {
        throw CascadeError("input text is empty");
    }
    const auto seq = textproc::split_sentences(text, abbreviations);

    CascadeVerdict verdict;
    for (std::size_t i = 0; i < seq.sentences.size(); ++i) {
        const auto& sentence = seq.sentences[i];
        const NeutralJudgement j = detector.judge(sentence);
        SentenceAudit audit{i, sentence, j.probability, j.no_coverage};
        if (j.probability > cfg.neutral_threshold) {
            verdict.dropped.push_back(std::move(audit));
        } else {
            verdict.kept.push_back(std::move(audit));
        }
    }
    for (const auto& k : verdict.kept) {
        if (!verdict.fused_text.empty()) verdict.fused_text += ' ';
        verdict.fused_text += k.text;
    }

    const double kept_fraction =
        static_cast<double>(verdict.kept.size()) / static_cast<double>(seq.sentences.size());
    if (verdict.kept.empty() || kept_fraction < cfg.min_kept_fraction) {
        return verdict;
    }

    if (cfg.fusion == FusionMode::Fused) {
        verdict.final = polarity.predict(verdict.fused_text);
        return verdict;
    }

    double sum = 0.0;
    std::size_t scored = 0;
    for (const auto& k : verdict.kept) {
        try {
            sum += polarity.predict(k.text).probability_right;
            ++scored;
        } catch (const NoSignalError&) {
        }
    }
    if (scored == 0) {
        throw NoSignalError("no kept sentence contains an in-vocabulary token");
    }
    verdict.final = PolarityScore::from_probability(sum / static_cast<double>(scored));
    return verdict;
}

CascadeVerdict two_step_predict(const nnet::MlpModel& polarity_model, const nnet::MlpModel& neutral_model,
                                const embed::WordVectorTable& table, std::string_view text,
                                const CascadeConfig& cfg) {
    PolarityClassifier polarity(polarity_model, table, cfg.pooling);
    ModelNeutralDetector detector(neutral_model, table, cfg.pooling);
    return two_step_predict(polarity, detector, text, cfg);
}

std::vector<BatchItem> batch_predict(const PolarityClassifier& polarity, const NeutralDetector& detector,
                                     std::span<const std::string> texts, const CascadeConfig& cfg) {
    std::vector<BatchItem> out(texts.size());
    auto work = [&](std::size_t i) {
        try {
            out[i].verdict = two_step_predict(polarity, detector, texts[i], cfg);
        } catch (const NoSignalError& e) {
            out[i].error = BatchError{"no_signal", e.what()};
        } catch (const CascadeError& e) {
            const bool empty = is_blank(texts[i]);
            out[i].error = BatchError{empty ? "empty_input" : "invalid_input", e.what()};
        } catch (const std::exception& e) {
            out[i].error = BatchError{"invalid_input", e.what()};
        }
    };

    const std::size_t workers =
        std::min<std::size_t>(texts.size(), std::max(1u, std::thread::hardware_concurrency()));
    if (workers <= 1) {
        for (std::size_t i = 0; i < texts.size(); ++i) work(i);
        return out;
    }
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t i = w; i < texts.size(); i += workers) work(i);
            });
        }
    }
    return out;
}

}  // namespace polarity::cascade
