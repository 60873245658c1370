#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace polarity::corpus {

enum class Label { Left, Right, Neutral };

std::string_view to_string(Label label);
/// Case-insensitive parse of "left" / "right" / "neutral".
std::optional<Label> parse_label(std::string_view text);

class CorpusError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised by load_jsonl / parse_jsonl; carries the 1-based line number of the bad record.
class RecordError : public CorpusError {
public:
    RecordError(std::size_t line, const std::string& what);
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

struct LabeledExample {
    std::string id;
    std::string text;
    Label label = Label::Neutral;

    bool operator==(const LabeledExample&) const = default;
};

/// Throws CorpusError when the text is blank.
void validate(const LabeledExample& example);

struct DatasetSplit {
    std::vector<LabeledExample> train;
    std::vector<LabeledExample> test;
    std::uint64_t seed = 0;
    double train_fraction = 0.8;
};

struct DilutionSpec {
    int k = 0;  // neutral sentences appended per example
    std::uint64_t seed = 0;
};

struct VocabSpec {
    std::vector<std::string> left;
    std::vector<std::string> right;
    std::vector<std::string> neutral;
};

std::vector<LabeledExample> load_jsonl(const std::filesystem::path& path);
std::vector<LabeledExample> parse_jsonl(std::string_view contents);
std::string to_jsonl(std::span<const LabeledExample> examples);

/// Stratified, seeded partition. Per-label train counts are apportioned by
/// largest remainder so each label and the total land within one item of the fraction.
DatasetSplit split(std::span<const LabeledExample> data, double train_fraction, std::uint64_t seed);

/// Appends k neutral sentences (drawn with replacement) to every polar example.
std::vector<LabeledExample> build_diluted(std::span<const LabeledExample> polar,
                                          std::span<const LabeledExample> neutral_pool,
                                          const DilutionSpec& spec);

/// Generates a synthetic disjoint-vocabulary corpus: n_per_class examples per label.
std::vector<LabeledExample> synth_corpus(int n_per_class, const VocabSpec& vocab, std::uint64_t seed);

/// Pseudo-word token sets of the requested sizes, pairwise disjoint.
VocabSpec make_synth_vocab(std::size_t per_polar_class, std::size_t neutral_size);

std::vector<LabeledExample> filter_labels(std::span<const LabeledExample> data,
                                          std::initializer_list<Label> keep);

}  // namespace polarity::corpus
