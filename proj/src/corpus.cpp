#include "polarity/corpus.hpp"

#include "polarity/fileio.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <unordered_set>

namespace polarity::corpus {

namespace {

bool is_blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

bool ends_with_terminal(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
        s.remove_suffix(1);
    }
    if (s.empty()) {
        return false;
    }
    char last = s.back();
    return last == '.' || last == '!' || last == '?';
}

std::string rtrim(std::string s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
        s.pop_back();
    }
    return s;
}

std::string trim(std::string_view s) {
    std::size_t b = 0;
    while (b < s.size() && std::isspace(static_cast<unsigned char>(s[b]))) {
        ++b;
    }
    std::size_t e = s.size();
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) {
        --e;
    }
    return std::string(s.substr(b, e - b));
}

}  // namespace

std::string_view to_string(Label label) {
    switch (label) {
        case Label::Left: return "left";
        case Label::Right: return "right";
        case Label::Neutral: return "neutral";
    }
    return "neutral";
}

std::optional<Label> parse_label(std::string_view text) {
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "left") return Label::Left;
    if (lower == "right") return Label::Right;
    if (lower == "neutral") return Label::Neutral;
    return std::nullopt;
}

RecordError::RecordError(std::size_t line, const std::string& what)
    : CorpusError("line " + std::to_string(line) + ": " + what), line_(line) {}

void validate(const LabeledExample& example) {
    if (is_blank(example.text)) {
        throw CorpusError("example '" + example.id + "' has empty text");
    }
}

std::vector<LabeledExample> parse_jsonl(std::string_view contents) {
    std::vector<LabeledExample> out;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < contents.size()) {
        std::size_t end = contents.find('\n', pos);
        if (end == std::string_view::npos) {
            end = contents.size();
        }
        std::string_view line = contents.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (is_blank(line)) {
            continue;
        }

        nlohmann::json record;
        try {
            record = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw RecordError(line_no, std::string("malformed record: ") + e.what());
        }
        if (!record.is_object()) {
            throw RecordError(line_no, "record is not an object");
        }
        for (const char* field : {"id", "text", "label"}) {
            if (!record.contains(field) || !record[field].is_string()) {
                throw RecordError(line_no, std::string("missing string field '") + field + "'");
            }
        }
        const auto label_text = record["label"].get<std::string>();
        auto label = parse_label(label_text);
        if (!label) {
            throw RecordError(line_no, "unknown label '" + label_text + "'");
        }
        LabeledExample example{record["id"].get<std::string>(), record["text"].get<std::string>(), *label};
        if (is_blank(example.text)) {
            throw RecordError(line_no, "empty text");
        }
        out.push_back(std::move(example));
    }
    return out;
}

std::vector<LabeledExample> load_jsonl(const std::filesystem::path& path) {
    std::string contents;
    try {
        contents = read_file(path);
    } catch (const IoError& e) {
        throw CorpusError(e.what());
    }
    try {
        return parse_jsonl(contents);
    } catch (const RecordError& e) {
        throw RecordError(e.line(), path.string() + ": " + e.what());
    }
}

std::string to_jsonl(std::span<const LabeledExample> examples) {
    std::string out;
    for (const auto& ex : examples) {
        nlohmann::json record{{"id", ex.id}, {"text", ex.text}, {"label", to_string(ex.label)}};
        out += record.dump();
        out += '\n';
    }
    return out;
}

DatasetSplit split(std::span<const LabeledExample> data, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw CorpusError("train_fraction must lie in (0, 1), got " + std::to_string(train_fraction));
    }
    if (data.size() < 2) {
        throw CorpusError("need at least 2 examples to split, got " + std::to_string(data.size()));
    }

    std::mt19937_64 rng(seed);
    std::array<std::vector<std::size_t>, 3> groups;
    for (std::size_t i = 0; i < data.size(); ++i) {
        groups[static_cast<std::size_t>(data[i].label)].push_back(i);
    }
    for (auto& g : groups) {
        std::shuffle(g.begin(), g.end(), rng);
    }

    // Largest-remainder apportionment of the total train count across labels.
    const auto n = static_cast<double>(data.size());
    auto total_train = static_cast<std::size_t>(std::llround(n * train_fraction));
    total_train = std::clamp<std::size_t>(total_train, 1, data.size() - 1);

    std::array<std::size_t, 3> take{};
    std::array<double, 3> remainder{};
    std::size_t assigned = 0;
    for (std::size_t l = 0; l < 3; ++l) {
        double exact = static_cast<double>(groups[l].size()) * static_cast<double>(total_train) / n;
        take[l] = static_cast<std::size_t>(std::floor(exact));
        remainder[l] = exact - static_cast<double>(take[l]);
        assigned += take[l];
    }
    std::array<std::size_t, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t i = 0; assigned < total_train; i = (i + 1) % 3) {
        std::size_t l = order[i];
        if (take[l] < groups[l].size()) {
            ++take[l];
            ++assigned;
        }
    }

    DatasetSplit result;
    result.seed = seed;
    result.train_fraction = train_fraction;
    for (std::size_t l = 0; l < 3; ++l) {
        for (std::size_t j = 0; j < groups[l].size(); ++j) {
            (j < take[l] ? result.train : result.test).push_back(data[groups[l][j]]);
        }
    }
    std::shuffle(result.train.begin(), result.train.end(), rng);
    std::shuffle(result.test.begin(), result.test.end(), rng);
    return result;
}

std::vector<LabeledExample> build_diluted(std::span<const LabeledExample> polar,
                                          std::span<const LabeledExample> neutral_pool,
                                          const DilutionSpec& spec) {
    if (spec.k < 0) {
        throw CorpusError("dilution k must be >= 0");
    }
    if (spec.k > 0 && neutral_pool.empty()) {
        throw CorpusError("neutral pool is empty but k = " + std::to_string(spec.k));
    }
    for (const auto& ex : neutral_pool) {
        if (ex.label != Label::Neutral) {
            throw CorpusError("neutral pool example '" + ex.id + "' is not labeled neutral");
        }
    }
    for (const auto& ex : polar) {
        if (ex.label == Label::Neutral) {
            throw CorpusError("polar example '" + ex.id + "' is labeled neutral");
        }
    }

    std::mt19937_64 rng(spec.seed);
    std::uniform_int_distribution<std::size_t> pick(0, neutral_pool.empty() ? 0 : neutral_pool.size() - 1);

    std::vector<LabeledExample> out;
    out.reserve(polar.size());
    for (const auto& ex : polar) {
        if (spec.k == 0) {
            out.push_back(ex);
            continue;
        }
        std::string text = rtrim(ex.text);
        for (int j = 0; j < spec.k; ++j) {
            const std::string fragment = trim(neutral_pool[pick(rng)].text);
            text += ends_with_terminal(text) ? " " : ". ";
            text += fragment;
        }
        out.push_back(LabeledExample{ex.id, std::move(text), ex.label});
    }
    return out;
}

std::vector<LabeledExample> synth_corpus(int n_per_class, const VocabSpec& vocab, std::uint64_t seed) {
    if (n_per_class < 0) {
        throw CorpusError("n_per_class must be >= 0");
    }
    const std::array<const std::vector<std::string>*, 3> sets{&vocab.left, &vocab.right, &vocab.neutral};
    for (const auto* s : sets) {
        if (s->size() < 20) {
            throw CorpusError("each synthetic token set needs at least 20 tokens, got " +
                              std::to_string(s->size()));
        }
    }
    std::unordered_set<std::string> seen;
    for (const auto* s : sets) {
        std::unordered_set<std::string> local(s->begin(), s->end());
        for (const auto& tok : local) {
            if (!seen.insert(tok).second) {
                throw CorpusError("synthetic token sets overlap on '" + tok + "'");
            }
        }
    }

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> length_dist(5, 15);
    auto draw = [&](const std::vector<std::string>& set) -> const std::string& {
        std::uniform_int_distribution<std::size_t> d(0, set.size() - 1);
        return set[d(rng)];
    };

    std::vector<LabeledExample> out;
    out.reserve(static_cast<std::size_t>(n_per_class) * 3);
    const std::array<Label, 3> labels{Label::Left, Label::Right, Label::Neutral};
    for (std::size_t l = 0; l < 3; ++l) {
        for (int i = 0; i < n_per_class; ++i) {
            const int length = length_dist(rng);
            int class_tokens = 0;
            if (labels[l] != Label::Neutral) {
                const int min_class = static_cast<int>(std::ceil(0.6 * length));
                class_tokens = std::uniform_int_distribution<int>(min_class, length)(rng);
            }
            std::vector<std::string> tokens;
            tokens.reserve(static_cast<std::size_t>(length));
            for (int t = 0; t < length; ++t) {
                tokens.push_back(t < class_tokens ? draw(*sets[l]) : draw(vocab.neutral));
            }
            std::shuffle(tokens.begin(), tokens.end(), rng);

            std::string text;
            for (const auto& tok : tokens) {
                if (!text.empty()) text += ' ';
                text += tok;
            }
            text[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(text[0])));
            text += '.';

            char id[48];
            std::snprintf(id, sizeof id, "synth-%s-%06d", std::string(to_string(labels[l])).c_str(), i);
            out.push_back(LabeledExample{id, std::move(text), labels[l]});
        }
    }
    return out;
}

VocabSpec make_synth_vocab(std::size_t per_polar_class, std::size_t neutral_size) {
    static constexpr std::array<std::string_view, 20> kSyllables{
        "ka", "lo", "mi", "ne", "ru", "sa", "te", "vo", "zi", "pa",
        "do", "fe", "gu", "ha", "ji", "bo", "ce", "wu", "xo", "ye"};
    auto make = [&](std::string_view prefix, std::size_t count) {
        std::vector<std::string> words;
        words.reserve(count);
        const std::size_t n = kSyllables.size();
        for (std::size_t i = 0; i < count; ++i) {
            std::string w(prefix);
            std::size_t v = i;
            do {
                w += kSyllables[v % n];
                v /= n;
            } while (v > 0);
            w += kSyllables[(i * 7 + 3) % n];
            words.push_back(std::move(w));
        }
        return words;
    };
    return VocabSpec{make("l", per_polar_class), make("r", per_polar_class), make("n", neutral_size)};
}

std::vector<LabeledExample> filter_labels(std::span<const LabeledExample> data,
                                          std::initializer_list<Label> keep) {
    std::vector<LabeledExample> out;
    for (const auto& ex : data) {
        if (std::find(keep.begin(), keep.end(), ex.label) != keep.end()) {
            out.push_back(ex);
        }
    }
    return out;
}

}  // namespace polarity::corpus
