// Copyright (c) 2026, the gta-classify authors
// SPDX-License-Identifier: Apache-2.0

#include "gta/data_metrics.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "gta/errors.hpp"
#include "gta/hashing.hpp"

namespace gta {

namespace fs = std::filesystem;

namespace {

bool blank(const std::string& s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

std::string read_file(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw DataError("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

void check_lengths(const std::vector<std::string>& preds, const std::vector<std::string>& golds) {
    if (preds.size() != golds.size()) {
        throw InputError(fmt::format("prediction/gold length mismatch: {} vs {}", preds.size(), golds.size()));
    }
    if (preds.empty()) {
        throw InputError("metrics need at least one example");
    }
}

}  // namespace

std::vector<std::string> load_label_file(const fs::path& path) {
    std::istringstream in(read_file(path));
    std::vector<std::string> labels;
    std::set<std::string> seen;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (blank(line)) {
            continue;
        }
        if (!seen.insert(line).second) {
            throw DataError(fmt::format("{}: duplicate label '{}'", path.string(), line));
        }
        labels.push_back(line);
    }
    if (labels.empty()) {
        throw DataError(path.string() + ": label file is empty");
    }
    return labels;
}

Dataset load_dataset(const fs::path& path, const std::optional<fs::path>& label_file) {
    std::istringstream in(read_file(path));
    Dataset ds;
    std::optional<std::set<std::string>> declared;
    if (label_file) {
        ds.label_set = load_label_file(*label_file);
        declared.emplace(ds.label_set.begin(), ds.label_set.end());
    }
    std::set<std::string> observed;
    std::set<std::string> ids;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (blank(line)) {
            continue;
        }
        const std::string where = fmt::format("{}:{}", path.string(), lineno);
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError(where + ": malformed record: " + e.what());
        }
        if (!rec.is_object()) {
            throw DataError(where + ": record is not an object");
        }
        for (const char* field : {"text", "label"}) {
            if (!rec.contains(field) || !rec[field].is_string()) {
                throw DataError(fmt::format("{}: missing string field \"{}\"", where, field));
            }
        }
        LabeledExample ex;
        ex.text = rec["text"].get<std::string>();
        ex.label = rec["label"].get<std::string>();
        if (blank(ex.text)) {
            throw DataError(where + ": empty text");
        }
        if (blank(ex.label)) {
            throw DataError(where + ": empty label");
        }
        if (rec.contains("id")) {
            const auto& id = rec["id"];
            ex.id = id.is_string() ? id.get<std::string>() : id.dump();
        } else {
            ex.id = fmt::format("L{:08d}", lineno);
        }
        if (!ids.insert(ex.id).second) {
            throw DataError(fmt::format("{}: duplicate id '{}'", where, ex.id));
        }
        if (declared && !declared->count(ex.label)) {
            throw DataError(fmt::format("{}: unknown label '{}'", where, ex.label));
        }
        observed.insert(ex.label);
        ds.examples.push_back(std::move(ex));
    }
    if (ds.examples.empty()) {
        throw DataError(path.string() + ": dataset is empty");
    }
    if (!declared) {
        ds.label_set.assign(observed.begin(), observed.end());
    }
    std::stable_sort(ds.examples.begin(), ds.examples.end(),
                     [](const LabeledExample& a, const LabeledExample& b) { return a.id < b.id; });
    return ds;
}

void write_dataset(const fs::path& path, const std::vector<LabeledExample>& examples) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) {
        throw IoError("cannot write " + path.string());
    }
    for (const auto& ex : examples) {
        os << nlohmann::json{{"id", ex.id}, {"text", ex.text}, {"label", ex.label}}.dump() << '\n';
    }
}

void write_label_file(const fs::path& path, const std::vector<std::string>& labels) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) {
        throw IoError("cannot write " + path.string());
    }
    for (const auto& l : labels) {
        os << l << '\n';
    }
}

DatasetSplits load_dataset_dir(const fs::path& dir) {
    if (!fs::is_directory(dir)) {
        throw DataError("dataset directory not found: " + dir.string());
    }
    const fs::path labels = dir / "labels.txt";
    std::optional<fs::path> sidecar;
    if (fs::exists(labels)) {
        sidecar = labels;
    }
    DatasetSplits out;
    out.train = load_dataset(dir / "train.jsonl", sidecar);
    out.test = load_dataset(dir / "test.jsonl", sidecar);
    if (sidecar) {
        out.label_set = out.train.label_set;
    } else {
        std::set<std::string> all(out.train.label_set.begin(), out.train.label_set.end());
        all.insert(out.test.label_set.begin(), out.test.label_set.end());
        out.label_set.assign(all.begin(), all.end());
        out.train.label_set = out.label_set;
        out.test.label_set = out.label_set;
    }
    Fnv1a h;
    for (const char* name : {"train.jsonl", "test.jsonl", "labels.txt"}) {
        const fs::path p = dir / name;
        h.update(name);
        if (fs::exists(p)) {
            h.update(read_file(p));
        }
    }
    out.fingerprint = to_hex(h.digest());
    return out;
}

void write_split_manifest(const fs::path& path, const SplitManifest& manifest) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) {
        throw IoError("cannot write " + path.string());
    }
    os << nlohmann::json(manifest.ids).dump(2) << '\n';
}

SplitManifest read_split_manifest(const fs::path& path) {
    SplitManifest m;
    try {
        m.ids = nlohmann::json::parse(read_file(path)).get<std::map<std::string, std::vector<std::string>>>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": malformed split manifest: " + e.what());
    }
    return m;
}

void SyntheticTaskSpec::validate() const {
    if (class_names.size() < 2) {
        throw ConfigError("synthetic task needs at least 2 classes");
    }
    if (markers.size() != class_names.size() || balance.size() != class_names.size()) {
        throw ConfigError("synthetic task: markers and balance need one entry per class");
    }
    std::set<std::string> seen;
    for (const auto& lex : markers) {
        if (lex.empty()) {
            throw ConfigError("synthetic task: every class needs at least one marker");
        }
        for (const auto& w : lex) {
            if (!seen.insert(w).second) {
                throw ConfigError("synthetic task: marker lexicons must be pairwise disjoint ('" + w + "')");
            }
        }
    }
    if (noise_vocab.empty()) {
        throw ConfigError("synthetic task: noise vocabulary is empty");
    }
    for (const auto& w : noise_vocab) {
        if (seen.count(w)) {
            throw ConfigError("synthetic task: noise word '" + w + "' is also a marker");
        }
    }
    if (min_words < 1 || max_words < min_words) {
        throw ConfigError("synthetic task: need 1 <= min_words <= max_words");
    }
    double total = 0.0;
    for (double w : balance) {
        if (!(w >= 0.0)) {
            throw ConfigError("synthetic task: balance weights must be non-negative");
        }
        total += w;
    }
    if (!(total > 0.0)) {
        throw ConfigError("synthetic task: balance weights sum to zero");
    }
}

SyntheticTaskSpec SyntheticTaskSpec::with_classes(int n_classes, std::uint64_t seed) {
    if (n_classes < 2 || n_classes > 26) {
        throw ConfigError("synthetic task: n_classes must be in [2, 26]");
    }
    SyntheticTaskSpec spec;
    spec.seed = seed;
    for (int c = 0; c < n_classes; ++c) {
        const char letter = static_cast<char>('a' + c);
        spec.class_names.emplace_back(1, static_cast<char>('A' + c));
        spec.markers.push_back({std::string("zo") + letter, std::string("xu") + letter});
        spec.balance.push_back(1.0);
    }
    spec.noise_vocab = {"the", "and", "was", "not", "but", "for", "you", "had", "all", "one", "out", "day",
                        "get", "has", "him", "his", "how", "man", "new", "now", "old", "see", "two", "way",
                        "who", "boy", "did", "its", "let", "put", "say", "she", "too", "use"};
    return spec;
}

std::vector<LabeledExample> generate_synthetic(const SyntheticTaskSpec& spec, int n, const std::string& id_prefix) {
    spec.validate();
    if (n < 1) {
        throw ConfigError("synthetic task: n must be >= 1");
    }
    std::mt19937_64 rng(mix_seed(spec.seed, fnv1a(id_prefix)));
    std::discrete_distribution<int> pick_class(spec.balance.begin(), spec.balance.end());
    std::uniform_int_distribution<int> pick_len(spec.min_words, spec.max_words);
    std::uniform_int_distribution<std::size_t> pick_noise(0, spec.noise_vocab.size() - 1);
    std::vector<LabeledExample> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const int c = pick_class(rng);
        const auto& lex = spec.markers[static_cast<std::size_t>(c)];
        const int len = pick_len(rng);
        std::vector<std::string> words;
        for (int w = 0; w < len - 1; ++w) {
            words.push_back(spec.noise_vocab[pick_noise(rng)]);
        }
        std::uniform_int_distribution<std::size_t> pick_marker(0, lex.size() - 1);
        std::uniform_int_distribution<int> pick_pos(0, len - 1);
        const std::string& marker = lex[pick_marker(rng)];
        words.insert(words.begin() + pick_pos(rng), marker);
        std::string text;
        for (std::size_t w = 0; w < words.size(); ++w) {
            text += (w > 0 ? " " : "") + words[w];
        }
        out.push_back({std::move(text), spec.class_names[static_cast<std::size_t>(c)],
                       fmt::format("{}-{:06d}", id_prefix, i)});
    }
    return out;
}

DatasetSplits write_synthetic_dataset(const fs::path& dir, const SyntheticTaskSpec& spec, int n_train, int n_test) {
    fs::create_directories(dir);
    const auto train = generate_synthetic(spec, n_train, "train");
    const auto test = generate_synthetic(spec, n_test, "test");
    write_dataset(dir / "train.jsonl", train);
    write_dataset(dir / "test.jsonl", test);
    write_label_file(dir / "labels.txt", spec.class_names);
    SplitManifest manifest;
    for (const auto& ex : train) {
        manifest.ids["train"].push_back(ex.id);
    }
    for (const auto& ex : test) {
        manifest.ids["test"].push_back(ex.id);
    }
    write_split_manifest(dir / "splits.json", manifest);
    return load_dataset_dir(dir);
}

double accuracy(const std::vector<std::string>& preds, const std::vector<std::string>& golds) {
    check_lengths(preds, golds);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        correct += preds[i] == golds[i] ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(preds.size());
}

std::vector<ClassCounts> per_class_counts(const std::vector<std::string>& preds, const std::vector<std::string>& golds,
                                          const std::vector<std::string>& label_set) {
    check_lengths(preds, golds);
    std::map<std::string, std::size_t> index;
    std::vector<ClassCounts> counts;
    for (const auto& l : label_set) {
        if (index.emplace(l, counts.size()).second) {
            counts.push_back({l});
        }
    }
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const auto g = index.find(golds[i]);
        const auto p = index.find(preds[i]);
        if (g != index.end()) {
            ++counts[g->second].support;
        }
        if (p != index.end()) {
            ++counts[p->second].predicted;
        }
        if (g != index.end() && preds[i] == golds[i]) {
            ++counts[g->second].true_positive;
        }
    }
    for (auto& c : counts) {
        const auto tp = static_cast<double>(c.true_positive);
        c.precision = c.predicted > 0 ? tp / static_cast<double>(c.predicted) : 0.0;
        c.recall = c.support > 0 ? tp / static_cast<double>(c.support) : 0.0;
        c.f1 = (c.precision + c.recall) > 0.0 ? 2.0 * c.precision * c.recall / (c.precision + c.recall) : 0.0;
    }
    return counts;
}

double weighted_f1(const std::vector<std::string>& preds, const std::vector<std::string>& golds,
                   const std::vector<std::string>& label_set) {
    const auto counts = per_class_counts(preds, golds, label_set);
    double total = 0.0;
    for (const auto& c : counts) {
        total += static_cast<double>(c.support) * c.f1;
    }
    return total / static_cast<double>(golds.size());
}

}  // namespace gta
