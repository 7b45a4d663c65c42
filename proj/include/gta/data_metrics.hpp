// Copyright (c) 2026, the gta-classify authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace gta {

struct LabeledExample {
    std::string text;
    std::string label;
    std::string id;
};

struct Dataset {
    std::vector<LabeledExample> examples;
    std::vector<std::string> label_set;
};

// Reads line-delimited JSON records with "text" and "label" (and optionally
// "id"; the 1-based line number is used when absent). Records are returned
// sorted by id. Without a sidecar label file the label set is the sorted set
// of observed labels. Errors name the offending line.
Dataset load_dataset(const std::filesystem::path& path,
                     const std::optional<std::filesystem::path>& label_file = std::nullopt);

std::vector<std::string> load_label_file(const std::filesystem::path& path);

void write_dataset(const std::filesystem::path& path, const std::vector<LabeledExample>& examples);
void write_label_file(const std::filesystem::path& path, const std::vector<std::string>& labels);

// A dataset directory: train.jsonl, test.jsonl, optional labels.txt and splits.json.
struct DatasetSplits {
    Dataset train;
    Dataset test;
    std::vector<std::string> label_set;
    std::string fingerprint;  // hash of the raw file bytes
};

DatasetSplits load_dataset_dir(const std::filesystem::path& dir);

struct SplitManifest {
    std::map<std::string, std::vector<std::string>> ids;
};

void write_split_manifest(const std::filesystem::path& path, const SplitManifest& manifest);
SplitManifest read_split_manifest(const std::filesystem::path& path);

// Stand-in classification task: each text contains exactly one marker word,
// and the class owning that marker is the label. Everything else is noise.
struct SyntheticTaskSpec {
    std::vector<std::string> class_names;
    std::vector<std::vector<std::string>> markers;  // per class, pairwise disjoint
    std::vector<std::string> noise_vocab;
    int min_words = 3;
    int max_words = 5;
    std::vector<double> balance;  // per class sampling weight
    std::uint64_t seed = 0;

    [[nodiscard]] int n_classes() const noexcept { return static_cast<int>(class_names.size()); }
    void validate() const;

    static SyntheticTaskSpec with_classes(int n_classes, std::uint64_t seed);
};

std::vector<LabeledExample> generate_synthetic(const SyntheticTaskSpec& spec, int n, const std::string& id_prefix = "ex");

// Writes train/test/labels/splits for a synthetic task into `dir`.
DatasetSplits write_synthetic_dataset(const std::filesystem::path& dir, const SyntheticTaskSpec& spec, int n_train,
                                      int n_test);

double accuracy(const std::vector<std::string>& preds, const std::vector<std::string>& golds);

struct ClassCounts {
    std::string label;
    std::size_t support = 0;
    std::size_t predicted = 0;
    std::size_t true_positive = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

std::vector<ClassCounts> per_class_counts(const std::vector<std::string>& preds, const std::vector<std::string>& golds,
                                          const std::vector<std::string>& label_set);

// Support-weighted mean of per-class F1; an undefined F1 counts as 0.
double weighted_f1(const std::vector<std::string>& preds, const std::vector<std::string>& golds,
                   const std::vector<std::string>& label_set);

}  // namespace gta
