// Copyright (c) 2026, the gta-classify authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace gta::cli {

// Process exit codes.
inline constexpr int kOk = 0;
inline constexpr int kValidationError = 1;
inline constexpr int kRuntimeError = 2;

struct TrainArgs {
    std::filesystem::path config;
    std::filesystem::path data;
    std::filesystem::path out;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> method;
    std::optional<std::string> guess_loss;
    bool force = false;
    bool resume = false;
};

struct EvaluateArgs {
    std::filesystem::path checkpoint;
    std::filesystem::path data;
    std::string split = "test";
    int limit = 0;
    int max_new_tokens = 32;
};

struct GenerateArgs {
    std::filesystem::path checkpoint;
    std::string text;
    int n = 1;
    bool greedy = false;
    std::optional<std::string> gold;
    std::uint64_t seed = 0;
    double temperature = 1.0;
    int max_new_tokens = 32;
};

struct CompareArgs {
    std::vector<std::filesystem::path> runs;
    std::filesystem::path out;
    bool plot = false;
    double threshold = 0.9;
    int window = 5;
};

struct SynthArgs {
    std::filesystem::path out;
    int n_classes = 4;
    int n_train = 2000;
    int n_test = 200;
    int min_words = 3;
    int max_words = 5;
    std::uint64_t seed = 0;
};

struct BaseArgs {
    std::filesystem::path data;
    std::filesystem::path config;  // model shape and instruction
    std::filesystem::path out;     // checkpoint file
    int steps = 300;
    int batch_size = 16;
    double learning_rate = 3e-3;
    double copy_probability = 0.5;
    std::uint64_t seed = 0;
};

// Each command reports errors on `err` and returns an exit code.
int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err);
int cmd_evaluate(const EvaluateArgs& args, std::ostream& out, std::ostream& err);
int cmd_generate(const GenerateArgs& args, std::ostream& out, std::ostream& err);
int cmd_compare(const CompareArgs& args, std::ostream& out, std::ostream& err);
int cmd_synth(const SynthArgs& args, std::ostream& out, std::ostream& err);
int cmd_base(const BaseArgs& args, std::ostream& out, std::ostream& err);

// Parses argv and dispatches; used by the gta executable.
int main_entry(int argc, char** argv);

}  // namespace gta::cli
