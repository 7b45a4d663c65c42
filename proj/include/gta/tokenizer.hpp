// Copyright (c) 2026, the gta-classify authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace gta {

// Character-level tokenizer with a handful of atomic special tokens.
//
// Layout: id 0 is end-of-sequence, id 1 is the unknown-byte token, followed by
// the caller's special strings (the six GTA tags), then printable ASCII plus
// newline and tab. Special strings are matched greedily (longest first) during
// encoding so a tag spelled in text always becomes one token.
class Tokenizer {
public:
    static constexpr int kEos = 0;
    static constexpr int kUnk = 1;
    static constexpr std::string_view kEosText = "<eos>";
    static constexpr std::string_view kUnkText = "<unk>";

    Tokenizer() = default;
    explicit Tokenizer(std::vector<std::string> specials);

    // Rebuilds a tokenizer from a stored vocabulary (checkpoint header).
    static Tokenizer from_vocabulary(const std::vector<std::string>& vocab, std::size_t n_specials);

    [[nodiscard]] std::vector<int> encode(std::string_view text) const;
    [[nodiscard]] std::string decode(std::span<const int> ids) const;
    [[nodiscard]] const std::string& token_text(int id) const;

    [[nodiscard]] std::optional<int> find(std::string_view token) const;
    [[nodiscard]] int id_of(std::string_view token) const;  // throws InternalError if absent

    [[nodiscard]] bool is_special(int id) const noexcept {
        return id >= 0 && static_cast<std::size_t>(id) < n_specials_;
    }
    [[nodiscard]] bool is_whitespace(int id) const noexcept;

    [[nodiscard]] int vocab_size() const noexcept { return static_cast<int>(vocab_.size()); }
    [[nodiscard]] std::size_t special_count() const noexcept { return n_specials_; }
    [[nodiscard]] const std::vector<std::string>& vocabulary() const noexcept { return vocab_; }

private:
    std::vector<std::string> vocab_;
    std::size_t n_specials_ = 0;
    std::unordered_map<std::string, int> index_;
    int char_ids_[256] = {};
    std::vector<int> specials_by_length_;
};

}  // namespace gta
