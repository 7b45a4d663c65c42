// Copyright (c) 2026, the gta-classify authors
// SPDX-License-Identifier: Apache-2.0

#include "gta/tokenizer.hpp"

#include <algorithm>

#include "gta/errors.hpp"

namespace gta {

namespace {

std::vector<std::string> character_alphabet() {
    std::vector<std::string> chars;
    chars.emplace_back("\n");
    chars.emplace_back("\t");
    for (int c = 32; c < 127; ++c) {
        chars.emplace_back(1, static_cast<char>(c));
    }
    return chars;
}

}  // namespace

Tokenizer::Tokenizer(std::vector<std::string> specials) {
    std::vector<std::string> vocab;
    vocab.emplace_back(kEosText);
    vocab.emplace_back(kUnkText);
    for (auto& s : specials) {
        if (s.empty()) {
            throw ConfigError("special token strings must be non-empty");
        }
        vocab.push_back(std::move(s));
    }
    const std::size_t n_specials = vocab.size();
    for (auto& c : character_alphabet()) {
        vocab.push_back(std::move(c));
    }
    *this = from_vocabulary(vocab, n_specials);
}

Tokenizer Tokenizer::from_vocabulary(const std::vector<std::string>& vocab, std::size_t n_specials) {
    if (n_specials < 2 || n_specials > vocab.size() || vocab[0] != kEosText || vocab[1] != kUnkText) {
        throw DataError("vocabulary does not start with <eos>, <unk>");
    }
    Tokenizer t;
    t.vocab_ = vocab;
    t.n_specials_ = n_specials;
    std::fill(std::begin(t.char_ids_), std::end(t.char_ids_), kUnk);
    for (std::size_t i = 0; i < vocab.size(); ++i) {
        if (!t.index_.emplace(vocab[i], static_cast<int>(i)).second) {
            throw ConfigError("duplicate vocabulary entry: " + vocab[i]);
        }
        if (i >= n_specials) {
            if (vocab[i].size() != 1) {
                throw DataError("non-special vocabulary entries must be single bytes");
            }
            t.char_ids_[static_cast<unsigned char>(vocab[i][0])] = static_cast<int>(i);
        }
    }
    for (std::size_t i = 0; i < n_specials; ++i) {
        t.specials_by_length_.push_back(static_cast<int>(i));
    }
    std::stable_sort(t.specials_by_length_.begin(), t.specials_by_length_.end(), [&](int a, int b) {
        return t.vocab_[a].size() > t.vocab_[b].size();
    });
    return t;
}

std::vector<int> Tokenizer::encode(std::string_view text) const {
    std::vector<int> ids;
    ids.reserve(text.size());
    std::size_t pos = 0;
    while (pos < text.size()) {
        bool matched = false;
        if (text[pos] == '<') {
            for (int id : specials_by_length_) {
                const std::string& s = vocab_[id];
                if (text.compare(pos, s.size(), s) == 0) {
                    ids.push_back(id);
                    pos += s.size();
                    matched = true;
                    break;
                }
            }
        }
        if (!matched) {
            ids.push_back(char_ids_[static_cast<unsigned char>(text[pos])]);
            ++pos;
        }
    }
    return ids;
}

std::string Tokenizer::decode(std::span<const int> ids) const {
    std::string out;
    for (int id : ids) {
        out += token_text(id);
    }
    return out;
}

const std::string& Tokenizer::token_text(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab_.size()) {
        throw InternalError("token id out of range: " + std::to_string(id));
    }
    return vocab_[static_cast<std::size_t>(id)];
}

std::optional<int> Tokenizer::find(std::string_view token) const {
    auto it = index_.find(std::string(token));
    if (it == index_.end()) {
        return std::nullopt;
    }
    return it->second;
}

int Tokenizer::id_of(std::string_view token) const {
    auto id = find(token);
    if (!id) {
        throw InternalError("token not in vocabulary: " + std::string(token));
    }
    return *id;
}

bool Tokenizer::is_whitespace(int id) const noexcept {
    if (is_special(id) || id < 0 || static_cast<std::size_t>(id) >= vocab_.size()) {
        return false;
    }
    const char c = vocab_[static_cast<std::size_t>(id)][0];
    return c == ' ' || c == '\n' || c == '\t';
}

}  // namespace gta
