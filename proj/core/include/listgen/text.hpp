#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace listgen {

// FNV-1a. std::hash is not stable across toolchains, so everything that must
// be reproducible (token ids, embedding buckets, per-node clustering seeds)
// goes through this.
std::uint64_t stable_hash(std::string_view s, std::uint64_t seed = 0);

// Mixes an integer into an existing hash/seed (splitmix64 finalizer).
std::uint64_t mix_hash(std::uint64_t h, std::uint64_t value);

// Lowercases and splits on non-alphanumeric bytes. "Horse's hooves!" ->
// {"horse", "s", "hooves"}. Multi-byte UTF-8 sequences are treated as
// word bytes, which is sufficient for the hashing trick.
std::vector<std::string> split_words(std::string_view text);

// Hashes words into [1, vocab_size). Id 0 is reserved for UNK; a text with
// no words yields the single-token sequence {UNK}.
std::vector<int> hash_tokens(std::string_view text, int vocab_size,
                             std::uint64_t seed = 0);

inline constexpr int kUnkToken = 0;

}  // namespace listgen
