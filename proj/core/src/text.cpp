#include "listgen/text.hpp"

#include <cctype>

namespace listgen {

std::uint64_t stable_hash(std::string_view s, std::uint64_t seed) {
  std::uint64_t h = 14695981039346656037ull ^ seed;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t mix_hash(std::uint64_t h, std::uint64_t value) {
  std::uint64_t z = h + 0x9e3779b97f4a7c15ull + value;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  for (unsigned char c : text) {
    bool word_byte = std::isalnum(c) != 0 || c >= 0x80;
    if (word_byte) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      words.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

std::vector<int> hash_tokens(std::string_view text, int vocab_size,
                             std::uint64_t seed) {
  std::vector<int> ids;
  for (const auto& w : split_words(text)) {
    std::uint64_t h = stable_hash(w, seed);
    ids.push_back(1 + static_cast<int>(h % static_cast<std::uint64_t>(vocab_size - 1)));
  }
  if (ids.empty()) ids.push_back(kUnkToken);
  return ids;
}

}  // namespace listgen
