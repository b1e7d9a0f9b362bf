#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace circuitrl {

// Byte-level BPE compatible with the published GPT-2 vocab.json / merges.txt.
// Immutable after construction; encode/decode may run concurrently.
class Tokenizer {
 public:
  static constexpr std::int32_t kEndOfText = 50256;

  Tokenizer(std::unordered_map<std::string, std::int32_t> vocab,
            std::vector<std::pair<std::string, std::string>> merges);

  // vocab.json is a JSON object token-string -> id; merges.txt has one
  // "left right" pair per line after an optional "#version" header, rank =
  // line order.
  static Tokenizer from_files(const std::filesystem::path& vocab_json, const std::filesystem::path& merges_txt);

  // Text is encoded literally: "<|endoftext|>" is not special-cased.
  std::vector<std::int32_t> encode(std::string_view text) const;

  // Invalid UTF-8 produced by partial byte tokens is replaced with U+FFFD.
  // Throws std::out_of_range for ids outside the vocabulary.
  std::string decode(std::span<const std::int32_t> ids) const;

  std::optional<std::int32_t> single_token_id(std::string_view text) const;

  std::size_t vocab_size() const { return id_to_token_.size(); }
  const std::string& token_string(std::int32_t id) const;

 private:
  std::vector<std::string> bpe(std::string_view word) const;

  std::unordered_map<std::string, std::int32_t> token_to_id_;
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, int> merge_ranks_;  // "left right" -> rank
  std::array<std::string, 256> byte_to_symbol_;
  std::unordered_map<std::string, std::uint8_t> symbol_to_byte_;
};

// Splits text the way GPT-2's pattern does:
//   's|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+
// Concatenating the pieces gives back the input.
std::vector<std::string> pretokenize(std::string_view text);

// The 256-entry byte -> printable code point table of GPT-2.
std::array<char32_t, 256> bytes_to_unicode();

}  // namespace circuitrl
