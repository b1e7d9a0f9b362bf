#include "circuitrl/tokenizer/bpe.hpp"

#include <climits>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>
#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include "circuitrl/common.hpp"

namespace circuitrl {

namespace {

std::string utf8_encode(char32_t cp) {
  std::string out;
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
  return out;
}

enum class CharClass { Letter, Number, Space, Other };

struct Char {
  UChar32 cp;  // negative for an ill-formed byte sequence
  std::size_t begin;
  std::size_t end;
  CharClass cls;
};

CharClass classify(UChar32 cp) {
  if (cp < 0) return CharClass::Other;
  if (u_isUWhiteSpace(cp)) return CharClass::Space;
  switch (u_charType(cp)) {
    case U_UPPERCASE_LETTER:
    case U_LOWERCASE_LETTER:
    case U_TITLECASE_LETTER:
    case U_MODIFIER_LETTER:
    case U_OTHER_LETTER:
      return CharClass::Letter;
    case U_DECIMAL_DIGIT_NUMBER:
    case U_LETTER_NUMBER:
    case U_OTHER_NUMBER:
      return CharClass::Number;
    default:
      return CharClass::Other;
  }
}

std::vector<Char> split_chars(std::string_view text) {
  std::vector<Char> chars;
  const auto* s = reinterpret_cast<const std::uint8_t*>(text.data());
  const auto length = static_cast<std::int32_t>(text.size());
  std::int32_t i = 0;
  while (i < length) {
    const std::int32_t begin = i;
    UChar32 c = 0;
    U8_NEXT(s, i, length, c);
    chars.push_back({c, static_cast<std::size_t>(begin), static_cast<std::size_t>(i), classify(c)});
  }
  return chars;
}

// Replaces ill-formed UTF-8 subsequences with U+FFFD.
std::string sanitize_utf8(const std::string& bytes) {
  std::string out;
  out.reserve(bytes.size());
  const auto* s = reinterpret_cast<const std::uint8_t*>(bytes.data());
  const auto length = static_cast<std::int32_t>(bytes.size());
  std::int32_t i = 0;
  while (i < length) {
    const std::int32_t begin = i;
    UChar32 c = 0;
    U8_NEXT(s, i, length, c);
    if (c < 0) {
      out += "\xEF\xBF\xBD";
    } else {
      out.append(bytes, static_cast<std::size_t>(begin), static_cast<std::size_t>(i - begin));
    }
  }
  return out;
}

}  // namespace

std::array<char32_t, 256> bytes_to_unicode() {
  std::array<char32_t, 256> table{};
  std::array<bool, 256> printable{};
  for (int b = '!'; b <= '~'; ++b) printable[static_cast<std::size_t>(b)] = true;
  for (int b = 0xA1; b <= 0xAC; ++b) printable[static_cast<std::size_t>(b)] = true;
  for (int b = 0xAE; b <= 0xFF; ++b) printable[static_cast<std::size_t>(b)] = true;
  char32_t next = 256;
  for (std::size_t b = 0; b < 256; ++b) table[b] = printable[b] ? static_cast<char32_t>(b) : next++;
  return table;
}

std::vector<std::string> pretokenize(std::string_view text) {
  const std::vector<Char> c = split_chars(text);
  const std::size_t n = c.size();
  std::vector<std::string> pieces;
  auto emit = [&](std::size_t from, std::size_t to) {
    pieces.emplace_back(text.substr(c[from].begin, c[to - 1].end - c[from].begin));
  };
  auto is = [&](std::size_t k, char ch) { return k < n && c[k].cp == static_cast<UChar32>(ch); };
  auto run_of = [&](std::size_t k, CharClass cls) {
    while (k < n && c[k].cls == cls) ++k;
    return k;
  };

  std::size_t i = 0;
  while (i < n) {
    if (is(i, '\'')) {
      if ((is(i + 1, 'r') && is(i + 2, 'e')) || (is(i + 1, 'v') && is(i + 2, 'e')) ||
          (is(i + 1, 'l') && is(i + 2, 'l'))) {
        // 's|'t come first in the pattern but cannot overlap these prefixes.
        emit(i, i + 3);
        i += 3;
        continue;
      }
      if (is(i + 1, 's') || is(i + 1, 't') || is(i + 1, 'm') || is(i + 1, 'd')) {
        emit(i, i + 2);
        i += 2;
        continue;
      }
    }
    bool matched = false;
    for (CharClass cls : {CharClass::Letter, CharClass::Number, CharClass::Other}) {
      const std::size_t j = is(i, ' ') ? i + 1 : i;
      if (j < n && c[j].cls == cls) {
        const std::size_t k = run_of(j, cls);
        emit(i, k);
        i = k;
        matched = true;
        break;
      }
    }
    if (matched) continue;

    // c[i] is whitespace here.
    const std::size_t k = run_of(i, CharClass::Space);
    if (k == n) {
      emit(i, k);
      i = k;
    } else if (k - i >= 2) {
      emit(i, k - 1);
      i = k - 1;
    } else {
      emit(i, i + 1);
      i += 1;
    }
  }
  return pieces;
}

Tokenizer::Tokenizer(std::unordered_map<std::string, std::int32_t> vocab,
                     std::vector<std::pair<std::string, std::string>> merges)
    : token_to_id_(std::move(vocab)) {
  id_to_token_.resize(token_to_id_.size());
  std::vector<bool> seen(token_to_id_.size(), false);
  for (const auto& [tok, id] : token_to_id_) {
    if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size() || seen[static_cast<std::size_t>(id)]) {
      throw FormatError("vocabulary ids must be dense and unique in [0, " + std::to_string(id_to_token_.size()) + ")");
    }
    seen[static_cast<std::size_t>(id)] = true;
    id_to_token_[static_cast<std::size_t>(id)] = tok;
  }
  for (std::size_t r = 0; r < merges.size(); ++r) {
    const std::string key = merges[r].first + " " + merges[r].second;
    if (!merge_ranks_.emplace(key, static_cast<int>(r)).second) {
      throw FormatError("duplicate merge rule '" + key + "'");
    }
  }
  const auto table = bytes_to_unicode();
  for (std::size_t b = 0; b < 256; ++b) {
    byte_to_symbol_[b] = utf8_encode(table[b]);
    symbol_to_byte_[byte_to_symbol_[b]] = static_cast<std::uint8_t>(b);
  }
}

Tokenizer Tokenizer::from_files(const std::filesystem::path& vocab_json, const std::filesystem::path& merges_txt) {
  std::ifstream vin(vocab_json);
  if (!vin) throw FormatError("cannot open vocabulary file " + vocab_json.string());
  std::unordered_map<std::string, std::int32_t> vocab;
  try {
    const auto j = nlohmann::json::parse(vin);
    for (const auto& [tok, id] : j.items()) vocab.emplace(tok, id.get<std::int32_t>());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed vocabulary file " + vocab_json.string() + ": " + e.what());
  }

  std::ifstream min(merges_txt);
  if (!min) throw FormatError("cannot open merges file " + merges_txt.string());
  std::vector<std::pair<std::string, std::string>> merges;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(min, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || (line_no == 1 && line.starts_with("#version"))) continue;
    const auto space = line.find(' ');
    if (space == std::string::npos || space == 0 || space + 1 == line.size()) {
      throw FormatError("malformed merge rule on line " + std::to_string(line_no));
    }
    merges.emplace_back(line.substr(0, space), line.substr(space + 1));
  }
  return Tokenizer(std::move(vocab), std::move(merges));
}

std::vector<std::string> Tokenizer::bpe(std::string_view word) const {
  std::vector<std::string> symbols;
  symbols.reserve(word.size());
  for (unsigned char b : word) symbols.push_back(byte_to_symbol_[b]);

  while (symbols.size() > 1) {
    int best_rank = INT_MAX;
    std::size_t best = 0;
    for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
      auto it = merge_ranks_.find(symbols[i] + " " + symbols[i + 1]);
      if (it != merge_ranks_.end() && it->second < best_rank) {
        best_rank = it->second;
        best = i;
      }
    }
    if (best_rank == INT_MAX) break;
    const std::string left = symbols[best], right = symbols[best + 1];
    std::vector<std::string> merged;
    merged.reserve(symbols.size());
    for (std::size_t i = 0; i < symbols.size();) {
      if (i + 1 < symbols.size() && symbols[i] == left && symbols[i + 1] == right) {
        merged.push_back(left + right);
        i += 2;
      } else {
        merged.push_back(std::move(symbols[i]));
        i += 1;
      }
    }
    symbols = std::move(merged);
  }
  return symbols;
}

std::vector<std::int32_t> Tokenizer::encode(std::string_view text) const {
  std::vector<std::int32_t> ids;
  for (const auto& piece : pretokenize(text)) {
    for (const auto& sym : bpe(piece)) {
      auto it = token_to_id_.find(sym);
      if (it == token_to_id_.end()) throw FormatError("BPE produced a symbol missing from the vocabulary");
      ids.push_back(it->second);
    }
  }
  return ids;
}

const std::string& Tokenizer::token_string(std::int32_t id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
    throw std::out_of_range("token id " + std::to_string(id) + " outside the vocabulary");
  }
  return id_to_token_[static_cast<std::size_t>(id)];
}

std::string Tokenizer::decode(std::span<const std::int32_t> ids) const {
  std::string bytes;
  for (auto id : ids) {
    const std::string& tok = token_string(id);
    const auto* s = reinterpret_cast<const std::uint8_t*>(tok.data());
    const auto length = static_cast<std::int32_t>(tok.size());
    std::int32_t i = 0;
    while (i < length) {
      const std::int32_t begin = i;
      UChar32 c = 0;
      U8_NEXT(s, i, length, c);
      auto it = symbol_to_byte_.find(tok.substr(static_cast<std::size_t>(begin), static_cast<std::size_t>(i - begin)));
      if (c < 0 || it == symbol_to_byte_.end()) {
        throw FormatError("vocabulary entry " + std::to_string(id) + " is not byte-level encoded");
      }
      bytes.push_back(static_cast<char>(it->second));
    }
  }
  return sanitize_utf8(bytes);
}

std::optional<std::int32_t> Tokenizer::single_token_id(std::string_view text) const {
  const auto ids = encode(text);
  if (ids.size() != 1) return std::nullopt;
  return ids.front();
}

}  // namespace circuitrl
