#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mitd {

using SymbolId = std::uint32_t;
using Sequence = std::vector<SymbolId>;

enum class SymbolKind { reserved, character, tag };

const char* to_string(SymbolKind kind);

// Reserved ids, fixed for every vocabulary.
inline constexpr SymbolId kBos = 0;
inline constexpr SymbolId kEos = 1;
inline constexpr SymbolId kUnk = 2;
inline constexpr SymbolId kPad = 3;
inline constexpr std::size_t kNumReserved = 4;

struct Symbol {
  SymbolId id = 0;
  SymbolKind kind = SymbolKind::reserved;
  std::string spelling;
};

// One (lemma, inflected form, features) triple.
struct RawSample {
  std::string lemma;
  std::string target;
  std::vector<std::string> msd;
};

struct EncodedSample {
  Sequence x;  // lemma characters, then MSD tags
  Sequence y;  // target characters; no BOS/EOS
  std::size_t unknown_targets = 0;
};

enum class ResourceClass { low, mid, high };

const char* to_string(ResourceClass rc);

// Dense symbol table. Characters and tags live in separate namespaces, so
// the tag GEN never collides with the characters G, E, N.
class Vocabulary {
 public:
  Vocabulary();

  std::size_t size() const { return symbols_.size(); }
  const Symbol& operator[](SymbolId id) const { return symbols_.at(id); }
  std::span<const Symbol> symbols() const { return symbols_; }

  // Adds the symbol if absent; returns its id either way.
  SymbolId add(std::string_view spelling, SymbolKind kind);
  // Returns kUnk when the spelling is not present for that kind.
  SymbolId lookup(std::string_view spelling, SymbolKind kind) const;
  bool contains(std::string_view spelling, SymbolKind kind) const;

  // Concatenated spellings. Tags render as <TAG>, reserved symbols by name.
  std::string spell(std::span<const SymbolId> seq) const;

  void write(std::ostream& out) const;
  static Vocabulary read(std::istream& in);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b);

 private:
  std::vector<Symbol> symbols_;
  std::unordered_map<std::string, SymbolId> characters_;
  std::unordered_map<std::string, SymbolId> tags_;
};

// NFC-normalizes UTF-8 text and splits it into code points (each returned
// as a UTF-8 string). Throws DataError on invalid UTF-8.
std::vector<std::string> split_characters(std::string_view utf8);

std::string normalize_nfc(std::string_view utf8);

// Tab-separated lemma, form, semicolon-joined features; one sample per
// nonblank line.
std::vector<RawSample> parse_unimorph(std::string_view text);
std::vector<RawSample> read_unimorph_file(const std::string& path);

Vocabulary build_vocabulary(std::span<const RawSample> samples);

EncodedSample encode_sample(const Vocabulary& v, const RawSample& s);
std::vector<EncodedSample> encode_samples(const Vocabulary& v,
                                          std::span<const RawSample> samples);

ResourceClass classify_resource(std::size_t train_size);

}  // namespace mitd
