#include "mitd/corpus.hpp"

#include <unicode/normalizer2.h>
#include <unicode/unistr.h>

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "mitd/errors.hpp"

namespace mitd {

namespace {

constexpr const char* kReservedNames[kNumReserved] = {"<BOS>", "<EOS>", "<UNK>",
                                                      "<PAD>"};

std::string_view trim(std::string_view s) {
  const char* ws = " \t\r\n\v\f";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

SymbolKind parse_kind(std::string_view s) {
  if (s == "reserved") return SymbolKind::reserved;
  if (s == "char") return SymbolKind::character;
  if (s == "tag") return SymbolKind::tag;
  throw DataError("unknown symbol kind '" + std::string(s) + "'");
}

}  // namespace

const char* to_string(SymbolKind kind) {
  switch (kind) {
    case SymbolKind::reserved:
      return "reserved";
    case SymbolKind::character:
      return "char";
    case SymbolKind::tag:
      return "tag";
  }
  return "?";
}

const char* to_string(ResourceClass rc) {
  switch (rc) {
    case ResourceClass::low:
      return "low";
    case ResourceClass::mid:
      return "mid";
    case ResourceClass::high:
      return "high";
  }
  return "?";
}

std::string normalize_nfc(std::string_view utf8) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw std::runtime_error("ICU NFC normalizer unavailable");
  auto text = icu::UnicodeString::fromUTF8(
      icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
  if (text.indexOf(static_cast<UChar>(0xFFFD)) >= 0 &&
      utf8.find("\xEF\xBF\xBD") == std::string_view::npos) {
    throw DataError("invalid UTF-8 in '" + std::string(utf8) + "'");
  }
  icu::UnicodeString normalized = nfc->normalize(text, status);
  if (U_FAILURE(status)) throw DataError("NFC normalization failed");
  std::string out;
  normalized.toUTF8String(out);
  return out;
}

std::vector<std::string> split_characters(std::string_view utf8) {
  const std::string normalized = normalize_nfc(utf8);
  auto text = icu::UnicodeString::fromUTF8(normalized);
  std::vector<std::string> out;
  for (int32_t i = 0; i < text.length();) {
    const UChar32 cp = text.char32At(i);
    const int32_t n = U16_LENGTH(cp);
    std::string piece;
    text.tempSubString(i, n).toUTF8String(piece);
    out.push_back(std::move(piece));
    i += n;
  }
  return out;
}

Vocabulary::Vocabulary() {
  for (SymbolId id = 0; id < kNumReserved; ++id) {
    symbols_.push_back(Symbol{id, SymbolKind::reserved, kReservedNames[id]});
  }
}

SymbolId Vocabulary::add(std::string_view spelling, SymbolKind kind) {
  if (kind == SymbolKind::reserved) {
    throw std::invalid_argument("reserved symbols are fixed");
  }
  auto& table = kind == SymbolKind::tag ? tags_ : characters_;
  std::string key(spelling);
  if (auto it = table.find(key); it != table.end()) return it->second;
  const auto id = static_cast<SymbolId>(symbols_.size());
  symbols_.push_back(Symbol{id, kind, key});
  table.emplace(std::move(key), id);
  return id;
}

SymbolId Vocabulary::lookup(std::string_view spelling, SymbolKind kind) const {
  if (kind == SymbolKind::reserved) {
    for (SymbolId id = 0; id < kNumReserved; ++id) {
      if (symbols_[id].spelling == spelling) return id;
    }
    return kUnk;
  }
  const auto& table = kind == SymbolKind::tag ? tags_ : characters_;
  auto it = table.find(std::string(spelling));
  return it == table.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view spelling, SymbolKind kind) const {
  if (kind == SymbolKind::reserved) {
    for (SymbolId id = 0; id < kNumReserved; ++id) {
      if (symbols_[id].spelling == spelling) return true;
    }
    return false;
  }
  const auto& table = kind == SymbolKind::tag ? tags_ : characters_;
  return table.count(std::string(spelling)) != 0;
}

std::string Vocabulary::spell(std::span<const SymbolId> seq) const {
  std::string out;
  for (SymbolId id : seq) {
    const Symbol& s = symbols_.at(id);
    if (s.kind == SymbolKind::tag) {
      out += '<';
      out += s.spelling;
      out += '>';
    } else {
      out += s.spelling;
    }
  }
  return out;
}

void Vocabulary::write(std::ostream& out) const {
  out << "vocab v1\n";
  for (const Symbol& s : symbols_) {
    out << s.id << '\t' << to_string(s.kind) << '\t' << s.spelling << '\n';
  }
}

Vocabulary Vocabulary::read(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "vocab v1") {
    throw DataError("vocabulary: expected header 'vocab v1'");
  }
  Vocabulary v;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) break;
    auto fields = split(line, '\t');
    if (fields.size() != 3) throw ParseError(line_no, "vocabulary row needs 3 fields");
    const auto id = static_cast<SymbolId>(std::stoul(std::string(fields[0])));
    const SymbolKind kind = parse_kind(fields[1]);
    if (kind == SymbolKind::reserved) {
      if (id >= kNumReserved || v.symbols_[id].spelling != fields[2]) {
        throw ParseError(line_no, "unexpected reserved symbol");
      }
      continue;
    }
    if (id != v.size()) throw ParseError(line_no, "symbol ids must be dense and ordered");
    if (v.contains(fields[2], kind)) throw ParseError(line_no, "duplicate symbol");
    v.add(fields[2], kind);
  }
  return v;
}

bool operator==(const Vocabulary& a, const Vocabulary& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.symbols_[i].kind != b.symbols_[i].kind ||
        a.symbols_[i].spelling != b.symbols_[i].spelling) {
      return false;
    }
  }
  return true;
}

std::vector<RawSample> parse_unimorph(std::string_view text) {
  std::vector<RawSample> out;
  std::size_t line_no = 0;
  for (std::string_view raw : split(text, '\n')) {
    ++line_no;
    if (trim(raw).empty()) continue;
    if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
    auto fields = split(raw, '\t');
    if (fields.size() < 3) {
      throw ParseError(line_no, "expected 3 tab-separated fields, got " +
                                    std::to_string(fields.size()));
    }
    RawSample s;
    s.lemma = normalize_nfc(trim(fields[0]));
    s.target = normalize_nfc(trim(fields[1]));
    if (s.lemma.empty()) throw ParseError(line_no, "empty lemma");
    if (s.target.empty()) throw ParseError(line_no, "empty inflected form");
    for (std::string_view feat : split(trim(fields[2]), ';')) {
      feat = trim(feat);
      if (!feat.empty()) s.msd.emplace_back(feat);
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<RawSample> read_unimorph_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_unimorph(buf.str());
  } catch (const ParseError& e) {
    throw ParseError(e.line(), path + ": " + e.message());
  }
}

Vocabulary build_vocabulary(std::span<const RawSample> samples) {
  if (samples.empty()) throw DataError("cannot build a vocabulary from no samples");
  Vocabulary v;
  for (const RawSample& s : samples) {
    for (const auto& c : split_characters(s.lemma)) v.add(c, SymbolKind::character);
    for (const auto& c : split_characters(s.target)) v.add(c, SymbolKind::character);
  }
  for (const RawSample& s : samples) {
    for (const auto& tag : s.msd) v.add(tag, SymbolKind::tag);
  }
  return v;
}

EncodedSample encode_sample(const Vocabulary& v, const RawSample& s) {
  EncodedSample e;
  for (const auto& c : split_characters(s.lemma)) {
    e.x.push_back(v.lookup(c, SymbolKind::character));
  }
  for (const auto& tag : s.msd) e.x.push_back(v.lookup(tag, SymbolKind::tag));
  for (const auto& c : split_characters(s.target)) {
    const SymbolId id = v.lookup(c, SymbolKind::character);
    if (id == kUnk) ++e.unknown_targets;
    e.y.push_back(id);
  }
  return e;
}

std::vector<EncodedSample> encode_samples(const Vocabulary& v,
                                          std::span<const RawSample> samples) {
  std::vector<EncodedSample> out;
  out.reserve(samples.size());
  for (const RawSample& s : samples) out.push_back(encode_sample(v, s));
  return out;
}

ResourceClass classify_resource(std::size_t train_size) {
  if (train_size < 1000) return ResourceClass::low;
  if (train_size >= 10000) return ResourceClass::high;
  return ResourceClass::mid;
}

}  // namespace mitd
