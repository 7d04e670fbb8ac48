// Copyright 2026 The Selex Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "selex/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "selex/error.hpp"
#include "selex/random.hpp"

namespace selex {
namespace {

using json = nlohmann::json;

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

// Decodes one code point at `pos`, advancing it. Invalid bytes decode as
// U+FFFD and consume a single byte.
char32_t decode_utf8(std::string_view s, std::size_t& pos) {
  const auto b0 = static_cast<unsigned char>(s[pos]);
  auto cont = [&](std::size_t i) -> int {
    if (pos + i >= s.size()) return -1;
    const auto b = static_cast<unsigned char>(s[pos + i]);
    return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
  };
  if (b0 < 0x80) {
    ++pos;
    return b0;
  }
  int len = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    ++pos;
    return 0xFFFD;
  }
  for (int i = 1; i < len; ++i) {
    const int c = cont(static_cast<std::size_t>(i));
    if (c < 0) {
      ++pos;
      return 0xFFFD;
    }
    cp = (cp << 6) | static_cast<char32_t>(c);
  }
  pos += static_cast<std::size_t>(len);
  return cp;
}

void encode_utf8(char32_t cp, std::string& out) {
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
}

bool in_range(char32_t cp, char32_t lo, char32_t hi) {
  return cp >= lo && cp <= hi;
}

// Letters and digits. Outside ASCII this is an approximation: everything from
// U+00C0 up is treated as a letter except known punctuation/symbol blocks.
bool is_word_char(char32_t cp) {
  if (cp < 0x80) {
    return (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z') ||
           (cp >= '0' && cp <= '9');
  }
  if (cp < 0xC0 || cp == 0xD7 || cp == 0xF7 || cp == 0xFFFD) return false;
  if (in_range(cp, 0x2000, 0x2BFF) || in_range(cp, 0x2E00, 0x2E7F) ||
      in_range(cp, 0x3000, 0x303F) || in_range(cp, 0xFE30, 0xFE4F) ||
      in_range(cp, 0xFF00, 0xFF0F) || in_range(cp, 0xFF1A, 0xFF20) ||
      in_range(cp, 0xFF3B, 0xFF40) || in_range(cp, 0xFF5B, 0xFF65) ||
      cp >= 0x1F000) {
    return false;
  }
  return true;
}

bool is_apostrophe(char32_t cp) { return cp == U'\'' || cp == 0x2019; }

char32_t fold(char32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 32;
  if (cp < 0x80) return cp;
  if (in_range(cp, 0xC0, 0xDE) && cp != 0xD7) return cp + 0x20;
  if (in_range(cp, 0x100, 0x137) || in_range(cp, 0x14A, 0x177)) {
    return cp % 2 == 0 ? cp + 1 : cp;
  }
  if (in_range(cp, 0x139, 0x148) || in_range(cp, 0x179, 0x17E)) {
    return cp % 2 == 1 ? cp + 1 : cp;
  }
  if (cp == 0x178) return 0xFF;
  if (in_range(cp, 0x391, 0x3A9) && cp != 0x3A2) return cp + 0x20;
  if (in_range(cp, 0x410, 0x42F)) return cp + 0x20;
  if (in_range(cp, 0x400, 0x40F)) return cp + 0x50;
  if (cp == 0x2019) return U'\'';
  return cp;
}

Document make_document(const std::string& id, const std::string& text,
                       const std::string& label_text, std::size_t line) {
  const std::string where = "line " + std::to_string(line);
  if (id.empty()) throw LoadError(where + ": empty id");
  if (text.empty()) throw LoadError(where + ": empty text for id '" + id + "'");
  auto label = parse_label(label_text);
  if (!label) {
    throw LoadError(where + ": unparsable label '" + label_text + "' for id '" +
                    id + "'");
  }
  return Document{id, text, *label};
}

std::string json_field_as_string(const json& obj, const char* field,
                                 std::size_t line) {
  auto it = obj.find(field);
  if (it == obj.end() || it->is_null()) {
    throw LoadError("line " + std::to_string(line) + ": missing field '" +
                    field + "'");
  }
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number_integer()) return std::to_string(it->get<long long>());
  throw LoadError("line " + std::to_string(line) + ": field '" + field +
                  "' must be a string");
}

struct LoadedDocument {
  Document doc;
  std::size_t line = 0;
};

std::vector<LoadedDocument> load_jsonl(std::istream& in) {
  std::vector<LoadedDocument> docs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw LoadError("line " + std::to_string(line_no) +
                      ": malformed JSON: " + e.what());
    }
    if (!obj.is_object()) {
      throw LoadError("line " + std::to_string(line_no) + ": expected object");
    }
    docs.push_back({make_document(json_field_as_string(obj, "id", line_no),
                                  json_field_as_string(obj, "text", line_no),
                                  json_field_as_string(obj, "label", line_no),
                                  line_no),
                    line_no});
  }
  return docs;
}

struct CsvRecord {
  std::vector<std::string> fields;
  std::size_t line = 0;  // line on which the record starts
};

// RFC 4180 reader: quoted fields may hold commas, doubled quotes and newlines.
std::vector<CsvRecord> read_csv(std::istream& in) {
  std::vector<CsvRecord> records;
  std::string data((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  std::size_t line = 1;
  std::size_t i = 0;
  while (i < data.size()) {
    CsvRecord rec;
    rec.line = line;
    std::string field;
    bool quoted = false;
    bool at_field_start = true;
    bool done = false;
    while (!done) {
      if (i >= data.size()) {
        if (quoted) {
          throw LoadError("line " + std::to_string(rec.line) +
                          ": unterminated quoted field");
        }
        rec.fields.push_back(std::move(field));
        break;
      }
      const char c = data[i];
      if (quoted) {
        if (c == '"') {
          if (i + 1 < data.size() && data[i + 1] == '"') {
            field.push_back('"');
            i += 2;
          } else {
            quoted = false;
            ++i;
          }
        } else {
          if (c == '\n') ++line;
          field.push_back(c);
          ++i;
        }
        continue;
      }
      if (c == '"' && at_field_start) {
        quoted = true;
        at_field_start = false;
        ++i;
      } else if (c == ',') {
        rec.fields.push_back(std::move(field));
        field.clear();
        at_field_start = true;
        ++i;
      } else if (c == '\r' || c == '\n') {
        rec.fields.push_back(std::move(field));
        if (c == '\r' && i + 1 < data.size() && data[i + 1] == '\n') ++i;
        ++i;
        ++line;
        done = true;
      } else {
        field.push_back(c);
        at_field_start = false;
        ++i;
      }
    }
    const bool blank = rec.fields.size() == 1 && rec.fields[0].empty();
    if (!blank) records.push_back(std::move(rec));
  }
  return records;
}

std::vector<LoadedDocument> load_csv(std::istream& in) {
  auto records = read_csv(in);
  if (records.empty()) throw LoadError("line 1: missing CSV header");
  const auto& header = records.front().fields;
  auto column = [&](const char* name) -> std::size_t {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (lower_ascii(header[i]) == name) return i;
    }
    throw LoadError("line 1: missing field '" + std::string(name) +
                    "' in header");
  };
  const std::size_t id_col = column("id");
  const std::size_t text_col = column("text");
  const std::size_t label_col = column("label");
  std::vector<LoadedDocument> docs;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    const std::size_t needed = std::max({id_col, text_col, label_col}) + 1;
    if (rec.fields.size() < needed) {
      throw LoadError("line " + std::to_string(rec.line) + ": expected " +
                      std::to_string(header.size()) + " fields, got " +
                      std::to_string(rec.fields.size()));
    }
    docs.push_back({make_document(rec.fields[id_col], rec.fields[text_col],
                                  rec.fields[label_col], rec.line),
                    rec.line});
  }
  return docs;
}

}  // namespace

std::optional<Label> parse_label(std::string_view text) {
  const std::string t = lower_ascii(text);
  if (t == "pos" || t == "positive" || t == "1") return Label::kPositive;
  if (t == "neg" || t == "negative" || t == "0") return Label::kNegative;
  return std::nullopt;
}

std::string_view label_name(Label label) {
  return label == Label::kPositive ? "positive" : "negative";
}

std::optional<CorpusFormat> parse_corpus_format(std::string_view text) {
  const std::string t = lower_ascii(text);
  if (t == "jsonl") return CorpusFormat::kJsonl;
  if (t == "csv") return CorpusFormat::kCsv;
  return std::nullopt;
}

std::vector<std::string> TokenizedReview::unique_words() const {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& tok : tokens) {
    if (seen.insert(tok.word).second) out.push_back(tok.word);
  }
  return out;
}

std::vector<Document> load_corpus(const std::filesystem::path& path,
                                  CorpusFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open corpus file " + path.string());
  auto loaded = format == CorpusFormat::kJsonl ? load_jsonl(in) : load_csv(in);

  std::unordered_map<std::string, std::size_t> first_line;
  std::vector<Document> docs;
  docs.reserve(loaded.size());
  for (auto& entry : loaded) {
    auto [it, inserted] = first_line.emplace(entry.doc.id, entry.line);
    if (!inserted) {
      throw LoadError("line " + std::to_string(entry.line) +
                      ": duplicate id '" + entry.doc.id +
                      "' (first seen on line " + std::to_string(it->second) +
                      ")");
    }
    docs.push_back(std::move(entry.doc));
  }
  return docs;
}

void save_corpus_jsonl(const std::filesystem::path& path,
                       const std::vector<Document>& docs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& d : docs) {
    json obj = {{"id", d.id}, {"text", d.text}, {"label", label_name(d.label)}};
    out << obj.dump() << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

Splits make_splits(const std::vector<Document>& corpus, SplitSizes sizes,
                   std::uint64_t seed) {
  const std::size_t total = sizes.train + sizes.dev + sizes.test;
  if (total > corpus.size()) {
    throw InvalidArgument("split sizes (" + std::to_string(sizes.train) + "," +
                          std::to_string(sizes.dev) + "," +
                          std::to_string(sizes.test) + ") exceed corpus of " +
                          std::to_string(corpus.size()) + " documents");
  }
  std::unordered_set<std::string> ids;
  std::vector<std::size_t> pos;
  std::vector<std::size_t> neg;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (!ids.insert(corpus[i].id).second) {
      throw InvalidArgument("duplicate id '" + corpus[i].id + "' in corpus");
    }
    (corpus[i].label == Label::kPositive ? pos : neg).push_back(i);
  }
  Rng rng(seed);
  rng.shuffle(pos);
  rng.shuffle(neg);

  std::size_t pos_next = 0;
  std::size_t neg_next = 0;
  auto take = [&](std::size_t size) {
    const std::size_t pos_left = pos.size() - pos_next;
    const std::size_t neg_left = neg.size() - neg_next;
    std::size_t want_pos = size / 2;
    if (size % 2 == 1 && pos_left > neg_left) ++want_pos;
    std::size_t want_neg = size - want_pos;
    // Fall back to the other class when one runs short.
    if (want_pos > pos_left) {
      want_neg += want_pos - pos_left;
      want_pos = pos_left;
    }
    if (want_neg > neg_left) {
      want_pos += want_neg - neg_left;
      want_neg = neg_left;
    }
    std::vector<std::size_t> picked;
    picked.reserve(size);
    for (std::size_t i = 0; i < want_pos; ++i) picked.push_back(pos[pos_next++]);
    for (std::size_t i = 0; i < want_neg; ++i) picked.push_back(neg[neg_next++]);
    rng.shuffle(picked);
    std::vector<Document> out;
    out.reserve(size);
    for (std::size_t i : picked) out.push_back(corpus[i]);
    return out;
  };
  Splits splits;
  splits.train = take(sizes.train);
  splits.dev = take(sizes.dev);
  splits.test = take(sizes.test);
  return splits;
}

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> tokens;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t start = pos;
    char32_t cp = decode_utf8(text, pos);
    if (!is_word_char(cp)) continue;
    std::size_t end = pos;
    // Extend over word characters and apostrophes that sit between them.
    while (pos < text.size()) {
      std::size_t probe = pos;
      char32_t next = decode_utf8(text, probe);
      if (is_word_char(next)) {
        pos = end = probe;
        continue;
      }
      if (is_apostrophe(next) && probe < text.size()) {
        std::size_t after = probe;
        char32_t following = decode_utf8(text, after);
        if (is_word_char(following)) {
          pos = end = after;
          continue;
        }
      }
      break;
    }
    Token tok;
    tok.surface = std::string(text.substr(start, end - start));
    tok.word = casefold(tok.surface);
    tok.span = {start, end};
    tokens.push_back(std::move(tok));
    pos = end;
  }
  return tokens;
}

std::string casefold(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto b = static_cast<unsigned char>(text[pos]);
    if (b < 0x80) {
      out.push_back(static_cast<char>(fold(b)));
      ++pos;
      continue;
    }
    const std::size_t start = pos;
    char32_t cp = decode_utf8(text, pos);
    if (cp == 0xFFFD && pos - start == 1) {
      out.push_back(text[start]);  // keep invalid bytes untouched
      continue;
    }
    encode_utf8(fold(cp), out);
  }
  return out;
}

TokenizedReview tokenize_document(Document doc) {
  TokenizedReview review;
  review.tokens = tokenize(doc.text);
  review.doc = std::move(doc);
  return review;
}

void save_split_manifest(const std::filesystem::path& dir,
                         const Splits& splits) {
  std::filesystem::create_directories(dir);
  auto write = [&](const char* name, const std::vector<Document>& docs) {
    json ids = json::array();
    for (const auto& d : docs) ids.push_back(d.id);
    std::ofstream out(dir / (std::string(name) + ".json"), std::ios::binary);
    if (!out) throw IoError("cannot write split manifest in " + dir.string());
    out << ids.dump(1) << '\n';
  };
  write("train", splits.train);
  write("dev", splits.dev);
  write("test", splits.test);
}

Splits load_split_manifest(const std::filesystem::path& dir,
                           const std::vector<Document>& corpus) {
  std::unordered_map<std::string, const Document*> by_id;
  for (const auto& d : corpus) by_id.emplace(d.id, &d);
  std::set<std::string> used;
  auto read = [&](const char* name) {
    const auto path = dir / (std::string(name) + ".json");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open split manifest " + path.string());
    json ids;
    try {
      ids = json::parse(in);
    } catch (const json::parse_error& e) {
      throw LoadError(path.string() + ": " + e.what());
    }
    std::vector<Document> docs;
    for (const auto& id : ids) {
      const auto key = id.get<std::string>();
      auto it = by_id.find(key);
      if (it == by_id.end()) {
        throw LoadError(path.string() + ": unknown id '" + key + "'");
      }
      if (!used.insert(key).second) {
        throw LoadError(path.string() + ": id '" + key +
                        "' appears in more than one split");
      }
      docs.push_back(*it->second);
    }
    return docs;
  };
  Splits splits;
  splits.train = read("train");
  splits.dev = read("dev");
  splits.test = read("test");
  return splits;
}

}  // namespace selex
