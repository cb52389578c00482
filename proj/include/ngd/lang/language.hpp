#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ngd::lang {

enum class Relation { In, Behind, LeftOf, RightOf };

inline constexpr std::array<Relation, 4> kAllRelations = {
    Relation::In, Relation::Behind, Relation::LeftOf, Relation::RightOf};

std::string_view relation_label(Relation r);  // "In", "Behind", ...
std::string_view relation_short(Relation r);  // "in", "behind", "left", "right"
std::optional<Relation> relation_from_label(std::string_view label);

using Tokens = std::vector<std::string>;

struct Utterance {
  std::string text;
  Tokens tokens;
};

// Lowercases, strips punctuation and splits on whitespace.
Tokens tokenize(std::string_view text);
Utterance make_utterance(std::string text);
std::string join(const Tokens& tokens);

// Relation phrase -> label table. Phrases are matched on token boundaries,
// longest phrase first.
class SynonymTable {
 public:
  struct Entry {
    Tokens phrase;
    Relation relation;
  };

  SynonymTable() = default;
  explicit SynonymTable(std::vector<Entry> entries);

  // The built-in table (same content as data/relations.tsv).
  static const SynonymTable& builtin();
  // Parses `phrase<TAB>label` lines; '#' starts a comment line.
  static SynonymTable parse(std::string_view text);
  static SynonymTable load(const std::filesystem::path& path);

  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<std::string> phrases(Relation r) const;

 private:
  std::vector<Entry> entries_;
};

struct ParsedExpression {
  std::string subject;
  Tokens relation_tokens;
  std::string object;
  Relation relation = Relation::In;
  std::size_t relation_begin = 0;  // token offset of the relation phrase

  friend bool operator==(const ParsedExpression&,
                         const ParsedExpression&) = default;
};

// Extracts (subject, relation, object) from a templated utterance.
// Throws ParseError when no known relation phrase occurs or when either
// noun phrase is empty or the two coincide.
ParsedExpression parse_expression(const Tokens& tokens,
                                  const SynonymTable& table = SynonymTable::builtin());
ParsedExpression parse_text(std::string_view text,
                            const SynonymTable& table = SynonymTable::builtin());

class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;

  Vocabulary();
  // Tokens in index order, starting at index 2; used by checkpoints.
  explicit Vocabulary(const std::vector<std::string>& tokens);

  std::size_t size() const { return tokens_.size(); }
  std::size_t index(const std::string& token) const;
  const std::string& token(std::size_t index) const { return tokens_.at(index); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  bool contains(const std::string& token) const;

  // Adds a token if absent; returns its index.
  std::size_t add(const std::string& token);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

// First-occurrence order. Throws EmptyCorpus on an empty corpus.
Vocabulary build_vocabulary(const std::vector<Utterance>& corpus);
std::vector<std::size_t> encode_tokens(const Tokens& tokens,
                                       const Vocabulary& vocab);

}  // namespace ngd::lang
