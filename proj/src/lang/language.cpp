#include "ngd/lang/language.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "ngd/core/error.hpp"

namespace ngd::lang {

std::string_view relation_label(Relation r) {
  switch (r) {
    case Relation::In: return "In";
    case Relation::Behind: return "Behind";
    case Relation::LeftOf: return "LeftOf";
    case Relation::RightOf: return "RightOf";
  }
  return "?";
}

std::string_view relation_short(Relation r) {
  switch (r) {
    case Relation::In: return "in";
    case Relation::Behind: return "behind";
    case Relation::LeftOf: return "left";
    case Relation::RightOf: return "right";
  }
  return "?";
}

std::optional<Relation> relation_from_label(std::string_view label) {
  for (Relation r : kAllRelations)
    if (relation_label(r) == label || relation_short(r) == label) return r;
  return std::nullopt;
}

Tokens tokenize(std::string_view text) {
  Tokens out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else if (!std::ispunct(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

Utterance make_utterance(std::string text) {
  Utterance u;
  u.tokens = tokenize(text);
  u.text = std::move(text);
  return u;
}

std::string join(const Tokens& tokens) {
  std::string s;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) s += ' ';
    s += tokens[i];
  }
  return s;
}

// ---- SynonymTable --------------------------------------------------------

SynonymTable::SynonymTable(std::vector<Entry> entries)
    : entries_(std::move(entries)) {
  std::stable_sort(entries_.begin(), entries_.end(),
                   [](const Entry& a, const Entry& b) {
                     return a.phrase.size() > b.phrase.size();
                   });
}

const SynonymTable& SynonymTable::builtin() {
  static const SynonymTable table = parse(
      "in\tIn\ninside\tIn\ninto\tIn\n"
      "behind\tBehind\nin back of\tBehind\n"
      "left of\tLeftOf\nto the left of\tLeftOf\n"
      "right of\tRightOf\nto the right of\tRightOf\n");
  return table;
}

SynonymTable SynonymTable::parse(std::string_view text) {
  std::vector<Entry> entries;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw FormatError("synonym table line " + std::to_string(lineno) +
                        ": expected phrase<TAB>label");
    const auto label = relation_from_label(line.substr(tab + 1));
    if (!label)
      throw FormatError("synonym table line " + std::to_string(lineno) +
                        ": unknown label '" + line.substr(tab + 1) + "'");
    Tokens phrase = tokenize(line.substr(0, tab));
    if (phrase.empty())
      throw FormatError("synonym table line " + std::to_string(lineno) +
                        ": empty phrase");
    entries.push_back({std::move(phrase), *label});
  }
  return SynonymTable(std::move(entries));
}

SynonymTable SynonymTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read synonym table " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::vector<std::string> SynonymTable::phrases(Relation r) const {
  std::vector<std::string> out;
  for (const Entry& e : entries_)
    if (e.relation == r) out.push_back(join(e.phrase));
  return out;
}

// ---- parsing -------------------------------------------------------------

namespace {

const std::unordered_set<std::string>& subject_prefix_words() {
  static const std::unordered_set<std::string> words = {
      "i",      "we",     "you",   "am",     "are",    "is",   "now",
      "please", "put",    "place", "placing", "putting", "puts", "places",
      "move",   "moving", "moves", "set",    "setting", "then", "the",
      "a",      "an"};
  return words;
}

const std::unordered_set<std::string>& subject_suffix_words() {
  static const std::unordered_set<std::string> words = {
      "is", "are", "am", "should", "be", "being", "will", "must",
      "now", "has", "been", "was", "goes", "go", "belongs"};
  return words;
}

const std::unordered_set<std::string>& object_prefix_words() {
  static const std::unordered_set<std::string> words = {"the", "a", "an"};
  return words;
}

const std::unordered_set<std::string>& object_suffix_words() {
  static const std::unordered_set<std::string> words = {"now", "please"};
  return words;
}

std::string noun_phrase(Tokens::const_iterator first,
                        Tokens::const_iterator last,
                        const std::unordered_set<std::string>& prefix,
                        const std::unordered_set<std::string>& suffix) {
  while (first != last && prefix.count(*first)) ++first;
  while (first != last && suffix.count(*(last - 1))) --last;
  return join(Tokens(first, last));
}

}  // namespace

ParsedExpression parse_expression(const Tokens& tokens,
                                  const SynonymTable& table) {
  for (std::size_t pos = 0; pos < tokens.size(); ++pos) {
    for (const auto& entry : table.entries()) {
      const auto& phrase = entry.phrase;
      if (pos + phrase.size() > tokens.size()) continue;
      if (!std::equal(phrase.begin(), phrase.end(), tokens.begin() + pos))
        continue;
      ParsedExpression p;
      p.relation = entry.relation;
      p.relation_tokens = phrase;
      p.relation_begin = pos;
      p.subject = noun_phrase(tokens.begin(), tokens.begin() + pos,
                              subject_prefix_words(), subject_suffix_words());
      p.object = noun_phrase(tokens.begin() + pos + phrase.size(),
                             tokens.end(), object_prefix_words(),
                             object_suffix_words());
      if (p.subject.empty())
        throw ParseError("no subject noun phrase in '" + join(tokens) + "'");
      if (p.object.empty())
        throw ParseError("no object noun phrase in '" + join(tokens) + "'");
      if (p.subject == p.object)
        throw ParseError("subject and object coincide in '" + join(tokens) +
                         "'");
      return p;
    }
  }
  throw ParseError("no supported relation phrase in '" + join(tokens) + "'");
}

ParsedExpression parse_text(std::string_view text, const SynonymTable& table) {
  return parse_expression(tokenize(text), table);
}

// ---- Vocabulary ----------------------------------------------------------

Vocabulary::Vocabulary() {
  add("<pad>");
  add("<unk>");
}

Vocabulary::Vocabulary(const std::vector<std::string>& tokens) : Vocabulary() {
  for (const auto& t : tokens) add(t);
}

std::size_t Vocabulary::index(const std::string& token) const {
  const auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(const std::string& token) const {
  return index_.count(token) > 0;
}

std::size_t Vocabulary::add(const std::string& token) {
  const auto [it, inserted] = index_.emplace(token, tokens_.size());
  if (inserted) tokens_.push_back(token);
  return it->second;
}

Vocabulary build_vocabulary(const std::vector<Utterance>& corpus) {
  if (corpus.empty()) throw EmptyCorpus("vocabulary corpus is empty");
  Vocabulary v;
  for (const auto& u : corpus)
    for (const auto& t : u.tokens) v.add(t);
  return v;
}

std::vector<std::size_t> encode_tokens(const Tokens& tokens,
                                       const Vocabulary& vocab) {
  std::vector<std::size_t> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(vocab.index(t));
  return out;
}

}  // namespace ngd::lang
