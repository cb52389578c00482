#include <doctest.h>

#include "ngd/core/error.hpp"
#include "ngd/lang/language.hpp"
#include "ngd/narrate/narrate.hpp"

using namespace ngd;
using namespace ngd::lang;

TEST_SUITE("langparse") {

TEST_CASE("tokenize lowercases and strips punctuation") {
  CHECK(tokenize("The orange is in the bowl.") ==
        Tokens{"the", "orange", "is", "in", "the", "bowl"});
  CHECK(tokenize("").empty());
  CHECK(tokenize("   \t ").empty());
  const auto t = tokenize("I am placing the cup on the opening of the bottle");
  REQUIRE(t.size() == 11);
  CHECK(t.front() == "i");
  CHECK(t.back() == "bottle");
}

TEST_CASE("tokenize is idempotent on its joined output") {
  for (const char* s : {"The Mug, is to the LEFT of: the plate!", "a  b\tc", "x"}) {
    const auto once = tokenize(s);
    CHECK(tokenize(join(once)) == once);
  }
}

TEST_CASE("parse_expression examples") {
  auto p = parse_text("the orange is in the bowl");
  CHECK(p.subject == "orange");
  CHECK(p.object == "bowl");
  CHECK(p.relation == Relation::In);

  p = parse_text("put the mug to the left of the plate");
  CHECK(p.subject == "mug");
  CHECK(p.object == "plate");
  CHECK(p.relation == Relation::LeftOf);
  CHECK(p.relation_tokens == Tokens{"to", "the", "left", "of"});

  CHECK_THROWS_AS(parse_text("the coke can is on top of the book"), ParseError);
  CHECK_THROWS_AS(parse_text("in the bowl"), ParseError);
  CHECK_THROWS_AS(parse_text("the bowl is in the bowl"), ParseError);
}

TEST_CASE("synonyms and multi-word noun phrases") {
  CHECK(parse_text("the coke can is inside the bowl").subject == "coke can");
  CHECK(parse_text("I am placing the cup into the box").relation == Relation::In);
  CHECK(parse_text("the cup should be in back of the box").relation == Relation::Behind);
  CHECK(parse_text("the cup is right of the box").relation == Relation::RightOf);
  CHECK(parse_text("the cup is behind the box").relation == Relation::Behind);
}

TEST_CASE("relation tokens are a contiguous subsequence") {
  const auto tokens = tokenize("the mug should be to the right of the plate");
  const auto p = parse_expression(tokens);
  for (std::size_t i = 0; i < p.relation_tokens.size(); ++i)
    CHECK(tokens[p.relation_begin + i] == p.relation_tokens[i]);
}

TEST_CASE("parse inverts every generator template") {
  for (const auto& t : narrate::templates()) {
    for (Relation r : kAllRelations) {
      for (const auto& phrase : SynonymTable::builtin().phrases(r)) {
        const auto text = narrate::render(t, "coke can", phrase, "bowl");
        const auto p = parse_text(text);
        CHECK_MESSAGE(p.subject == "coke can", text);
        CHECK_MESSAGE(p.object == "bowl", text);
        CHECK_MESSAGE(p.relation == r, text);
      }
    }
  }
}

TEST_CASE("synonym table file matches the built-in table") {
  const auto loaded = SynonymTable::load(NGD_SOURCE_DIR "/data/relations.tsv");
  REQUIRE(loaded.entries().size() == SynonymTable::builtin().entries().size());
  for (Relation r : kAllRelations)
    CHECK(loaded.phrases(r) == SynonymTable::builtin().phrases(r));
  CHECK_THROWS(SynonymTable::parse("inside\tNowhere\n"));
}

TEST_CASE("build_vocabulary") {
  const std::vector<Utterance> corpus = {make_utterance("a b"), make_utterance("b c")};
  const auto v = build_vocabulary(corpus);
  CHECK(v.size() == 5);
  CHECK(v.index("a") == 2);
  CHECK(v.index("b") == 3);
  CHECK(v.index("c") == 4);
  CHECK(build_vocabulary(corpus) == v);
  CHECK_THROWS_AS(build_vocabulary({}), EmptyCorpus);
}

TEST_CASE("encode_tokens") {
  const auto v = build_vocabulary({make_utterance("a b")});
  CHECK(encode_tokens({"a", "b"}, v) == std::vector<std::size_t>{2, 3});
  CHECK(encode_tokens({"zzz"}, v) == std::vector<std::size_t>{Vocabulary::kUnk});
  CHECK(encode_tokens({}, v).empty());
  for (auto i : encode_tokens(tokenize("a b q r a"), v)) CHECK(i < v.size());
}

}  // TEST_SUITE
