#include <gtest/gtest.h>

#include "retroroute/errors.hpp"
#include "retroroute/route.hpp"
#include "retroroute/tokenizer.hpp"
#include "support/test_util.hpp"

using namespace retroroute;

namespace {

Vocab small_vocab() {
  const std::vector<std::string> corpus{"{'smiles':'CCO','children':[{'smiles':'C=O'}]}",
                                        "CCO,,1", "N#C,Br,12"};
  return Vocab::build(corpus);
}

}  // namespace

TEST(Tokenizer, SpecialIdsAndKeywordsComeFirst) {
  const auto v = small_vocab();
  EXPECT_EQ(v.token(Vocab::kBos), "<bos>");
  EXPECT_EQ(v.token(Vocab::kEos), "<eos>");
  EXPECT_EQ(v.token(Vocab::kPad), "<pad>");
  EXPECT_EQ(v.token(3), "smiles");
  EXPECT_EQ(v.token(4), "children");
  // Remaining tokens are single characters in byte order.
  for (std::size_t i = 6; i < v.size(); ++i) {
    EXPECT_LT(v.tokens()[i - 1], v.tokens()[i]);
  }
  EXPECT_FALSE(v.id_of("s").has_value());
}

TEST(Tokenizer, KeywordsAreSingleTokens) {
  const auto v = small_vocab();
  const auto ids = v.encode("{'smiles':'C'}");
  ASSERT_EQ(ids.size(), 9u);
  EXPECT_EQ(ids[2], *v.id_of("smiles"));
  EXPECT_EQ(v.decode(ids), "{'smiles':'C'}");
}

TEST(Tokenizer, RouteEncodingRoundTrips) {
  Rng rng(9);
  std::vector<std::string> corpus;
  std::vector<RouteNode> routes;
  for (int i = 0; i < 200; ++i) {
    routes.push_back(testutil::random_route(rng, 10));
    corpus.push_back(serialize(routes.back()));
  }
  const auto v = Vocab::build(corpus);
  for (const auto& r : routes) {
    const auto seq = encode_route(serialize(r), v);
    EXPECT_EQ(seq.ids.front(), Vocab::kBos);
    EXPECT_EQ(seq.ids.back(), Vocab::kEos);
    EXPECT_EQ(parse_route(v.decode(seq.ids)), r);
  }
}

TEST(Tokenizer, UnknownCharacterReportsOffset) {
  const auto v = small_vocab();
  try {
    v.encode("CC$O");
    FAIL();
  } catch (const UnknownToken& e) {
    EXPECT_EQ(e.position(), 2u);
  }
}

TEST(Tokenizer, EmptyCorpusThrows) {
  EXPECT_THROW(Vocab::build(std::vector<std::string>{}), EmptyCorpus);
}

TEST(Tokenizer, EncoderInputLayout) {
  const auto v = small_vocab();
  const auto comma = *v.id_of(",");
  const auto with_sm = encode_encoder_input("CCO", std::string("Br"), 12, v);
  const std::vector<int> expected{*v.id_of("C"), *v.id_of("C"), *v.id_of("O"), comma,
                                  *v.id_of("B"), *v.id_of("r"), comma, *v.id_of("1"),
                                  *v.id_of("2")};
  EXPECT_EQ(with_sm.ids, expected);
  EXPECT_EQ(with_sm.kind, SeqKind::kEncoderInput);
  const auto no_sm = encode_encoder_input("CCO", std::nullopt, 1, v);
  EXPECT_EQ(no_sm.ids.size(), 6u);
  EXPECT_EQ(no_sm.ids[3], comma);
  EXPECT_EQ(no_sm.ids[4], comma);
  EXPECT_EQ(encoder_input_text("CCO", std::nullopt, 3), "CCO,,3");
  EXPECT_THROW(encode_encoder_input("CCO", std::nullopt, 0, v), StepsOutOfRange);
  EXPECT_THROW(encode_encoder_input("CCO", std::nullopt, 100, v), StepsOutOfRange);
}

TEST(Tokenizer, TextFormRoundTripsAndFingerprintIsStable) {
  const std::vector<std::string> corpus{"a\\b\nc\r", "{'smiles':'C'}"};
  const auto v = Vocab::build(corpus);
  const auto back = Vocab::from_text(v.to_text());
  EXPECT_EQ(back, v);
  EXPECT_EQ(back.fingerprint(), v.fingerprint());
  EXPECT_EQ(v.fingerprint(), fnv1a64(v.to_text()));
  const auto path = testing::TempDir() + "vocab.txt";
  v.save(path);
  EXPECT_EQ(Vocab::load(path), v);
  EXPECT_NE(small_vocab().fingerprint(), v.fingerprint());
}

TEST(Tokenizer, Fnv1aKnownValues) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ULL);
}

TEST(Tokenizer, RejectsForeignVocabularyHeader) {
  EXPECT_THROW(Vocab::from_text("other-vocab 2\n<bos>\n<eos>\n<pad>\n"), FormatVersionMismatch);
}

TEST(Tokenizer, PadBatchRightPadsWithMask) {
  const std::vector<TokenSeq> seqs{{{5, 6, 7}, SeqKind::kRouteTarget},
                                   {{8}, SeqKind::kRouteTarget}};
  const auto b = pad_batch(seqs, 10);
  EXPECT_EQ(b.rows, 2u);
  EXPECT_EQ(b.cols, 3u);
  EXPECT_EQ(b.ids, (std::vector<int>{5, 6, 7, 8, Vocab::kPad, Vocab::kPad}));
  EXPECT_EQ(b.mask, (std::vector<std::uint8_t>{1, 1, 1, 1, 0, 0}));
  EXPECT_EQ(b.lengths, (std::vector<std::size_t>{3, 1}));
  EXPECT_THROW(pad_batch(seqs, 2), SequenceTooLong);
}
