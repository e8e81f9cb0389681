#include <gtest/gtest.h>

#include <cmath>

#include "aipoll/corpus.hpp"
#include "aipoll/embedding.hpp"
#include "aipoll/error.hpp"
#include "support.hpp"

using namespace aipoll;

namespace {

class CountingEmbedder final : public EmbeddingBackend {
 public:
  std::vector<double> embed(const std::string& text) override {
    ++calls;
    if (text.find("fail") != std::string::npos) throw Error(ErrorCode::Backend, "down");
    return inner.embed(text);
  }
  std::string model_tag() const override { return inner.model_tag(); }
  HashEmbeddingBackend inner{128};
  int calls = 0;
};

}  // namespace

TEST(Embedding, TruncateRenormalize) {
  std::vector<double> raw(150, 0.0);
  raw[0] = 3;
  raw[1] = 4;
  raw[120] = 100;  // beyond the kept prefix
  const auto v = truncate_renormalize(raw);
  ASSERT_EQ(v.size(), kEmbeddingDims);
  EXPECT_NEAR(v[0], 0.6, 1e-15);
  EXPECT_NEAR(v[1], 0.8, 1e-15);
  EXPECT_THROW(truncate_renormalize(std::vector<double>(50, 1.0)), Error);
  EXPECT_THROW(truncate_renormalize(std::vector<double>(100, 0.0)), Error);
}

TEST(Embedding, HashBackendIsDeterministicAndTextSensitive) {
  HashEmbeddingBackend b(256);
  const auto a1 = b.embed("alpha");
  const auto a2 = b.embed("alpha");
  const auto c = b.embed("beta");
  EXPECT_EQ(a1, a2);
  EXPECT_NE(a1, c);
  EXPECT_EQ(a1.size(), 256u);
}

TEST(Embedding, CacheAvoidsRefetchAcrossInstances) {
  test::TempDir tmp;
  const auto corpus = QuestionCorpus::load(test::fixture("e2e/questions.json"));
  CountingEmbedder backend;
  std::vector<EmbeddingRecord> first;
  {
    EmbeddingCache cache(tmp / "emb.jsonl");
    first = embed_questions(corpus, backend, &cache);
    EXPECT_EQ(backend.calls, 5);
    EXPECT_EQ(cache.size(), 5u);
  }
  EmbeddingCache cache(tmp / "emb.jsonl");
  EXPECT_EQ(cache.size(), 5u);
  const auto second = embed_questions(corpus, backend, &cache);
  EXPECT_EQ(backend.calls, 5);
  ASSERT_EQ(second.size(), first.size());
  for (std::size_t i = 0; i < first.size(); ++i) {
    EXPECT_EQ(second[i].vector, first[i].vector);
    double n = 0;
    for (double v : second[i].vector) n += v * v;
    EXPECT_NEAR(n, 1.0, 1e-12);
  }
}

TEST(Embedding, MissingEmbeddingsAreCollected) {
  const QuestionCorpus corpus({Question("a", "fail one", 2, "n", "y"), Question("b", "fine", 2, "n", "y"),
                               Question("c", "fail two", 2, "n", "y")},
                              {});
  CountingEmbedder backend;
  try {
    embed_questions(corpus, backend);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingEmbedding);
    EXPECT_NE(std::string(e.what()).find("2 question"), std::string::npos);
  }
}

TEST(Embedding, FixtureBackend) {
  FixtureEmbeddingBackend b({{"x", std::vector<double>(100, 1.0)}});
  EXPECT_EQ(b.embed("x").size(), 100u);
  try {
    b.embed("y");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingEmbedding);
  }
}

TEST(Embedding, RecordsRoundTrip) {
  test::TempDir tmp;
  HashEmbeddingBackend b;
  std::vector<EmbeddingRecord> rs{{"q1", truncate_renormalize(b.embed("one"))}, {"q2", truncate_renormalize(b.embed("two"))}};
  write_embeddings(tmp / "e.jsonl", rs, Provenance{"r", {}});
  const auto back = read_embeddings(tmp / "e.jsonl");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].vector, rs[1].vector);
}
