#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "memhub/retrieval.hpp"

using namespace memhub;
using oracle::TempDir;
using testing::error_of;

namespace {

struct Fixture {
  TempDir dir;
  std::unique_ptr<Store> store = testing::open_store(dir);
  SessionId session = store->begin_session(AgentId("a"));

  Seq add(const std::string& text, std::optional<std::vector<float>> emb = {}) {
    return store->append(session, AuthorKind::kAgent, AgentId("a"), text, {},
                         {{}, std::move(emb)})
        .seq;
  }
};

}  // namespace

TEST_SUITE("retrieval") {

TEST_CASE("bm25 on a three-record scope") {
  Fixture f;
  f.add("oceans and rivers");
  const Seq hit = f.add("climate models disagree on climate sensitivity");
  f.add("forest cover");
  const auto res = fulltext_search(f.store->view(), "climate", 10);
  REQUIRE(res.size() == 1);
  CHECK(res[0].seq == hit);
  // N = 3, df = 1, tf = 2, dl = 6, avgdl = 11/3.
  const double idf = std::log(1.0 + (3 - 1 + 0.5) / (1 + 0.5));
  const double norm = 1.2 * (1 - 0.75 + 0.75 * 6.0 / (11.0 / 3.0));
  CHECK(res[0].score == doctest::Approx(idf * 2 * 2.2 / (2 + norm)).epsilon(1e-12));
  CHECK(res[0].breakdown.bm25 == res[0].score);
  CHECK(fulltext_search(f.store->view(), "glacier", 10).empty());
}

TEST_CASE("identical content ties break toward the newer record") {
  Fixture f;
  const Seq a = f.add("sea level");
  const Seq b = f.add("sea level");
  const auto res = fulltext_search(f.store->view(), "sea", 10);
  REQUIRE(res.size() == 2);
  CHECK(res[0].score == res[1].score);
  CHECK(res[0].seq == b);
  CHECK(res[1].seq == a);
}

TEST_CASE("statistics are computed over the scope only") {
  Fixture f;
  f.add("reef reef coral");
  f.add("reef");
  f.add("unrelated words here");
  StructuredPredicate scope;
  scope.seq = Range<Seq>{1, 2};
  const auto view = f.store->view();
  const std::vector<Seq> cands{1, 2};
  const auto scoped = bm25_scores(view, cands, {"reef"});
  std::vector<MemoryRecord> docs{f.store->get_record(1), f.store->get_record(2)};
  const auto want = oracle::bm25(docs, "reef");
  CHECK(scoped[0] == doctest::Approx(want[0]).epsilon(1e-12));
  CHECK(scoped[1] == doctest::Approx(want[1]).epsilon(1e-12));
  const auto res = fulltext_search(view, "reef", 5, scope);
  REQUIRE(res.size() == 2);
  CHECK(res[0].score ==
        doctest::Approx(std::max(want[0], want[1])).epsilon(1e-12));
}

TEST_CASE("semantic search") {
  Fixture f;
  const std::vector<float> e1{1, 0, 0, 0}, e2{0, 1, 0, 0};
  // Dimension must match the store; pad to 64.
  auto pad = [](std::vector<float> v) {
    v.resize(64, 0.0f);
    return v;
  };
  const Seq s1 = f.add("first", pad(e1));
  const Seq s2 = f.add("second", pad(e2));
  const Seq s3 = f.add("third", pad({1, 1, 0, 0}));
  auto res = semantic_search(f.store->view(), VectorQuery{pad(e2)}, 3);
  REQUIRE(res.size() == 3);
  CHECK(res[0].seq == s2);
  CHECK(res[0].score == doctest::Approx(1.0));
  CHECK(res[1].seq == s3);
  CHECK(res[2].seq == s1);

  // All-zero query: every score 0, newest first.
  res = semantic_search(f.store->view(), VectorQuery{pad({})}, 3);
  REQUIRE(res.size() == 3);
  CHECK(res[0].seq == s3);
  CHECK(res[2].seq == s1);
  for (const auto& r : res) CHECK(r.score == 0.0);

  CHECK(error_of([&] {
          semantic_search(f.store->view(), VectorQuery{std::vector<float>{1, 0}}, 3);
        }) == ErrorCode::kInvalidRequest);
}

TEST_CASE("text vector queries go through the store embedder") {
  Fixture f;
  f.add("mangrove restoration");
  const Seq hit = f.add("coral bleaching");
  const auto res = semantic_search(f.store->view(), VectorQuery{std::string("coral bleaching")}, 1);
  REQUIRE(res.size() == 1);
  CHECK(res[0].seq == hit);
  CHECK(res[0].score == doctest::Approx(1.0));
}

TEST_CASE("hybrid boundaries") {
  Fixture f;
  for (const char* t : {"river delta", "delta sediment", "sediment cores",
                        "ice cores", "delta delta"}) {
    f.add(t);
  }
  const auto view = f.store->view();

  SUBCASE("predicate only returns the k newest matches") {
    HybridQuery q;
    q.predicate.seq = Range<Seq>{1, 4};
    q.k = 2;
    const auto res = hybrid_search(view, q);
    REQUIRE(res.size() == 2);
    CHECK(res[0].seq == 4);
    CHECK(res[1].seq == 3);
  }
  SUBCASE("alpha 1 orders like BM25 on the candidate set") {
    HybridQuery q;
    q.text = "delta";
    q.vector = VectorQuery{std::string("ice")};
    q.alpha = 1.0;
    q.k = 5;
    const auto fused = hybrid_search(view, q);
    const auto lexical = fulltext_search(view, "delta", 5);
    REQUIRE(fused.size() == 5);
    for (std::size_t i = 0; i < lexical.size(); ++i) {
      CHECK(fused[i].seq == lexical[i].seq);
    }
  }
  SUBCASE("fused breakdown carries both raw signals") {
    HybridQuery q;
    q.text = "sediment";
    q.vector = VectorQuery{std::string("sediment")};
    const auto res = hybrid_search(view, q);
    REQUIRE(!res.empty());
    CHECK(res[0].breakdown.bm25.has_value());
    CHECK(res[0].breakdown.cosine.has_value());
    CHECK(res[0].breakdown.fused == res[0].score);
  }
  SUBCASE("validation") {
    HybridQuery q;
    q.k = 0;
    CHECK(error_of([&] { hybrid_search(view, q); }) == ErrorCode::kInvalidRequest);
    q.k = 1;
    q.alpha = 1.5;
    CHECK(error_of([&] { hybrid_search(view, q); }) == ErrorCode::kInvalidRequest);
    CHECK(error_of([&] { fulltext_search(view, "!!", 3); }) ==
          ErrorCode::kInvalidRequest);
  }
}

TEST_CASE("min-max normalization") {
  CHECK(min_max_normalize(std::vector<double>{}).empty());
  CHECK(min_max_normalize(std::vector<double>{2, 2, 2}) == std::vector<double>{0, 0, 0});
  CHECK(min_max_normalize(std::vector<double>{1, 3, 2}) ==
        std::vector<double>{0, 1, 0.5});
}

TEST_CASE("recency") {
  CHECK(recency(10, 10, 100) == 1.0);
  CHECK(recency(0, 100, 100) == doctest::Approx(0.5));
  double prev = 2.0;
  for (Seq s = 200; s > 0; --s) {
    const double r = recency(s, 200, 100);
    CHECK(r < prev);
    CHECK(r > 0.0);
    prev = r;
  }
  CHECK(error_of([] { recency(5, 4, 100); }) == ErrorCode::kInvalidRequest);
}

TEST_CASE("query JSON") {
  const json j = {{"predicate", {{"agent", "a"}}},
                  {"text", "coral"},
                  {"vector", "coral reef"},
                  {"k", 3},
                  {"alpha", 0.25}};
  const auto q = hybrid_query_from_json(j);
  CHECK(q.k == 3);
  CHECK(q.alpha == 0.25);
  CHECK(*q.text == "coral");
  CHECK(std::get<std::string>(q.vector->value) == "coral reef");
  const auto back = hybrid_query_from_json(to_json(q));
  CHECK(back.predicate == q.predicate);
  for (const json bad : {json{{"k", 0}}, json{{"alpha", -1}}, json{{"text", "..."}},
                         json{{"limit", 3}}, json{{"vector", 4}}}) {
    CAPTURE(bad.dump());
    CHECK(error_of([&] { hybrid_query_from_json(bad); }) == ErrorCode::kInvalidRequest);
  }
}

TEST_CASE("random corpora agree with brute force") {
  std::mt19937_64 rng(11);
  for (int c = 0; c < 20; ++c) {
    oracle::CorpusShape shape;
    shape.max_records = 50;
    auto corpus = oracle::make_corpus(rng, shape);
    const auto view = corpus->store->view();
    const auto vec = oracle::random_vector(rng, 64);
    const auto got = semantic_search(view, VectorQuery{vec}, 10);
    const auto want =
        oracle::rank(oracle::relevance(corpus->records, std::nullopt, vec, 0.5), 10);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].seq == want[i].seq);
      CHECK(got[i].score == doctest::Approx(want[i].score).epsilon(1e-9));
    }
  }
}

}
