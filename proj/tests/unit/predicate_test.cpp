#include <doctest.h>

#include "helpers.hpp"
#include "memhub/codec.hpp"
#include "memhub/predicate.hpp"
#include "memhub/retrieval.hpp"

using namespace memhub;
using oracle::TempDir;
using testing::error_of;

namespace {

MemoryRecord record(Seq seq, const std::string& agent, TagSet tags,
                    TimestampMs ts = 0, AuthorKind kind = AuthorKind::kAgent) {
  return MemoryRecord{seq, 1, AgentId(agent), kind, "text", std::nullopt,
                      std::move(tags), ts, {}};
}

}  // namespace

TEST_SUITE("predicate") {

TEST_CASE("clauses") {
  const auto r = record(7, "a", {"sea-level", "coast"}, 100, AuthorKind::kTool);
  StructuredPredicate p;
  CHECK(p.empty());
  CHECK(matches(p, r));

  p.agents = std::set<std::string>{"a", "b"};
  p.has_tag = "sea-level";
  CHECK(matches(p, r));
  p.has_tag = "greenhouse";
  CHECK_FALSE(matches(p, r));

  StructuredPredicate q;
  q.seq = Range<Seq>{7, 7};
  q.ts = Range<TimestampMs>{50, 100};
  q.author_kinds = std::set<AuthorKind>{AuthorKind::kTool};
  q.has_all_tags = std::set<std::string>{"coast", "sea-level"};
  q.has_any_tags = std::set<std::string>{"x", "coast"};
  CHECK(matches(q, r));
  q.has_all_tags->insert("x");
  CHECK_FALSE(matches(q, r));
}

TEST_CASE("any_of and all_of") {
  const auto r = record(3, "a", {"reef"});
  StructuredPredicate p;
  p.any_of.emplace();
  CHECK_FALSE(matches(p, r));
  CHECK(StructuredPredicate::match_nothing() != StructuredPredicate::match_all());
  CHECK_FALSE(matches(StructuredPredicate::match_nothing(), r));

  StructuredPredicate agent_b;
  agent_b.agents = std::set<std::string>{"b"};
  StructuredPredicate reef;
  reef.has_tag = "reef";
  p.any_of = std::vector{agent_b, reef};
  CHECK(matches(p, r));
  StructuredPredicate both;
  both.all_of = {agent_b, reef};
  CHECK_FALSE(matches(both, r));
  CHECK(matches(conjoin({}, reef), r));
  CHECK_FALSE(matches(conjoin(reef, agent_b), r));
}

TEST_CASE("ranges must be ordered at any depth") {
  StructuredPredicate p;
  p.seq = Range<Seq>{5, 4};
  CHECK(error_of([&] { validate(p); }) == ErrorCode::kInvalidRequest);
  StructuredPredicate outer;
  outer.all_of = {p};
  CHECK(error_of([&] { validate(outer); }) == ErrorCode::kInvalidRequest);
}

TEST_CASE("JSON round trip and strictness") {
  const json j = {{"agents", {"a", "b"}},
                  {"sessions", {1, 2}},
                  {"seq", {{"lo", 1}, {"hi", 9}}},
                  {"ts", {{"lo", 0}, {"hi", 5}}},
                  {"author_kinds", {"user", "tool"}},
                  {"has_tag", "t"},
                  {"has_all_tags", {"t"}},
                  {"has_any_tags", {"t", "u"}},
                  {"any_of", {{{"agent", "a"}}}},
                  {"all_of", {{{"session", 1}}}}};
  const auto p = predicate_from_json(j);
  CHECK(predicate_from_json(to_json(p)) == p);
  CHECK(predicate_from_json(nullptr).empty());
  CHECK(predicate_from_json(json{{"agent", "x"}}).agents == std::set<std::string>{"x"});
  for (const json bad : {json{{"agentz", "a"}}, json{{"seq", {1, 2}}},
                         json{{"seq", {{"lo", 3}, {"hi", 1}}}},
                         json{{"author_kind", "robot"}}, json{{"sessions", "x"}},
                         json{{"has_tag", 3}}, json{{"any_of", "x"}}}) {
    CAPTURE(bad.dump());
    CHECK(error_of([&] { predicate_from_json(bad); }) == ErrorCode::kInvalidRequest);
  }
}

TEST_CASE("episode-level reading") {
  Episode e{4, AgentId("opener"), {"forest"}, {}, 1000, 2000, false};
  e.records.push_back(record(10, "opener", {"forest"}, 1000, AuthorKind::kUser));
  e.records.push_back(record(12, "other", {"forest"}, 1500));
  StructuredPredicate p;
  p.agents = std::set<std::string>{"opener"};
  CHECK(matches(p, e));
  p.agents = std::set<std::string>{"other"};
  CHECK_FALSE(matches(p, e));

  StructuredPredicate span;
  span.seq = Range<Seq>{11, 11};
  CHECK(matches(span, e));
  span.seq = Range<Seq>{13, 20};
  CHECK_FALSE(matches(span, e));

  StructuredPredicate kinds;
  kinds.author_kinds = std::set<AuthorKind>{AuthorKind::kUser};
  CHECK(matches(kinds, e));
  StructuredPredicate tag;
  tag.has_tag = "forest";
  CHECK(matches(tag, e));
}

TEST_CASE("a Tuesday time range selects exactly that day") {
  TempDir dir;
  ManualClock clock(1696118400000);  // Sunday 2023-10-01
  auto store = testing::open_store(dir, &clock);
  const auto s = store->begin_session(AgentId("analyst"));
  std::vector<Seq> tuesday;
  for (int hour = 0; hour < 24 * 7; hour += 5) {
    clock.set(1696118400000 + hour * 3'600'000LL);
    const auto r = store->append(s, AuthorKind::kAgent, AgentId("analyst"),
                                 "hourly note " + std::to_string(hour));
    if (r.ts >= 1696291200000 && r.ts <= 1696377599999) tuesday.push_back(r.seq);
  }
  StructuredPredicate p;
  p.ts = Range<TimestampMs>{1696291200000, 1696377599999};
  std::vector<Seq> got;
  for (const auto& r : structured_search(store->view(), p)) got.push_back(r.seq);
  CHECK(!got.empty());
  CHECK(got == tuesday);
  CHECK(structured_search(store->view(), {}).size() == store->last_seq());
}

TEST_CASE("two clauses select the intersection") {
  std::mt19937_64 rng(3);
  oracle::CorpusShape shape;
  shape.max_records = 80;
  auto c = oracle::make_corpus(rng, shape);
  const auto view = c->store->view();
  StructuredPredicate a, t, both;
  a.agents = std::set<std::string>{"a1"};
  t.has_tag = "reef";
  both = conjoin(a, t);
  const auto sa = structured_seqs(view, a), st = structured_seqs(view, t);
  std::vector<Seq> inter;
  std::set_intersection(sa.begin(), sa.end(), st.begin(), st.end(),
                        std::back_inserter(inter));
  CHECK(structured_seqs(view, both) == inter);
}

}
