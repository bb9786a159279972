#include <doctest.h>

#include "helpers.hpp"
#include "memhub/curator.hpp"

using namespace memhub;
using oracle::TempDir;
using testing::error_of;

namespace {

struct Corpus {
  TempDir dir;
  std::unique_ptr<Store> store = testing::open_store(dir);
  SessionId s = store->begin_session(AgentId("planner"));

  Seq add(const std::string& text, const char* agent = "planner") {
    return store->append(s, AuthorKind::kAgent, AgentId(agent), text).seq;
  }
};

PlanningRequest text_request(std::string text, Horizon h, std::size_t k) {
  PlanningRequest r;
  r.text = std::move(text);
  r.horizon = h;
  r.k = k;
  return r;
}

}  // namespace

TEST_SUITE("curator") {

TEST_CASE("weights") {
  CHECK(default_weights(Horizon::kShortTerm).relevance == 0.3);
  CHECK(default_weights(Horizon::kShortTerm).recency == 0.7);
  CHECK(default_weights(Horizon::kLongTerm).relevance == 0.8);
  CHECK(default_weights(Horizon::kLongTerm).recency == 0.2);
  CHECK(horizon_from_name("long_term") == Horizon::kLongTerm);
  CHECK(horizon_name(Horizon::kShortTerm) == "short_term");
  CHECK(error_of([] { horizon_from_name("medium"); }) == ErrorCode::kInvalidRequest);
}

TEST_CASE("stratum_of splits the span into four equal widths") {
  CHECK(stratum_of(1, 1, 8) == 0);
  CHECK(stratum_of(2, 1, 8) == 0);
  CHECK(stratum_of(3, 1, 8) == 1);
  CHECK(stratum_of(5, 1, 8) == 2);
  CHECK(stratum_of(8, 1, 8) == 3);
  CHECK(stratum_of(7, 7, 7) == 0);
  CHECK(stratum_of(10, 1, 10) == 3);
}

TEST_CASE("short term: equally relevant records come back newest first") {
  Corpus c;
  for (int i = 0; i < 6; ++i) c.add("harvest plan");
  const auto b = curate(c.store->view(), text_request("harvest", Horizon::kShortTerm, 3), {});
  REQUIRE(b.items.size() == 3);
  CHECK(b.items[0].seq == 6);
  CHECK(b.items[1].seq == 5);
  CHECK(b.items[2].seq == 4);
  for (const auto& it : b.items) {
    CHECK(it.relevance_norm == 0.0);
    CHECK(it.combined == doctest::Approx(0.7 * it.recency));
  }
}

TEST_CASE("short term favours recent over relevant, long term the reverse") {
  Corpus c;
  const Seq strong = c.add("irrigation irrigation irrigation schedule");
  for (int i = 0; i < 150; ++i) c.add("filler note " + std::to_string(i));
  const Seq weak = c.add("irrigation mentioned once among many other words here");
  const auto st = curate(c.store->view(), text_request("irrigation", Horizon::kShortTerm, 1), {});
  const auto lt = curate(c.store->view(), text_request("irrigation", Horizon::kLongTerm, 1), {});
  REQUIRE(st.items.size() == 1);
  REQUIRE(lt.items.size() == 1);
  CHECK(st.items[0].seq == weak);
  CHECK(lt.items[0].seq == strong);
}

TEST_CASE("long term covers every stratum") {
  Corpus c;
  // The best matches all sit in the newest quarter.
  for (int i = 0; i < 30; ++i) c.add("soil sample");
  for (int i = 0; i < 10; ++i) c.add("soil soil soil");
  const auto b = curate(c.store->view(), text_request("soil", Horizon::kLongTerm, 4), {});
  REQUIRE(b.items.size() == 4);
  std::set<std::size_t> strata;
  for (const auto& it : b.items) strata.insert(stratum_of(it.seq, 1, 40));
  CHECK(strata.size() == 4);
  for (std::size_t i = 1; i < b.items.size(); ++i) {
    CHECK(b.items[i - 1].combined >= b.items[i].combined);
  }

  // k below 4 reserves nothing and is pure rank order.
  const auto small = curate(c.store->view(), text_request("soil", Horizon::kLongTerm, 2), {});
  REQUIRE(small.items.size() == 2);
  CHECK(small.items[0].seq == 40);
  CHECK(small.items[1].seq == 39);
}

TEST_CASE("scope and filter both narrow") {
  Corpus c;
  c.add("river gauge", "north");
  c.add("river gauge", "south");
  c.add("river gauge", "north");
  StructuredPredicate north;
  north.agents = std::set<std::string>{"north"};
  auto req = text_request("river", Horizon::kShortTerm, 5);
  auto b = curate(c.store->view(), req, north);
  CHECK(b.items.size() == 2);
  CHECK(b.scope_digest == digest_of(to_json(north)));
  req.filter.seq = Range<Seq>{3, 3};
  b = curate(c.store->view(), req, north);
  REQUIRE(b.items.size() == 1);
  CHECK(b.items[0].seq == 3);
  CHECK(curate(c.store->view(), text_request("volcano", Horizon::kShortTerm, 5), {})
            .items.empty());
}

TEST_CASE("authorized curate applies scope and quota") {
  Corpus c;
  for (int i = 0; i < 8; ++i) c.add("grid load", i % 2 ? "a" : "b");
  ManualClock clock(0);
  AccessEngine access({std::nullopt, std::nullopt, clock.as_clock(), {}});
  const Principal admin{AgentId("admin"), {}, {}, true};
  AccessRule own;
  own.id = "own";
  own.subject = {Subject::Kind::kRole, "planner"};
  own.scope.agents = std::set<std::string>{"${self}"};
  own.quota = Quota{3};
  access.add_rule(admin, own);
  const Principal a{AgentId("a"), {"planner"}, {}, false};
  const auto b = curate(*c.store, access, a, text_request("grid", Horizon::kShortTerm, 10));
  REQUIRE(b.items.size() == 3);
  for (const auto& it : b.items) CHECK(c.store->get_record(it.seq).agent.str() == "a");
  CHECK(error_of([&] {
          curate(*c.store, access, a, text_request("grid", Horizon::kShortTerm, 1));
        }) == ErrorCode::kQuotaExceeded);
  const Principal outsider{AgentId("z"), {}, {}, false};
  CHECK(error_of([&] {
          curate(*c.store, access, outsider, text_request("grid", Horizon::kShortTerm, 1));
        }) == ErrorCode::kForbidden);
}

TEST_CASE("request JSON") {
  const auto r = planning_request_from_json(json{{"query", {{"text", "crop yield"}}},
                                                 {"horizon", "long_term"},
                                                 {"k", 6},
                                                 {"filter", {{"has_tag", "farm"}}}});
  CHECK(r.k == 6);
  CHECK(r.horizon == Horizon::kLongTerm);
  CHECK(r.filter.has_tag == "farm");
  const auto back = planning_request_from_json(to_json(r));
  CHECK(back.k == r.k);
  CHECK(back.filter == r.filter);
  CHECK(planning_request_from_json(json{{"query", {{"text", "x"}}}}).k == 8);
  for (const json bad : {json{{"query", json::object()}},
                         json{{"query", {{"text", "x"}}}, {"k", 0}},
                         json{{"query", {{"text", "x"}}}, {"horizon", "soon"}},
                         json{{"query", {{"text", "x"}}}, {"scope", 1}}}) {
    CAPTURE(bad.dump());
    CHECK(error_of([&] { planning_request_from_json(bad); }) == ErrorCode::kInvalidRequest);
  }
}

}
