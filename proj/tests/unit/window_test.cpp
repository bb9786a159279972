#include <doctest.h>

#include "helpers.hpp"
#include "memhub/window.hpp"

using namespace memhub;
using oracle::TempDir;
using testing::error_of;

namespace {

struct Session {
  TempDir dir;
  std::unique_ptr<Store> store = testing::open_store(dir);
  SessionId id = store->begin_session(AgentId("scribe"));

  void add(const std::string& text, const char* agent = "scribe") {
    store->append(id, AuthorKind::kAgent, AgentId(agent), text);
  }
  std::vector<MemoryRecord> records() const { return store->get_episode(id).records; }
};

std::vector<Seq> seqs(const WindowView& w) {
  std::vector<Seq> out;
  for (const auto& i : w.items) out.push_back(i.seq);
  return out;
}

}  // namespace

TEST_SUITE("window") {

TEST_CASE("rolling keeps the newest suffix that fits") {
  Session s;
  s.add("one two three four");
  s.add("five six seven eight");
  s.add("nine ten eleven twelve");
  const auto w = build_window(*s.store, s.id, {WindowForm::kRolling, 8, {}});
  CHECK(seqs(w) == std::vector<Seq>{2, 3});
  CHECK(w.token_count == 8);
  CHECK(w.truncated);

  const auto all = build_window(*s.store, s.id, {WindowForm::kRolling, 100, {}});
  CHECK(seqs(all) == std::vector<Seq>{1, 2, 3});
  CHECK_FALSE(all.truncated);

  const auto none = build_window(*s.store, s.id, {WindowForm::kRolling, 3, {}});
  CHECK(none.items.empty());
  CHECK(none.truncated);
}

TEST_CASE("rolling stops at the first record that does not fit") {
  Session s;
  s.add("a");
  s.add("b c d e f g h i j");
  s.add("k");
  // The 9-token middle record blocks anything older, even though "a" fits.
  const auto w = build_window(*s.store, s.id, {WindowForm::kRolling, 3, {}});
  CHECK(seqs(w) == std::vector<Seq>{3});
}

TEST_CASE("extracts keep matching records in chronological order") {
  Session s;
  s.add("wildfire smoke over the valley");
  s.add("river levels normal");
  s.add("wildfire wildfire containment at forty percent");
  s.add("no news");
  auto w = build_window(*s.store, s.id, {WindowForm::kExtracts, 100, "wildfire"});
  CHECK(seqs(w) == std::vector<Seq>{1, 3});
  CHECK(w.truncated);

  // Budget 6 admits only one; the denser match wins the rank.
  w = build_window(*s.store, s.id, {WindowForm::kExtracts, 6, "wildfire"});
  CHECK(seqs(w) == std::vector<Seq>{3});
  // The top match is 6 tokens; with 5 the greedy pass falls through to seq 1.
  w = build_window(*s.store, s.id, {WindowForm::kExtracts, 5, "wildfire"});
  CHECK(seqs(w) == std::vector<Seq>{1});

  w = build_window(*s.store, s.id, {WindowForm::kExtracts, 100, "glacier"});
  CHECK(w.items.empty());
  CHECK(w.token_count == 0);
  CHECK(error_of([&] {
          build_window(*s.store, s.id, {WindowForm::kExtracts, 10, std::nullopt});
        }) == ErrorCode::kInvalidRequest);
}

TEST_CASE("a single matching record is the whole extract") {
  Session s;
  s.add("alpha");
  s.add("beta marker");
  s.add("gamma");
  const auto w = build_window(*s.store, s.id, {WindowForm::kExtracts, 50, "marker"});
  REQUIRE(w.items.size() == 1);
  CHECK(w.items[0].text == "beta marker");
}

TEST_CASE("first sentence") {
  CHECK(first_sentence("  Hello there. More text") == "Hello there.");
  CHECK(first_sentence("Really? yes") == "Really?");
  CHECK(first_sentence("no terminator ") == "no terminator");
  CHECK(first_sentence("") == "");
  CHECK(first_sentence("Wow! Then. Done?") == "Wow!");
}

TEST_CASE("extractive summary") {
  Session s;
  s.add("Canopy loss is up. Details follow in the appendix.", "analyst");
  s.add("Rainfall dropped!", "field");
  s.add("Third entry with no stop", "analyst");
  const auto recs = s.records();
  auto w = summarize_extractive(recs, 100);
  REQUIRE(w.items.size() == 3);
  CHECK(w.items[0].text == "[analyst]: Canopy loss is up.");
  CHECK(w.items[1].text == "[field]: Rainfall dropped!");
  CHECK(w.items[2].text == "[analyst]: Third entry with no stop");
  CHECK_FALSE(w.truncated);
  const auto whole = summarize_extractive(recs, 100);
  CHECK(whole.token_count ==
        default_token_counter().count(
            "[analyst]: Canopy loss is up.\n[field]: Rainfall dropped!\n"
            "[analyst]: Third entry with no stop"));

  // Prefix only, flagged.
  w = summarize_extractive(recs, 8);
  CHECK(seqs(w) == std::vector<Seq>{1, 2});
  CHECK(w.truncated);
  CHECK(w.token_count <= 8);
  CHECK(build_window(*s.store, s.id, {WindowForm::kSummary, 8, {}}) == w);
}

TEST_CASE("summarizer hook") {
  Session s;
  s.add("one two three");
  const auto view = s.store->view();
  const auto recs = s.records();
  Summarizer honest = [](std::span<const MemoryRecord> r, std::size_t, const TokenCounter&) {
    return WindowView{{{r.back().seq, "short"}}, 1, true};
  };
  Summarizer greedy = [](std::span<const MemoryRecord>, std::size_t budget,
                         const TokenCounter&) {
    return WindowView{{}, budget + 1, false};
  };
  const WindowPolicy p{WindowForm::kSummary, 2, {}};
  CHECK(build_window(view, recs, p, default_token_counter(), honest).items[0].text ==
        "short");
  CHECK(error_of([&] { build_window(view, recs, p, default_token_counter(), greedy); }) ==
        ErrorCode::kInternal);
}

TEST_CASE("open sessions and unknown targets") {
  Session s;
  s.add("still going");
  CHECK(build_window(*s.store, s.id, {WindowForm::kRolling, 5, {}}).items.size() == 1);
  CHECK(error_of([&] { build_window(*s.store, 42, {WindowForm::kRolling, 5, {}}); }) ==
        ErrorCode::kNotFound);
  CHECK(error_of([&] { build_window(*s.store, s.id, {WindowForm::kRolling, 0, {}}); }) ==
        ErrorCode::kInvalidRequest);
}

TEST_CASE("request JSON") {
  auto req = window_request_from_json(
      json{{"target", {{"episode", 3}}}, {"form", "extracts"}, {"budget", 40}, {"focus", "fire"}});
  CHECK(req.episode_target);
  CHECK(req.target == 3);
  CHECK(req.policy.form == WindowForm::kExtracts);
  CHECK(req.policy.budget == 40);
  req = window_request_from_json(
      json{{"target", {{"session", 1}}}, {"form", "rolling"}, {"budget", 1}});
  CHECK_FALSE(req.episode_target);
  for (const json bad :
       {json{{"target", {{"session", 1}}}, {"form", "rolling"}, {"budget", 0}},
        json{{"target", {{"session", 1}}}, {"form", "haiku"}, {"budget", 5}},
        json{{"target", {{"session", 1}, {"episode", 1}}}, {"form", "rolling"}, {"budget", 5}},
        json{{"target", {{"session", 1}}}, {"form", "extracts"}, {"budget", 5}},
        json{{"target", {{"session", 1}}}, {"form", "rolling"}, {"budget", 5}, {"size", 1}},
        json{{"form", "rolling"}, {"budget", 5}}}) {
    CAPTURE(bad.dump());
    CHECK(error_of([&] { window_request_from_json(bad); }) == ErrorCode::kInvalidRequest);
  }
  const auto j = to_json(WindowView{{{2, "x"}}, 1, true});
  CHECK(j["items"][0]["seq"] == 2);
  CHECK(j["truncated"] == true);
}

}
