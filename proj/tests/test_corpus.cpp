#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "curio/corpus.hpp"
#include "curio/types.hpp"
#include "oracle.hpp"

using namespace curio;

namespace {

Corpus parse_jsonl(const std::string& text, ParseOptions opts = {}) {
  std::istringstream in(text);
  return parse_corpus(in, CorpusFormat::jsonl, opts);
}

Corpus parse_csv(const std::string& text, ParseOptions opts = {}) {
  std::istringstream in(text);
  return parse_corpus(in, CorpusFormat::csv, opts);
}

// Canonical fixture F1 plus the event under analysis (six messages, one group).
Corpus fixture_f1() {
  Corpus c;
  Group g;
  g.group_id = "g1";
  auto add = [&](const char* user, std::int64_t min, CatMask cats, const char* id) {
    Message m;
    m.user_id = user;
    m.message_id = id;
    m.ts_ms = minutes_ms(min);
    m.categories = cats;
    g.messages.push_back(std::move(m));
  };
  add("u1", 0, cat_bit(Category::text), "m1");
  add("u2", 5, cat_bit(Category::text) | cat_bit(Category::image), "m2");
  add("u1", 10, cat_bit(Category::text), "m3");
  add("u3", 12, cat_bit(Category::url), "m4");
  add("u2", 20, cat_bit(Category::text), "m5");
  add("u1", 25, cat_bit(Category::image), "m6");
  c.groups.push_back(std::move(g));
  c.topics["g1"] = "testing";
  return c;
}

bool corpora_equal(const Corpus& a, const Corpus& b) {
  if (a.groups.size() != b.groups.size()) return false;
  for (std::size_t g = 0; g < a.groups.size(); ++g) {
    const auto& ga = a.groups[g];
    const auto& gb = b.groups[g];
    if (ga.group_id != gb.group_id || ga.messages.size() != gb.messages.size())
      return false;
    for (std::size_t i = 0; i < ga.messages.size(); ++i) {
      const auto& ma = ga.messages[i];
      const auto& mb = gb.messages[i];
      if (ma.user_id != mb.user_id || ma.message_id != mb.message_id ||
          ma.reply_to != mb.reply_to || ma.ts_ms != mb.ts_ms ||
          ma.categories != mb.categories || ma.is_bot != mb.is_bot)
        return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("jsonl: minimal well-formed record") {
  auto c = parse_jsonl(
      R"({"group":"g1","user":"u1","ts_ms":100,"cats":["text"],"bot":false,"id":"m1","reply_to":null})"
      "\n");
  REQUIRE(c.groups.size() == 1);
  REQUIRE(c.groups[0].messages.size() == 1);
  const auto& m = c.groups[0].messages[0];
  CHECK(m.user_id == "u1");
  CHECK(m.ts_ms == 100);
  CHECK(m.categories == cat_bit(Category::text));
  CHECK_FALSE(m.is_bot);
  CHECK_FALSE(m.has_reply());
  CHECK(c.topic_of("g1") == "unknown");
}

TEST_CASE("jsonl: unknown category is rejected with the token named") {
  const std::string line =
      R"({"group":"g1","user":"u1","ts_ms":1,"cats":["sticker"],"bot":false,"id":"m1","reply_to":null})";
  try {
    parse_jsonl(line + "\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 1);
    CHECK(e.field() == "cats");
    CHECK(std::string(e.what()).find("sticker") != std::string::npos);
  }
  ParseOptions lenient;
  lenient.coerce_unknown_to_other = true;
  auto c = parse_jsonl(line + "\n", lenient);
  CHECK(c.groups[0].messages[0].categories == cat_bit(Category::other));
}

TEST_CASE("jsonl: malformed record names line and field") {
  const std::string good =
      R"({"group":"g1","user":"u1","ts_ms":1,"cats":["text"],"bot":false,"id":"m1","reply_to":null})";
  const std::string missing =
      R"({"group":"g1","user":"u1","cats":["text"],"bot":false,"id":"m2","reply_to":null})";
  try {
    parse_jsonl(good + "\n" + missing + "\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
    CHECK(e.field() == "ts_ms");
  }
}

TEST_CASE("parse re-sorts by timestamp with stable ties") {
  auto c = parse_jsonl(
      R"({"group":"g1","user":"a","ts_ms":100,"cats":["text"],"bot":false,"id":"m1","reply_to":null})"
      "\n"
      R"({"group":"g1","user":"b","ts_ms":50,"cats":["text"],"bot":false,"id":"m2","reply_to":null})"
      "\n"
      R"({"group":"g1","user":"c","ts_ms":50,"cats":["text"],"bot":false,"id":"m3","reply_to":null})"
      "\n");
  const auto& msgs = c.groups[0].messages;
  REQUIRE(msgs.size() == 3);
  CHECK(msgs[0].message_id == "m2");  // ties keep input order
  CHECK(msgs[1].message_id == "m3");
  CHECK(msgs[2].message_id == "m1");
}

TEST_CASE("csv: duplicate categories collapse, quoting round-trips") {
  auto c = parse_csv("group,user,ts_ms,cats,bot,id,reply_to\n"
                     "\"g,1\",u1,5,text|text|url,true,m1,\n");
  REQUIRE(c.groups.size() == 1);
  CHECK(c.groups[0].group_id == "g,1");
  const auto& m = c.groups[0].messages[0];
  CHECK(m.categories == (cat_bit(Category::text) | cat_bit(Category::url)));
  CHECK(m.is_bot);
}

TEST_CASE("round trip: parse o serialize is identity in both formats") {
  for (std::uint64_t seed : {11u, 23u, 57u}) {
    oracle::RandomCorpusParams p;
    p.n_groups = 2;
    p.n_messages = 60;
    Corpus original = oracle::random_corpus(seed, p);
    for (auto fmt : {CorpusFormat::jsonl, CorpusFormat::csv}) {
      std::ostringstream out;
      serialize_corpus(original, out, fmt);
      std::istringstream in(out.str());
      Corpus back = parse_corpus(in, fmt);
      back.topics = original.topics;
      CHECK(corpora_equal(original, back));
    }
  }
}

TEST_CASE("validate: clean fixture yields no violations") {
  CHECK(validate(fixture_f1()).empty());
}

TEST_CASE("validate: empty categories") {
  Corpus c = fixture_f1();
  c.groups[0].messages[2].categories = 0;
  auto v = validate(c);
  REQUIRE(v.size() == 1);
  CHECK(v[0].rule == "empty-categories");
  CHECK(v[0].message_id == "m3");
  CHECK(v[0].group_id == "g1");
}

TEST_CASE("validate: missing topic entry") {
  Corpus c = fixture_f1();
  c.topics.erase("g1");
  auto v = validate(c);
  REQUIRE(v.size() == 1);
  CHECK(v[0].rule == "missing-topic");
}

TEST_CASE("validate: duplicate ids, unsorted sequences, dangling replies") {
  Corpus c = fixture_f1();
  c.groups[0].messages[1].message_id = "m1";
  c.groups[0].messages[3].ts_ms = 0;  // out of order
  c.groups[0].messages[4].reply_to = "nope";
  auto v = validate(c);
  REQUIRE(v.size() == 3);
  CHECK(v[0].rule == "duplicate-message-id");
  CHECK(v[1].rule == "unsorted");
  CHECK(v[2].rule == "unknown-reply-target");
}

TEST_CASE("filter_active_users: inclusive boundary, per-group counting") {
  Corpus c;
  for (const char* gid : {"A", "B"}) {
    Group g;
    g.group_id = gid;
    c.topics[gid] = "t";
    c.groups.push_back(std::move(g));
  }
  auto post = [&](int group, const char* user, int n) {
    for (int i = 0; i < n; ++i) {
      Message m;
      m.user_id = user;
      m.message_id = std::string(user) + std::to_string(c.groups[group].messages.size());
      m.ts_ms = std::int64_t(c.groups[group].messages.size());
      m.categories = cat_bit(Category::text);
      c.groups[group].messages.push_back(std::move(m));
    }
  };
  post(0, "exact", 30);
  post(0, "below", 29);
  post(0, "multi", 40);
  post(1, "multi", 5);

  auto active = filter_active_users(c, 30);
  CHECK(active.count({"A", "exact"}) == 1);
  CHECK(active.count({"A", "below"}) == 0);
  CHECK(active.count({"A", "multi"}) == 1);
  CHECK(active.count({"B", "multi"}) == 0);

  // Monotone: raising the threshold never adds users.
  auto prev = filter_active_users(c, 1);
  for (std::int64_t th = 2; th <= 45; ++th) {
    auto cur = filter_active_users(c, th);
    for (const auto& key : cur) CHECK(prev.count(key) == 1);
    prev = std::move(cur);
  }
}

TEST_CASE("calibrate_window: full coverage when every event has predecessors") {
  Corpus c;
  Group g;
  g.group_id = "g";
  for (int i = 0; i < 50; ++i) {
    Message m;
    m.user_id = "u" + std::to_string(i % 3);
    m.message_id = "m" + std::to_string(i);
    m.ts_ms = i;  // 1 ms apart, way inside any candidate
    m.categories = cat_bit(Category::text);
    g.messages.push_back(std::move(m));
  }
  c.groups.push_back(std::move(g));
  c.topics["g"] = "t";
  auto rows = calibrate_window(c, {minutes_ms(5), minutes_ms(30)}, 10);
  REQUIRE(rows.size() == 2);
  // First 10 events lack 10 predecessors; the remaining 40 have them.
  CHECK(rows[0].message_coverage == doctest::Approx(40.0 / 50.0));
  CHECK(rows[1].message_coverage == doctest::Approx(40.0 / 50.0));
}

TEST_CASE("calibrate_window: hand-checked coverage on gapped fixture") {
  // 20 messages: a burst of 10 at minute 0..9, a gap, a burst of 10 at 60..69.
  Corpus c;
  Group g;
  g.group_id = "g";
  for (int i = 0; i < 20; ++i) {
    Message m;
    m.user_id = "u" + std::to_string(i % 2);
    m.message_id = "m" + std::to_string(i);
    m.ts_ms = minutes_ms(i < 10 ? i : 50 + i);
    m.categories = cat_bit(Category::text);
    g.messages.push_back(std::move(m));
  }
  c.groups.push_back(std::move(g));
  c.topics["g"] = "t";

  // Candidate 15 min, min_preceding 5: by hand, events 5..9 see 5..9
  // predecessors (5 events), and events 65..69 (indices 15..19) see 5..9
  // predecessors within 15 min (5 events). Coverage = 10/20.
  auto rows = calibrate_window(c, {minutes_ms(15)}, 5);
  CHECK(rows[0].message_coverage == doctest::Approx(0.5));

  // Monotone in delta_t, antitone in min_preceding.
  auto sweep = calibrate_window(c, {minutes_ms(5), minutes_ms(15), minutes_ms(70)}, 5);
  CHECK(sweep[0].message_coverage <= sweep[1].message_coverage);
  CHECK(sweep[1].message_coverage <= sweep[2].message_coverage);
  auto strict = calibrate_window(c, {minutes_ms(15)}, 9);
  CHECK(strict[0].message_coverage <= rows[0].message_coverage);
}

TEST_CASE("calibrate_window: reply-time fraction") {
  Corpus c;
  Group g;
  g.group_id = "g";
  Message a;
  a.user_id = "asker";
  a.message_id = "q";
  a.ts_ms = 0;
  a.categories = cat_bit(Category::text);
  Message b;
  b.user_id = "replier";
  b.message_id = "r";
  b.ts_ms = minutes_ms(10);
  b.categories = cat_bit(Category::text);
  b.reply_to = "q";
  g.messages.push_back(a);
  g.messages.push_back(b);
  c.groups.push_back(std::move(g));
  c.topics["g"] = "t";

  auto rows = calibrate_window(c, {minutes_ms(30)}, 10);
  CHECK(rows[0].user_reply_fraction == doctest::Approx(1.0));
  auto tight = calibrate_window(c, {minutes_ms(5)}, 10);
  CHECK(tight[0].user_reply_fraction == doctest::Approx(0.0));
}
