#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "curio/types.hpp"

namespace curio {

enum class CorpusFormat { jsonl, csv };

// Malformed input. Carries the 1-based line number and the offending field.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, std::string field, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ", field '" + field +
                           "': " + what),
        line_(line),
        field_(std::move(field)) {}

  std::size_t line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

struct ParseOptions {
  // Map unknown category tokens to "other" instead of rejecting them.
  bool coerce_unknown_to_other = false;
};

namespace detail {

inline CatMask parse_categories(const std::vector<std::string>& tokens,
                                std::size_t line, const ParseOptions& opt) {
  if (tokens.empty()) throw ParseError(line, "cats", "categories must be non-empty");
  CatMask mask = 0;
  for (const auto& tok : tokens) {
    auto c = category_from_token(tok);
    if (!c) {
      if (opt.coerce_unknown_to_other) {
        mask |= cat_bit(Category::other);
        continue;
      }
      throw ParseError(line, "cats", "unknown category '" + tok + "'");
    }
    mask |= cat_bit(*c);  // duplicates collapse
  }
  return mask;
}

// RFC-4180-ish field splitting; quotes only matter at field start.
inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += ch;
      }
    } else if (ch == '"' && cur.empty()) {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline bool parse_bool(const std::string& s, std::size_t line, const char* field) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ParseError(line, field, "expected boolean, got '" + s + "'");
}

struct RawRecord {
  std::string group;
  Message msg;
};

inline RawRecord parse_jsonl_record(const std::string& line_text, std::size_t line,
                                    const ParseOptions& opt) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line_text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(line, "(json)", e.what());
  }
  auto need = [&](const char* key) -> const nlohmann::json& {
    auto it = j.find(key);
    if (it == j.end()) throw ParseError(line, key, "missing field");
    return *it;
  };
  RawRecord r;
  try {
    r.group = need("group").get<std::string>();
    r.msg.user_id = need("user").get<std::string>();
    r.msg.ts_ms = need("ts_ms").get<std::int64_t>();
    r.msg.is_bot = need("bot").get<bool>();
    r.msg.message_id = need("id").get<std::string>();
    const auto& rt = need("reply_to");
    r.msg.reply_to = rt.is_null() ? std::string() : rt.get<std::string>();
    const auto& cats = need("cats");
    if (!cats.is_array()) throw ParseError(line, "cats", "expected array");
    std::vector<std::string> toks;
    for (const auto& c : cats) toks.push_back(c.get<std::string>());
    r.msg.categories = parse_categories(toks, line, opt);
  } catch (const ParseError&) {
    throw;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(line, "(json)", e.what());
  }
  return r;
}

inline RawRecord parse_csv_record(const std::string& line_text, std::size_t line,
                                  const ParseOptions& opt) {
  auto fields = split_csv_line(line_text);
  if (fields.size() != 7)
    throw ParseError(line, "(row)",
                     "expected 7 columns, got " + std::to_string(fields.size()));
  RawRecord r;
  r.group = fields[0];
  r.msg.user_id = fields[1];
  try {
    std::size_t pos = 0;
    r.msg.ts_ms = std::stoll(fields[2], &pos);
    if (pos != fields[2].size()) throw std::invalid_argument("trailing chars");
  } catch (const std::exception&) {
    throw ParseError(line, "ts_ms", "expected integer, got '" + fields[2] + "'");
  }
  r.msg.categories = parse_categories(split(fields[3], '|'), line, opt);
  r.msg.is_bot = parse_bool(fields[4], line, "bot");
  r.msg.message_id = fields[5];
  r.msg.reply_to = fields[6];
  return r;
}

}  // namespace detail

// Parses a JSONL or CSV corpus stream. Per-group sequences come out sorted by
// timestamp with ties kept in input order.
inline Corpus parse_corpus(std::istream& in, CorpusFormat format,
                           const ParseOptions& opt = {}) {
  std::map<std::string, std::vector<Message>> by_group;
  std::string line_text;
  std::size_t line = 0;
  bool header_skipped = false;
  while (std::getline(in, line_text)) {
    ++line;
    if (!line_text.empty() && line_text.back() == '\r') line_text.pop_back();
    if (line_text.empty()) continue;
    if (format == CorpusFormat::csv && !header_skipped) {
      header_skipped = true;
      if (line_text.rfind("group,", 0) == 0) continue;  // optional header row
    }
    detail::RawRecord r =
        format == CorpusFormat::jsonl
            ? detail::parse_jsonl_record(line_text, line, opt)
            : detail::parse_csv_record(line_text, line, opt);
    by_group[r.group].push_back(std::move(r.msg));
  }

  Corpus corpus;
  corpus.groups.reserve(by_group.size());
  for (auto& [gid, msgs] : by_group) {
    Group g;
    g.group_id = gid;
    g.messages = std::move(msgs);
    std::stable_sort(g.messages.begin(), g.messages.end(),
                     [](const Message& a, const Message& b) { return a.ts_ms < b.ts_ms; });
    corpus.groups.push_back(std::move(g));
  }
  for (const auto& g : corpus.groups) corpus.topics.emplace(g.group_id, "unknown");
  return corpus;
}

// Topic sidecar: CSV columns group,topic. Overrides the "unknown" defaults.
inline void load_topics(Corpus& corpus, std::istream& in) {
  std::string line_text;
  std::size_t line = 0;
  while (std::getline(in, line_text)) {
    ++line;
    if (!line_text.empty() && line_text.back() == '\r') line_text.pop_back();
    if (line_text.empty()) continue;
    auto fields = detail::split_csv_line(line_text);
    if (line == 1 && fields.size() == 2 && fields[0] == "group" && fields[1] == "topic")
      continue;
    if (fields.size() != 2) throw ParseError(line, "(row)", "expected 2 columns");
    corpus.topics[fields[0]] = fields[1];
  }
}

inline void serialize_corpus(const Corpus& corpus, std::ostream& out,
                             CorpusFormat format) {
  if (format == CorpusFormat::csv) out << "group,user,ts_ms,cats,bot,id,reply_to\n";
  for (const auto& g : corpus.groups) {
    for (const auto& m : g.messages) {
      if (format == CorpusFormat::jsonl) {
        nlohmann::json j;
        j["group"] = g.group_id;
        j["user"] = m.user_id;
        j["ts_ms"] = m.ts_ms;
        std::vector<std::string> cats;
        for_each_category(m.categories,
                          [&](int c) { cats.emplace_back(kCategoryNames[c]); });
        j["cats"] = cats;
        j["bot"] = m.is_bot;
        j["id"] = m.message_id;
        if (m.reply_to.empty())
          j["reply_to"] = nullptr;
        else
          j["reply_to"] = m.reply_to;
        out << j.dump() << '\n';
      } else {
        std::string cats;
        for_each_category(m.categories, [&](int c) {
          if (!cats.empty()) cats += '|';
          cats += kCategoryNames[c];
        });
        out << detail::csv_escape(g.group_id) << ',' << detail::csv_escape(m.user_id)
            << ',' << m.ts_ms << ',' << cats << ',' << (m.is_bot ? "true" : "false")
            << ',' << detail::csv_escape(m.message_id) << ','
            << detail::csv_escape(m.reply_to) << '\n';
      }
    }
  }
}

inline void write_topics(const Corpus& corpus, std::ostream& out) {
  out << "group,topic\n";
  for (const auto& g : corpus.groups)
    out << detail::csv_escape(g.group_id) << ','
        << detail::csv_escape(corpus.topic_of(g.group_id)) << '\n';
}

// Checks every Message and Corpus invariant; returns one Violation per break.
inline std::vector<Violation> validate(const Corpus& corpus) {
  std::vector<Violation> out;
  for (const auto& g : corpus.groups) {
    if (corpus.topics.find(g.group_id) == corpus.topics.end())
      out.push_back({g.group_id, "", "missing-topic", "group has no topic entry"});
    std::unordered_set<std::string> ids;
    std::unordered_set<std::string> seen_ids;
    for (const auto& m : g.messages) seen_ids.insert(m.message_id);
    std::int64_t prev_ts = INT64_MIN;
    for (const auto& m : g.messages) {
      if (m.categories == 0)
        out.push_back({g.group_id, m.message_id, "empty-categories",
                       "message has no media category"});
      if (!ids.insert(m.message_id).second)
        out.push_back({g.group_id, m.message_id, "duplicate-message-id",
                       "message id reused within group"});
      if (m.ts_ms < prev_ts)
        out.push_back({g.group_id, m.message_id, "unsorted",
                       "timestamp decreases within group sequence"});
      prev_ts = m.ts_ms;
      if (m.has_reply() && seen_ids.find(m.reply_to) == seen_ids.end())
        out.push_back({g.group_id, m.message_id, "unknown-reply-target",
                       "reply_to references unknown message '" + m.reply_to + "'"});
    }
  }
  return out;
}

// Users posting at least min_messages in a group ("at least" = inclusive).
// Bots are counted like anyone else; callers that need user-only sets filter
// on Message::is_bot.
inline std::set<std::pair<std::string, std::string>> filter_active_users(
    const Corpus& corpus, std::int64_t min_messages = 30) {
  if (min_messages < 1) throw std::invalid_argument("min_messages must be >= 1");
  std::set<std::pair<std::string, std::string>> out;
  for (const auto& g : corpus.groups) {
    std::unordered_map<std::string, std::int64_t> counts;
    for (const auto& m : g.messages) ++counts[m.user_id];
    for (const auto& [user, n] : counts)
      if (n >= min_messages) out.emplace(g.group_id, user);
  }
  return out;
}

struct WindowCalibrationRow {
  std::int64_t delta_t_ms = 0;
  // Fraction of (group, user) repliers whose median reply time is <= delta_t.
  double user_reply_fraction = 0.0;
  // Fraction of messages with >= min_preceding messages in [t - delta_t, t).
  double message_coverage = 0.0;
};

// Sweeps candidate window lengths: how much attention (reply time) each
// covers and how many posting events clear the volume floor under it.
// Reply pairs pointing at unknown ids are skipped (reported by validate()).
inline std::vector<WindowCalibrationRow> calibrate_window(
    const Corpus& corpus, const std::vector<std::int64_t>& candidates_ms,
    std::int64_t min_preceding = 10) {
  if (candidates_ms.empty())
    throw std::invalid_argument("calibrate_window: no candidates");

  // Median reply time per (group, user); users with no replies stay out of
  // the denominator.
  std::vector<std::int64_t> median_reply;
  for (const auto& g : corpus.groups) {
    std::unordered_map<std::string, std::int64_t> ts_by_id;
    for (const auto& m : g.messages) ts_by_id[m.message_id] = m.ts_ms;
    std::unordered_map<std::string, std::vector<std::int64_t>> reply_times;
    for (const auto& m : g.messages) {
      if (!m.has_reply()) continue;
      auto it = ts_by_id.find(m.reply_to);
      if (it == ts_by_id.end()) continue;
      reply_times[m.user_id].push_back(m.ts_ms - it->second);
    }
    for (auto& [user, times] : reply_times) {
      std::sort(times.begin(), times.end());
      std::size_t n = times.size();
      std::int64_t med = (n % 2 == 1) ? times[n / 2]
                                      : (times[n / 2 - 1] + times[n / 2]) / 2;
      median_reply.push_back(med);
    }
  }

  std::vector<WindowCalibrationRow> rows;
  for (std::int64_t dt : candidates_ms) {
    WindowCalibrationRow row;
    row.delta_t_ms = dt;
    if (!median_reply.empty()) {
      std::size_t ok = 0;
      for (auto m : median_reply)
        if (m <= dt) ++ok;
      row.user_reply_fraction = double(ok) / double(median_reply.size());
    }
    std::size_t covered = 0, total = 0;
    for (const auto& g : corpus.groups) {
      const auto& msgs = g.messages;
      std::size_t lo = 0;
      for (std::size_t i = 0; i < msgs.size(); ++i) {
        while (lo < i && msgs[lo].ts_ms < msgs[i].ts_ms - dt) ++lo;
        // Count strictly-earlier timestamps inside [t - dt, t).
        std::size_t in_window = 0;
        for (std::size_t j = lo; j < i; ++j)
          if (msgs[j].ts_ms < msgs[i].ts_ms) ++in_window;
        ++total;
        if (std::int64_t(in_window) >= min_preceding) ++covered;
      }
    }
    row.message_coverage = total == 0 ? 0.0 : double(covered) / double(total);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace curio
