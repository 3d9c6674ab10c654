#pragma once

// Scenario file reader/writer.
//
// The format is a small TOML subset:
//
//   [dataset]      total_events*, events_per_job*, nominal_cpu_per_event = 1.0
//   [[site]]       site_id*, slots*, speed_factor = 1.0, failure_multiplier = 1.0
//                  (repeat the block once per site; at least one required)
//   [failure]      p_setup = 0, p_compute = 0, p_stageout = 0,
//                  permanent_fraction = 0, corruption_per_event = 0, c_setup = 0.01
//   [retry]        max_retries = 3, requeue_delay = 0, dedicated_recovery = false
//   [run]          granularity = "job" ("task" | "job" | "event"), seed = 1, n_tasks = 1
//
// Keys marked * are required. Unknown sections or keys, duplicate keys and
// out-of-range values are rejected with the line number and dotted key name.

#include <gridsim/engine.hpp>
#include <gridsim/errors.hpp>

#include <charconv>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>

namespace gridsim {

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, ptr);
  // Keep reals recognisable as reals.
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

inline std::string quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

class ScenarioParser {
 public:
  Scenario parse(std::string_view text) {
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      auto end = text.find('\n', pos);
      if (end == std::string_view::npos) end = text.size();
      ++line_no;
      line_ = line_no;
      handle_line(text.substr(pos, end - pos));
      pos = end + 1;
    }
    finish_site();
    check_required("dataset", {"total_events", "events_per_job"});
    if (scenario_.sites.empty()) throw ConfigError("scenario needs at least one [[site]]");
    scenario_.validate();
    return scenario_;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError("line " + std::to_string(line_) + ": " + msg);
  }

  void handle_line(std::string_view raw) {
    std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') return;
    if (line.starts_with("[[")) {
      if (!line.ends_with("]]")) fail("malformed section header");
      const auto name = trim(line.substr(2, line.size() - 4));
      if (name != "site") fail("unknown array section [[" + std::string(name) + "]]");
      finish_site();
      section_ = "site";
      in_site_ = true;
      site_ = SiteProfile{};
      site_id_set_ = false;
      site_keys_.clear();
      site_line_ = line_;
      return;
    }
    if (line.front() == '[') {
      if (!line.ends_with("]")) fail("malformed section header");
      const auto name = std::string(trim(line.substr(1, line.size() - 2)));
      if (name != "dataset" && name != "failure" && name != "retry" && name != "run")
        fail("unknown section [" + name + "]");
      if (!sections_seen_.insert(name).second) fail("duplicate section [" + name + "]");
      finish_site();
      section_ = name;
      return;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail("expected 'key = value'");
    const std::string key(trim(line.substr(0, eq)));
    const std::string value = parse_value(trim(line.substr(eq + 1)));
    if (section_.empty()) fail("key '" + key + "' outside of any section");
    assign(key, value);
  }

  // Returns the raw scalar, with quotes removed and trailing comments stripped.
  std::string parse_value(std::string_view v) {
    quoted_ = false;
    if (v.empty()) fail("missing value");
    if (v.front() == '"') {
      std::string out;
      std::size_t i = 1;
      for (; i < v.size() && v[i] != '"'; ++i) {
        if (v[i] == '\\') {
          if (++i >= v.size()) fail("unterminated string");
        }
        out += v[i];
      }
      if (i >= v.size()) fail("unterminated string");
      const auto rest = trim(v.substr(i + 1));
      if (!rest.empty() && rest.front() != '#') fail("unexpected text after string value");
      quoted_ = true;
      return out;
    }
    const auto hash = v.find('#');
    if (hash != std::string_view::npos) v = trim(v.substr(0, hash));
    if (v.empty()) fail("missing value");
    return std::string(v);
  }

  std::string dotted(const std::string& key) const { return section_ + "." + key; }

  std::uint64_t as_uint(const std::string& key, const std::string& v) const {
    if (quoted_) fail(dotted(key) + " must be an integer");
    std::string digits;
    for (char c : v)
      if (c != '_') digits += c;
    std::uint64_t out = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), out);
    if (ec != std::errc{} || ptr != digits.data() + digits.size() || digits.empty())
      fail(dotted(key) + " = " + v + " is not a non-negative integer");
    return out;
  }

  double as_real(const std::string& key, const std::string& v) const {
    if (quoted_) fail(dotted(key) + " must be a number");
    std::string digits;
    for (char c : v)
      if (c != '_') digits += c;
    double out = 0.0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), out);
    if (ec != std::errc{} || ptr != digits.data() + digits.size() || digits.empty() ||
        !std::isfinite(out))
      fail(dotted(key) + " = " + v + " is not a finite number");
    return out;
  }

  double as_probability(const std::string& key, const std::string& v) const {
    const double p = as_real(key, v);
    if (!(p >= 0.0 && p <= 1.0)) fail(dotted(key) + " = " + v + " out of range [0, 1]");
    return p;
  }

  double as_positive(const std::string& key, const std::string& v) const {
    const double x = as_real(key, v);
    if (!(x > 0.0)) fail(dotted(key) + " = " + v + " must be > 0");
    return x;
  }

  double as_non_negative(const std::string& key, const std::string& v) const {
    const double x = as_real(key, v);
    if (!(x >= 0.0)) fail(dotted(key) + " = " + v + " must be >= 0");
    return x;
  }

  bool as_bool(const std::string& key, const std::string& v) const {
    if (!quoted_ && v == "true") return true;
    if (!quoted_ && v == "false") return false;
    fail(dotted(key) + " must be true or false");
  }

  void assign(const std::string& key, const std::string& v) {
    auto& seen = in_site_ && section_ == "site" ? site_keys_ : keys_[section_];
    if (!seen.insert(key).second) fail("duplicate key " + dotted(key));

    if (section_ == "dataset") {
      auto& d = scenario_.dataset;
      if (key == "total_events") {
        d.total_events = as_uint(key, v);
        if (d.total_events < 1) fail("dataset.total_events must be >= 1");
      } else if (key == "events_per_job") {
        d.events_per_job = as_uint(key, v);
        if (d.events_per_job < 1) fail("dataset.events_per_job must be >= 1");
      } else if (key == "nominal_cpu_per_event") {
        d.nominal_cpu_per_event = as_positive(key, v);
      } else {
        unknown(key);
      }
    } else if (section_ == "site") {
      if (key == "site_id") {
        if (!quoted_ || v.empty()) fail("site.site_id must be a non-empty quoted string");
        site_.site_id = v;
        site_id_set_ = true;
      } else if (key == "slots") {
        const auto s = as_uint(key, v);
        if (s < 1 || s > UINT32_MAX) fail("site.slots = " + v + " out of range [1, 4294967295]");
        site_.slots = static_cast<std::uint32_t>(s);
      } else if (key == "speed_factor") {
        site_.speed_factor = as_positive(key, v);
      } else if (key == "failure_multiplier") {
        site_.failure_multiplier = as_non_negative(key, v);
      } else {
        unknown(key);
      }
    } else if (section_ == "failure") {
      auto& f = scenario_.failure_model;
      if (key == "p_setup") f.p_setup = as_probability(key, v);
      else if (key == "p_compute") f.p_compute = as_probability(key, v);
      else if (key == "p_stageout") f.p_stageout = as_probability(key, v);
      else if (key == "permanent_fraction") f.permanent_fraction = as_probability(key, v);
      else if (key == "corruption_per_event") f.corruption_per_event = as_probability(key, v);
      else if (key == "c_setup") f.c_setup = as_probability(key, v);
      else unknown(key);
    } else if (section_ == "retry") {
      auto& r = scenario_.retry_policy;
      if (key == "max_retries") {
        const auto m = as_uint(key, v);
        if (m > RetryPolicy::kMaxRetriesBound) fail("retry.max_retries = " + v + " exceeds 100");
        r.max_retries = static_cast<std::uint32_t>(m);
      } else if (key == "requeue_delay") {
        r.requeue_delay = as_non_negative(key, v);
      } else if (key == "dedicated_recovery") {
        r.dedicated_recovery = as_bool(key, v);
      } else {
        unknown(key);
      }
    } else if (section_ == "run") {
      if (key == "granularity") {
        const auto g = parse_granularity(v);
        if (!g) fail("run.granularity = " + v + " must be one of task, job, event");
        scenario_.granularity = *g;
      } else if (key == "seed") {
        scenario_.seed = as_uint(key, v);
      } else if (key == "n_tasks") {
        const auto n = as_uint(key, v);
        if (n < 1 || n > UINT32_MAX) fail("run.n_tasks = " + v + " out of range");
        scenario_.n_tasks = static_cast<std::uint32_t>(n);
      } else {
        unknown(key);
      }
    }
  }

  [[noreturn]] void unknown(const std::string& key) const { fail("unknown key " + dotted(key)); }

  void finish_site() {
    if (!in_site_) return;
    in_site_ = false;
    if (!site_id_set_ || !site_keys_.count("slots")) {
      line_ = site_line_;
      fail(std::string("[[site]] is missing required key ") +
           (site_id_set_ ? "site.slots" : "site.site_id"));
    }
    scenario_.sites.push_back(site_);
  }

  void check_required(const std::string& section, std::initializer_list<const char*> keys) {
    for (const char* k : keys)
      if (!keys_[section].count(k))
        throw ConfigError("missing required key " + section + "." + k);
  }

  Scenario scenario_;
  std::string section_;
  std::map<std::string, std::set<std::string>> keys_;
  std::set<std::string> sections_seen_;
  SiteProfile site_;
  std::set<std::string> site_keys_;
  bool in_site_ = false;
  bool site_id_set_ = false;
  bool quoted_ = false;
  std::size_t line_ = 0;
  std::size_t site_line_ = 0;
};

}  // namespace detail

inline Scenario parse_scenario(std::string_view text) {
  return detail::ScenarioParser{}.parse(text);
}

/// Canonical text form; parse_scenario(serialize_scenario(s)) == s.
inline std::string serialize_scenario(const Scenario& s) {
  using detail::format_double;
  std::ostringstream out;
  out << "[dataset]\n"
      << "total_events = " << s.dataset.total_events << "\n"
      << "events_per_job = " << s.dataset.events_per_job << "\n"
      << "nominal_cpu_per_event = " << format_double(s.dataset.nominal_cpu_per_event) << "\n";
  for (const auto& site : s.sites) {
    out << "\n[[site]]\n"
        << "site_id = " << detail::quote(site.site_id) << "\n"
        << "slots = " << site.slots << "\n"
        << "speed_factor = " << format_double(site.speed_factor) << "\n"
        << "failure_multiplier = " << format_double(site.failure_multiplier) << "\n";
  }
  const auto& f = s.failure_model;
  out << "\n[failure]\n"
      << "p_setup = " << format_double(f.p_setup) << "\n"
      << "p_compute = " << format_double(f.p_compute) << "\n"
      << "p_stageout = " << format_double(f.p_stageout) << "\n"
      << "permanent_fraction = " << format_double(f.permanent_fraction) << "\n"
      << "corruption_per_event = " << format_double(f.corruption_per_event) << "\n"
      << "c_setup = " << format_double(f.c_setup) << "\n";
  const auto& r = s.retry_policy;
  out << "\n[retry]\n"
      << "max_retries = " << r.max_retries << "\n"
      << "requeue_delay = " << format_double(r.requeue_delay) << "\n"
      << "dedicated_recovery = " << (r.dedicated_recovery ? "true" : "false") << "\n";
  out << "\n[run]\n"
      << "granularity = \"" << to_string(s.granularity) << "\"\n"
      << "seed = " << s.seed << "\n"
      << "n_tasks = " << s.n_tasks << "\n";
  return out.str();
}

}  // namespace gridsim
