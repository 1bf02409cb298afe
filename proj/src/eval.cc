#include "superglobal/eval.h"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <unordered_map>

#include "superglobal/error.h"
#include "superglobal/tensor_io.h"

namespace superglobal {

namespace {

std::vector<std::size_t> index_list(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) return {};
  const auto& arr = j.at(key);
  if (!arr.is_array()) {
    throw Error(ErrorCode::InvalidArgument, std::string(key) + " must be an array");
  }
  std::vector<std::size_t> out;
  for (const auto& v : arr) {
    if (!v.is_number_unsigned()) {
      throw Error(ErrorCode::InvalidArgument,
                  std::string(key) + " entries must be non-negative integers");
    }
    out.push_back(v.get<std::size_t>());
  }
  return out;
}

const nlohmann::json& require(const nlohmann::json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw Error(ErrorCode::InvalidArgument,
                std::string("ground truth is missing '") + key + "'");
  }
  return j.at(key);
}

std::unordered_set<std::size_t> as_set(std::initializer_list<const std::vector<std::size_t>*> lists) {
  std::unordered_set<std::size_t> out;
  for (const auto* l : lists) out.insert(l->begin(), l->end());
  return out;
}

}  // namespace

void GroundTruth::validate() const {
  std::unordered_set<std::string> names(database.begin(), database.end());
  if (names.size() != database.size()) {
    throw Error(ErrorCode::DuplicateName, "database names are not unique");
  }
  std::unordered_set<std::string> query_names;
  for (const auto& q : queries) {
    if (!query_names.insert(q.name).second) {
      throw Error(ErrorCode::DuplicateName, "query " + q.name);
    }
    std::unordered_map<std::size_t, int> seen;
    for (const auto* set : {&q.easy, &q.hard, &q.junk}) {
      std::unordered_set<std::size_t> local;
      for (auto i : *set) {
        if (i >= database.size()) {
          throw Error(ErrorCode::InvalidArgument,
                      "query " + q.name + " references database index " +
                          std::to_string(i) + " out of range");
        }
        if (local.insert(i).second && ++seen[i] > 1) {
          throw Error(ErrorCode::InvalidArgument,
                      "query " + q.name + ": index " + std::to_string(i) +
                          " is in more than one of easy/hard/junk");
        }
      }
    }
  }
}

GroundTruth ground_truth_from_json(const nlohmann::json& j) {
  GroundTruth gt;
  try {
    gt.database = require(j, "database").get<std::vector<std::string>>();
    for (const auto& q : require(j, "queries")) {
      gt.queries.push_back(QueryGroundTruth{require(q, "name").get<std::string>(),
                                            index_list(q, "easy"),
                                            index_list(q, "hard"),
                                            index_list(q, "junk")});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("ground truth: ") + e.what());
  }
  gt.validate();
  return gt;
}

nlohmann::json to_json(const GroundTruth& gt) {
  nlohmann::json queries = nlohmann::json::array();
  for (const auto& q : gt.queries) {
    queries.push_back({{"name", q.name}, {"easy", q.easy}, {"hard", q.hard}, {"junk", q.junk}});
  }
  return {{"database", gt.database}, {"queries", queries}};
}

GroundTruth read_ground_truth(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, path.string() + ": " + e.what());
  }
  return ground_truth_from_json(j);
}

GroundTruth ground_truth_from_named_json(const nlohmann::json& j) {
  GroundTruth gt;
  try {
    gt.database = require(j, "database").get<std::vector<std::string>>();
    std::unordered_map<std::string, std::size_t> lookup;
    for (std::size_t i = 0; i < gt.database.size(); ++i) {
      if (!lookup.emplace(gt.database[i], i).second) {
        throw Error(ErrorCode::DuplicateName, gt.database[i]);
      }
    }
    auto resolve = [&](const nlohmann::json& q, const char* key, const std::string& query) {
      std::vector<std::size_t> out;
      if (!q.contains(key)) return out;
      for (const auto& n : q.at(key)) {
        const auto name = n.get<std::string>();
        auto it = lookup.find(name);
        if (it == lookup.end()) {
          throw Error(ErrorCode::InvalidArgument,
                      "query " + query + ": unknown database name '" + name + "'");
        }
        out.push_back(it->second);
      }
      return out;
    };
    for (const auto& q : require(j, "queries")) {
      const auto name = require(q, "name").get<std::string>();
      gt.queries.push_back(QueryGroundTruth{name, resolve(q, "easy", name),
                                            resolve(q, "hard", name),
                                            resolve(q, "junk", name)});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("ground truth: ") + e.what());
  }
  gt.validate();
  return gt;
}

Protocol Protocol::parse(const std::string& text) {
  std::string s = text;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "medium") return medium();
  if (s == "hard") return hard();
  for (const std::string prefix : {"plain@", "map@"}) {
    if (s.rfind(prefix, 0) == 0) {
      const auto digits = s.substr(prefix.size());
      if (!digits.empty() && std::all_of(digits.begin(), digits.end(), ::isdigit)) {
        const auto k = std::stoul(digits);
        if (k >= 1) return plain_at(k);
      }
    }
  }
  throw Error(ErrorCode::InvalidArgument,
              "unknown protocol '" + text + "' (medium, hard, plain@<k>)");
}

std::string Protocol::name() const {
  switch (kind) {
    case ProtocolKind::Medium: return "medium";
    case ProtocolKind::Hard: return "hard";
    case ProtocolKind::Plain: return "plain@" + std::to_string(truncate.value_or(0));
  }
  return "?";
}

double average_precision(std::span<const std::size_t> ranked,
                         const std::unordered_set<std::size_t>& positives,
                         const std::unordered_set<std::size_t>& ignore,
                         std::optional<std::size_t> truncate,
                         Interpolation interpolation) {
  {
    std::unordered_set<std::size_t> seen;
    for (auto i : ranked) {
      if (!seen.insert(i).second) {
        throw Error(ErrorCode::DuplicateRank,
                    "database index " + std::to_string(i) + " ranked twice");
      }
    }
  }
  if (truncate && *truncate == 0) {
    throw Error(ErrorCode::InvalidArgument, "truncation rank must be >= 1");
  }
  if (positives.empty()) return 0.0;

  const std::size_t limit = truncate.value_or(ranked.size());
  double sum = 0.0;
  std::size_t rank = 0;  // position after removing ignored items
  std::size_t hits = 0;
  for (auto item : ranked) {
    if (ignore.count(item)) continue;
    if (rank >= limit) break;
    if (positives.count(item)) {
      const double after = static_cast<double>(hits + 1) / static_cast<double>(rank + 1);
      if (interpolation == Interpolation::Trapezoid) {
        const double before =
            rank == 0 ? 1.0 : static_cast<double>(hits) / static_cast<double>(rank);
        sum += (before + after) / 2.0;
      } else {
        sum += after;
      }
      ++hits;
    }
    ++rank;
  }
  const std::size_t denom =
      truncate ? std::min(positives.size(), *truncate) : positives.size();
  return sum / static_cast<double>(denom);
}

Report evaluate(const GroundTruth& gt,
                const std::map<std::string, std::vector<std::size_t>>& results,
                const Protocol& protocol) {
  Report report;
  report.protocol = protocol.name();
  double total = 0.0;
  for (const auto& q : gt.queries) {
    auto it = results.find(q.name);
    if (it == results.end()) {
      throw Error(ErrorCode::MissingQueryResult, "no ranking for query " + q.name);
    }
    std::unordered_set<std::size_t> positives;
    std::unordered_set<std::size_t> ignore;
    switch (protocol.kind) {
      case ProtocolKind::Medium:
      case ProtocolKind::Plain:
        positives = as_set({&q.easy, &q.hard});
        ignore = as_set({&q.junk});
        break;
      case ProtocolKind::Hard:
        positives = as_set({&q.hard});
        ignore = as_set({&q.easy, &q.junk});
        break;
    }
    QueryReport qr{q.name, 0.0, positives.size(), positives.empty()};
    if (qr.skipped) {
      ++report.skipped;
    } else {
      qr.ap = average_precision(it->second, positives, ignore, protocol.truncate,
                                protocol.interpolation);
      total += qr.ap;
      ++report.evaluated;
    }
    report.per_query.push_back(std::move(qr));
  }
  report.map = report.evaluated ? total / static_cast<double>(report.evaluated) : 0.0;
  return report;
}

nlohmann::json to_json(const Report& report) {
  nlohmann::json per_query = nlohmann::json::array();
  for (const auto& q : report.per_query) {
    nlohmann::json entry{{"name", q.name}, {"positives", q.positives}, {"skipped", q.skipped}};
    if (!q.skipped) entry["ap"] = q.ap;
    per_query.push_back(std::move(entry));
  }
  return {{"protocol", report.protocol},
          {"map", report.map},
          {"evaluated", report.evaluated},
          {"skipped", report.skipped},
          {"per_query", per_query}};
}

std::string format_table(const Report& report) {
  std::size_t width = 5;
  for (const auto& q : report.per_query) width = std::max(width, q.name.size());
  std::ostringstream out;
  char buf[64];
  auto row = [&](const std::string& name, const std::string& value) {
    out << name << std::string(width - name.size() + 2, ' ') << value << '\n';
  };
  row("query", "AP(%)");
  for (const auto& q : report.per_query) {
    if (q.skipped) {
      row(q.name, "skipped");
    } else {
      std::snprintf(buf, sizeof buf, "%6.2f", 100.0 * q.ap);
      row(q.name, buf);
    }
  }
  std::snprintf(buf, sizeof buf, "%6.2f", 100.0 * report.map);
  row("mAP", buf);
  out << "protocol " << report.protocol << ", " << report.evaluated << " evaluated, "
      << report.skipped << " skipped\n";
  return out.str();
}

}  // namespace superglobal
