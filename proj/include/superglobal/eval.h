#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "json.hpp"

namespace superglobal {

struct QueryGroundTruth {
  std::string name;
  std::vector<std::size_t> easy;
  std::vector<std::size_t> hard;
  std::vector<std::size_t> junk;
};

/// Relevance labels over an ordered database, revisited-benchmark style.
struct GroundTruth {
  std::vector<std::string> database;
  std::vector<QueryGroundTruth> queries;

  /// Index sets in range and pairwise disjoint per query; unique names.
  void validate() const;
};

// {"database": [names], "queries": [{"name", "easy", "hard", "junk"}]} where
// the sets hold database indices.
GroundTruth ground_truth_from_json(const nlohmann::json& j);
nlohmann::json to_json(const GroundTruth& gt);
GroundTruth read_ground_truth(const std::filesystem::path& path);

/// Same layout with database names in place of indices.
GroundTruth ground_truth_from_named_json(const nlohmann::json& j);

enum class ProtocolKind { Medium, Hard, Plain };

enum class Interpolation {
  Trapezoid,  // revisited-benchmark convention
  Plain,      // precision at each positive hit
};

struct Protocol {
  ProtocolKind kind = ProtocolKind::Medium;
  std::optional<std::size_t> truncate;
  Interpolation interpolation = Interpolation::Trapezoid;

  static Protocol medium() { return {}; }
  static Protocol hard() { return {ProtocolKind::Hard, std::nullopt, Interpolation::Trapezoid}; }
  static Protocol plain_at(std::size_t k) { return {ProtocolKind::Plain, k, Interpolation::Plain}; }

  /// "medium", "hard" or "plain@<k>" (alias "map@<k>").
  static Protocol parse(const std::string& text);
  std::string name() const;
};

/// AP of one ranking. Ignored items are dropped first and the ranks close
/// up; the list is then cut at `truncate` and the sum divided by
/// min(|positives|, truncate). Returns 0 when no positive is retrieved.
double average_precision(std::span<const std::size_t> ranked,
                         const std::unordered_set<std::size_t>& positives,
                         const std::unordered_set<std::size_t>& ignore,
                         std::optional<std::size_t> truncate = std::nullopt,
                         Interpolation interpolation = Interpolation::Trapezoid);

struct QueryReport {
  std::string name;
  double ap = 0.0;
  std::size_t positives = 0;
  bool skipped = false;  // no positives under the protocol
};

struct Report {
  std::string protocol;
  double map = 0.0;
  std::size_t evaluated = 0;
  std::size_t skipped = 0;
  std::vector<QueryReport> per_query;
};

/// `results` maps each query name to its ranking of ground-truth database
/// indices (indices >= database size are treated as non-relevant).
Report evaluate(const GroundTruth& gt,
                const std::map<std::string, std::vector<std::size_t>>& results,
                const Protocol& protocol);

nlohmann::json to_json(const Report& report);
std::string format_table(const Report& report);

}  // namespace superglobal
