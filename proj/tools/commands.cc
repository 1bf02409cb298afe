#include "commands.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>

#include "CLI11.hpp"
#include "json.hpp"
#include "superglobal/config.h"
#include "superglobal/error.h"
#include "superglobal/eval.h"
#include "superglobal/index.h"
#include "superglobal/parallel.h"
#include "superglobal/pipeline.h"
#include "superglobal/rerank.h"
#include "superglobal/tensor_io.h"
#include "superglobal/tune.h"

namespace superglobal::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GlobalOptions {
  std::string config;
  unsigned threads = 0;
  std::string output;
};

struct Context {
  RunConfig config;
  unsigned threads = 1;
  fs::path output;
};

Context make_context(const GlobalOptions& g) {
  Context ctx;
  if (!g.config.empty()) ctx.config = run_config_from_json(read_json(g.config));
  if (g.threads > 0) {
    ctx.threads = g.threads;
  } else if (ctx.config.threads) {
    ctx.threads = *ctx.config.threads;
  } else {
    ctx.threads = std::max(1u, std::thread::hardware_concurrency());
  }
  if (!g.output.empty()) {
    ctx.output = g.output;
  } else if (ctx.config.paths.output) {
    ctx.output = *ctx.config.paths.output;
  } else {
    ctx.output = ".";
  }
  std::error_code ec;
  fs::create_directories(ctx.output, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create output directory " + ctx.output.string());
  return ctx;
}

// Command-line value wins over the config file; the path must exist.
fs::path input_path(const std::string& flag_value,
                    const std::optional<fs::path>& from_config, const char* flag) {
  fs::path p;
  if (!flag_value.empty()) {
    p = flag_value;
  } else if (from_config) {
    p = *from_config;
  } else {
    throw Error(ErrorCode::InvalidArgument, std::string("missing ") + flag);
  }
  std::error_code ec;
  if (!fs::exists(p, ec)) throw Error(ErrorCode::Io, "not found: " + p.string());
  return p;
}

void write_json(const fs::path& path, const json& j) {
  write_file_atomic(path, j.dump(1) + "\n");
}

struct NamedDescriptors {
  DescriptorSet set;
  std::vector<std::string> names;
};

NamedDescriptors read_named_descriptors(const fs::path& path) {
  NamedDescriptors out{to_descriptor_set(read_tensor(path)), read_names(names_sidecar(path))};
  if (out.names.size() != out.set.rows()) {
    throw Error(ErrorCode::DimMismatch, path.string() + ": " + std::to_string(out.set.rows()) +
                                            " rows but " + std::to_string(out.names.size()) +
                                            " names in the sidecar");
  }
  return out;
}

DescriptorIndex read_index(const fs::path& path) {
  auto d = read_named_descriptors(path);
  return DescriptorIndex(d.set, std::move(d.names));
}

std::unordered_map<std::string, std::size_t> row_lookup(const std::vector<std::string>& names) {
  std::unordered_map<std::string, std::size_t> out;
  for (std::size_t i = 0; i < names.size(); ++i) out.emplace(names[i], i);
  return out;
}

json hit_json(const DescriptorIndex& index, std::size_t row, double score) {
  return {{"index", row}, {"name", index.names()[row]}, {"score", score}};
}

// ---------------------------------------------------------------------------

struct PoolOptions {
  std::string features;
  std::string whitening;
};

int cmd_pool(const GlobalOptions& g, const PoolOptions& o) {
  const Context ctx = make_context(g);
  const fs::path features = input_path(o.features, ctx.config.paths.features, "--features");
  const fs::path whitening = input_path(o.whitening, ctx.config.paths.whitening, "--whitening");
  const WhiteningParams w = to_whitening(read_tensor(whitening));
  ctx.config.pooling.validate();

  const auto files = scan_feature_dir(features);
  if (files.empty()) {
    throw Error(ErrorCode::InvalidArgument,
                "no <image>.s<k>.sgt files in " + features.string());
  }
  std::vector<std::string> names;
  std::vector<ScaleSet> maps;
  for (const auto& [image, scale_files] : files) {
    names.push_back(image);
    maps.push_back(load_scale_set(scale_files));
  }
  std::vector<const ScaleSet*> refs;
  for (const auto& m : maps) refs.push_back(&m);
  const DescriptorSet descs = extract_descriptors(refs, ctx.config.pooling, w, ctx.threads);

  const fs::path out = ctx.output / "descriptors.sgt";
  write_tensor(out, from_descriptor_set(descs));
  write_names(names_sidecar(out), names);
  std::cout << "pooled " << names.size() << " images into " << out.string() << " ("
            << descs.dim() << " dims)\n";
  return kOk;
}

struct IndexOptions {
  std::string descriptors;
  std::string gt;
};

int cmd_index(const GlobalOptions& g, const IndexOptions& o) {
  const Context ctx = make_context(g);
  const fs::path source = input_path(o.descriptors, std::nullopt, "--descriptors");
  NamedDescriptors d = read_named_descriptors(source);

  if (!o.gt.empty() || ctx.config.paths.ground_truth) {
    // Keep only the ground truth's database, in its order.
    const GroundTruth gt =
        read_ground_truth(input_path(o.gt, ctx.config.paths.ground_truth, "--gt"));
    const auto rows = row_lookup(d.names);
    std::vector<float> packed;
    for (const auto& name : gt.database) {
      auto it = rows.find(name);
      if (it == rows.end()) {
        throw Error(ErrorCode::InvalidArgument, "database image " + name + " has no descriptor");
      }
      const auto r = d.set.row(it->second);
      packed.insert(packed.end(), r.begin(), r.end());
    }
    d = NamedDescriptors{DescriptorSet(gt.database.size(), d.set.dim(), std::move(packed)),
                         gt.database};
  }
  const DescriptorIndex index = build_index(d.set, d.names);
  const fs::path out = ctx.output / "index.sgt";
  write_tensor(out, from_descriptor_set(index.descriptors()));
  write_names(names_sidecar(out), index.names());
  std::cout << "indexed " << index.size() << " descriptors into " << out.string() << "\n";
  return kOk;
}

struct QuerySet {
  std::vector<std::string> names;
  std::vector<Descriptor> descriptors;  // unit norm
};

QuerySet read_queries(const fs::path& path, const std::optional<GroundTruth>& gt) {
  NamedDescriptors d = read_named_descriptors(path);
  QuerySet out;
  if (gt) {
    const auto rows = row_lookup(d.names);
    for (const auto& q : gt->queries) {
      auto it = rows.find(q.name);
      if (it == rows.end()) {
        throw Error(ErrorCode::InvalidArgument, "query " + q.name + " has no descriptor");
      }
      out.names.push_back(q.name);
      out.descriptors.push_back(l2_normalize(d.set.descriptor(it->second)));
    }
  } else {
    for (std::size_t i = 0; i < d.names.size(); ++i) {
      out.names.push_back(d.names[i]);
      out.descriptors.push_back(l2_normalize(d.set.descriptor(i)));
    }
  }
  return out;
}

struct SearchOptions {
  std::string index;
  std::string queries;
  std::string gt;
  std::size_t k = 0;
};

int cmd_search(const GlobalOptions& g, const SearchOptions& o) {
  const Context ctx = make_context(g);
  const DescriptorIndex index = read_index(input_path(o.index, ctx.config.paths.index, "--index"));
  std::optional<GroundTruth> gt;
  if (!o.gt.empty()) gt = read_ground_truth(input_path(o.gt, std::nullopt, "--gt"));
  const QuerySet queries = read_queries(input_path(o.queries, std::nullopt, "--queries"), gt);
  const std::size_t k = o.k == 0 ? index.size() : o.k;

  std::vector<RankedList> lists(queries.names.size());
  parallel_for(lists.size(), ctx.threads, [&](std::size_t i) {
    lists[i] = knn(index, queries.descriptors[i], k);
  });

  json entries = json::array();
  for (std::size_t i = 0; i < lists.size(); ++i) {
    json hits = json::array();
    for (const auto& h : lists[i].hits) hits.push_back(hit_json(index, h.index, h.score));
    entries.push_back({{"name", queries.names[i]}, {"results", std::move(hits)}});
  }
  const fs::path out = ctx.output / "search.json";
  write_json(out, {{"k", k}, {"queries", std::move(entries)}});
  std::cout << "searched " << lists.size() << " queries (k=" << k << ") into " << out.string()
            << "\n";
  return kOk;
}

struct RerankOptions {
  std::string index;
  std::string queries;
  std::string search;
  std::optional<std::size_t> m_top;
  std::optional<std::size_t> k_neighbors;
  std::optional<double> beta;
  bool no_expansion = false;
};

RankedList ranked_list_from_json(const json& entry, const DescriptorIndex& index) {
  RankedList list{entry.at("name").get<std::string>(), {}};
  for (const auto& h : entry.at("results")) {
    const auto row = h.at("index").get<std::size_t>();
    if (row >= index.size() || index.names()[row] != h.at("name").get<std::string>()) {
      throw Error(ErrorCode::InvalidArgument,
                  "search results for " + list.query + " do not match the index");
    }
    list.hits.push_back(Hit{row, h.at("score").get<double>()});
  }
  return list;
}

int cmd_rerank(const GlobalOptions& g, const RerankOptions& o) {
  const Context ctx = make_context(g);
  RerankParams params = ctx.config.rerank;
  if (o.m_top) params.m_top = *o.m_top;
  if (o.k_neighbors) params.k_neighbors = *o.k_neighbors;
  if (o.beta) params.beta = *o.beta;
  if (o.no_expansion) params.query_expansion_enabled = false;
  params.validate();

  const DescriptorIndex index = read_index(input_path(o.index, ctx.config.paths.index, "--index"));
  const QuerySet queries = read_queries(input_path(o.queries, std::nullopt, "--queries"), std::nullopt);
  const json search = read_json(input_path(o.search, std::nullopt, "--search"));

  std::vector<RankedList> initial;
  try {
    for (const auto& entry : search.at("queries")) {
      initial.push_back(ranked_list_from_json(entry, index));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("search results: ") + e.what());
  }
  const auto query_rows = row_lookup(queries.names);
  std::vector<const Descriptor*> query_descs;
  for (const auto& list : initial) {
    auto it = query_rows.find(list.query);
    if (it == query_rows.end()) {
      throw Error(ErrorCode::InvalidArgument, "query " + list.query + " has no descriptor");
    }
    query_descs.push_back(&queries.descriptors[it->second]);
  }

  std::vector<RerankedList> reranked(initial.size());
  parallel_for(initial.size(), ctx.threads, [&](std::size_t i) {
    reranked[i] = rerank(*query_descs[i], initial[i], index, params);
  });

  json entries = json::array();
  for (std::size_t i = 0; i < initial.size(); ++i) {
    json before = json::array();
    for (const auto& h : initial[i].hits) before.push_back(hit_json(index, h.index, h.score));
    json after = json::array();
    for (std::size_t r = 0; r < reranked[i].hits.size(); ++r) {
      const auto& h = reranked[i].hits[r];
      json entry = hit_json(index, h.index, h.score);
      entry["initial_rank"] = h.initial_rank;
      if (r < reranked[i].block_size) {
        entry["s1"] = h.s1;
        if (params.query_expansion_enabled) entry["s2"] = h.s2;
      }
      after.push_back(std::move(entry));
    }
    entries.push_back({{"name", initial[i].query},
                       {"reranked", reranked[i].block_size},
                       {"initial", std::move(before)},
                       {"results", std::move(after)}});
  }
  const fs::path out = ctx.output / "rerank.json";
  write_json(out, {{"params", to_json(params)}, {"queries", std::move(entries)}});
  std::cout << "reranked " << initial.size() << " queries (M=" << params.m_top
            << ", K=" << params.k_neighbors << ", beta=" << params.beta << ") into "
            << out.string() << "\n";
  return kOk;
}

struct EvalOptions {
  std::string gt;
  std::string results;
  std::string protocol = "medium";
  std::string interpolation;
};

int cmd_eval(const GlobalOptions& g, const EvalOptions& o) {
  const Context ctx = make_context(g);
  const GroundTruth gt = read_ground_truth(input_path(o.gt, ctx.config.paths.ground_truth, "--gt"));
  const json results = read_json(input_path(o.results, std::nullopt, "--results"));
  Protocol protocol = Protocol::parse(o.protocol);
  if (o.interpolation == "plain") {
    protocol.interpolation = Interpolation::Plain;
  } else if (o.interpolation == "trapezoid") {
    protocol.interpolation = Interpolation::Trapezoid;
  } else if (!o.interpolation.empty()) {
    throw Error(ErrorCode::InvalidArgument, "--interpolation must be plain or trapezoid");
  }

  // Result names are mapped onto ground-truth indices; images outside the
  // labeled database get fresh indices so they count as non-relevant.
  auto lookup = row_lookup(gt.database);
  std::map<std::string, std::vector<std::size_t>> rankings;
  try {
    for (const auto& entry : results.at("queries")) {
      std::vector<std::size_t> ranking;
      for (const auto& h : entry.at("results")) {
        const auto name = h.at("name").get<std::string>();
        auto [it, inserted] = lookup.emplace(name, lookup.size());
        ranking.push_back(it->second);
      }
      rankings[entry.at("name").get<std::string>()] = std::move(ranking);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("results: ") + e.what());
  }
  const Report report = evaluate(gt, rankings, protocol);
  std::cout << format_table(report);
  write_json(ctx.output / "report.json", to_json(report));
  return kOk;
}

struct TuneOptions {
  std::string features;
  std::string whitening;
  std::string gt;
  std::string spec;
  std::string parameter;
};

int cmd_tune(const GlobalOptions& g, const TuneOptions& o) {
  const Context ctx = make_context(g);
  TuneSpec spec;
  if (!o.spec.empty()) {
    spec = tune_spec_from_json(read_json(input_path(o.spec, std::nullopt, "--spec")));
  } else if (!o.parameter.empty()) {
    spec = TuneSpec::defaults_for(parse_tune_parameter(o.parameter));
  } else {
    throw Error(ErrorCode::InvalidArgument, "missing --spec or --parameter");
  }
  const fs::path features = input_path(o.features, ctx.config.paths.features, "--features");
  const WhiteningParams w = to_whitening(
      read_tensor(input_path(o.whitening, ctx.config.paths.whitening, "--whitening")));
  const GroundTruth gt = read_ground_truth(input_path(o.gt, ctx.config.paths.ground_truth, "--gt"));
  const auto maps = load_feature_dir(features);

  const PoolingConfig base = ctx.config.pooling;
  const TuneResult result = tune_parameter(spec, [&](double value) {
    const PoolingConfig cfg = with_parameter(base, spec.parameter, value);
    return retrieval_map(gt, maps, cfg, w, spec.objective, ctx.threads);
  });

  write_file_atomic(ctx.output / "trace.csv", trace_csv(result));
  json best{{"parameter", to_string(spec.parameter)},
            {"best_map", result.best_map},
            {"evaluations", result.trace.size()},
            {"spec", to_json(spec)}};
  best["best_value"] = std::isinf(result.best_value) ? json("inf") : json(result.best_value);
  write_json(ctx.output / "best.json", best);
  std::cout << to_string(spec.parameter) << " = "
            << (std::isinf(result.best_value) ? std::string("inf") : std::to_string(result.best_value))
            << ", mAP " << 100.0 * result.best_map << " after " << result.trace.size()
            << " evaluations\n";
  return kOk;
}

struct ConvertOptions {
  std::string input;
};

int cmd_convert_gt(const GlobalOptions& g, const ConvertOptions& o) {
  const Context ctx = make_context(g);
  const GroundTruth gt =
      ground_truth_from_named_json(read_json(input_path(o.input, std::nullopt, "--input")));
  const fs::path out = ctx.output / "gt.json";
  write_json(out, to_json(gt));
  std::cout << "wrote " << gt.queries.size() << " queries over " << gt.database.size()
            << " database images to " << out.string() << "\n";
  return kOk;
}

int exit_code(const Error& e) {
  switch (classify(e.code())) {
    case ErrorClass::Io: return kIoError;
    case ErrorClass::Validation: return kValidationError;
    case ErrorClass::Internal: return kInternalError;
  }
  return kInternalError;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Global-feature pooling, retrieval, reranking and evaluation"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions global;
  app.add_option("--config", global.config, "Run configuration JSON");
  app.add_option("--threads", global.threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--output", global.output, "Output directory");

  PoolOptions pool;
  auto* pool_cmd = app.add_subcommand("pool", "Pool per-scale feature maps into descriptors");
  pool_cmd->add_option("--features", pool.features, "Directory of <image>.s<k>.sgt files");
  pool_cmd->add_option("--whitening", pool.whitening, "Whitening tensor [C_g, C_d + 1]");

  IndexOptions index;
  auto* index_cmd = app.add_subcommand("index", "Build a normalized descriptor index");
  index_cmd->add_option("--descriptors", index.descriptors, "Descriptor tensor with names sidecar");
  index_cmd->add_option("--gt", index.gt, "Restrict to this ground truth's database");

  SearchOptions search;
  auto* search_cmd = app.add_subcommand("search", "Exact top-k retrieval");
  search_cmd->add_option("--index", search.index, "Index tensor");
  search_cmd->add_option("--queries", search.queries, "Query descriptor tensor");
  search_cmd->add_option("--gt", search.gt, "Only search this ground truth's queries");
  search_cmd->add_option("--k", search.k, "Results per query (default: whole index)");

  RerankOptions rr;
  auto* rerank_cmd = app.add_subcommand("rerank", "Rerank search results with refined descriptors");
  rerank_cmd->add_option("--index", rr.index, "Index tensor");
  rerank_cmd->add_option("--queries", rr.queries, "Query descriptor tensor");
  rerank_cmd->add_option("--search", rr.search, "search.json from the search command");
  rerank_cmd->add_option("--m-top", rr.m_top, "Size of the reranked block");
  rerank_cmd->add_option("--k-neighbors", rr.k_neighbors, "Neighbors per refinement");
  rerank_cmd->add_option("--beta", rr.beta, "Neighbor weight multiplier");
  rerank_cmd->add_flag("--no-expansion", rr.no_expansion, "Disable query expansion");

  EvalOptions ev;
  auto* eval_cmd = app.add_subcommand("eval", "mAP of search or rerank results");
  eval_cmd->add_option("--gt", ev.gt, "Ground truth JSON");
  eval_cmd->add_option("--results", ev.results, "search.json or rerank.json");
  eval_cmd->add_option("--protocol", ev.protocol, "medium, hard or plain@<k>");
  eval_cmd->add_option("--interpolation", ev.interpolation, "trapezoid or plain");

  TuneOptions tn;
  auto* tune_cmd = app.add_subcommand("tune", "Coarse-to-fine search for one pooling parameter");
  tune_cmd->add_option("--features", tn.features, "Directory of <image>.s<k>.sgt files");
  tune_cmd->add_option("--whitening", tn.whitening, "Whitening tensor");
  tune_cmd->add_option("--gt", tn.gt, "Ground truth JSON");
  tune_cmd->add_option("--spec", tn.spec, "Tune spec JSON");
  tune_cmd->add_option("--parameter", tn.parameter, "p, p_r, p_ms or alpha with default spec");

  ConvertOptions cv;
  auto* convert_cmd = app.add_subcommand("convert-gt", "Convert name-based ground truth to indices");
  convert_cmd->add_option("--input", cv.input, "Ground truth JSON with names")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidationError;
  }

  try {
    if (*pool_cmd) return cmd_pool(global, pool);
    if (*index_cmd) return cmd_index(global, index);
    if (*search_cmd) return cmd_search(global, search);
    if (*rerank_cmd) return cmd_rerank(global, rr);
    if (*eval_cmd) return cmd_eval(global, ev);
    if (*tune_cmd) return cmd_tune(global, tn);
    if (*convert_cmd) return cmd_convert_gt(global, cv);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternalError;
  }
  return kInternalError;
}

}  // namespace superglobal::cli
