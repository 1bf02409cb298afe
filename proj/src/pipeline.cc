#include "superglobal/pipeline.h"

#include <algorithm>
#include <charconv>

#include "superglobal/error.h"
#include "superglobal/parallel.h"
#include "superglobal/tensor_io.h"

namespace superglobal {

std::map<std::string, std::vector<std::filesystem::path>> scan_feature_dir(
    const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) {
    throw Error(ErrorCode::Io, "feature directory not found: " + dir.string());
  }
  std::map<std::string, std::map<unsigned, std::filesystem::path>> scales;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string file = entry.path().filename().string();
    if (file.size() < 4 || file.compare(file.size() - 4, 4, ".sgt") != 0) continue;
    const std::string stem = file.substr(0, file.size() - 4);
    const auto dot = stem.rfind(".s");
    if (dot == std::string::npos || dot == 0) continue;
    unsigned k = 0;
    const char* first = stem.data() + dot + 2;
    const char* last = stem.data() + stem.size();
    auto [ptr, err] = std::from_chars(first, last, k);
    if (err != std::errc() || ptr != last || first == last) continue;
    scales[stem.substr(0, dot)][k] = entry.path();
  }
  std::map<std::string, std::vector<std::filesystem::path>> out;
  for (auto& [image, by_k] : scales) {
    auto& files = out[image];
    for (auto& [k, path] : by_k) files.push_back(path);
  }
  return out;
}

ScaleSet load_scale_set(const std::vector<std::filesystem::path>& files) {
  if (files.empty()) throw Error(ErrorCode::EmptyScaleSet, "image has no scale files");
  ScaleSet set;
  set.reserve(files.size());
  for (const auto& f : files) {
    try {
      set.push_back(to_feature_map(read_tensor(f)));
    } catch (const Error& e) {
      if (e.code() == ErrorCode::Io) throw;
      throw Error(e.code(), f.string() + ": " + e.what());
    }
    if (set.back().channels() != set.front().channels()) {
      throw Error(ErrorCode::DimMismatch, f.string() + ": channel count differs from " +
                                              files.front().string());
    }
  }
  return set;
}

std::map<std::string, ScaleSet> load_feature_dir(const std::filesystem::path& dir) {
  std::map<std::string, ScaleSet> out;
  for (const auto& [image, files] : scan_feature_dir(dir)) {
    out.emplace(image, load_scale_set(files));
  }
  return out;
}

DescriptorSet extract_descriptors(const std::vector<const ScaleSet*>& images,
                                  const PoolingConfig& cfg,
                                  const WhiteningParams& w, unsigned threads) {
  std::vector<Descriptor> out(images.size());
  parallel_for(images.size(), threads, [&](std::size_t i) {
    out[i] = extract_descriptor(*images[i], cfg, w);
  });
  return DescriptorSet(out);
}

double retrieval_map(const GroundTruth& gt,
                     const std::map<std::string, ScaleSet>& features,
                     const PoolingConfig& cfg, const WhiteningParams& w,
                     const Protocol& protocol, unsigned threads) {
  auto lookup = [&](const std::string& name) -> const ScaleSet* {
    auto it = features.find(name);
    if (it == features.end()) {
      throw Error(ErrorCode::InvalidArgument, "no feature maps for image " + name);
    }
    return &it->second;
  };
  std::vector<const ScaleSet*> database;
  for (const auto& name : gt.database) database.push_back(lookup(name));
  std::vector<const ScaleSet*> queries;
  for (const auto& q : gt.queries) queries.push_back(lookup(q.name));

  const DescriptorIndex index(extract_descriptors(database, cfg, w, threads), gt.database);
  const DescriptorSet query_descs = extract_descriptors(queries, cfg, w, threads);

  std::vector<std::vector<std::size_t>> rankings(gt.queries.size());
  parallel_for(gt.queries.size(), threads, [&](std::size_t i) {
    rankings[i] = knn(index, query_descs.descriptor(i), index.size()).indices();
  });
  std::map<std::string, std::vector<std::size_t>> results;
  for (std::size_t i = 0; i < gt.queries.size(); ++i) {
    results.emplace(gt.queries[i].name, std::move(rankings[i]));
  }
  return evaluate(gt, results, protocol).map;
}

}  // namespace superglobal
