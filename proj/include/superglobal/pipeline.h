#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "superglobal/eval.h"
#include "superglobal/index.h"
#include "superglobal/pooling.h"

namespace superglobal {

/// Groups "<image>.s<k>.sgt" files of a directory by image name; each entry
/// lists that image's scale files ordered by k.
std::map<std::string, std::vector<std::filesystem::path>> scan_feature_dir(
    const std::filesystem::path& dir);

ScaleSet load_scale_set(const std::vector<std::filesystem::path>& files);

/// Loads every image of a feature directory, keyed by image name.
std::map<std::string, ScaleSet> load_feature_dir(const std::filesystem::path& dir);

/// One descriptor per image, rows in input order. Images are independent and
/// split across `threads` workers.
DescriptorSet extract_descriptors(const std::vector<const ScaleSet*>& images,
                                  const PoolingConfig& cfg,
                                  const WhiteningParams& w, unsigned threads);

/// Retrieval-only mAP of a labeled dataset: pools every database and query
/// image from cached feature maps, ranks the whole database per query.
double retrieval_map(const GroundTruth& gt,
                     const std::map<std::string, ScaleSet>& features,
                     const PoolingConfig& cfg, const WhiteningParams& w,
                     const Protocol& protocol, unsigned threads);

}  // namespace superglobal
