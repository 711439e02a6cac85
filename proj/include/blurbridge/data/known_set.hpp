#pragma once

#include <string>
#include <vector>

#include "blurbridge/blur/kernel_transfer.hpp"

namespace blurbridge::data {

struct KnownProvenance {
  std::size_t source_pair = 0;  // index into the known-domain pair list
  std::string kernel_id;        // identifier of that pair's kernel
};

struct KnownSet {
  std::vector<Image> images;
  std::vector<KnownProvenance> provenance;
};

/// Gives every sharp image a known-domain blur transferred from a uniformly drawn pair.
/// Only S and the known pairs are read; B never enters.
inline KnownSet build_known_set(const std::vector<Image>& sharp, const std::vector<BlurPair>& known_pairs,
                                const std::vector<std::string>& kernel_ids, TransferMode mode,
                                double noise_sigma, std::uint64_t seed, const KernelEstimateOptions& opt = {}) {
  if (sharp.empty()) throw EmptySetError("build_known_set: no sharp images");
  if (known_pairs.empty()) throw EmptySetError("build_known_set: no known-domain pairs");
  if (kernel_ids.size() != known_pairs.size()) throw ShapeMismatchError("build_known_set: one kernel id per pair");
  Rng pick(Rng::derive(seed, 0x5011));
  KnownSet k;
  // Estimated kernels are shared by every image drawing the same pair, so estimate each once.
  std::vector<std::optional<BlurKernel>> kernels(known_pairs.size());
  for (std::size_t i = 0; i < sharp.size(); ++i) {
    const std::size_t j = pick.below(known_pairs.size());
    if (!kernels[j]) kernels[j] = transfer_source_kernel(known_pairs[j], mode, opt);
    k.images.push_back(apply_blur(sharp[i], *kernels[j], noise_sigma, Rng::derive(seed, 0x10000 + i)));
    k.provenance.push_back({j, kernel_ids[j]});
  }
  return k;
}

}  // namespace blurbridge::data
