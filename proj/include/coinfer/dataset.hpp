#pragma once

#include <string>
#include <vector>

#include "coinfer/predictor.hpp"

namespace coinfer {

// Length-prefixed binary sample records plus a JSON manifest written next to
// the data file (<path>.manifest.json). Record layout in docs/formats.md.
void save_dataset(const std::string& path, const std::vector<Sample>& samples,
                  std::uint64_t seed);

std::vector<Sample> load_dataset(const std::string& path);

std::uint64_t dataset_fingerprint(const std::vector<Sample>& samples);

}  // namespace coinfer
