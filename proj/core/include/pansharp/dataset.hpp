#pragma once

// On-disk dataset layout:
//
//   <root>/spec.json
//   <root>/{train,val,test}/<id>_{lrms,pan,gt}.ten
//
// spec.json carries the degradation (blur, ratio, spectral weights) and the
// normalization mode applied at training time.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pansharp/observation.hpp"

namespace pansharp {

struct Sample {
    std::string id;
    Tensor<float> lrms;  // [B, m, n]
    Tensor<float> pan;   // [1, r*m, r*n]
    Tensor<float> gt;    // [B, r*m, r*n]
};

inline constexpr const char* kNormalizationMode = "per_patch_per_modality_max";

struct Dataset {
    DegradationSpec spec;
    std::vector<Sample> train;
    std::vector<Sample> val;
    std::vector<Sample> test;
};

nlohmann::json spec_to_json(const DegradationSpec& spec);
DegradationSpec spec_from_json(const nlohmann::json& j);

// Each scene is synthesized at r times the requested size and Wald-degraded,
// so the stored ground truth is `size` x `size`. Deterministic per seed.
Dataset synthesize_dataset(std::size_t n_train, std::size_t n_val, std::size_t n_test, std::size_t size,
                           const DegradationSpec& spec, std::uint64_t seed);

void write_dataset(const std::filesystem::path& root, const Dataset& data);
// Throws IoError when the directory or any file is missing or malformed.
Dataset read_dataset(const std::filesystem::path& root);

}  // namespace pansharp
