#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ngd/detector/detector.hpp"
#include "ngd/nn/tensor.hpp"
#include "ngd/policy/policy.hpp"

namespace ngd::app {

inline constexpr const char* kCheckpointFormat = "ngd-ckpt";
inline constexpr int kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  nn::Tensor tensor;
};

// One file: a JSON header line followed by the tensors as little-endian
// doubles in header order.
struct Checkpoint {
  std::string kind;  // "detector" | "policy"
  std::string config_digest;
  nlohmann::json meta = nlohmann::json::object();
  std::vector<NamedTensor> tensors;

  const nn::Tensor& get(std::string_view name) const;  // throws FormatError
};

// FNV-1a over the compact JSON dump, as 16 hex digits.
std::string config_digest(const nlohmann::json& config);

// Throws IoError.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
// Throws IoError, FormatError, and KindMismatch when `expected_kind` is set
// and differs.
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           std::optional<std::string_view> expected_kind = std::nullopt);

Checkpoint detector_checkpoint(const detector::DetectorModel& model,
                               const nlohmann::json& config);
detector::DetectorModel detector_from_checkpoint(const Checkpoint& ckpt);

Checkpoint policy_checkpoint(const policy::QNetwork& net, const nlohmann::json& config);
policy::QNetwork policy_from_checkpoint(const Checkpoint& ckpt);

}  // namespace ngd::app
