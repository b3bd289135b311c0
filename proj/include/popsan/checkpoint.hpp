#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "popsan/network.hpp"

namespace popsan {

void to_json(nlohmann::json& j, const StageConfig& s);
void from_json(const nlohmann::json& j, StageConfig& s);
void to_json(nlohmann::json& j, const NetworkSpec& s);
void from_json(const nlohmann::json& j, NetworkSpec& s);

namespace ckpt {

constexpr char kMagic[8] = {'P', 'O', 'P', 'S', 'A', 'N', 'C', 'K'};
constexpr uint32_t kVersion = 1;

struct NamedArray {
    std::string name;
    std::vector<uint32_t> dims;
    std::vector<double> data;
};

// Self-describing versioned container: magic, version, a JSON header, then
// named float64 arrays with explicit shapes. Raw doubles round-trip
// bit-exactly on the writing platform.
void write_container(const std::string& path, const nlohmann::json& header,
                     const std::vector<NamedArray>& arrays);
std::pair<nlohmann::json, std::vector<NamedArray>> read_container(const std::string& path);

}  // namespace ckpt

void save_checkpoint(const PopSanActor& actor, const std::string& path);
// Rebuilds the network from the embedded spec; every stored array must match
// the spec-derived shape or loading fails naming the offending tensor.
PopSanActor load_checkpoint(const std::string& path);

// Kind tag stored in the container header ("snn" or "mlp").
std::string checkpoint_kind(const std::string& path);

}  // namespace popsan
