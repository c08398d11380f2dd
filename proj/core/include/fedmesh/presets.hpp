#ifndef FEDMESH_PRESETS_HPP
#define FEDMESH_PRESETS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "fedmesh/config.hpp"

namespace fedmesh {

// A preset is a family of ready-to-run configs (arms). Arms inside one family
// differ by routing protocol and by scenario knob (worker layout, straggler
// level, worker count).
struct PresetArm {
  std::string name;  // unique inside the preset
  ExperimentConfig config;
};

std::vector<std::string> preset_names();

// All arms of a named preset. Throws ConfigError on unknown names.
std::vector<PresetArm> make_preset(const std::string& preset);

// One arm by name. Throws ConfigError when the arm does not exist.
ExperimentConfig preset_arm(const std::string& preset, const std::string& arm);

// Ten-router double-chain mesh used by every preset: two five-router chains
// with a cross link at every position. No hosts attached. The layout is a
// hand-built stand-in for a small campus mesh, not a measured network.
TopologyConfig mesh10_topology();

// Copy of base with every seed re-derived for the given replicate index.
// Replicate 0 returns base unchanged.
ExperimentConfig replicate_config(const ExperimentConfig& base, int replicate);

// Derive all four seed fields from one master seed (CLI --seed).
void apply_seed_override(ExperimentConfig& cfg, std::uint64_t master_seed);

}  // namespace fedmesh

#endif
