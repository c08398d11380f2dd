#ifndef FEDMESH_ERRORS_HPP
#define FEDMESH_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace fedmesh {

// Rejected scenario input (bad config file, invalid topology, bad parameter
// ranges). The CLI maps this to exit code 1.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Mid-run fault (protocol violation, unroutable packet in baseline mode,
// simulation horizon exceeded). The CLI maps this to exit code 2.
class SimError : public std::runtime_error {
 public:
  explicit SimError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace fedmesh

#endif
