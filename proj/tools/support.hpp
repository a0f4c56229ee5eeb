#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "l2h/config.hpp"
#include "l2h/net.hpp"

namespace l2h::cli {

// Reads L2H_LOG (error | info | debug) and installs a stderr logger.
void setup_logging();

// Records what a run consumed and produced. The content hash covers the
// command, config hash, seeds and file checksums, never timestamps or paths
// outside the output directory.
class Manifest {
 public:
  Manifest(std::string command, const KeyValueConfig& config);

  void seed(const std::string& name, std::uint64_t value) { seeds_[name] = value; }
  void input(const std::string& name, const std::filesystem::path& path);
  void output(const std::string& name, const std::filesystem::path& path);
  std::string content_hash() const;
  // Writes run_manifest.json into `dir`.
  void write(const std::filesystem::path& dir, int threads) const;

 private:
  std::string command_;
  std::string config_text_;
  std::map<std::string, std::uint64_t> seeds_;
  std::map<std::string, std::string> inputs_;
  std::map<std::string, std::string> outputs_;
  std::chrono::system_clock::time_point started_;
};

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

// `key=value` overrides from repeated --set flags.
void apply_overrides(KeyValueConfig& cfg, const std::vector<std::string>& sets);

// Backbone shape keys: blocks, branch_channels (three integers), num_classes.
NetConfig net_config_from(const KeyValueConfig& cfg, int default_classes);

}  // namespace l2h::cli
