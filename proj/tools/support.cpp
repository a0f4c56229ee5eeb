#include "support.hpp"

#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "l2h/errors.hpp"
#include "l2h/render.hpp"

namespace l2h::cli {

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("l2h");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  const char* env = std::getenv("L2H_LOG");
  const std::string level = env ? env : "info";
  if (level == "error")
    spdlog::set_level(spdlog::level::err);
  else if (level == "debug")
    spdlog::set_level(spdlog::level::debug);
  else {
    spdlog::set_level(spdlog::level::info);
    if (level != "info") spdlog::warn("L2H_LOG='{}' not recognised, using info", level);
  }
}

namespace {
std::string iso_utc(std::chrono::system_clock::time_point t) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}
}  // namespace

Manifest::Manifest(std::string command, const KeyValueConfig& config)
    : command_(std::move(command)), config_text_(config.canonical()), started_(std::chrono::system_clock::now()) {}

void Manifest::input(const std::string& name, const std::filesystem::path& path) {
  inputs_[name] = sha256_file(path);
}

void Manifest::output(const std::string& name, const std::filesystem::path& path) {
  outputs_[name] = sha256_file(path);
}

std::string Manifest::content_hash() const {
  nlohmann::ordered_json j;
  j["command"] = command_;
  j["config_sha256"] = sha256_hex(config_text_);
  j["seeds"] = seeds_;
  j["inputs"] = inputs_;
  j["outputs"] = outputs_;
  return sha256_hex(j.dump());
}

void Manifest::write(const std::filesystem::path& dir, int threads) const {
  nlohmann::ordered_json j;
  j["command"] = command_;
  j["config_sha256"] = sha256_hex(config_text_);
  j["config"] = config_text_;
  j["seeds"] = seeds_;
  j["inputs"] = inputs_;
  j["outputs"] = outputs_;
  j["content_hash"] = content_hash();
  j["threads"] = threads;
  j["started_at"] = iso_utc(started_);
  j["finished_at"] = iso_utc(std::chrono::system_clock::now());
  write_text(dir / "run_manifest.json", j.dump(2) + "\n");
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void apply_overrides(KeyValueConfig& cfg, const std::vector<std::string>& sets) {
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + s + "'");
    cfg.set(s.substr(0, eq), s.substr(eq + 1));
  }
}

NetConfig net_config_from(const KeyValueConfig& cfg, int default_classes) {
  NetConfig net;
  net.blocks = static_cast<int>(cfg.get_int("blocks", net.blocks));
  net.num_classes = static_cast<int>(cfg.get_int("num_classes", default_classes));
  if (auto ch = cfg.get_doubles("branch_channels"); !ch.empty()) {
    if (ch.size() != 3) throw ConfigError("branch_channels needs three values");
    for (int i = 0; i < 3; ++i) net.branch_channels[i] = static_cast<int>(ch[i]);
  }
  net.validate();
  return net;
}

}  // namespace l2h::cli
