#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace rlvr {

struct TrainArgs {
  std::string config_path;
  std::vector<std::string> overrides;  // repeated --set key=value
  std::string out_dir;                 // --out; wins over config and environment
  std::optional<std::uint64_t> seeds;  // --seeds
  std::string resume_path;             // optional checkpoint to continue from
};

int cmd_train(const TrainArgs& args, std::ostream& log);
int cmd_compare(const std::vector<std::string>& run_dirs, const std::string& out_dir,
                std::ostream& log);
int cmd_verify(const std::string& suite, const std::string& out_dir, std::uint64_t seed,
               std::ostream& log);

// FNV-1a of a file's bytes, as 16 hex digits (manifest artifact hashes).
std::string fnv1a_file_hex(const std::string& path);

}  // namespace rlvr
