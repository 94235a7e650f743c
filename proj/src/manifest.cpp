#include "docmt/manifest.h"

#include <fstream>
#include <sstream>

#include "docmt/error.h"
#include "docmt/hash.h"
#include "docmt/version.h"

namespace docmt {

using nlohmann::json;

std::string hex64(std::uint64_t value) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[value & 0xF];
    value >>= 4;
  }
  return out;
}

std::uint64_t hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot open " + path);
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[65536];
  while (in.read(buf, sizeof buf) || in.gcount() > 0)
    h = fnv1a64(std::string_view(buf, static_cast<std::size_t>(in.gcount())), h);
  return h;
}

json make_manifest(const std::string& command, const json& config,
                   const std::vector<std::string>& input_paths,
                   const std::vector<std::string>& output_paths,
                   const json& stats) {
  json m;
  m["tool"] = "docmt";
  m["version"] = kVersion;
  m["command"] = command;
  m["config"] = config;
  m["config_hash"] = hex64(fnv1a64(config.dump()));
  json inputs = json::object();
  for (const auto& path : input_paths)
    inputs[path] = hex64(hash_file(path));
  m["inputs"] = inputs;
  json outputs = json::object();
  for (const auto& path : output_paths)
    outputs[path] = hex64(hash_file(path));
  m["outputs"] = outputs;
  m["stats"] = stats;
  return m;
}

void write_manifest(const std::string& path, const json& manifest) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw IoError("cannot write " + path);
  out << manifest.dump(2) << '\n';
}

}  // namespace docmt
