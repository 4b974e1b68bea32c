#include "listgen/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace listgen {
namespace {

void put_f32_le(std::ostream& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, sizeof bits);
  char b[4] = {static_cast<char>(bits & 0xff), static_cast<char>((bits >> 8) & 0xff),
               static_cast<char>((bits >> 16) & 0xff),
               static_cast<char>((bits >> 24) & 0xff)};
  out.write(b, 4);
}

float get_f32_le(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("truncated checkpoint array");
  std::uint32_t bits = static_cast<std::uint32_t>(b[0]) |
                       (static_cast<std::uint32_t>(b[1]) << 8) |
                       (static_cast<std::uint32_t>(b[2]) << 16) |
                       (static_cast<std::uint32_t>(b[3]) << 24);
  float f;
  std::memcpy(&f, &bits, sizeof f);
  return f;
}

}  // namespace

void save_checkpoint(const ScorerModel& model, int step_count,
                     const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << "listgen checkpoint 1\n";
  out << "query_vocab = " << model.config.query_vocab << '\n';
  out << "embed_dim = " << model.config.embed_dim << '\n';
  out << "hidden_dim = " << model.config.hidden_dim << '\n';
  out << "seed = " << model.config.seed << '\n';
  out << "vocab_seed = " << model.config.vocab_seed << '\n';
  out << "step_count = " << step_count << '\n';
  out << "arrays = " << kParamCount << '\n';
  out << '\n';
  for (int i = 0; i < kParamCount; ++i) {
    Param p = static_cast<Param>(i);
    auto values = model.param(p);
    out << param_name(p) << ' ' << values.size() << '\n';
    for (double v : values) put_f32_le(out, static_cast<float>(v));
  }
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != "listgen checkpoint 1") {
    throw std::runtime_error("'" + path + "' is not a listgen checkpoint");
  }
  std::map<std::string, std::string> manifest;
  while (std::getline(in, line) && !line.empty()) {
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("malformed manifest line: '" + line + "'");
    }
    auto trim = [](std::string s) {
      auto b = s.find_first_not_of(" \t");
      auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    manifest[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  auto need = [&](const std::string& key) -> const std::string& {
    auto it = manifest.find(key);
    if (it == manifest.end()) {
      throw std::runtime_error("checkpoint manifest missing '" + key + "'");
    }
    return it->second;
  };

  ModelConfig config;
  config.query_vocab = std::stoi(need("query_vocab"));
  config.embed_dim = std::stoi(need("embed_dim"));
  config.hidden_dim = std::stoi(need("hidden_dim"));
  config.seed = std::stoull(need("seed"));
  config.vocab_seed = std::stoull(need("vocab_seed"));

  LoadedCheckpoint loaded;
  loaded.step_count = std::stoi(need("step_count"));
  loaded.model.config = config;
  loaded.model.layout = ParamLayout::for_config(config);
  loaded.model.params.assign(loaded.model.layout.total(), 0.0);

  const int arrays = std::stoi(need("arrays"));
  if (arrays != kParamCount) {
    throw std::runtime_error("checkpoint has " + std::to_string(arrays) +
                             " arrays, expected " + std::to_string(kParamCount));
  }
  for (int i = 0; i < kParamCount; ++i) {
    if (!std::getline(in, line)) throw std::runtime_error("truncated checkpoint");
    std::istringstream header(line);
    std::string name;
    std::size_t count = 0;
    header >> name >> count;
    Param p = static_cast<Param>(i);
    auto dest = loaded.model.param(p);
    if (name != param_name(p) || count != dest.size()) {
      throw std::runtime_error("checkpoint array mismatch at '" + name + "'");
    }
    for (std::size_t j = 0; j < count; ++j) {
      dest[j] = static_cast<double>(get_f32_le(in));
    }
  }
  return loaded;
}

}  // namespace listgen
