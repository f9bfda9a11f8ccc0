#include "microsr/config_kv.hpp"

#include <algorithm>

namespace microsr {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string require(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw DataError("missing config key: " + key);
  return it->second;
}

}  // namespace

std::map<std::string, std::string> parse_kv(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  std::int64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw DataError("config line " + std::to_string(lineno) + " is not 'key = value': " + line);
    }
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

std::string join_i64(const std::vector<std::int64_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

std::vector<std::int64_t> split_i64(const std::string& s) {
  std::vector<std::int64_t> out;
  std::istringstream in(s);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    if (!tok.empty()) out.push_back(std::stoll(tok));
  }
  return out;
}

std::string describe(const GeneratorConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << "num_rrdb = " << c.num_rrdb << "\n"
     << "base_channels = " << c.base_channels << "\n"
     << "growth_channels = " << c.growth_channels << "\n"
     << "convs_per_dense_block = " << c.convs_per_dense_block << "\n"
     << "dense_blocks_per_rrdb = " << c.dense_blocks_per_rrdb << "\n"
     << "residual_scale = " << c.residual_scale << "\n"
     << "leak = " << c.leak << "\n"
     << "init_scale = " << c.init_scale << "\n"
     << "upscale = " << c.upscale << "\n"
     << "in_channels = " << c.in_channels << "\n";
  return os.str();
}

GeneratorConfig parse_generator_config(const std::string& text) {
  const auto kv = parse_kv(text);
  GeneratorConfig c;
  c.num_rrdb = std::stoll(require(kv, "num_rrdb"));
  c.base_channels = std::stoll(require(kv, "base_channels"));
  c.growth_channels = std::stoll(require(kv, "growth_channels"));
  c.convs_per_dense_block = std::stoll(require(kv, "convs_per_dense_block"));
  c.dense_blocks_per_rrdb = std::stoll(require(kv, "dense_blocks_per_rrdb"));
  c.residual_scale = std::stod(require(kv, "residual_scale"));
  c.leak = std::stod(require(kv, "leak"));
  c.init_scale = std::stod(require(kv, "init_scale"));
  c.upscale = std::stoll(require(kv, "upscale"));
  c.in_channels = std::stoll(require(kv, "in_channels"));
  return c;
}

std::string describe(const DiscriminatorConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << "input_size = " << c.input_size << "\n"
     << "channel_sequence = " << join_i64(c.channel_sequence) << "\n"
     << "dense_units = " << c.dense_units << "\n"
     << "leak = " << c.leak << "\n"
     << "init_scale = " << c.init_scale << "\n"
     << "in_channels = " << c.in_channels << "\n";
  return os.str();
}

DiscriminatorConfig parse_discriminator_config(const std::string& text) {
  const auto kv = parse_kv(text);
  DiscriminatorConfig c;
  c.input_size = std::stoll(require(kv, "input_size"));
  c.channel_sequence = split_i64(require(kv, "channel_sequence"));
  c.dense_units = std::stoll(require(kv, "dense_units"));
  c.leak = std::stod(require(kv, "leak"));
  c.init_scale = std::stod(require(kv, "init_scale"));
  c.in_channels = std::stoll(require(kv, "in_channels"));
  return c;
}

std::string describe(const LossWeights& w) {
  std::ostringstream os;
  os.precision(17);
  os << "pixel = " << w.pixel << "\n"
     << "perceptual = " << w.perceptual << "\n"
     << "adversarial = " << w.adversarial << "\n"
     << "pixel_norm = " << (w.pixel_norm == Norm::l1 ? "l1" : "l2") << "\n"
     << "perceptual_norm = " << (w.perceptual_norm == Norm::l1 ? "l1" : "l2") << "\n"
     << "use_texture = " << (w.use_texture_instead_of_perceptual ? 1 : 0) << "\n";
  return os.str();
}

}  // namespace microsr
