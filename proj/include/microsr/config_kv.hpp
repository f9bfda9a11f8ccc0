#pragma once

#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "microsr/losses.hpp"
#include "microsr/models.hpp"

namespace microsr {

// Flat `key = value` text, one pair per line, '#' comments.
std::map<std::string, std::string> parse_kv(const std::string& text);

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string join_i64(const std::vector<std::int64_t>& v);
std::vector<std::int64_t> split_i64(const std::string& s);

std::string describe(const GeneratorConfig& c);
GeneratorConfig parse_generator_config(const std::string& text);

std::string describe(const DiscriminatorConfig& c);
DiscriminatorConfig parse_discriminator_config(const std::string& text);

std::string describe(const LossWeights& w);

}  // namespace microsr
