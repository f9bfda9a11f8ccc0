#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "microsr/tensor.hpp"

namespace microsr {

enum class DType : std::uint8_t { f32 = 0, f64 = 1, i64 = 2, u8 = 3 };

inline std::size_t dtype_size(DType d) {
  switch (d) {
    case DType::f32: return 4;
    case DType::f64: return 8;
    case DType::i64: return 8;
    case DType::u8: return 1;
  }
  throw DataError("unknown dtype tag");
}

// Versioned binary key-value container: magic bytes, format version, then
// name -> dtype/shape/data records in insertion order. Save/load/save is
// byte-identical.
class Container {
 public:
  struct Entry {
    std::string name;
    DType dtype = DType::f32;
    Shape shape;
    std::vector<std::uint8_t> payload;
  };

  static constexpr std::uint32_t kVersion = 1;

  bool has(const std::string& name) const { return index_.count(name) > 0; }
  std::size_t size() const { return entries_.size(); }
  const std::vector<Entry>& entries() const { return entries_; }

  void put_raw(const std::string& name, DType dtype, Shape shape,
               std::vector<std::uint8_t> payload);

  template <typename T>
  void put_array(const std::string& name, const Shape& shape, const std::vector<T>& values) {
    static_assert(std::is_same_v<T, float> || std::is_same_v<T, double> ||
                  std::is_same_v<T, std::int64_t>);
    DType d = std::is_same_v<T, float>    ? DType::f32
              : std::is_same_v<T, double> ? DType::f64
                                          : DType::i64;
    std::vector<std::uint8_t> bytes(values.size() * sizeof(T));
    std::memcpy(bytes.data(), values.data(), bytes.size());
    put_raw(name, d, shape, std::move(bytes));
  }

  void put_i64(const std::string& name, std::int64_t v) {
    put_array<std::int64_t>(name, Shape{1}, {v});
  }
  void put_f64(const std::string& name, double v) { put_array<double>(name, Shape{1}, {v}); }
  void put_string(const std::string& name, const std::string& s);

  const Entry& get(const std::string& name) const;

  template <typename T>
  std::vector<T> get_array(const std::string& name, Shape* shape_out = nullptr) const {
    const Entry& e = get(name);
    DType want = std::is_same_v<T, float>    ? DType::f32
                 : std::is_same_v<T, double> ? DType::f64
                                             : DType::i64;
    if (e.dtype != want) {
      throw DataError("container entry '" + name + "': dtype mismatch");
    }
    std::vector<T> out(e.payload.size() / sizeof(T));
    std::memcpy(out.data(), e.payload.data(), e.payload.size());
    if (shape_out) *shape_out = e.shape;
    return out;
  }

  std::int64_t get_i64(const std::string& name) const {
    return get_array<std::int64_t>(name).at(0);
  }
  double get_f64(const std::string& name) const { return get_array<double>(name).at(0); }
  std::string get_string(const std::string& name) const;

  void save(const std::string& path) const;
  static Container load(const std::string& path);

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace microsr
