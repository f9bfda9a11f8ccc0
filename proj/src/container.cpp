#include "microsr/container.hpp"

#include <cstring>
#include <fstream>

namespace microsr {

namespace {

constexpr char kMagic[4] = {'M', 'S', 'R', 'C'};

template <typename T>
void write_pod(std::ofstream& f, T v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& f, const std::string& path) {
  T v{};
  f.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!f) {
    throw DataError("truncated container file " + path + " at offset " +
                    std::to_string(static_cast<std::int64_t>(f.tellg())));
  }
  return v;
}

}  // namespace

void Container::put_raw(const std::string& name, DType dtype, Shape shape,
                        std::vector<std::uint8_t> payload) {
  const std::size_t expect = static_cast<std::size_t>(numel(shape)) * dtype_size(dtype);
  if (payload.size() != expect) {
    throw DataError("container entry '" + name + "': payload size " +
                    std::to_string(payload.size()) + " != shape " + shape_str(shape));
  }
  auto it = index_.find(name);
  if (it != index_.end()) {
    entries_[it->second] = Entry{name, dtype, std::move(shape), std::move(payload)};
    return;
  }
  index_[name] = entries_.size();
  entries_.push_back(Entry{name, dtype, std::move(shape), std::move(payload)});
}

void Container::put_string(const std::string& name, const std::string& s) {
  std::vector<std::uint8_t> bytes(s.begin(), s.end());
  put_raw(name, DType::u8, Shape{static_cast<std::int64_t>(s.size())}, std::move(bytes));
}

const Container::Entry& Container::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw DataError("container entry not found: " + name);
  return entries_[it->second];
}

std::string Container::get_string(const std::string& name) const {
  const Entry& e = get(name);
  if (e.dtype != DType::u8) throw DataError("container entry '" + name + "' is not a string");
  return std::string(e.payload.begin(), e.payload.end());
}

void Container::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot open for writing: " + path);
  f.write(kMagic, 4);
  write_pod<std::uint32_t>(f, kVersion);
  write_pod<std::uint64_t>(f, entries_.size());
  for (const auto& e : entries_) {
    write_pod<std::uint32_t>(f, static_cast<std::uint32_t>(e.name.size()));
    f.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    write_pod<std::uint8_t>(f, static_cast<std::uint8_t>(e.dtype));
    write_pod<std::uint32_t>(f, static_cast<std::uint32_t>(e.shape.size()));
    for (auto d : e.shape) write_pod<std::int64_t>(f, d);
    write_pod<std::uint64_t>(f, e.payload.size());
    f.write(reinterpret_cast<const char*>(e.payload.data()),
            static_cast<std::streamsize>(e.payload.size()));
  }
  if (!f) throw DataError("write failure: " + path);
}

Container Container::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open container: " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, kMagic, 4) != 0) {
    throw DataError("bad magic bytes in container: " + path);
  }
  const auto version = read_pod<std::uint32_t>(f, path);
  if (version != kVersion) {
    throw DataError("container version " + std::to_string(version) + " unsupported (want " +
                    std::to_string(kVersion) + "): " + path);
  }
  const auto count = read_pod<std::uint64_t>(f, path);
  Container c;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = read_pod<std::uint32_t>(f, path);
    std::string name(name_len, '\0');
    f.read(name.data(), name_len);
    if (!f) throw DataError("truncated container file " + path + " (entry name)");
    const auto dtype_tag = read_pod<std::uint8_t>(f, path);
    if (dtype_tag > 3) throw DataError("bad dtype tag in container: " + path);
    const auto ndim = read_pod<std::uint32_t>(f, path);
    Shape shape(ndim);
    for (auto& d : shape) d = read_pod<std::int64_t>(f, path);
    const auto payload_len = read_pod<std::uint64_t>(f, path);
    std::vector<std::uint8_t> payload(payload_len);
    f.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload_len));
    if (!f) {
      throw DataError("truncated container file " + path + " at offset " +
                      std::to_string(static_cast<std::int64_t>(f.tellg())) + " (entry '" + name +
                      "' payload)");
    }
    c.put_raw(name, static_cast<DType>(dtype_tag), std::move(shape), std::move(payload));
  }
  return c;
}

}  // namespace microsr
