#include "jarn/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "jarn/errors.hpp"

namespace jarn::checkpoint {

namespace {

constexpr char kCkptMagic[8] = {'J', 'R', 'N', 'C', 'K', 'P', 'T', '1'};
constexpr char kTensMagic[8] = {'J', 'R', 'N', 'T', 'E', 'N', 'S', '1'};

void put_u64(std::ostream& os, uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }
void put_i64(std::ostream& os, int64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }
void put_u8(std::ostream& os, uint8_t v) { os.write(reinterpret_cast<const char*>(&v), 1); }

void put_string(std::ostream& os, const std::string& s) {
  put_u64(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

uint64_t get_u64(std::istream& is, const std::string& path) {
  uint64_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), 8)) {
    throw PreconditionError("checkpoint: truncated file " + path);
  }
  return v;
}

int64_t get_i64(std::istream& is, const std::string& path) {
  return static_cast<int64_t>(get_u64(is, path));
}

uint8_t get_u8(std::istream& is, const std::string& path) {
  char c = 0;
  if (!is.read(&c, 1)) throw PreconditionError("checkpoint: truncated file " + path);
  return static_cast<uint8_t>(c);
}

std::string get_string(std::istream& is, const std::string& path) {
  const uint64_t n = get_u64(is, path);
  std::string s(n, '\0');
  if (n && !is.read(s.data(), static_cast<std::streamsize>(n))) {
    throw PreconditionError("checkpoint: truncated file " + path);
  }
  return s;
}

void put_shape(std::ostream& os, const Shape& s) {
  put_u64(os, s.size());
  for (int64_t d : s) put_i64(os, d);
}

Shape get_shape(std::istream& is, const std::string& path) {
  const uint64_t rank = get_u64(is, path);
  if (rank > 8) throw PreconditionError("checkpoint: implausible tensor rank in " + path);
  Shape s(rank);
  for (auto& d : s) d = get_i64(is, path);
  return s;
}

void put_tensor(std::ostream& os, const nn::Param& p) {
  put_string(os, p.name);
  put_shape(os, p.value.shape());
  const auto& v = p.value.values();
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(double)));
}

nn::Param get_tensor(std::istream& is, const std::string& path) {
  nn::Param p;
  p.name = get_string(is, path);
  Shape s = get_shape(is, path);
  std::vector<double> v(static_cast<size_t>(numel(s)));
  if (!v.empty() &&
      !is.read(reinterpret_cast<char*>(v.data()),
               static_cast<std::streamsize>(v.size() * sizeof(double)))) {
    throw PreconditionError("checkpoint: truncated tensor payload in " + path);
  }
  p.value = Tensor(std::move(s), std::move(v));
  return p;
}

}  // namespace

const nn::ParameterStore& Checkpoint::store(nn::Owner owner) const {
  for (const auto& s : stores) {
    if (s.owner == owner) return s;
  }
  throw PreconditionError(std::string("checkpoint: no '") + nn::owner_name(owner) + "' store");
}

bool Checkpoint::has(nn::Owner owner) const {
  for (const auto& s : stores) {
    if (s.owner == owner) return true;
  }
  return false;
}

void save(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("checkpoint: cannot open for writing: " + path);
  os.write(kCkptMagic, 8);
  put_string(os, ckpt.meta);
  put_u64(os, ckpt.stores.size());
  for (const auto& store : ckpt.stores) {
    put_u8(os, static_cast<uint8_t>(store.owner));
    put_shape(os, store.input_hwc);
    put_string(os, store.spec.to_text());
    put_u64(os, store.params.size());
    for (const auto& p : store.params) put_tensor(os, p);
  }
  if (!os.flush()) throw IoError("checkpoint: write failed: " + path);
}

Checkpoint load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("checkpoint: cannot open: " + path);
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kCkptMagic, 8) != 0) {
    throw PreconditionError("checkpoint: bad magic in " + path);
  }
  Checkpoint ckpt;
  ckpt.meta = get_string(is, path);
  const uint64_t n_stores = get_u64(is, path);
  for (uint64_t i = 0; i < n_stores; ++i) {
    nn::ParameterStore store;
    store.owner = static_cast<nn::Owner>(get_u8(is, path));
    store.input_hwc = get_shape(is, path);
    store.spec = nn::NetworkSpec::from_text(get_string(is, path));
    const uint64_t n_params = get_u64(is, path);
    store.params.reserve(n_params);
    for (uint64_t p = 0; p < n_params; ++p) store.params.push_back(get_tensor(is, path));
    ckpt.stores.push_back(std::move(store));
  }
  return ckpt;
}

void save_tensors(const std::vector<nn::Param>& tensors, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("tensor dump: cannot open for writing: " + path);
  os.write(kTensMagic, 8);
  put_u64(os, tensors.size());
  for (const auto& t : tensors) put_tensor(os, t);
  if (!os.flush()) throw IoError("tensor dump: write failed: " + path);
}

std::vector<nn::Param> load_tensors(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("tensor dump: cannot open: " + path);
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kTensMagic, 8) != 0) {
    throw PreconditionError("tensor dump: bad magic in " + path);
  }
  const uint64_t n = get_u64(is, path);
  std::vector<nn::Param> out;
  out.reserve(n);
  for (uint64_t i = 0; i < n; ++i) out.push_back(get_tensor(is, path));
  return out;
}

}  // namespace jarn::checkpoint
