#include "amwg/brownian.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "amwg/errors.hpp"
#include "amwg/random.hpp"

namespace amwg {
namespace {

constexpr char kMagic[8] = {'A', 'M', 'W', 'G', 'B', 'R', 'W', '1'};

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw ArgumentError("BrownianStore::load: truncated header");
  return v;
}

}  // namespace

BrownianStore BrownianStore::sample(std::uint64_t seed, int realizations, int blocks, int block_size, int steps,
                                    double h) {
  if (realizations <= 0 || blocks <= 0 || block_size <= 0 || steps <= 0) {
    throw ArgumentError("BrownianStore::sample: all dimensions must be positive");
  }
  BrownianStore store;
  store.s_ = realizations;
  store.m_ = blocks;
  store.b_ = block_size;
  store.steps_ = steps;
  store.h_ = h;
  store.data_.resize(static_cast<std::size_t>(realizations) * steps * blocks * block_size);

  // One stream per realization so S can grow without changing earlier paths.
  const std::size_t per = store.data_.size() / static_cast<std::size_t>(realizations);
  for (int c = 0; c < realizations; ++c) {
    Rng rng = make_rng(seed, {0x62726f776eULL, static_cast<std::uint64_t>(c)});
    std::normal_distribution<double> normal;
    double* dst = store.data_.data() + per * static_cast<std::size_t>(c);
    for (std::size_t k = 0; k < per; ++k) dst[k] = normal(rng);
  }
  return store;
}

BrownianStore BrownianStore::from_increments(int realizations, int blocks, int block_size, int steps, double h,
                                             std::vector<double> data) {
  if (realizations <= 0 || blocks <= 0 || block_size <= 0 || steps <= 0) {
    throw ArgumentError("BrownianStore::from_increments: all dimensions must be positive");
  }
  if (data.size() != static_cast<std::size_t>(realizations) * steps * blocks * block_size) {
    throw ArgumentError("BrownianStore::from_increments: data size does not match the dimensions");
  }
  BrownianStore store;
  store.s_ = realizations;
  store.m_ = blocks;
  store.b_ = block_size;
  store.steps_ = steps;
  store.h_ = h;
  store.data_ = std::move(data);
  return store;
}

BrownianStore BrownianStore::deterministic(int realizations, int blocks, int block_size) {
  if (realizations <= 0 || blocks <= 0 || block_size <= 0) {
    throw ArgumentError("BrownianStore::deterministic: dimensions must be positive");
  }
  BrownianStore store;
  store.s_ = realizations;
  store.m_ = blocks;
  store.b_ = block_size;
  return store;
}

void BrownianStore::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ArgumentError("BrownianStore::save: cannot open " + path.string());
  os.write(kMagic, sizeof(kMagic));
  for (int d : {s_, steps_, m_, b_}) write_pod(os, static_cast<std::uint64_t>(d));
  write_pod(os, h_);
  os.write(reinterpret_cast<const char*>(data_.data()), static_cast<std::streamsize>(data_.size() * sizeof(double)));
  if (!os) throw ArgumentError("BrownianStore::save: write failed for " + path.string());
}

BrownianStore BrownianStore::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ArgumentError("BrownianStore::load: cannot open " + path.string());
  char magic[sizeof(kMagic)];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw ArgumentError("BrownianStore::load: bad magic in " + path.string());
  }
  BrownianStore store;
  store.s_ = static_cast<int>(read_pod<std::uint64_t>(is));
  store.steps_ = static_cast<int>(read_pod<std::uint64_t>(is));
  store.m_ = static_cast<int>(read_pod<std::uint64_t>(is));
  store.b_ = static_cast<int>(read_pod<std::uint64_t>(is));
  store.h_ = read_pod<double>(is);
  const std::size_t count =
      static_cast<std::size_t>(store.s_) * store.steps_ * store.m_ * static_cast<std::size_t>(store.b_);
  store.data_.resize(count);
  is.read(reinterpret_cast<char*>(store.data_.data()), static_cast<std::streamsize>(count * sizeof(double)));
  if (!is) throw ArgumentError("BrownianStore::load: truncated payload in " + path.string());
  return store;
}

}  // namespace amwg
