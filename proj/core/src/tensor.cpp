#include "pslab/tensor.hpp"

#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace pslab {

namespace {
std::atomic<bool> g_debug_checks{
#ifdef NDEBUG
    false
#else
    true
#endif
};
}  // namespace

bool debug_checks_enabled() { return g_debug_checks.load(std::memory_order_relaxed); }
void set_debug_checks(bool on) { g_debug_checks.store(on, std::memory_order_relaxed); }

std::string shape_str(const Shape& s) {
  std::ostringstream oss;
  oss << '[';
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) oss << 'x';
    oss << s[i];
  }
  oss << ']';
  return oss.str();
}

std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (int d : s) {
    PSLAB_CHECK_SHAPE(d > 0, "non-positive dimension in shape " << shape_str(s));
    n *= d;
  }
  return n;
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(static_cast<size_t>(shape_numel(shape_)), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  PSLAB_CHECK_SHAPE(shape_numel(shape_) == static_cast<std::int64_t>(data_.size()),
                    "data length " << data_.size() << " does not match shape " << shape_str(shape_));
}

namespace {
std::int64_t flat_offset(const Shape& shape, std::initializer_list<int> idx) {
  PSLAB_CHECK_SHAPE(idx.size() == shape.size(), "index rank mismatch for " << shape_str(shape));
  std::int64_t off = 0;
  size_t k = 0;
  for (int i : idx) {
    PSLAB_CHECK_SHAPE(i >= 0 && i < shape[k], "index out of range for " << shape_str(shape));
    off = off * shape[k] + i;
    ++k;
  }
  return off;
}
}  // namespace

double& Tensor::at(std::initializer_list<int> idx) {
  return data_[static_cast<size_t>(flat_offset(shape_, idx))];
}

double Tensor::at(std::initializer_list<int> idx) const {
  return data_[static_cast<size_t>(flat_offset(shape_, idx))];
}

std::vector<double>& Tensor::grad() {
  if (grad_.empty()) grad_.assign(data_.size(), 0.0);
  return grad_;
}

const std::vector<double>& Tensor::grad() const {
  PSLAB_CHECK(!grad_.empty(), "grad accessed before allocation");
  return grad_;
}

void Tensor::zero_grad() { grad_.assign(data_.size(), 0.0); }

void Tensor::assert_finite(const char* context) const {
  for (double v : data_) {
    if (!std::isfinite(v)) {
      throw Error(std::string("non-finite value in ") + context);
    }
  }
}

namespace {

constexpr char kMagic[4] = {'P', 'S', 'L', 'T'};
constexpr std::uint32_t kFormatVersion = 1;

template <typename T>
void write_le(std::ostream& out, T v) {
  // Little-endian byte order; this code targets LE hosts.
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw IoError("truncated tensor stream");
  return v;
}

}  // namespace

void write_tensor(std::ostream& out, const Tensor& t, Dtype dtype) {
  out.write(kMagic, 4);
  write_le<std::uint32_t>(out, kFormatVersion);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
  for (int d : t.shape()) write_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  write_le<std::uint8_t>(out, static_cast<std::uint8_t>(dtype));
  if (dtype == Dtype::f64) {
    out.write(reinterpret_cast<const char*>(t.data()), t.numel() * 8);
  } else {
    for (std::int64_t i = 0; i < t.numel(); ++i) write_le<float>(out, static_cast<float>(t[i]));
  }
  if (!out) throw IoError("failed to write tensor");
}

Tensor read_tensor(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw IoError("bad tensor magic");
  const auto version = read_le<std::uint32_t>(in);
  if (version != kFormatVersion) throw IoError("unsupported tensor format version");
  const auto rank = read_le<std::uint32_t>(in);
  PSLAB_CHECK(rank <= 8, "implausible tensor rank " << rank);
  Shape shape(rank);
  for (auto& d : shape) d = static_cast<int>(read_le<std::uint32_t>(in));
  const auto tag = read_le<std::uint8_t>(in);
  Tensor t(shape);
  if (tag == static_cast<std::uint8_t>(Dtype::f64)) {
    in.read(reinterpret_cast<char*>(t.data()), t.numel() * 8);
    if (!in) throw IoError("truncated tensor stream");
  } else if (tag == static_cast<std::uint8_t>(Dtype::f32)) {
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<double>(read_le<float>(in));
  } else {
    throw IoError("unknown tensor dtype tag");
  }
  return t;
}

void save_tensor(const std::string& path, const Tensor& t, Dtype dtype) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for write: " + path);
  write_tensor(f, t, dtype);
}

Tensor load_tensor(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for read: " + path);
  return read_tensor(f);
}

}  // namespace pslab
