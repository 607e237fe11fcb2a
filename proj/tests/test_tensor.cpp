#include <doctest.h>

#include <limits>
#include <sstream>

#include "pslab/tensor.hpp"

using namespace pslab;

TEST_CASE("tensor shape and data invariants") {
  Tensor t({2, 3}, 1.5);
  CHECK(t.numel() == 6);
  CHECK(t.at({1, 2}) == 1.5);
  t.at({0, 1}) = -2.0;
  CHECK(t[1] == -2.0);

  CHECK_THROWS_AS(Tensor({2, 3}, std::vector<double>(5, 0.0)), ShapeError);
  CHECK_THROWS_AS(Tensor({0, 3}), ShapeError);
  CHECK_THROWS_AS(t.at({2, 0}), ShapeError);
}

TEST_CASE("grad buffer matches shape and zeroes") {
  Tensor t({4});
  CHECK(!t.has_grad());
  t.grad()[2] = 7.0;
  CHECK(t.has_grad());
  CHECK(t.grad().size() == 4);
  t.zero_grad();
  CHECK(t.grad()[2] == 0.0);
}

TEST_CASE("finite check raises when enabled") {
  const bool was = debug_checks_enabled();
  set_debug_checks(true);
  Tensor t({2});
  t[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(t.assert_finite("test"), Error);
  set_debug_checks(was);
}

TEST_CASE("tensor serialization round-trips f64 exactly") {
  Tensor t({2, 2, 3});
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = 0.1 * static_cast<double>(i) - 0.37;
  std::stringstream buf;
  write_tensor(buf, t);
  Tensor back = read_tensor(buf);
  CHECK(back.shape() == t.shape());
  for (std::int64_t i = 0; i < t.numel(); ++i) CHECK(back[i] == t[i]);
}

TEST_CASE("tensor serialization f32 tag downcasts") {
  Tensor t({3}, {0.5, -1.25, 2.0});  // exactly representable in f32
  std::stringstream buf;
  write_tensor(buf, t, Dtype::f32);
  Tensor back = read_tensor(buf);
  CHECK(back[0] == 0.5);
  CHECK(back[1] == -1.25);
  CHECK(back[2] == 2.0);
}

TEST_CASE("tensor stream errors") {
  std::stringstream buf("XXXX");
  CHECK_THROWS_AS(read_tensor(buf), IoError);
  std::stringstream trunc;
  Tensor t({8}, 1.0);
  write_tensor(trunc, t);
  std::string bytes = trunc.str();
  bytes.resize(bytes.size() - 4);
  std::stringstream cut(bytes);
  CHECK_THROWS_AS(read_tensor(cut), IoError);
}
