#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "kgprompt/numerics/archive.hpp"
#include "kgprompt/numerics/gradcheck.hpp"
#include "kgprompt/numerics/layers.hpp"
#include "kgprompt/numerics/ops.hpp"
#include "kgprompt/numerics/optim.hpp"

using namespace kgprompt::num;

namespace {

template <class T>
Tensor<T> random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<T> t(std::move(shape));
  std::uniform_real_distribution<double> d(lo, hi);
  for (auto& v : t.values()) v = static_cast<T>(d(rng));
  return t;
}

}  // namespace

TEST_CASE("forward values of basic primitives") {
  Tape<float> tape;
  SUBCASE("softmax of zeros is uniform") {
    auto y = softmax(tape.constant(Tensor<float>::vector({0.f, 0.f})));
    CHECK(y.value()[0] == doctest::Approx(0.5));
    CHECK(y.value()[1] == doctest::Approx(0.5));
  }
  SUBCASE("cross entropy of uniform logits is ln 2") {
    const std::size_t target[] = {1};
    auto loss = cross_entropy(tape.constant(Tensor<float>::matrix(1, 2, {0.3f, 0.3f})), target);
    CHECK(loss.value().item() == doctest::Approx(std::log(2.0)).epsilon(1e-6));
  }
  SUBCASE("identity matmul") {
    std::mt19937_64 rng(1);
    auto x = random_tensor<float>({3, 4}, rng);
    auto y = matmul(tape.constant(Tensor<float>::identity(3)), tape.constant(x));
    CHECK(y.value().values().size() == x.size());
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y.value()[i] == x[i]);
  }
  SUBCASE("concat, slice and mean") {
    auto a = tape.constant(Tensor<float>::matrix(1, 2, {1, 2}));
    auto b = tape.constant(Tensor<float>::matrix(1, 2, {3, 4}));
    std::vector<Var<float>> parts{a, b};
    auto side = concat<float>(parts, 1);
    CHECK(side.value() == Tensor<float>::matrix(1, 4, {1, 2, 3, 4}));
    auto stacked = concat<float>(parts, 0);
    CHECK(stacked.value() == Tensor<float>::matrix(2, 2, {1, 2, 3, 4}));
    CHECK(mean(stacked, 0).value() == Tensor<float>::matrix(1, 2, {2, 3}));
    CHECK(mean(stacked, 1).value() == Tensor<float>::matrix(2, 1, {1.5f, 3.5f}));
    CHECK(slice_cols(side, 1, 2).value() == Tensor<float>::matrix(1, 2, {2, 3}));
    CHECK(slice_rows(stacked, 1, 1).value() == Tensor<float>::matrix(1, 2, {3, 4}));
  }
}

TEST_CASE("shape mismatches name the operation and shapes") {
  Tape<float> tape;
  auto a = tape.constant(Tensor<float>(Shape{2, 3}));
  auto b = tape.constant(Tensor<float>(Shape{2, 3}));
  try {
    matmul(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("matmul") != std::string::npos);
    CHECK(msg.find("(2, 3)") != std::string::npos);
  }
  CHECK_THROWS_AS(add(a, tape.constant(Tensor<float>(Shape{3, 2}))), ShapeError);
  CHECK_THROWS_AS(Tensor<float>(Shape{2, 0}), ShapeError);
}

TEST_CASE("non-finite results are rejected") {
  Tape<float> tape;
  auto x = tape.constant(Tensor<float>::vector({1e30f}));
  CHECK_THROWS_AS(scale(x, 1e30), NumericError);
}

TEST_CASE("backward on simple losses") {
  SUBCASE("sum gives ones") {
    Tape<float> tape;
    auto w = tape.input(Tensor<float>::vector({0.5f, -2.f, 3.f}));
    tape.backward(sum(w));
    CHECK(tape.grad(w) == Tensor<float>::vector({1.f, 1.f, 1.f}));
  }
  SUBCASE("w dot w at 2 gives 4") {
    Tape<float> tape;
    auto w = tape.input(Tensor<float>::vector({2.f}));
    tape.backward(sum(mul(w, w)));
    CHECK(tape.grad(w)[0] == doctest::Approx(4.0));
  }
  SUBCASE("non-scalar loss is an error") {
    Tape<float> tape;
    auto w = tape.input(Tensor<float>::vector({1.f, 2.f}));
    CHECK_THROWS_AS(tape.backward(scale(w, 2.0)), ShapeError);
  }
  SUBCASE("unreachable inputs hold zero") {
    Tape<float> tape;
    auto used = tape.input(Tensor<float>::vector({1.f}));
    auto unused = tape.input(Tensor<float>::vector({1.f, 2.f}));
    tape.backward(sum(used));
    CHECK(tape.grad(unused) == Tensor<float>::vector({0.f, 0.f}));
  }
  SUBCASE("parameters accumulate across tapes") {
    ParameterStore<float> store;
    const ParamId id = store.add("w", Tensor<float>::vector({1.f, 1.f}));
    for (int i = 0; i < 2; ++i) {
      Tape<float> tape;
      tape.backward(sum(tape.parameter(store[id])));
    }
    CHECK(store[id].grad == Tensor<float>::vector({2.f, 2.f}));
  }
  SUBCASE("frozen parameters get no gradient buffer") {
    ParameterStore<float> store;
    const ParamId id = store.add("w", Tensor<float>::vector({1.f}), false);
    Tape<float> tape;
    auto x = tape.input(Tensor<float>::vector({3.f}));
    tape.backward(sum(mul(x, tape.parameter(store[id]))));
    CHECK(store[id].grad.empty());
    CHECK(tape.grad(x)[0] == doctest::Approx(1.0));
  }
}

TEST_CASE("softmax rows sum to one and layer norm standardizes") {
  std::mt19937_64 rng(7);
  Tape<float> tape;
  auto x = tape.constant(random_tensor<float>({5, 16}, rng, -4, 4));
  auto y = softmax(x);
  for (std::size_t r = 0; r < 5; ++r) {
    double s = 0;
    for (float v : y.value().row(r)) s += v;
    CHECK(std::abs(s - 1.0) < 1e-6);
  }
  auto c = causal_softmax(tape.constant(random_tensor<float>({4, 4}, rng)));
  CHECK(c.value().at(0, 1) == 0.f);
  CHECK(c.value().at(0, 0) == doctest::Approx(1.0));
  auto ln = layer_norm(x, tape.constant(Tensor<float>(Shape{1, 16}, 1.f)), tape.constant(Tensor<float>(Shape{1, 16})));
  for (std::size_t r = 0; r < 5; ++r) {
    double mu = 0, var = 0;
    for (float v : ln.value().row(r)) mu += v;
    mu /= 16;
    for (float v : ln.value().row(r)) var += (v - mu) * (v - mu);
    var /= 16;
    CHECK(std::abs(mu) < 1e-6);
    CHECK(std::abs(var - 1.0) < 1e-4);  // eps=1e-5 inside the square root
  }
}

TEST_CASE("random three-layer composition matches finite differences") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    std::vector<Tensor<double>> inputs{random_tensor<double>({3, 8}, rng), random_tensor<double>({8, 8}, rng),
                                       random_tensor<double>({8, 8}, rng), random_tensor<double>({8, 4}, rng)};
    InputLoss<double> loss = [](Tape<double>&, std::span<const Var<double>> v) {
      auto h1 = tanh(matmul(v[0], v[1]));
      auto h2 = tanh(matmul(h1, v[2]));
      const std::size_t targets[] = {0, 3, 1};
      return cross_entropy(matmul(h2, v[3]), targets);
    };
    auto r = check_input_gradients(loss, inputs);
    CHECK(r.max_relative_error < 1e-4);
  }
}

TEST_CASE("adam") {
  SUBCASE("first step moves by about lr") {
    ParameterStore<float> store;
    const ParamId id = store.add("w", Tensor<float>::vector({0.5f}));
    store[id].grad[0] = 1.f;
    Adam<float> adam(store.trainable());
    adam.step(0.001);
    CHECK(store[id].value[0] == doctest::Approx(0.499).epsilon(1e-5));
    CHECK(store[id].grad[0] == 0.f);
  }
  SUBCASE("zero gradient leaves parameters unchanged") {
    ParameterStore<float> store;
    const ParamId id = store.add("w", Tensor<float>::vector({0.5f, -1.f}));
    Adam<float> adam(store.trainable());
    adam.step(0.01);
    CHECK(store[id].value == Tensor<float>::vector({0.5f, -1.f}));
  }
  SUBCASE("identical runs are bit-identical") {
    auto run = [] {
      std::mt19937_64 rng(3);
      ParameterStore<float> store;
      const ParamId w = store.add("w", uniform_matrix<float>(4, 3, 4, rng));
      Adam<float> adam(store.trainable());
      auto x = random_tensor<float>({2, 4}, rng);
      for (int i = 0; i < 5; ++i) {
        Tape<float> tape;
        const std::size_t t[] = {0, 2};
        tape.backward(cross_entropy(matmul(tape.constant(x), tape.parameter(store[w])), t));
        adam.step(cosine_lr(static_cast<std::size_t>(i), 5, 2e-3));
      }
      return store[w].value;
    };
    CHECK(run() == run());
  }
  SUBCASE("missing gradient buffer is an error") {
    ParameterStore<float> store;
    const ParamId id = store.add("w", Tensor<float>::vector({1.f}));
    Adam<float> adam(store.trainable());
    store[id].grad = Tensor<float>();
    CHECK_THROWS_AS(adam.step(0.1), std::logic_error);
  }
}

TEST_CASE("cosine learning rate") {
  CHECK(cosine_lr(0, 100, 2e-3) == doctest::Approx(2e-3));
  CHECK(cosine_lr(100, 100, 2e-3) == doctest::Approx(0.0));
  CHECK(cosine_lr(50, 100, 2e-3) == doctest::Approx(1e-3));
  CHECK_THROWS(cosine_lr(0, 0, 1.0));
  CHECK_THROWS(cosine_lr(3, 2, 1.0));
}

TEST_CASE("archive round-trips bit-exactly") {
  std::mt19937_64 rng(11);
  ParameterStore<float> store;
  store.add("a.weight", uniform_matrix<float>(3, 5, 3, rng));
  store.add("b", Tensor<float>::vector({1.f / 3.f, -0.f, 1e-38f}));
  Archive ar;
  ar.set_meta("dim", "5");
  ar.set_meta("note", "two words");
  ar.add(store);
  const auto path = std::filesystem::temp_directory_path() / "kgprompt_archive_test.bin";
  write_archive(path, ar);
  Archive back = read_archive(path);
  CHECK(back.require_meta("dim") == "5");
  CHECK(back.require_meta("note") == "two words");
  ParameterStore<float> other;
  other.add("a.weight", Tensor<float>(Shape{3, 5}));
  other.add("b", Tensor<float>(Shape{3}));
  back.restore(other);
  for (std::size_t k = 0; k < 2; ++k) {
    const auto x = store[k].value.values();
    const auto y = other[k].value.values();
    CHECK(std::memcmp(x.data(), y.data(), x.size() * sizeof(float)) == 0);
  }
  ParameterStore<float> wrong;
  wrong.add("a.weight", Tensor<float>(Shape{5, 3}));
  CHECK_THROWS_AS(back.restore(wrong), ArchiveError);
  std::filesystem::remove(path);
}
