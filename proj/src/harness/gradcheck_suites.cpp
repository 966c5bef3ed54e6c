#include "kgprompt/harness/gradcheck_suites.hpp"

#include <functional>
#include <random>

#include "kgprompt/adapter/knowledge_adapter.hpp"
#include "kgprompt/lm/transformer_lm.hpp"
#include "kgprompt/numerics/gradcheck.hpp"

namespace kgprompt::harness {

using num::Shape;
using num::Tape;
using num::Var;
using D = double;
using TensorD = num::Tensor<D>;

namespace {

TensorD random(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  TensorD t(std::move(shape));
  std::uniform_real_distribution<double> d(lo, hi);
  for (auto& v : t.values()) v = d(rng);
  return t;
}

// Values in [0.05, 1] with random sign, away from kinks at zero.
TensorD away_from_zero(Shape shape, std::mt19937_64& rng) {
  TensorD t = random(std::move(shape), rng, 0.05, 1.0);
  std::bernoulli_distribution sign(0.5);
  for (auto& v : t.values()) v = sign(rng) ? v : -v;
  return t;
}

std::size_t dim(std::mt19937_64& rng, std::size_t lo = 1, std::size_t hi = 6) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

// sum(out * R) for a fixed random R, so every output entry matters.
Var<D> project(Tape<D>& tape, const Var<D>& out, const TensorD& r) {
  return num::sum(num::mul(out, tape.constant(r)));
}

struct Case {
  std::vector<TensorD> inputs;
  num::InputLoss<D> loss;
};

using CaseMaker = std::function<Case(std::mt19937_64&)>;

// A unary-or-more op whose output shape is known after a dry run.
Case with_projection(std::vector<TensorD> inputs, std::function<Var<D>(Tape<D>&, std::span<const Var<D>>)> op,
                     std::mt19937_64& rng) {
  Shape out_shape;
  {
    Tape<D> tape;
    std::vector<Var<D>> vars;
    for (const auto& x : inputs) vars.push_back(tape.constant(x));
    out_shape = op(tape, vars).shape();
  }
  TensorD r = random(out_shape, rng);
  return {std::move(inputs), [op, r](Tape<D>& tape, std::span<const Var<D>> v) { return project(tape, op(tape, v), r); }};
}

std::vector<std::pair<std::string, CaseMaker>> primitive_makers() {
  std::vector<std::pair<std::string, CaseMaker>> m;
  m.emplace_back("matmul", [](std::mt19937_64& g) {
    const auto r = dim(g), k = dim(g), c = dim(g);
    return with_projection({random({r, k}, g), random({k, c}, g)}, [](Tape<D>&, auto v) { return num::matmul(v[0], v[1]); }, g);
  });
  m.emplace_back("matmul_transposed", [](std::mt19937_64& g) {
    const auto r = dim(g), k = dim(g), c = dim(g);
    return with_projection({random({r, k}, g), random({c, k}, g)},
                           [](Tape<D>&, auto v) { return num::matmul_transposed(v[0], v[1]); }, g);
  });
  m.emplace_back("add", [](std::mt19937_64& g) {
    const auto r = dim(g), c = dim(g);
    return with_projection({random({r, c}, g), random({r, c}, g)}, [](Tape<D>&, auto v) { return num::add(v[0], v[1]); }, g);
  });
  m.emplace_back("add_row_broadcast", [](std::mt19937_64& g) {
    const auto r = dim(g, 2), c = dim(g);
    return with_projection({random({r, c}, g), random({1, c}, g)}, [](Tape<D>&, auto v) { return num::add(v[0], v[1]); }, g);
  });
  m.emplace_back("sub", [](std::mt19937_64& g) {
    const auto r = dim(g), c = dim(g);
    return with_projection({random({r, c}, g), random({r, c}, g)}, [](Tape<D>&, auto v) { return num::sub(v[0], v[1]); }, g);
  });
  m.emplace_back("mul", [](std::mt19937_64& g) {
    const auto r = dim(g), c = dim(g);
    return with_projection({random({r, c}, g), random({r, c}, g)}, [](Tape<D>&, auto v) { return num::mul(v[0], v[1]); }, g);
  });
  m.emplace_back("scale", [](std::mt19937_64& g) {
    const auto r = dim(g), c = dim(g);
    const double f = std::uniform_real_distribution<double>(-3, 3)(g);
    return with_projection({random({r, c}, g)}, [f](Tape<D>&, auto v) { return num::scale(v[0], f); }, g);
  });
  m.emplace_back("tanh", [](std::mt19937_64& g) {
    const auto r = dim(g), c = dim(g);
    return with_projection({random({r, c}, g, -2, 2)}, [](Tape<D>&, auto v) { return num::tanh(v[0]); }, g);
  });
  m.emplace_back("relu", [](std::mt19937_64& g) {
    const auto r = dim(g), c = dim(g);
    return with_projection({away_from_zero({r, c}, g)}, [](Tape<D>&, auto v) { return num::relu(v[0]); }, g);
  });
  m.emplace_back("gelu", [](std::mt19937_64& g) {
    const auto r = dim(g), c = dim(g);
    return with_projection({random({r, c}, g, -3, 3)}, [](Tape<D>&, auto v) { return num::gelu(v[0]); }, g);
  });
  m.emplace_back("transpose", [](std::mt19937_64& g) {
    const auto r = dim(g), c = dim(g);
    return with_projection({random({r, c}, g)}, [](Tape<D>&, auto v) { return num::transpose(v[0]); }, g);
  });
  m.emplace_back("concat_rows", [](std::mt19937_64& g) {
    const auto c = dim(g);
    return with_projection({random({dim(g), c}, g), random({dim(g), c}, g), random({dim(g), c}, g)},
                           [](Tape<D>&, auto v) { return num::concat<D>(v, 0); }, g);
  });
  m.emplace_back("concat_cols", [](std::mt19937_64& g) {
    const auto r = dim(g);
    return with_projection({random({r, dim(g)}, g), random({r, dim(g)}, g)},
                           [](Tape<D>&, auto v) { return num::concat<D>(v, 1); }, g);
  });
  m.emplace_back("slice_rows", [](std::mt19937_64& g) {
    const auto r = dim(g, 2, 8), c = dim(g);
    const auto b = dim(g, 0, r - 1);
    const auto n = dim(g, 1, r - b);
    return with_projection({random({r, c}, g)}, [b, n](Tape<D>&, auto v) { return num::slice_rows(v[0], b, n); }, g);
  });
  m.emplace_back("slice_cols", [](std::mt19937_64& g) {
    const auto r = dim(g), c = dim(g, 2, 8);
    const auto b = dim(g, 0, c - 1);
    const auto n = dim(g, 1, c - b);
    return with_projection({random({r, c}, g)}, [b, n](Tape<D>&, auto v) { return num::slice_cols(v[0], b, n); }, g);
  });
  m.emplace_back("mean_axis0", [](std::mt19937_64& g) {
    return with_projection({random({dim(g), dim(g)}, g)}, [](Tape<D>&, auto v) { return num::mean(v[0], 0); }, g);
  });
  m.emplace_back("mean_axis1", [](std::mt19937_64& g) {
    return with_projection({random({dim(g), dim(g)}, g)}, [](Tape<D>&, auto v) { return num::mean(v[0], 1); }, g);
  });
  m.emplace_back("sum", [](std::mt19937_64& g) {
    TensorD x = random({dim(g), dim(g)}, g);
    return Case{{x}, [](Tape<D>&, std::span<const Var<D>> v) { return num::sum(num::mul(v[0], v[0])); }};
  });
  m.emplace_back("softmax", [](std::mt19937_64& g) {
    return with_projection({random({dim(g), dim(g, 2)}, g, -3, 3)}, [](Tape<D>&, auto v) { return num::softmax(v[0]); }, g);
  });
  m.emplace_back("causal_softmax", [](std::mt19937_64& g) {
    const auto n = dim(g, 2);
    return with_projection({random({n, n}, g, -3, 3)}, [](Tape<D>&, auto v) { return num::causal_softmax(v[0]); }, g);
  });
  m.emplace_back("layer_norm", [](std::mt19937_64& g) {
    const auto r = dim(g), c = dim(g, 2, 16);
    return with_projection({random({r, c}, g, -2, 2), random({1, c}, g), random({1, c}, g)},
                           [](Tape<D>&, auto v) { return num::layer_norm(v[0], v[1], v[2]); }, g);
  });
  m.emplace_back("gather_rows", [](std::mt19937_64& g) {
    const auto rows = dim(g, 2), c = dim(g);
    std::vector<std::size_t> ids(dim(g, 1, 8));
    for (auto& i : ids) i = dim(g, 0, rows - 1);  // repeats allowed
    return with_projection({random({rows, c}, g)},
                           [ids](Tape<D>&, auto v) { return num::gather_rows(v[0], std::span<const std::size_t>(ids)); }, g);
  });
  for (auto red : {num::Reduction::Mean, num::Reduction::Sum}) {
    m.emplace_back(red == num::Reduction::Mean ? "cross_entropy_mean" : "cross_entropy_sum", [red](std::mt19937_64& g) {
      const auto r = dim(g), c = dim(g, 2);
      std::vector<std::size_t> t(r);
      for (auto& x : t) x = dim(g, 0, c - 1);
      return Case{{random({r, c}, g, -3, 3)}, [t, red](Tape<D>&, std::span<const Var<D>> v) {
                    return num::cross_entropy(v[0], std::span<const std::size_t>(t), red);
                  }};
    });
  }
  return m;
}

}  // namespace

std::vector<SuiteResult> primitive_gradcheck(std::size_t cases, std::uint64_t seed) {
  std::vector<SuiteResult> out;
  for (const auto& [name, make] : primitive_makers()) {
    SuiteResult s{name, cases, 0, 0.0, ""};
    std::mt19937_64 rng(seed ^ std::hash<std::string>{}(name));
    for (std::size_t c = 0; c < cases; ++c) {
      Case k = make(rng);
      auto r = num::check_input_gradients<D>(k.loss, k.inputs, 1e-4, name);
      s.entries += r.entries;
      if (r.max_relative_error > s.max_relative_error) {
        s.max_relative_error = r.max_relative_error;
        s.worst = "case " + std::to_string(c) + " " + r.worst;
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

adapter::AdapterConfig small_adapter(std::mt19937_64& g, adapter::StructMode mode, bool use_struct) {
  adapter::AdapterConfig c;
  c.entities = dim(g, 4, 8);
  c.relations = dim(g, 2, 4);
  c.dim = 2 * dim(g, 2, 4);  // even, for two heads
  c.ff_dim = dim(g, 4, 12);
  c.lm_dim = 8;
  c.heads = 2;
  c.max_hops = dim(g, 1, 3);
  c.mode = mode;
  c.use_struct = use_struct;
  return c;
}

kg::ReasoningPath random_path(std::mt19937_64& g, const adapter::AdapterConfig& c) {
  kg::ReasoningPath p{static_cast<kg::EntityId>(dim(g, 0, c.entities - 1)), {}};
  const auto hops = dim(g, 1, c.max_hops);
  for (std::size_t h = 0; h < hops; ++h) {
    p.steps.push_back({static_cast<kg::RelationId>(dim(g, 0, c.relations - 1)),
                       static_cast<kg::EntityId>(dim(g, 0, c.entities - 1))});
  }
  return p;
}

lm::TransformerLM<D> small_lm(std::mt19937_64& g) {
  lm::LmConfig c;
  c.vocab = dim(g, 8, 14);
  c.dim = 8;
  c.heads = 2;
  c.layers = 2;
  c.ff_dim = 16;
  c.context = 32;
  lm::TransformerLM<D> m(c, g());
  m.freeze();
  return m;
}

// Parameter check that folds parameter and input errors into one result.
void fold(SuiteResult& s, const num::GradCheckResult& r, std::size_t c) {
  s.entries += r.entries;
  if (r.max_relative_error > s.max_relative_error) {
    s.max_relative_error = r.max_relative_error;
    s.worst = "case " + std::to_string(c) + " " + r.worst;
  }
}

}  // namespace

std::vector<SuiteResult> composed_gradcheck(std::size_t cases, std::uint64_t seed) {
  using adapter::KnowledgeAdapter;
  using adapter::StructMode;
  std::vector<SuiteResult> out;

  {
    SuiteResult s{"adapter.aggregate_struct", cases, 0, 0.0, ""};
    std::mt19937_64 g(seed + 1);
    for (std::size_t c = 0; c < cases; ++c) {
      auto cfg = small_adapter(g, StructMode::HplusRminusT, true);
      KnowledgeAdapter<D> a(cfg, g());
      const std::size_t m = dim(g, 1, cfg.max_hops);
      std::vector<TensorD> inputs;
      for (std::size_t i = 0; i < m; ++i) inputs.push_back(random({1, cfg.dim}, g));
      const TensorD r = random({1, cfg.dim}, g);
      num::InputLoss<D> loss = [&](Tape<D>& t, std::span<const Var<D>> v) { return project(t, a.aggregate_struct(t, v), r); };
      fold(s, num::check_input_gradients<D>(loss, inputs, 1e-4, "s"), c);
      num::ParameterLoss<D> ploss = [&](Tape<D>& t) {
        std::vector<Var<D>> v;
        for (const auto& x : inputs) v.push_back(t.constant(x));
        return project(t, a.aggregate_struct(t, v), r);
      };
      a.params().set_trainable("", false);
      a.params().set_trainable("struct.", true);
      fold(s, num::check_parameter_gradients<D>(a.params(), ploss, 1e-4, 16, c), c);
    }
    out.push_back(s);
  }
  {
    SuiteResult s{"adapter.encode_knowledge", cases, 0, 0.0, ""};
    std::mt19937_64 g(seed + 2);
    for (std::size_t c = 0; c < cases; ++c) {
      auto cfg = small_adapter(g, StructMode::HplusRminusT, true);
      KnowledgeAdapter<D> a(cfg, g());
      std::vector<TensorD> inputs{random({1, 3 * cfg.dim}, g), random({1, cfg.dim}, g)};
      const TensorD r = random({1, cfg.dim}, g);
      num::InputLoss<D> loss = [&](Tape<D>& t, std::span<const Var<D>> v) {
        return project(t, a.encode_knowledge(t, v[0], &v[1]), r);
      };
      fold(s, num::check_input_gradients<D>(loss, inputs, 1e-4, "z"), c);
      num::ParameterLoss<D> ploss = [&](Tape<D>& t) {
        const auto zs = t.constant(inputs[1]);
        return project(t, a.encode_knowledge(t, t.constant(inputs[0]), &zs), r);
      };
      a.params().set_trainable("", false);
      a.params().set_trainable("encoder.", true);
      fold(s, num::check_parameter_gradients<D>(a.params(), ploss, 1e-4, 16, c), c);
    }
    out.push_back(s);
  }
  for (auto [name, mode, use_struct] : {std::tuple{"adapter.soft_prompt h+r-t", StructMode::HplusRminusT, true},
                                        std::tuple{"adapter.soft_prompt h+r+t", StructMode::HplusRplusT, true},
                                        std::tuple{"adapter.soft_prompt no-struct", StructMode::HplusRminusT, false}}) {
    SuiteResult s{name, cases, 0, 0.0, ""};
    std::mt19937_64 g(seed + 3 + static_cast<std::uint64_t>(mode) + (use_struct ? 0 : 7));
    for (std::size_t c = 0; c < cases; ++c) {
      auto cfg = small_adapter(g, mode, use_struct);
      KnowledgeAdapter<D> a(cfg, g());
      std::vector<kg::ReasoningPath> paths;
      for (std::size_t n = dim(g, 1, 3); n > 0; --n) paths.push_back(random_path(g, cfg));
      const TensorD r = random({paths.size(), cfg.lm_dim}, g);
      num::ParameterLoss<D> ploss = [&](Tape<D>& t) { return project(t, a.soft_prompt(t, paths), r); };
      fold(s, num::check_parameter_gradients<D>(a.params(), ploss, 1e-4, 16, c), c);
    }
    out.push_back(s);
  }
  {
    SuiteResult s{"lm.answer_nll soft vectors", cases, 0, 0.0, ""};
    std::mt19937_64 g(seed + 20);
    for (std::size_t c = 0; c < cases; ++c) {
      auto m = small_lm(g);
      const auto v = m.vocab_size();
      std::vector<std::size_t> hard{lm::Tokenizer::kBos};
      for (std::size_t i = dim(g, 0, 4); i > 0; --i) hard.push_back(dim(g, lm::Tokenizer::kReserved, v - 1));
      hard.push_back(lm::Tokenizer::kGraphSlot);
      for (std::size_t i = dim(g, 0, 4); i > 0; --i) hard.push_back(dim(g, lm::Tokenizer::kReserved, v - 1));
      std::vector<std::size_t> answer;
      for (std::size_t i = dim(g, 1, 3); i > 0; --i) answer.push_back(dim(g, 1, v - 1));
      const auto red = c % 2 == 0 ? num::Reduction::Mean : num::Reduction::Sum;
      std::vector<TensorD> soft{random({dim(g, 1, 4), m.width()}, g)};
      num::InputLoss<D> loss = [&](Tape<D>& t, std::span<const Var<D>> x) {
        lm::MixedPrompt<D> p{hard, {x[0]}};
        return m.answer_nll(t, p, answer, red);
      };
      fold(s, num::check_input_gradients<D>(loss, soft, 1e-4, "soft"), c);
    }
    out.push_back(s);
  }
  {
    SuiteResult s{"adapter+lm end to end", cases, 0, 0.0, ""};
    std::mt19937_64 g(seed + 30);
    for (std::size_t c = 0; c < cases; ++c) {
      auto m = small_lm(g);
      auto cfg = small_adapter(g, c % 2 == 0 ? StructMode::HplusRminusT : StructMode::HplusRplusT, true);
      cfg.lm_dim = m.width();
      KnowledgeAdapter<D> a(cfg, g());
      std::vector<kg::ReasoningPath> paths;
      for (std::size_t n = dim(g, 1, 3); n > 0; --n) paths.push_back(random_path(g, cfg));
      const auto v = m.vocab_size();
      std::vector<std::size_t> hard{lm::Tokenizer::kBos, dim(g, 4, v - 1), lm::Tokenizer::kGraphSlot, dim(g, 4, v - 1)};
      std::vector<std::size_t> answer{dim(g, 4, v - 1), lm::Tokenizer::kEos};
      num::ParameterLoss<D> ploss = [&](Tape<D>& t) {
        lm::MixedPrompt<D> p{hard, {a.soft_prompt(t, paths)}};
        return m.answer_nll(t, p, answer);
      };
      fold(s, num::check_parameter_gradients<D>(a.params(), ploss, 1e-4, 16, c), c);
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace kgprompt::harness
