#include <algorithm>
#include <numeric>
#include <random>

#include "kgprompt/lm/transformer_lm.hpp"
#include "kgprompt/numerics/optim.hpp"

namespace kgprompt::lm {

std::vector<double> pretrain(TransformerLM<float>& lm, std::span<const LmExample> corpus, const PretrainConfig& cfg) {
  if (corpus.empty()) throw std::invalid_argument("pretrain: empty corpus");
  lm.unfreeze();
  num::Adam<float> adam(lm.params().trainable());
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<std::size_t> pick(0, corpus.size() - 1);
  const std::size_t batch = std::max<std::size_t>(1, cfg.batch_size);
  std::vector<double> losses;
  losses.reserve(cfg.steps);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    double total = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      const LmExample& ex = corpus[pick(rng)];
      num::Tape<float> tape;
      auto loss = lm.sequence_nll(tape, lm.embed_tokens(tape, ex.prompt), ex.answer);
      auto scaled = num::scale(loss, 1.0 / double(batch));
      total += loss.value().item();
      tape.backward(scaled);
    }
    adam.step(num::cosine_lr(step, cfg.steps, cfg.lr));
    losses.push_back(total / double(batch));
  }
  lm.freeze();
  return losses;
}

}  // namespace kgprompt::lm
