#include "kgprompt/retrieval/hop_classifier.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <random>
#include <sstream>

#include "kgprompt/numerics/layers.hpp"
#include "kgprompt/numerics/optim.hpp"

namespace kgprompt::retrieval {

using num::Tensor;
using num::Var;

std::vector<std::string> HopClassifier::words(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

HopClassifier::HopClassifier(std::span<const std::string> corpus, std::size_t max_hops, std::size_t dim,
                             std::uint64_t seed)
    : max_hops_(max_hops), dim_(dim) {
  if (max_hops == 0 || dim == 0) throw std::invalid_argument("HopClassifier: max_hops and dim must be positive");
  vocab_.push_back("<unk>");
  index_.emplace("<unk>", kUnk);
  for (const auto& text : corpus) {
    for (auto& w : words(text)) {
      if (index_.try_emplace(w, vocab_.size()).second) vocab_.push_back(w);
    }
  }
  init_params(seed);
}

void HopClassifier::init_params(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  embed_ = params_.add("hop.embed", num::uniform_matrix<float>(vocab_.size(), dim_, dim_, rng));
  head_w_ = params_.add("hop.head.weight", num::uniform_matrix<float>(dim_, max_hops_, dim_, rng));
  head_b_ = params_.add("hop.head.bias", Tensor<float>(num::Shape{1, max_hops_}));
}

std::size_t HopClassifier::token_id(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? kUnk : it->second;
}

std::vector<std::size_t> HopClassifier::token_ids(std::string_view text) const {
  std::vector<std::size_t> ids;
  for (const auto& w : words(text)) ids.push_back(token_id(w));
  if (ids.empty()) throw std::invalid_argument("question text is empty after tokenization");
  return ids;
}

template <class Store>
Var<float> HopClassifier::encode_impl(num::Tape<float>& tape, Store& store, const HopClassifier& self,
                                      std::string_view text) {
  const auto ids = self.token_ids(text);
  return num::mean(num::gather_rows(tape.parameter(store[self.embed_]), std::span<const std::size_t>(ids)), 0);
}

Var<float> HopClassifier::encode(num::Tape<float>& tape, std::string_view text) {
  return encode_impl(tape, params_, *this, text);
}

Var<float> HopClassifier::logits(num::Tape<float>& tape, std::string_view text) {
  return num::linear(encode(tape, text), tape.parameter(params_[head_w_]), tape.parameter(params_[head_b_]));
}

Tensor<float> HopClassifier::encode(std::string_view text) const {
  num::Tape<float> tape;
  return encode_impl(tape, params_, *this, text).value();
}

Tensor<float> HopClassifier::logits(std::string_view text) const {
  num::Tape<float> tape;
  auto z = encode_impl(tape, params_, *this, text);
  return num::linear(z, tape.parameter(params_[head_w_]), tape.parameter(params_[head_b_])).value();
}

std::vector<double> HopClassifier::probabilities(std::string_view text) const {
  const auto p = num::softmax_rows(logits(text));
  return {p.values().begin(), p.values().end()};
}

std::size_t HopClassifier::predict(std::string_view text) const {
  const auto z = logits(text);
  std::size_t best = 0;
  for (std::size_t h = 1; h < max_hops_; ++h) {
    if (z[h] > z[best]) best = h;
  }
  return best + 1;
}

num::Archive HopClassifier::to_archive() const {
  num::Archive ar;
  ar.set_meta("kind", "hop-classifier");
  ar.set_meta("max_hops", std::to_string(max_hops_));
  ar.set_meta("dim", std::to_string(dim_));
  std::string joined;
  for (std::size_t i = 1; i < vocab_.size(); ++i) {
    if (i > 1) joined += ' ';
    joined += vocab_[i];
  }
  ar.set_meta("vocab", joined);
  ar.add(params_);
  return ar;
}

HopClassifier HopClassifier::from_archive(const num::Archive& ar) {
  if (ar.require_meta("kind") != "hop-classifier") throw num::ArchiveError("archive is not a hop classifier");
  HopClassifier clf;
  clf.max_hops_ = std::stoul(ar.require_meta("max_hops"));
  clf.dim_ = std::stoul(ar.require_meta("dim"));
  clf.vocab_.push_back("<unk>");
  clf.index_.emplace("<unk>", kUnk);
  std::istringstream in(ar.meta_value("vocab").value_or(""));
  for (std::string w; in >> w;) {
    clf.index_.emplace(w, clf.vocab_.size());
    clf.vocab_.push_back(w);
  }
  clf.init_params(0);
  ar.restore(clf.params_);
  return clf;
}

double hop_accuracy(const HopClassifier& clf, std::span<const Question> data) {
  if (data.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& q : data) correct += (q.gold_hops && clf.predict(q) == *q.gold_hops) ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

HopClassifier train_hop_classifier(std::span<const Question> data, const HopTrainConfig& cfg,
                                   HopTrainResult* result) {
  if (data.empty()) throw std::invalid_argument("train_hop_classifier: empty dataset");
  std::vector<std::string> corpus;
  for (const auto& q : data) {
    if (!q.gold_hops) throw std::invalid_argument("question '" + q.text + "' has no gold hop count");
    if (*q.gold_hops < 1 || *q.gold_hops > cfg.max_hops) {
      throw std::invalid_argument("question '" + q.text + "' has hop count outside 1.." +
                                  std::to_string(cfg.max_hops));
    }
    corpus.push_back(q.text);
  }
  HopClassifier clf(corpus, cfg.max_hops, cfg.dim, cfg.seed);
  num::Adam<float> adam(clf.params().trainable());
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch = std::max<std::size_t>(1, cfg.batch_size);
  const std::size_t per_epoch = (data.size() + batch - 1) / batch;
  const std::size_t total = per_epoch * cfg.epochs;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      for (std::size_t i = start; i < end; ++i) {
        const Question& q = data[order[i]];
        num::Tape<float> tape;
        const std::size_t target[] = {*q.gold_hops - 1};
        auto loss = num::scale(num::cross_entropy(clf.logits(tape, q.text), target), 1.0 / double(end - start));
        epoch_loss += loss.value().item();
        tape.backward(loss);
      }
      adam.step(num::cosine_lr(step++, total, cfg.lr));
    }
    if (result) result->epoch_loss.push_back(epoch_loss / double(per_epoch));
  }
  if (result) result->train_accuracy = hop_accuracy(clf, data);
  return clf;
}

}  // namespace kgprompt::retrieval
