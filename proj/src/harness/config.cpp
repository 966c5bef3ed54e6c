#include "kgprompt/harness/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <sstream>
#include <stdexcept>

namespace kgprompt::harness {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::size_t to_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw std::invalid_argument("config key '" + key + "': expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

std::size_t to_positive(const std::string& key, const std::string& v) {
  const auto n = to_size(key, v);
  if (n == 0) throw std::invalid_argument("config key '" + key + "' must be positive");
  return n;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size() && d > 0) return d;
  } catch (const std::exception&) {
  }
  throw std::invalid_argument("config key '" + key + "': expected a positive number, got '" + v + "'");
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw std::invalid_argument("config key '" + key + "': expected a boolean, got '" + v + "'");
}

std::string fmt(double d) {
  std::ostringstream o;
  o << d;
  return o.str();
}

}  // namespace

void Config::set(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  using Setter = std::function<void(Config&, const std::string&, const std::string&)>;
  static const std::map<std::string, Setter> setters = {
      {"epochs", [](Config& c, auto& k, auto& v) { c.train.epochs = to_positive(k, v); }},
      {"batch_size", [](Config& c, auto& k, auto& v) { c.train.batch_size = to_positive(k, v); }},
      {"lr", [](Config& c, auto& k, auto& v) { c.train.lr = to_double(k, v); }},
      {"seed", [](Config& c, auto& k, auto& v) { c.set_seed(to_size(k, v)); }},
      {"k", [](Config& c, auto& k, auto& v) { c.train.k = to_positive(k, v); }},
      {"cap", [](Config& c, auto& k, auto& v) { c.train.cap = to_positive(k, v); }},
      {"max_hops", [](Config& c, auto& k, auto& v) { c.train.max_hops = c.data.max_hops = to_positive(k, v); }},
      {"struct_mode", [](Config& c, auto&, auto& v) { c.train.mode = adapter::struct_mode_from_string(v); }},
      {"no_struct", [](Config& c, auto& k, auto& v) { c.train.no_struct = to_bool(k, v); }},
      {"no_train_encoder", [](Config& c, auto& k, auto& v) { c.train.no_train_encoder = to_bool(k, v); }},
      {"random_retrieve", [](Config& c, auto& k, auto& v) { c.train.random_retrieve = to_bool(k, v); }},
      {"loss_reduction",
       [](Config& c, auto& k, auto& v) {
         if (v == "mean") {
           c.train.loss_reduction = num::Reduction::Mean;
         } else if (v == "sum") {
           c.train.loss_reduction = num::Reduction::Sum;
         } else {
           throw std::invalid_argument("config key '" + k + "': expected mean or sum, got '" + v + "'");
         }
       }},
      {"adapter_dim", [](Config& c, auto& k, auto& v) { c.train.adapter_dim = to_positive(k, v); }},
      {"adapter_ff", [](Config& c, auto& k, auto& v) { c.train.adapter_ff = to_positive(k, v); }},
      {"adapter_heads", [](Config& c, auto& k, auto& v) { c.train.adapter_heads = to_positive(k, v); }},
      {"init_labels_from_lm", [](Config& c, auto& k, auto& v) { c.train.init_labels_from_lm = to_bool(k, v); }},
      {"tune_labels", [](Config& c, auto& k, auto& v) { c.train.tune_labels = to_bool(k, v); }},
      {"hop_dim", [](Config& c, auto& k, auto& v) { c.train.hop_dim = to_positive(k, v); }},
      {"hop_epochs", [](Config& c, auto& k, auto& v) { c.train.hop_epochs = to_positive(k, v); }},
      {"hop_lr", [](Config& c, auto& k, auto& v) { c.train.hop_lr = to_double(k, v); }},
      {"max_new", [](Config& c, auto& k, auto& v) { c.train.max_new = to_positive(k, v); }},
      {"lm_dim", [](Config& c, auto& k, auto& v) { c.lm.dim = to_positive(k, v); }},
      {"lm_layers", [](Config& c, auto& k, auto& v) { c.lm.layers = to_positive(k, v); }},
      {"lm_heads", [](Config& c, auto& k, auto& v) { c.lm.heads = to_positive(k, v); }},
      {"lm_ff", [](Config& c, auto& k, auto& v) { c.lm.ff_dim = to_positive(k, v); }},
      {"lm_context", [](Config& c, auto& k, auto& v) { c.lm.context = to_positive(k, v); }},
      {"pretrain_steps", [](Config& c, auto& k, auto& v) { c.lm.pretrain_steps = to_positive(k, v); }},
      {"pretrain_batch", [](Config& c, auto& k, auto& v) { c.lm.pretrain_batch = to_positive(k, v); }},
      {"pretrain_lr", [](Config& c, auto& k, auto& v) { c.lm.pretrain_lr = to_double(k, v); }},
      {"corpus_size", [](Config& c, auto& k, auto& v) { c.lm.corpus_size = to_positive(k, v); }},
      {"max_slot_entities", [](Config& c, auto& k, auto& v) { c.lm.max_slot_entities = to_positive(k, v); }},
      {"entities", [](Config& c, auto& k, auto& v) { c.data.entities = to_positive(k, v); }},
      {"relations", [](Config& c, auto& k, auto& v) { c.data.relations = to_positive(k, v); }},
      {"train_questions", [](Config& c, auto& k, auto& v) { c.data.train = to_positive(k, v); }},
      {"test_questions", [](Config& c, auto& k, auto& v) { c.data.test = to_positive(k, v); }},
      {"out_degree", [](Config& c, auto& k, auto& v) { c.data.out_degree = to_positive(k, v); }},
  };
  auto it = setters.find(key);
  if (it == setters.end()) throw std::invalid_argument("unknown config key '" + key + "'");
  it->second(*this, key, v);
}

void Config::load(std::istream& in) {
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(n) + ": expected key = value");
    }
    set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
}

void Config::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  load(in);
}

void Config::set_seed(std::uint64_t seed) {
  train.seed = seed;
  data.seed = seed;
}

std::map<std::string, std::string> Config::dump() const {
  auto b = [](bool x) { return std::string(x ? "true" : "false"); };
  return {
      {"epochs", std::to_string(train.epochs)},
      {"batch_size", std::to_string(train.batch_size)},
      {"lr", fmt(train.lr)},
      {"seed", std::to_string(train.seed)},
      {"k", std::to_string(train.k)},
      {"cap", std::to_string(train.cap)},
      {"max_hops", std::to_string(train.max_hops)},
      {"struct_mode", adapter::to_string(train.mode)},
      {"no_struct", b(train.no_struct)},
      {"no_train_encoder", b(train.no_train_encoder)},
      {"random_retrieve", b(train.random_retrieve)},
      {"loss_reduction", train.loss_reduction == num::Reduction::Mean ? "mean" : "sum"},
      {"adapter_dim", std::to_string(train.adapter_dim)},
      {"adapter_ff", std::to_string(train.adapter_ff)},
      {"adapter_heads", std::to_string(train.adapter_heads)},
      {"init_labels_from_lm", b(train.init_labels_from_lm)},
      {"tune_labels", b(train.tune_labels)},
      {"hop_dim", std::to_string(train.hop_dim)},
      {"hop_epochs", std::to_string(train.hop_epochs)},
      {"hop_lr", fmt(train.hop_lr)},
      {"max_new", std::to_string(train.max_new)},
      {"lm_dim", std::to_string(lm.dim)},
      {"lm_layers", std::to_string(lm.layers)},
      {"lm_heads", std::to_string(lm.heads)},
      {"lm_ff", std::to_string(lm.ff_dim)},
      {"lm_context", std::to_string(lm.context)},
      {"pretrain_steps", std::to_string(lm.pretrain_steps)},
      {"pretrain_batch", std::to_string(lm.pretrain_batch)},
      {"pretrain_lr", fmt(lm.pretrain_lr)},
      {"corpus_size", std::to_string(lm.corpus_size)},
      {"max_slot_entities", std::to_string(lm.max_slot_entities)},
      {"entities", std::to_string(data.entities)},
      {"relations", std::to_string(data.relations)},
      {"train_questions", std::to_string(data.train)},
      {"test_questions", std::to_string(data.test)},
      {"out_degree", std::to_string(data.out_degree)},
  };
}

}  // namespace kgprompt::harness
