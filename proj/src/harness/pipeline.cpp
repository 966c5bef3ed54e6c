#include "kgprompt/harness/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <random>
#include <set>

#include "json.hpp"
#include "kgprompt/harness/answers.hpp"
#include "kgprompt/numerics/optim.hpp"

namespace kgprompt::harness {

using retrieval::Question;

lm::Tokenizer build_tokenizer(const kg::KnowledgeGraph& graph, const std::vector<Question>& questions,
                              const PromptTemplate& tmpl) {
  std::vector<std::string> corpus;
  const auto [before, after] = tmpl.split("");
  corpus.push_back(before);
  corpus.push_back(after);
  corpus.push_back("[ ] ,");
  for (const auto& q : questions) {
    corpus.push_back(q.text);
    for (const auto& a : q.gold_answers) corpus.push_back(a);
  }
  for (const auto& e : graph.entities().labels()) corpus.push_back(e);
  for (const auto& r : graph.relations().labels()) corpus.push_back(r);
  return lm::Tokenizer::build(corpus);
}

std::vector<std::size_t> answer_target(const lm::Tokenizer& tok, const std::string& answer) {
  auto ids = tok.encode("[ " + answer + " ]");
  ids.push_back(lm::Tokenizer::kEos);
  return ids;
}

std::vector<lm::LmExample> lm_corpus(const kg::KnowledgeGraph& graph, const std::vector<Question>& questions,
                                     const lm::Tokenizer& tok, const PromptTemplate& tmpl, const LmSetup& setup,
                                     std::uint64_t seed) {
  if (questions.empty() || graph.entity_count() == 0) throw std::invalid_argument("lm_corpus: nothing to build from");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick_q(0, questions.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_e(0, graph.entity_count() - 1);
  const std::size_t max_k = std::min(setup.max_slot_entities, graph.entity_count());
  std::uniform_int_distribution<std::size_t> pick_k(1, max_k);
  std::vector<lm::LmExample> out;
  out.reserve(setup.corpus_size);
  for (std::size_t i = 0; i < setup.corpus_size; ++i) {
    const auto [before, after] = tmpl.split(questions[pick_q(rng)].text);
    lm::LmExample ex;
    ex.prompt.push_back(lm::Tokenizer::kBos);
    for (auto id : tok.encode(before)) ex.prompt.push_back(id);
    const std::size_t k = pick_k(rng);
    std::string first;
    for (std::size_t j = 0; j < k; ++j) {
      const auto& label = graph.entity_label(static_cast<kg::EntityId>(pick_e(rng)));
      if (j == 0) first = label;
      for (auto id : tok.encode(label)) ex.prompt.push_back(id);
    }
    for (auto id : tok.encode(after)) ex.prompt.push_back(id);
    ex.answer = answer_target(tok, first);
    out.push_back(std::move(ex));
  }
  return out;
}

LM make_lm(const lm::Tokenizer& tok, const LmSetup& setup, std::uint64_t seed) {
  lm::LmConfig c;
  c.vocab = tok.size();
  c.dim = setup.dim;
  c.heads = setup.heads;
  c.layers = setup.layers;
  c.ff_dim = setup.ff_dim;
  c.context = setup.context;
  return LM(c, seed);
}

std::unique_ptr<retrieval::LinkScorer> make_scorer(const TrainConfig& cfg) {
  if (cfg.random_retrieve) return std::make_unique<retrieval::RandomScorer>(cfg.seed);
  return std::make_unique<retrieval::LexicalScorer>();
}

adapter::AdapterConfig adapter_config(const kg::KnowledgeGraph& graph, const TrainConfig& cfg, std::size_t lm_dim) {
  adapter::AdapterConfig a;
  a.entities = graph.entity_count();
  a.relations = graph.relation_count();
  a.dim = cfg.adapter_dim;
  a.ff_dim = cfg.adapter_ff;
  a.lm_dim = lm_dim;
  a.heads = cfg.adapter_heads;
  a.max_hops = cfg.max_hops;
  a.mode = cfg.mode;
  a.use_struct = !cfg.no_struct;
  return a;
}

void init_labels_from_lm(Adapter& a, const kg::KnowledgeGraph& graph, const lm::Tokenizer& tok, const LM& lm) {
  if (a.config().dim != lm.width()) {
    throw num::ShapeError("init_labels_from_lm: adapter width " + std::to_string(a.config().dim) +
                          " != LM width " + std::to_string(lm.width()));
  }
  const auto& table = lm.params().at("lm.tok_embed").value;
  auto& labels = a.label_table().value;
  const std::size_t d = a.config().dim;
  auto fill = [&](std::size_t row, const std::string& label) {
    const auto ids = tok.encode(label);
    if (ids.empty()) return;
    auto dst = labels.row(row);
    for (std::size_t j = 0; j < d; ++j) dst[j] = 0.0f;
    for (auto id : ids) {
      const auto src = table.row(id);
      for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
    }
    for (std::size_t j = 0; j < d; ++j) dst[j] /= static_cast<float>(ids.size());
  };
  for (kg::EntityId e = 0; e < graph.entity_count(); ++e) fill(a.entity_label_id(e), graph.entity_label(e));
  for (kg::RelationId r = 0; r < graph.relation_count(); ++r) fill(a.relation_label_id(r), graph.relation_label(r));
}

TrainResult train_adapter(const kg::KnowledgeGraph& graph, const std::vector<Question>& train, LM& lm,
                          const lm::Tokenizer& tok, const TrainConfig& cfg, const PromptTemplate& tmpl,
                          const retrieval::HopClassifier* classifier) {
  if (train.empty()) throw std::invalid_argument("train_adapter: empty training set");
  if (!lm.frozen()) throw std::logic_error("train_adapter: the language model must be frozen");
  for (const auto& q : train) {
    if (q.gold_answers.empty()) throw std::invalid_argument("train_adapter: question '" + q.text + "' has no answers");
  }
  TrainResult result;
  result.digest_before = lm.freeze_digest();

  if (classifier != nullptr) {
    result.classifier = std::make_unique<retrieval::HopClassifier>(*classifier);
  } else {
    retrieval::HopTrainConfig hc;
    hc.max_hops = cfg.max_hops;
    hc.dim = cfg.hop_dim;
    hc.epochs = cfg.hop_epochs;
    hc.lr = cfg.hop_lr;
    hc.seed = cfg.seed;
    retrieval::HopTrainResult hr;
    result.classifier = std::make_unique<retrieval::HopClassifier>(retrieval::train_hop_classifier(train, hc, &hr));
    result.hop_train_accuracy = hr.train_accuracy;
  }

  result.adapter = std::make_unique<Adapter>(adapter_config(graph, cfg, lm.width()), cfg.seed);
  Adapter& ad = *result.adapter;
  if (cfg.init_labels_from_lm && cfg.adapter_dim == lm.width()) init_labels_from_lm(ad, graph, tok, lm);
  if (cfg.no_train_encoder) ad.params().set_trainable("encoder.", false);
  if (!cfg.tune_labels) ad.params().set_trainable("embed.", false);

  const auto scorer = make_scorer(cfg);
  struct Example {
    std::vector<std::size_t> hard;
    std::vector<kg::ReasoningPath> paths;
    std::vector<std::size_t> target;
  };
  std::vector<Example> examples;
  examples.reserve(train.size());
  for (const auto& q : train) {
    auto rg = retrieval::build_reasoning_graph(graph, q, *result.classifier, *scorer, cfg.k, cfg.cap);
    examples.push_back({assemble_prompt(tmpl, tok, q.text), std::move(rg.paths), answer_target(tok, q.gold_answers[0])});
  }

  num::Adam<float> adam(ad.params().trainable());
  std::mt19937_64 rng(cfg.seed + 1);
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch = cfg.batch_size;
  const std::size_t per_epoch = (examples.size() + batch - 1) / batch;
  const std::size_t total = per_epoch * cfg.epochs;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      double loss_sum = 0.0;
      for (std::size_t i = start; i < end; ++i) {
        const Example& ex = examples[order[i]];
        num::Tape<float> tape;
        lm::MixedPrompt<float> prompt{ex.hard, {}};
        if (!ex.paths.empty()) prompt.soft.push_back(ad.soft_prompt(tape, ex.paths));
        auto loss = lm.answer_nll(tape, prompt, ex.target, cfg.loss_reduction);
        loss_sum += loss.value().item();
        tape.backward(num::scale(loss, 1.0 / double(end - start)));
      }
      adam.step(num::cosine_lr(step++, total, cfg.lr));
      result.step_loss.push_back(loss_sum / double(end - start));
    }
  }
  result.steps = step;
  result.digest_after = lm.freeze_digest();
  if (result.digest_after != result.digest_before) {
    throw FrozenDigestError("language model parameters changed during adapter training");
  }
  return result;
}

double npr(std::size_t token_used, std::size_t requests) {
  if (requests == 0) throw std::invalid_argument("npr: no requests");
  return static_cast<double>(token_used) / static_cast<double>(requests);
}

EvalReport evaluate(const kg::KnowledgeGraph& graph, const std::vector<Question>& test, LM& lm,
                    const lm::Tokenizer& tok, Adapter& ad, const retrieval::HopClassifier& classifier,
                    const TrainConfig& cfg, const PromptTemplate& tmpl) {
  if (ad.config().lm_dim != lm.width()) {
    throw num::ShapeError("evaluate: adapter emits width " + std::to_string(ad.config().lm_dim) +
                          " but the LM expects " + std::to_string(lm.width()));
  }
  if (ad.config().entities != graph.entity_count() || ad.config().relations != graph.relation_count()) {
    throw std::invalid_argument("evaluate: adapter vocabulary does not match the graph");
  }
  if (ad.config().max_hops < classifier.max_hops()) {
    throw std::invalid_argument("evaluate: hop classifier predicts more hops than the adapter accepts");
  }
  if (tok.size() != lm.vocab_size()) throw std::invalid_argument("evaluate: tokenizer does not match the LM");
  if (test.empty()) throw std::invalid_argument("evaluate: empty test set");

  const auto scorer = make_scorer(cfg);
  EvalReport report;
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t hits = 0;
  for (const auto& q : test) {
    QuestionTrace tr;
    tr.question = q.text;
    tr.gold = q.gold_answers;
    const auto rg = retrieval::build_reasoning_graph(graph, q, classifier, *scorer, cfg.k, cfg.cap);
    tr.predicted_hops = rg.hops;
    for (const auto& sl : rg.selected_links) {
      std::string s;
      for (const auto& l : kg::link_labels(graph, sl.link)) s += (s.empty() ? "" : " -> ") + l;
      tr.selected_links.push_back(s);
    }
    tr.paths = rg.paths.size();
    tr.fallback = rg.paths.empty();

    const auto hard = assemble_prompt(tmpl, tok, q.text);
    std::vector<num::Tensor<float>> soft;
    {
      num::Tape<float> tape;
      if (!rg.paths.empty()) soft.push_back(ad.soft_prompt(tape, rg.paths).value());
      lm::MixedPrompt<float> prompt{hard, {}};
      for (const auto& s : soft) prompt.soft.push_back(tape.constant(s));
      tr.embedding_rows = lm.embed_mixed(tape, prompt).rows();
    }
    tr.hard_tokens = hard.size() - 1;
    tr.prompt_tokens = tr.hard_tokens + rg.paths.size();

    std::string graph_text;
    for (const auto& p : rg.paths) graph_text += (graph_text.empty() ? "" : " ; ") + kg::render_path(graph, p);
    tr.textual_knowledge_tokens = lm::Tokenizer::pieces(graph_text).size();
    tr.textual_prompt_tokens = textual_prompt_tokens(tmpl, q.text, graph_text);

    const auto ids = lm.generate_greedy(hard, soft, cfg.max_new);
    tr.generated = tok.decode(ids);
    tr.predicted = parse_answer_list(tr.generated);
    tr.hit = q.gold_answers.empty() ? 0 : hits_at_1(tr.predicted, q.gold_answers);

    hits += static_cast<std::size_t>(tr.hit);
    report.token_used += tr.prompt_tokens;
    report.requests += 1;
    report.fallbacks += tr.fallback ? 1 : 0;
    report.knowledge_tokens += tr.paths;
    report.textual_token_used += tr.textual_prompt_tokens;
    report.textual_knowledge_tokens += tr.textual_knowledge_tokens;
    report.traces.push_back(std::move(tr));
  }
  report.time_cost = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report.hits_at_1 = static_cast<double>(hits) / static_cast<double>(test.size());
  report.npr = npr(report.token_used, report.requests);
  return report;
}

bool EvalReport::same_except_time(const EvalReport& other) const {
  EvalReport a = *this, b = other;
  a.time_cost = b.time_cost = 0.0;
  return a == b;
}

using ojson = nlohmann::ordered_json;

std::string EvalReport::to_json() const {
  ojson j;
  j["hits_at_1"] = hits_at_1;
  j["token_used"] = token_used;
  j["requests"] = requests;
  j["npr"] = npr;
  j["time_cost_seconds"] = time_cost;
  j["fallbacks"] = fallbacks;
  j["knowledge_tokens"] = knowledge_tokens;
  j["textual_token_used"] = textual_token_used;
  j["textual_knowledge_tokens"] = textual_knowledge_tokens;
  ojson traces_j = ojson::array();
  for (const auto& t : traces) {
    ojson x;
    x["question"] = t.question;
    x["predicted_hops"] = t.predicted_hops;
    x["selected_links"] = t.selected_links;
    x["paths"] = t.paths;
    x["hard_tokens"] = t.hard_tokens;
    x["prompt_tokens"] = t.prompt_tokens;
    x["embedding_rows"] = t.embedding_rows;
    x["textual_prompt_tokens"] = t.textual_prompt_tokens;
    x["textual_knowledge_tokens"] = t.textual_knowledge_tokens;
    x["fallback"] = t.fallback;
    x["generated"] = t.generated;
    x["predicted"] = t.predicted;
    x["gold"] = t.gold;
    x["hit"] = t.hit;
    traces_j.push_back(std::move(x));
  }
  j["traces"] = std::move(traces_j);
  return j.dump(2);
}

EvalReport EvalReport::from_json(const std::string& text) {
  const auto j = ojson::parse(text);
  EvalReport r;
  r.hits_at_1 = j.at("hits_at_1").get<double>();
  r.token_used = j.at("token_used").get<std::size_t>();
  r.requests = j.at("requests").get<std::size_t>();
  r.npr = j.at("npr").get<double>();
  r.time_cost = j.at("time_cost_seconds").get<double>();
  r.fallbacks = j.at("fallbacks").get<std::size_t>();
  r.knowledge_tokens = j.at("knowledge_tokens").get<std::size_t>();
  r.textual_token_used = j.at("textual_token_used").get<std::size_t>();
  r.textual_knowledge_tokens = j.at("textual_knowledge_tokens").get<std::size_t>();
  for (const auto& x : j.at("traces")) {
    QuestionTrace t;
    t.question = x.at("question").get<std::string>();
    t.predicted_hops = x.at("predicted_hops").get<std::size_t>();
    t.selected_links = x.at("selected_links").get<std::vector<std::string>>();
    t.paths = x.at("paths").get<std::size_t>();
    t.hard_tokens = x.at("hard_tokens").get<std::size_t>();
    t.prompt_tokens = x.at("prompt_tokens").get<std::size_t>();
    t.embedding_rows = x.at("embedding_rows").get<std::size_t>();
    t.textual_prompt_tokens = x.at("textual_prompt_tokens").get<std::size_t>();
    t.textual_knowledge_tokens = x.at("textual_knowledge_tokens").get<std::size_t>();
    t.fallback = x.at("fallback").get<bool>();
    t.generated = x.at("generated").get<std::string>();
    t.predicted = x.at("predicted").get<std::vector<std::string>>();
    t.gold = x.at("gold").get<std::vector<std::string>>();
    t.hit = x.at("hit").get<int>();
    r.traces.push_back(std::move(t));
  }
  return r;
}

}  // namespace kgprompt::harness
