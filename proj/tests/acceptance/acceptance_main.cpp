// Acceptance run: one PASS/FAIL line per criterion, with the measured values.
// Exit status is nonzero if any criterion fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <random>
#include <set>
#include <string>

#include "../unit/oracles.hpp"
#include "kgprompt/harness/gradcheck_suites.hpp"
#include "kgprompt/harness/pipeline.hpp"
#include "kgprompt/harness/synthetic.hpp"
#include "kgprompt/kg/paths.hpp"
#include "kgprompt/numerics/archive.hpp"
#include "kgprompt/retrieval/hop_classifier.hpp"

using namespace kgprompt;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// Pinned thresholds.
constexpr double kGradTol = 1e-4;
constexpr double kGradBudgetSec = 120;
constexpr double kOracleBudgetSec = 60;
constexpr double kOverfitTrainHits = 0.9;
constexpr double kOverfitMargin = 0.15;
constexpr double kOverfitBudgetSec = 600;
constexpr std::size_t kOverfitMaxSteps = 300;
constexpr double kTokenReduction = 0.80;
constexpr double kHopAccuracy = 0.95;
constexpr double kHopBudgetSec = 60;

// Benchmark training settings for criteria 5 and 6 (12 epochs of 25 batches).
constexpr std::size_t kBenchEpochs = 12;
constexpr double kBenchLr = 5e-4;

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  if (!pass) ++failures;
  std::cout << (pass ? "PASS" : "FAIL") << "  [" << id << "] " << name << ": " << detail << std::endl;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

void criterion_retrieval_oracle() {
  const auto t0 = Clock::now();
  std::size_t graphs = 0, link_mismatch = 0, path_mismatch = 0, checks = 0;
  for (std::uint64_t seed = 0; seed < 150; ++seed) {
    std::mt19937_64 rng(seed);
    const std::size_t ne = 2 + rng() % 9, nr = 1 + rng() % 3, nt = 1 + rng() % 20, depth = 1 + rng() % 3;
    const auto g = oracle::random_graph(seed, ne, nr, nt);
    ++graphs;
    for (kg::EntityId a = 0; a < g.entity_count(); ++a) {
      const auto links = kg::enumerate_relation_links(g, a, depth);
      const auto expect = oracle::brute_force_links(g, a, depth);
      if (std::set<kg::RelationLink>(links.begin(), links.end()) != expect || links.size() != expect.size()) {
        ++link_mismatch;
      }
      for (const auto& l : expect) {
        const auto paths = kg::instantiate_paths(g, a, l, 1'000'000);
        const std::set<kg::ReasoningPath> got(paths.begin(), paths.end());
        if (got != oracle::brute_force_paths(g, a, l) || got.size() != paths.size()) ++path_mismatch;
        ++checks;
      }
    }
  }
  const double secs = seconds_since(t0);
  report(1, "retrieval oracle equivalence", link_mismatch == 0 && path_mismatch == 0 && secs < kOracleBudgetSec,
         std::to_string(graphs) + " graphs, " + std::to_string(checks) + " link instantiations, " +
             std::to_string(link_mismatch) + " link-set and " + std::to_string(path_mismatch) +
             " path-set mismatches, " + fmt("%.2fs", secs));
}

void criterion_gradients() {
  const auto t0 = Clock::now();
  auto prim = harness::primitive_gradcheck(20, 0);
  auto comp = harness::composed_gradcheck(20, 0);
  const double secs = seconds_since(t0);
  double worst = 0;
  std::string where;
  bool enough_cases = true;
  for (const auto* rs : {&prim, &comp}) {
    for (const auto& r : *rs) {
      enough_cases = enough_cases && r.cases >= 20;
      if (r.max_relative_error >= worst) {
        worst = r.max_relative_error;
        where = r.name + " " + r.worst;
      }
    }
  }
  report(2, "gradient correctness", worst < kGradTol && enough_cases && secs < kGradBudgetSec,
         std::to_string(prim.size()) + " primitive + " + std::to_string(comp.size()) +
             " composed suites x 20 cases, max rel err " + fmt("%.3e", worst) + " (" + where + "), " +
             fmt("%.2fs", secs));
}

struct Bench {
  harness::SyntheticData data;
  lm::Tokenizer tok;
  std::optional<harness::LM> lm;
  double pretrain_seconds = 0;
};

Bench standard_benchmark() {
  Bench b;
  harness::SyntheticConfig sc;  // seed 0, 50 entities, 10 relations, 100/20 questions, H = 2
  b.data = harness::gen_synthetic(sc);
  auto all = b.data.train;
  all.insert(all.end(), b.data.test.begin(), b.data.test.end());
  const auto tmpl = harness::PromptTemplate::standard();
  b.tok = harness::build_tokenizer(b.data.graph, all, tmpl);
  harness::LmSetup setup;
  b.lm.emplace(harness::make_lm(b.tok, setup, 0));
  const auto t0 = Clock::now();
  const auto corpus = harness::lm_corpus(b.data.graph, b.data.train, b.tok, tmpl, setup, 0);
  lm::pretrain(*b.lm, corpus, {setup.pretrain_steps, setup.pretrain_batch, setup.pretrain_lr, 0});
  b.pretrain_seconds = seconds_since(t0);
  return b;
}

harness::TrainConfig bench_config(std::uint64_t seed) {
  harness::TrainConfig c;
  c.seed = seed;
  c.epochs = kBenchEpochs;
  c.lr = kBenchLr;
  return c;
}

void criterion_frozen(Bench& b) {
  harness::TrainConfig cfg;  // defaults: one epoch, batch 4, lr 2e-3
  const auto before = b.lm->freeze_digest();
  auto res = harness::train_adapter(b.data.graph, b.data.train, *b.lm, b.tok, cfg);
  const auto after = b.lm->freeze_digest();

  // Gradients from a small generic batch into a fresh adapter.
  harness::Adapter ad(harness::adapter_config(b.data.graph, cfg, b.lm->width()), 17);
  harness::init_labels_from_lm(ad, b.data.graph, b.tok, *b.lm);
  retrieval::LexicalScorer lex;
  std::size_t zero_groups = 0, groups = 0;
  std::string zero_names;
  bool lm_grad = false;
  for (std::size_t qi = 0; qi < 4; ++qi) {
    const auto& q = b.data.train[qi];
    const auto rg = retrieval::build_reasoning_graph(b.data.graph, q, *q.gold_hops, lex, cfg.k, cfg.cap);
    num::Tape<float> tape;
    lm::MixedPrompt<float> p{harness::assemble_prompt(harness::PromptTemplate::standard(), b.tok, q.text),
                             {ad.soft_prompt(tape, rg.paths)}};
    tape.backward(b.lm->answer_nll(tape, p, harness::answer_target(b.tok, q.gold_answers[0])));
  }
  for (const auto& prm : ad.params()) {
    ++groups;
    double norm = 0;
    for (float v : prm.grad.values()) norm += double(v) * v;
    if (!(norm > 0)) {
      ++zero_groups;
      zero_names += " " + prm.name;
    }
  }
  for (const auto& prm : b.lm->params()) lm_grad = lm_grad || !prm.grad.empty();
  report(3, "frozen LM guarantee",
         before == after && res.digest_before == res.digest_after && zero_groups == 0 && !lm_grad,
         "digest " + before + " -> " + after + " over " + std::to_string(res.steps) + " steps; " +
             std::to_string(groups - zero_groups) + "/" + std::to_string(groups) +
             " adapter tensors with nonzero gradient" + zero_names + (lm_grad ? "; LM received gradient" : ""));
}

void criterion_struct_modes(const Bench& b) {
  using A = adapter::KnowledgeAdapter<float>;
  std::size_t triples = 0, plus_bad = 0, minus_bad = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    adapter::AdapterConfig cfg = harness::adapter_config(b.data.graph, harness::TrainConfig{}, 64);
    A ad(cfg, seed);
    num::Tape<float> tape;
    for (const auto& t : b.data.graph.triples()) {
      auto h = ad.embed_label(tape, ad.entity_label_id(t.head));
      auto r = ad.embed_label(tape, ad.relation_label_id(t.relation));
      auto tl = ad.embed_label(tape, ad.entity_label_id(t.tail));
      ++triples;
      if (!(A::struct_embed(adapter::StructMode::HplusRplusT, h, r, tl).value() ==
            A::struct_embed(adapter::StructMode::HplusRplusT, tl, r, h).value())) {
        ++plus_bad;
      }
      if (t.head != t.tail && A::struct_embed(adapter::StructMode::HplusRminusT, h, r, tl).value() ==
                                  A::struct_embed(adapter::StructMode::HplusRminusT, tl, r, h).value()) {
        ++minus_bad;
      }
    }
  }
  report(4, "struct ablation mechanics", plus_bad == 0 && minus_bad == 0,
         std::to_string(triples) + " triples x reversal: " + std::to_string(plus_bad) +
             " h+r+t not bit-identical, " + std::to_string(minus_bad) + " h+r-t unchanged");
}

struct Run {
  harness::TrainResult train;
  harness::EvalReport test;
};

Run run_variant(Bench& b, harness::TrainConfig cfg) {
  Run r{harness::train_adapter(b.data.graph, b.data.train, *b.lm, b.tok, cfg), {}};
  r.test = harness::evaluate(b.data.graph, b.data.test, *b.lm, b.tok, *r.train.adapter, *r.train.classifier, cfg);
  return r;
}

Run criteria_end_to_end(Bench& b) {
  const auto t0 = Clock::now();
  auto full_cfg = bench_config(0);
  Run full = run_variant(b, full_cfg);
  const auto train_report = harness::evaluate(b.data.graph, b.data.train, *b.lm, b.tok, *full.train.adapter,
                                              *full.train.classifier, full_cfg);
  auto rnd_cfg = full_cfg;
  rnd_cfg.random_retrieve = true;
  Run rnd = run_variant(b, rnd_cfg);
  const double secs = seconds_since(t0) + b.pretrain_seconds;
  const double margin = full.test.hits_at_1 - rnd.test.hits_at_1;
  report(5, "end-to-end overfit",
         full.train.steps <= kOverfitMaxSteps && train_report.hits_at_1 >= kOverfitTrainHits &&
             margin >= kOverfitMargin - 1e-12 && secs < kOverfitBudgetSec,
         std::to_string(full.train.steps) + " steps; train Hits@1 " + fmt("%.2f", train_report.hits_at_1) +
             "; test Hits@1 " + fmt("%.2f", full.test.hits_at_1) + " vs random retrieve " +
             fmt("%.2f", rnd.test.hits_at_1) + " (margin " + fmt("%.2f", margin) + "); " + fmt("%.1fs", secs) +
             " including " + fmt("%.1fs", b.pretrain_seconds) + " LM pretraining");

  // Ablation ordering across three training seeds.
  std::size_t holds = 0;
  std::string detail;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    auto cfg = bench_config(seed);
    const double f = seed == 0 ? full.test.hits_at_1 : run_variant(b, cfg).test.hits_at_1;
    auto ns_cfg = cfg;
    ns_cfg.no_struct = true;
    const double ns = run_variant(b, ns_cfg).test.hits_at_1;
    auto rr_cfg = cfg;
    rr_cfg.random_retrieve = true;
    const double rr = seed == 0 ? rnd.test.hits_at_1 : run_variant(b, rr_cfg).test.hits_at_1;
    const bool ok = f >= ns && ns >= rr;
    holds += ok ? 1 : 0;
    detail += (detail.empty() ? "" : "; ") + std::string("seed ") + std::to_string(seed) + " " + fmt("%.2f", f) +
              " >= " + fmt("%.2f", ns) + " >= " + fmt("%.2f", rr) + (ok ? "" : " (violated)");
  }
  report(6, "ablation ordering full >= no-struct >= random", holds >= 2,
         std::to_string(holds) + "/3 seeds hold: " + detail);

  // Token accounting on the full model's test report.
  const harness::TrainConfig& c = full_cfg;
  bool per_question = true;
  std::size_t soft = 0, textual_knowledge = 0;
  for (const auto& t : full.test.traces) {
    per_question = per_question && t.prompt_tokens == t.hard_tokens + t.paths && t.embedding_rows == t.prompt_tokens &&
                   t.paths <= c.k * c.cap;
    soft += t.paths;
    textual_knowledge += t.textual_knowledge_tokens;
  }
  const double knowledge_cut = 1.0 - double(soft) / double(textual_knowledge);
  const double prompt_cut = 1.0 - double(full.test.token_used) / double(full.test.textual_token_used);
  const bool npr_ok = harness::npr(672, 3) == 224.0 &&
                      full.test.npr == double(full.test.token_used) / double(full.test.requests);
  report(7, "token efficiency", per_question && npr_ok && knowledge_cut >= kTokenReduction,
         "knowledge segment " + std::to_string(soft) + " soft vs " + std::to_string(textual_knowledge) +
             " text tokens (" + fmt("%.1f%%", 100 * knowledge_cut) + " fewer); whole prompt " +
             std::to_string(full.test.token_used) + " vs " + std::to_string(full.test.textual_token_used) + " (" +
             fmt("%.1f%%", 100 * prompt_cut) + " fewer); NPR " + fmt("%.2f", full.test.npr) +
             "; 672/3 -> " + fmt("%.0f", harness::npr(672, 3)) +
             (per_question ? "" : "; per-question accounting mismatch"));

  return full;
}

void criterion_hops() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(42);
  const char* filler[] = {"what", "is", "the", "of", "name", "which", "entity", "linked", "to", "by"};
  std::vector<retrieval::Question> data;
  for (int i = 0; i < 200; ++i) {
    const std::size_t hops = 1 + rng() % 2;
    std::vector<std::string> words;
    for (int w = 0; w < 6; ++w) words.push_back(filler[rng() % 10]);
    words.insert(words.begin() + static_cast<long>(rng() % words.size()), hops == 2 ? "via" : "direct");
    std::string text;
    for (const auto& w : words) text += (text.empty() ? "" : " ") + w;
    data.push_back({text, {0}, {}, hops});
  }
  retrieval::HopTrainConfig cfg;
  retrieval::HopTrainResult res;
  const auto clf = retrieval::train_hop_classifier(data, cfg, &res);
  const double secs = seconds_since(t0);
  report(8, "hop classifier", res.train_accuracy >= kHopAccuracy && secs < kHopBudgetSec,
         "accuracy " + fmt("%.3f", retrieval::hop_accuracy(clf, data)) + " on 200 marker-token questions, " +
             fmt("%.2fs", secs));
}

void criterion_determinism(Bench& b, const Run& full) {
  const auto full_cfg = bench_config(0);
  // Determinism: checkpoints to disk, two independent load-and-evaluate runs.
  const auto dir = fs::temp_directory_path() / "kgprompt_acceptance";
  fs::create_directories(dir);
  num::write_archive(dir / "adapter.ckpt", full.train.adapter->to_archive(b.data.graph));
  num::write_archive(dir / "hop.ckpt", full.train.classifier->to_archive());
  num::write_archive(dir / "lm.ckpt", b.lm->to_archive());
  auto eval_once = [&] {
    auto model = harness::LM::from_archive(num::read_archive(dir / "lm.ckpt"));
    auto ad = harness::Adapter::from_archive(num::read_archive(dir / "adapter.ckpt"), b.data.graph);
    const auto clf = retrieval::HopClassifier::from_archive(num::read_archive(dir / "hop.ckpt"));
    return harness::evaluate(b.data.graph, b.data.test, model, b.tok, ad, clf, full_cfg);
  };
  const auto r1 = eval_once();
  const auto r2 = eval_once();
  fs::remove_all(dir);
  report(9, "determinism", r1.same_except_time(r2) && r1.same_except_time(full.test),
         "two reloaded evaluations " + std::string(r1.same_except_time(r2) ? "identical" : "differ") +
             " modulo time_cost; Hits@1 " + fmt("%.2f", r1.hits_at_1) + ", token_used " +
             std::to_string(r1.token_used));
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  try {
    criterion_retrieval_oracle();
    criterion_gradients();
    Bench b = standard_benchmark();
    criterion_frozen(b);
    criterion_struct_modes(b);
    const Run full = criteria_end_to_end(b);
    criterion_hops();
    criterion_determinism(b, full);
  } catch (const std::exception& e) {
    std::cout << "FAIL  acceptance run aborted: " << e.what() << std::endl;
    return 1;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << " in "
            << fmt("%.1fs", seconds_since(t0)) << std::endl;
  return failures == 0 ? 0 : 1;
}
