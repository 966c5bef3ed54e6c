// kgprompt command-line front end.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "CLI11.hpp"
#include "kgprompt/harness/gradcheck_suites.hpp"
#include "kgprompt/harness/pipeline.hpp"
#include "kgprompt/harness/synthetic.hpp"

namespace fs = std::filesystem;
using namespace kgprompt;
using harness::Config;

namespace {

struct Common {
  std::string config_file;
  std::vector<std::string> overrides;
  std::int64_t seed = -1;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_file, "key = value configuration file")->check(CLI::ExistingFile);
  app->add_option("--set", c.overrides, "configuration override key=value (repeatable)");
  app->add_option("--seed", c.seed, "seed for every random component");
}

Config resolve(const Common& c) {
  Config cfg;
  if (!c.config_file.empty()) cfg.load_file(c.config_file);
  for (const auto& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (c.seed >= 0) cfg.set_seed(static_cast<std::uint64_t>(c.seed));
  return cfg;
}

void require_file(const fs::path& p) {
  if (!fs::exists(p)) throw std::runtime_error("missing file '" + p.string() + "'");
}

struct Dataset {
  kg::KnowledgeGraph graph;
  std::vector<retrieval::Question> train, test;
};

Dataset load_dataset(const fs::path& dir, std::size_t max_hops) {
  require_file(dir / "triples.tsv");
  require_file(dir / "train.jsonl");
  require_file(dir / "test.jsonl");
  Dataset d{kg::KnowledgeGraph::load_file((dir / "triples.tsv").string()), {}, {}};
  d.train = retrieval::load_questions_file((dir / "train.jsonl").string(), d.graph, max_hops);
  d.test = retrieval::load_questions_file((dir / "test.jsonl").string(), d.graph, max_hops);
  return d;
}

struct LoadedLm {
  lm::Tokenizer tok;
  harness::LM model;
};

LoadedLm load_lm(const fs::path& dir) {
  require_file(dir / "lm.ckpt");
  require_file(dir / "vocab.txt");
  auto tok = lm::Tokenizer::load((dir / "vocab.txt").string());
  auto model = harness::LM::from_archive(num::read_archive(dir / "lm.ckpt"));
  if (model.vocab_size() != tok.size()) throw std::runtime_error("vocabulary file does not match the LM checkpoint");
  return {std::move(tok), std::move(model)};
}

void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
  out << text;
}

void print_summary(const harness::EvalReport& r) {
  std::cout << std::fixed << std::setprecision(4) << "hits@1 " << r.hits_at_1 << "  token_used " << r.token_used
            << "  requests " << r.requests << "  npr " << std::setprecision(2) << r.npr << "  time " << r.time_cost
            << "s  fallbacks " << r.fallbacks << "  textual_token_used " << r.textual_token_used << "\n";
}

harness::TrainResult train_and_save(const Dataset& d, LoadedLm& l, const Config& cfg, const fs::path& out) {
  auto res = harness::train_adapter(d.graph, d.train, l.model, l.tok, cfg.train);
  fs::create_directories(out);
  num::write_archive(out / "adapter.ckpt", res.adapter->to_archive(d.graph));
  num::write_archive(out / "hop.ckpt", res.classifier->to_archive());
  std::ostringstream log;
  log << "hop_train_accuracy " << res.hop_train_accuracy << "\n";
  log << "lm_digest_before " << res.digest_before << "\nlm_digest_after " << res.digest_after << "\n";
  for (std::size_t i = 0; i < res.step_loss.size(); ++i) log << "step " << i << " loss " << res.step_loss[i] << "\n";
  write_text(out / "train_log.txt", log.str());
  std::cout << "trained " << res.steps << " steps; final loss " << (res.step_loss.empty() ? 0.0 : res.step_loss.back())
            << "; adapter parameters " << res.adapter->parameter_count() << " vs LM " << l.model.parameter_count()
            << "\n";
  return res;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kgprompt: knowledge-graph soft prompts for a frozen language model"};
  app.require_subcommand(1);

  Common c_gen, c_pre, c_hop, c_train, c_eval, c_abl, c_grad;
  std::string data_dir, lm_dir, adapter_dir, out_path, split = "test", report_path, mode = "full";
  std::size_t cases = 20;

  auto* gen = app.add_subcommand("gen-data", "generate the synthetic benchmark");
  add_common(gen, c_gen);
  gen->add_option("--out", out_path, "output directory")->required();

  auto* pre = app.add_subcommand("pretrain-lm", "build the vocabulary and pretrain the frozen LM");
  add_common(pre, c_pre);
  pre->add_option("--data", data_dir, "dataset directory")->required();
  pre->add_option("--out", out_path, "output directory")->required();

  auto* hop = app.add_subcommand("train-hop", "train the hop classifier alone");
  add_common(hop, c_hop);
  hop->add_option("--data", data_dir, "dataset directory")->required();
  hop->add_option("--out", out_path, "output checkpoint")->required();

  auto* tr = app.add_subcommand("train-adapter", "train the hop classifier and the knowledge adapter");
  add_common(tr, c_train);
  tr->add_option("--data", data_dir, "dataset directory")->required();
  tr->add_option("--lm", lm_dir, "pretrained LM directory")->required();
  tr->add_option("--out", out_path, "output directory")->required();

  auto* ev = app.add_subcommand("eval", "evaluate a trained adapter");
  add_common(ev, c_eval);
  ev->add_option("--data", data_dir, "dataset directory")->required();
  ev->add_option("--lm", lm_dir, "pretrained LM directory")->required();
  ev->add_option("--adapter", adapter_dir, "trained adapter directory")->required();
  ev->add_option("--split", split, "train or test")->check(CLI::IsMember({"train", "test"}));
  ev->add_option("--report", report_path, "write the JSON report here");

  auto* ab = app.add_subcommand("ablate", "train and evaluate one ablation variant");
  add_common(ab, c_abl);
  ab->add_option("--data", data_dir, "dataset directory")->required();
  ab->add_option("--lm", lm_dir, "pretrained LM directory")->required();
  ab->add_option("--mode", mode, "ablation")
      ->check(CLI::IsMember({"full", "no-struct", "no-train-encoder", "random-retrieve", "h+r+t"}));
  ab->add_option("--out", out_path, "output directory for checkpoints and report");

  auto* gc = app.add_subcommand("gradcheck", "finite-difference checks of all gradients");
  add_common(gc, c_grad);
  gc->add_option("--cases", cases, "seeded cases per suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*gen) {
      const Config cfg = resolve(c_gen);
      const auto data = harness::gen_synthetic(cfg.data);
      harness::write_synthetic(data, out_path);
      std::cout << "wrote " << data.graph.triple_count() << " triples, " << data.train.size() << " train and "
                << data.test.size() << " test questions to " << out_path << "\n";
    } else if (*pre) {
      const Config cfg = resolve(c_pre);
      const auto d = load_dataset(data_dir, cfg.train.max_hops);
      auto all = d.train;
      all.insert(all.end(), d.test.begin(), d.test.end());
      const auto tmpl = harness::PromptTemplate::standard();
      auto tok = harness::build_tokenizer(d.graph, all, tmpl);
      auto model = harness::make_lm(tok, cfg.lm, cfg.train.seed);
      const auto corpus = harness::lm_corpus(d.graph, d.train, tok, tmpl, cfg.lm, cfg.train.seed);
      lm::PretrainConfig pc{cfg.lm.pretrain_steps, cfg.lm.pretrain_batch, cfg.lm.pretrain_lr, cfg.train.seed};
      const auto t0 = std::chrono::steady_clock::now();
      const auto losses = lm::pretrain(model, corpus, pc);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      fs::create_directories(out_path);
      num::write_archive(fs::path(out_path) / "lm.ckpt", model.to_archive());
      tok.save((fs::path(out_path) / "vocab.txt").string());
      std::cout << "pretrained " << losses.size() << " steps in " << secs << "s; final loss " << losses.back()
                << "; vocab " << tok.size() << "; parameters " << model.parameter_count() << "; digest "
                << model.freeze_digest() << "\n";
    } else if (*hop) {
      const Config cfg = resolve(c_hop);
      const auto d = load_dataset(data_dir, cfg.train.max_hops);
      retrieval::HopTrainConfig hc{cfg.train.max_hops, cfg.train.hop_dim, cfg.train.hop_epochs, 16,
                                   cfg.train.hop_lr, cfg.train.seed};
      retrieval::HopTrainResult hr;
      const auto clf = retrieval::train_hop_classifier(d.train, hc, &hr);
      num::write_archive(out_path, clf.to_archive());
      std::cout << "train accuracy " << hr.train_accuracy << "; test accuracy " << retrieval::hop_accuracy(clf, d.test)
                << "\n";
    } else if (*tr) {
      const Config cfg = resolve(c_train);
      const auto d = load_dataset(data_dir, cfg.train.max_hops);
      auto l = load_lm(lm_dir);
      train_and_save(d, l, cfg, out_path);
    } else if (*ev) {
      const Config cfg = resolve(c_eval);
      const auto d = load_dataset(data_dir, cfg.train.max_hops);
      auto l = load_lm(lm_dir);
      const fs::path ad(adapter_dir);
      require_file(ad / "adapter.ckpt");
      require_file(ad / "hop.ckpt");
      auto adapter = harness::Adapter::from_archive(num::read_archive(ad / "adapter.ckpt"), d.graph);
      const auto clf = retrieval::HopClassifier::from_archive(num::read_archive(ad / "hop.ckpt"));
      auto tcfg = cfg.train;
      tcfg.no_struct = !adapter.config().use_struct;
      const auto report = harness::evaluate(d.graph, split == "test" ? d.test : d.train, l.model, l.tok, adapter, clf, tcfg);
      print_summary(report);
      if (!report_path.empty()) write_text(report_path, report.to_json());
    } else if (*ab) {
      Config cfg = resolve(c_abl);
      if (mode == "no-struct") cfg.train.no_struct = true;
      if (mode == "no-train-encoder") cfg.train.no_train_encoder = true;
      if (mode == "random-retrieve") cfg.train.random_retrieve = true;
      if (mode == "h+r+t") cfg.train.mode = adapter::StructMode::HplusRplusT;
      const auto d = load_dataset(data_dir, cfg.train.max_hops);
      auto l = load_lm(lm_dir);
      const fs::path out = out_path.empty() ? fs::path("ablate-" + mode) : fs::path(out_path);
      auto res = train_and_save(d, l, cfg, out);
      const auto report = harness::evaluate(d.graph, d.test, l.model, l.tok, *res.adapter, *res.classifier, cfg.train);
      std::cout << mode << ": ";
      print_summary(report);
      write_text(out / "report.json", report.to_json());
    } else if (*gc) {
      const Config cfg = resolve(c_grad);
      double worst = 0.0;
      auto show = [&](const std::vector<harness::SuiteResult>& rs) {
        for (const auto& r : rs) {
          worst = std::max(worst, r.max_relative_error);
          std::cout << std::left << std::setw(32) << r.name << " cases " << r.cases << "  entries " << std::setw(6)
                    << r.entries << " max rel err " << std::scientific << std::setprecision(3)
                    << r.max_relative_error << std::defaultfloat << "  " << r.worst << "\n";
        }
      };
      show(harness::primitive_gradcheck(cases, cfg.train.seed));
      show(harness::composed_gradcheck(cases, cfg.train.seed));
      std::cout << "max relative error " << std::scientific << worst << "\n";
      return worst < 1e-4 ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
