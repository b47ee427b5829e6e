// Copyright 2026 The FuseNet Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// fusenet: synthesize data, train the three model variants, evaluate,
// predict, and run the gradient check.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fusenet/fusenet.hpp"
#include "json.hpp"

namespace {

using namespace fusenet;

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Classes in the order the per-class recall table is printed.
constexpr std::array<std::string_view, 13> kReportDisplayOrder = {
    "Early Payoff",
    "Other",
    "Cost Explanation",
    "Minimum Repayment Requirement",
    "How to Enroll",
    "Edit Offer if Already Accepted",
    "Renewal Eligibility",
    "Increase Options",
    "No Credit Check",
    "Funds ETA",
    "Plan Completed",
    "Decline Follow Up",
    "Not Eligible for Renewal",
};

// ---------------------------------------------------------------------------
// --config FILE: flat key=value lines, applied only for flags not given on
// the command line.

std::vector<std::string> merge_config(std::vector<std::string> args) {
  std::optional<std::string> path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw UsageError("--config requires a file");
      path = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }
  if (!path) return args;

  std::ifstream in(*path);
  if (!in) throw UsageError("cannot read config file " + *path);
  auto given = [&](const std::string& flag) {
    for (const auto& a : args) {
      if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
    }
    return false;
  };
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(*path + ":" + std::to_string(lineno) + ": expected key=value");
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.rfind("--", 0) == 0) key = key.substr(2);
    if (key.empty()) throw UsageError(*path + ":" + std::to_string(lineno) + ": empty key");
    const std::string flag = "--" + key;
    if (given(flag)) continue;
    // Boolean flags take no argument on the command line.
    if (value == "true") {
      args.push_back(flag);
    } else if (value != "false") {
      args.push_back(flag);
      args.push_back(value);
    }
  }
  return args;
}

// ---------------------------------------------------------------------------
// Helpers

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
  if (!out) throw Error("write failed for " + path);
}

std::string fmt(double v, int precision = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

std::optional<EmbeddingTable> load_embeddings_for(const FusionModel& m, const std::string& override_path) {
  if (!uses_text(m.variant)) return std::nullopt;
  std::string path = override_path;
  if (path.empty()) {
    const auto it = m.metadata.find(meta::kEmbeddings);
    if (it == m.metadata.end()) throw Error("model reads text; pass --embeddings");
    path = it->second;
  }
  return load_vec_file(path, SIZE_MAX, m.config.embed_dim);
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
  std::string out;
  std::string manifest;
  std::string embeddings_out;
  std::size_t n = 1300;
  double noise = 0.05;
  std::uint64_t seed = 5;
  std::size_t num_features = 20;
  std::size_t embed_dim = 16;
};

int run_synth(const SynthArgs& a) {
  SyntheticConfig cfg;
  cfg.n = a.n;
  cfg.noise = a.noise;
  cfg.seed = a.seed;
  cfg.num_features = a.num_features;
  const auto ds = generate_synthetic(cfg);
  write_jsonl(a.out, ds.examples);
  const std::string manifest = a.manifest.empty() ? a.out + ".manifest.json" : a.manifest;
  write_text(manifest, ds.manifest.dump(2) + "\n");
  if (!a.embeddings_out.empty()) {
    write_vec_file(a.embeddings_out, synthetic_embeddings(ds.examples, a.embed_dim, a.seed));
  }
  std::cout << "wrote " << ds.examples.size() << " examples to " << a.out << "\n";
  std::cout << "manifest " << manifest << "\n";
  if (!a.embeddings_out.empty()) std::cout << "embeddings " << a.embeddings_out << "\n";
  std::cout << "Bayes ceilings (top-1 / top-3):\n";
  for (const char* src : {"text", "signals", "fusion"}) {
    const auto& c = ds.manifest["ceilings"][src];
    std::cout << "  " << src << (std::string(src) == "text" ? "    " : (std::string(src) == "fusion" ? "  " : " "))
              << fmt(c["top1"].get<double>()) << " / " << fmt(c["top3"].get<double>()) << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string data;
  std::string variant = "fusion";
  std::string embeddings;
  std::string out;
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double lr = 1e-3;
  std::uint64_t seed = 1;
  std::string optimizer = "adam";
  double dropout = 0.0;
  std::size_t patience = 5;
  std::size_t lstm_hidden = 64;
  std::size_t mlp_hidden = 64;
  std::size_t max_seq_len = 100;
  std::string mlp_activation = "relu";
  std::uint64_t split_seed = 1;
  std::size_t vocab_limit = SIZE_MAX;
  std::size_t threads = default_thread_count();
  bool quiet = false;
};

int run_train(const TrainArgs& a) {
  const Variant variant = variant_from_string(a.variant);
  if (uses_text(variant) && a.embeddings.empty()) {
    throw UsageError("--embeddings is required for variant " + a.variant);
  }
  if (a.lr == 0.0) std::cerr << "warning: --lr 0 leaves every parameter unchanged\n";

  ExperimentConfig cfg;
  cfg.model.lstm_hidden = a.lstm_hidden;
  cfg.model.mlp_hidden = a.mlp_hidden;
  cfg.model.max_seq_len = a.max_seq_len;
  cfg.model.mlp_activation = activation_from_string(a.mlp_activation);
  cfg.model.seed = a.seed;
  cfg.train.epochs = a.epochs;
  cfg.train.batch_size = a.batch_size;
  cfg.train.learning_rate = a.lr;
  cfg.train.optimizer = optimizer_from_string(a.optimizer);
  cfg.train.dropout_rate = a.dropout;
  cfg.train.early_stop_patience = a.patience;
  cfg.train.seed = a.seed;
  cfg.train.threads = a.threads;
  cfg.split_seed = a.split_seed;
  cfg.train.validate(kNumClasses);

  const Dataset data = load_jsonl(a.data);
  std::optional<EmbeddingTable> table;
  if (uses_text(variant)) {
    table = load_vec_file(a.embeddings, a.vocab_limit);
    cfg.embeddings_path = a.embeddings;
  }
  const PreparedData p = prepare(data, table ? &*table : nullptr, a.max_seq_len, cfg.fractions, cfg.split_seed);
  std::cout << "variant " << a.variant << ": " << p.train.size() << " train / " << p.val.size() << " val / "
            << p.test.size() << " test\n";

  const auto result = run_experiment(variant, p, table ? &*table : nullptr, cfg, [&](const EpochRecord& e) {
    if (a.quiet) return;
    std::cout << "epoch " << e.epoch << "  train_loss " << fmt(e.train_loss) << "  val_loss " << fmt(e.val_loss)
              << "  val_top3 " << fmt(e.val_top3) << "  (" << fmt(e.seconds, 2) << "s)\n";
  });
  save(result.model, a.out);
  const std::string report_path = a.out + ".report.tsv";
  result.report.write_tsv(report_path);
  std::cout << "best epoch " << result.report.best_epoch << "  val_top3 " << fmt(result.report.best().val_top3)
            << "\n";
  std::cout << "checkpoint " << a.out << "\nreport " << report_path << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string model;
  std::string data;
  std::size_t k = 3;
  std::string out;
  std::string split = "all";
  std::string embeddings;
  std::vector<std::string> compare;
  std::size_t threads = default_thread_count();
};

void print_report(const EvalReport& r) {
  std::cout << "n " << r.n << "  top-" << r.k << " accuracy " << fmt(r.accuracy) << "\n";
  std::cout << "top-" << r.k << " recall by class:\n";
  for (auto name : kReportDisplayOrder) {
    const auto c = class_index(name);
    if (!c || *c >= r.class_names.size()) continue;
    char line[160];
    std::snprintf(line, sizeof line, "  %-32s n=%-5zu %s\n", std::string(name).c_str(), r.n_k[*c],
                  r.recall[*c] ? fmt(*r.recall[*c]).c_str() : "undefined");
    std::cout << line;
  }
}

int run_compare(const EvalArgs& a) {
  std::vector<std::pair<std::string, EvalReport>> reports;
  for (const auto& path : a.compare) {
    reports.emplace_back(std::filesystem::path(path).stem().string(), read_report(path));
  }
  char line[256];
  std::snprintf(line, sizeof line, "%-32s", "class");
  std::cout << line;
  for (const auto& [name, r] : reports) {
    std::snprintf(line, sizeof line, " %12s", name.c_str());
    std::cout << line;
  }
  std::cout << "\n";
  for (auto cname : kReportDisplayOrder) {
    std::snprintf(line, sizeof line, "%-32s", std::string(cname).c_str());
    std::cout << line;
    for (const auto& [name, r] : reports) {
      const auto c = class_index(cname);
      std::string cell = "-";
      if (c && *c < r.recall.size()) cell = r.recall[*c] ? fmt(*r.recall[*c]) : "undefined";
      std::snprintf(line, sizeof line, " %12s", cell.c_str());
      std::cout << line;
    }
    std::cout << "\n";
  }
  std::snprintf(line, sizeof line, "%-32s", "accuracy");
  std::cout << line;
  for (const auto& [name, r] : reports) {
    std::snprintf(line, sizeof line, " %12s", fmt(r.accuracy).c_str());
    std::cout << line;
  }
  std::cout << "\n";

  std::vector<std::size_t> order(reports.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return reports[x].second.accuracy > reports[y].second.accuracy; });
  std::cout << "ordering:";
  for (std::size_t i = 0; i < order.size(); ++i) {
    std::cout << (i ? " > " : " ") << reports[order[i]].first << " (" << fmt(reports[order[i]].second.accuracy) << ")";
  }
  std::cout << "\n";

  if (!a.out.empty()) {
    nlohmann::ordered_json j;
    j["version"] = 1;
    auto models = nlohmann::ordered_json::array();
    for (const auto& [name, r] : reports) models.push_back({{"name", name}, {"k", r.k}, {"accuracy", r.accuracy}});
    j["models"] = std::move(models);
    auto ranked = nlohmann::ordered_json::array();
    for (auto i : order) ranked.push_back(reports[i].first);
    j["ordering"] = std::move(ranked);
    write_text(a.out, j.dump(2) + "\n");
  }
  return 0;
}

int run_eval(const EvalArgs& a) {
  if (!a.compare.empty()) {
    if (!a.model.empty() || !a.data.empty()) throw UsageError("--compare cannot be combined with --model/--data");
    return run_compare(a);
  }
  if (a.model.empty() || a.data.empty()) throw UsageError("eval needs --model and --data (or --compare)");
  const FusionModel model = load(a.model);
  if (a.k < 1 || a.k > model.config.num_classes) {
    throw UsageError("--k must be in [1, " + std::to_string(model.config.num_classes) + "]");
  }
  const auto table = load_embeddings_for(model, a.embeddings);
  Dataset data = load_jsonl(a.data);
  if (a.split != "all") {
    const auto [seed, fractions] = split_of(model);
    auto parts = split(data, fractions, seed);
    data = a.split == "train" ? std::move(parts.train) : a.split == "val" ? std::move(parts.val) : std::move(parts.test);
  }
  const auto inputs = encode_for(model, data, table ? &*table : nullptr);
  const EvalReport r = report(model, inputs, a.k, a.threads);
  print_report(r);
  const double gap = r.identity_gap();
  std::cout << "identity |accuracy - sum_c (n_c/n) recall_c| = " << sci(gap) << (gap <= 1e-12 ? " (ok)" : " (VIOLATED)")
            << "\n";
  if (gap > 1e-12) throw Error("weighted-recall identity violated");
  if (!a.out.empty()) {
    write_report(a.out, r);
    std::cout << "report " << a.out << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// predict

struct PredictArgs {
  std::string model;
  std::string embeddings;
  std::string text;
  std::string features;
  std::size_t k = 3;
  std::string out;
};

Example features_example(const std::string& path, const FusionModel& m, const FeaturePipeline& pipeline) {
  Example ex;
  ex.id = "predict";
  if (path.empty()) {
    if (uses_tabular(m.variant)) throw UsageError("--features is required for variant " + std::string(to_string(m.variant)));
    ex.numerical.assign(pipeline.scaler.mean.size(), 0.0);
    return ex;
  }
  std::ifstream in(path);
  if (!in) throw Error("cannot open features file " + path);
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path + ": " + e.what(), 0);
  }
  if (!j.is_object()) throw ParseError(path + ": expected a JSON object", 0);
  if (!j.contains("numerical")) throw ParseError(path + ": missing field 'numerical'", 0);
  if (!j.contains("categorical")) throw ParseError(path + ": missing field 'categorical'", 0);
  const auto& num = j["numerical"];
  if (!num.is_array()) throw ParseError(path + ": field 'numerical' must be an array", 0);
  for (const auto& v : num) {
    if (!v.is_number()) throw ParseError(path + ": field 'numerical' must hold numbers", 0);
    ex.numerical.push_back(v.get<double>());
  }
  if (ex.numerical.size() != pipeline.scaler.mean.size()) {
    throw ShapeError(path + ": field 'numerical' has " + std::to_string(ex.numerical.size()) +
                     " values, model expects " + std::to_string(pipeline.scaler.mean.size()));
  }
  const auto& cat = j["categorical"];
  if (!cat.is_object()) throw ParseError(path + ": field 'categorical' must be an object", 0);
  for (const auto& [name, cats] : pipeline.encoder.features) {
    if (!cat.contains(name)) throw ParseError(path + ": missing categorical field '" + name + "'", 0);
    if (!cat[name].is_string()) throw ParseError(path + ": categorical field '" + name + "' must be a string", 0);
    ex.categorical.emplace_back(name, cat[name].get<std::string>());
  }
  return ex;
}

int run_predict(const PredictArgs& a) {
  const FusionModel model = load(a.model);
  if (a.k < 1 || a.k > model.config.num_classes) {
    throw UsageError("--k must be in [1, " + std::to_string(model.config.num_classes) + "]");
  }
  const FeaturePipeline pipeline = pipeline_of(model);
  Example ex = features_example(a.features, model, pipeline);
  ex.text = a.text;
  ex.label = std::string(kClassNames.back());  // placeholder, never read
  const auto table = load_embeddings_for(model, a.embeddings);
  const auto inputs = encode_for(model, std::span(&ex, 1), table ? &*table : nullptr);
  const Prediction p = predict_topk(model, inputs[0].input, a.k);
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < p.top_k.size(); ++i) {
    const std::size_t c = p.top_k[i];
    const std::string name = model.config.num_classes == kNumClasses ? std::string(kClassNames[c])
                                                                     : "class_" + std::to_string(c);
    std::cout << (i + 1) << ". " << name << "\t" << fmt(p.probs[c], 6) << "\n";
    j.push_back({{"class", name}, {"probability", p.probs[c]}});
  }
  if (!a.out.empty()) write_text(a.out, j.dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------
// gradcheck

struct GradcheckArgs {
  double tolerance = 1e-4;
  std::size_t seeds = 10;
  std::uint64_t first_seed = 0;
  std::string out;
};

int run_gradcheck(const GradcheckArgs& a) {
  struct Row {
    std::string group;
    std::string block;
    double err = 0.0;
  };
  std::vector<Row> rows;
  auto absorb = [&](const std::string& group, const GradCheckResult& r) {
    for (const auto& b : r.blocks) {
      auto it = std::find_if(rows.begin(), rows.end(), [&](const Row& x) { return x.group == group && x.block == b.name; });
      if (it == rows.end()) {
        rows.push_back({group, b.name, b.max_rel_err});
      } else {
        it->err = std::max(it->err, b.max_rel_err);
      }
    }
  };
  for (std::uint64_t s = a.first_seed; s < a.first_seed + a.seeds; ++s) {
    for (auto k : kAllLayerKinds) absorb("layer:" + std::string(to_string(k)), grad_check_layer(k, s));
    for (auto v : {Variant::fusion, Variant::mlp_only, Variant::text_only}) {
      absorb("model:" + std::string(to_string(v)), grad_check(v, s));
    }
  }

  std::map<std::string, double> group_max;
  std::vector<const Row*> failed;
  char line[200];
  for (const auto& r : rows) {
    const bool ok = r.err < a.tolerance;
    std::snprintf(line, sizeof line, "%-18s %-24s max_rel_err %.3e %s\n", r.group.c_str(), r.block.c_str(), r.err,
                  ok ? "ok" : "FAIL");
    std::cout << line;
    group_max[r.group] = std::max(group_max[r.group], r.err);
    if (!ok) failed.push_back(&r);
  }
  std::cout << "summary over " << a.seeds << " seeds, tolerance " << sci(a.tolerance) << ":\n";
  for (const auto& [g, e] : group_max) {
    std::snprintf(line, sizeof line, "  %-18s max_rel_err %.3e %s\n", g.c_str(), e, e < a.tolerance ? "ok" : "FAIL");
    std::cout << line;
  }
  if (!a.out.empty()) {
    nlohmann::ordered_json j;
    j["tolerance"] = a.tolerance;
    j["seeds"] = a.seeds;
    auto blocks = nlohmann::ordered_json::array();
    for (const auto& r : rows) blocks.push_back({{"group", r.group}, {"block", r.block}, {"max_rel_err", r.err}});
    j["blocks"] = std::move(blocks);
    j["passed"] = failed.empty();
    write_text(a.out, j.dump(2) + "\n");
  }
  if (!failed.empty()) {
    std::cout << "gradient check FAILED for " << failed.size() << " block(s):\n";
    for (const Row* r : failed) std::cout << "  " << r->group << " " << r->block << "\n";
    return kExitRuntime;
  }
  std::cout << "gradient check passed\n";
  return 0;
}

struct NoiseRange : CLI::Validator {
  NoiseRange() {
    name_ = "NOISE";
    func_ = [](const std::string& s) {
      double v = 0.0;
      if (!CLI::detail::lexical_cast(s, v) || !(v >= 0.0 && v < 1.0)) return std::string("noise must be in [0, 1)");
      return std::string();
    };
  }
};

int dispatch(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  args = merge_config(std::move(args));

  CLI::App app{"fusenet: tabular + text fusion classifier"};
  app.require_subcommand(1);
  app.add_option("--config", "flat key=value file; explicit flags win");

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "write a synthetic dataset and its manifest");
  synth->add_option("--out", sa.out, "output JSONL path")->required();
  synth->add_option("--n", sa.n, "number of examples")->check(CLI::Range(std::size_t{130}, std::size_t{10000000}));
  synth->add_option("--noise", sa.noise, "probability a source shows another class's pattern")->check(NoiseRange());
  synth->add_option("--seed", sa.seed, "random seed");
  synth->add_option("--num-features", sa.num_features, "numerical signal count")->check(CLI::PositiveNumber);
  synth->add_option("--manifest", sa.manifest, "manifest path (default <out>.manifest.json)");
  synth->add_option("--embeddings-out", sa.embeddings_out, "also write random word vectors (.vec)");
  synth->add_option("--embed-dim", sa.embed_dim, "dimension for --embeddings-out")->check(CLI::PositiveNumber);

  TrainArgs ta;
  auto* trn = app.add_subcommand("train", "train one model variant");
  trn->add_option("--data", ta.data, "training JSONL")->required();
  trn->add_option("--variant", ta.variant, "fusion, mlp or text")->check(CLI::IsMember({"fusion", "mlp", "text"}));
  trn->add_option("--embeddings", ta.embeddings, "word vectors (.vec); required unless --variant mlp");
  trn->add_option("--out", ta.out, "checkpoint path")->required();
  trn->add_option("--epochs", ta.epochs)->check(CLI::PositiveNumber);
  trn->add_option("--batch-size", ta.batch_size)->check(CLI::PositiveNumber);
  trn->add_option("--lr", ta.lr)->check(CLI::NonNegativeNumber);
  trn->add_option("--seed", ta.seed, "initialization, shuffling and dropout seed");
  trn->add_option("--optimizer", ta.optimizer)->check(CLI::IsMember({"adam", "sgd"}));
  trn->add_option("--dropout", ta.dropout, "dropout on branch outputs")->check(CLI::Range(0.0, 0.999999));
  trn->add_option("--patience", ta.patience, "early-stopping patience in epochs; 0 disables");
  trn->add_option("--lstm-hidden", ta.lstm_hidden)->check(CLI::PositiveNumber);
  trn->add_option("--mlp-hidden", ta.mlp_hidden)->check(CLI::PositiveNumber);
  trn->add_option("--max-seq-len", ta.max_seq_len)->check(CLI::PositiveNumber);
  trn->add_option("--mlp-activation", ta.mlp_activation)->check(CLI::IsMember({"relu", "tanh", "sigmoid", "identity"}));
  trn->add_option("--split-seed", ta.split_seed, "seed of the stratified 60/20/20 split");
  trn->add_option("--vocab-limit", ta.vocab_limit, "read at most this many embedding rows")->check(CLI::PositiveNumber);
  trn->add_option("--threads", ta.threads)->check(CLI::PositiveNumber);
  trn->add_flag("--quiet", ta.quiet, "no per-epoch lines");

  EvalArgs ea;
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint, or compare saved reports");
  ev->add_option("--model", ea.model, "checkpoint");
  ev->add_option("--data", ea.data, "JSONL dataset");
  ev->add_option("--k", ea.k)->check(CLI::PositiveNumber);
  ev->add_option("--out", ea.out, "write the report (or comparison) as JSON");
  ev->add_option("--split", ea.split, "all, or a split of --data recreated with the model's split seed")
      ->check(CLI::IsMember({"all", "train", "val", "test"}));
  ev->add_option("--embeddings", ea.embeddings, "override the embeddings path stored in the model");
  ev->add_option("--compare", ea.compare, "report JSON files to compare")->expected(1, -1);
  ev->add_option("--threads", ea.threads)->check(CLI::PositiveNumber);

  PredictArgs pa;
  auto* pr = app.add_subcommand("predict", "top-k classes for one inquiry");
  pr->add_option("--model", pa.model, "checkpoint")->required();
  pr->add_option("--embeddings", pa.embeddings, "override the embeddings path stored in the model");
  pr->add_option("--text", pa.text, "inquiry text")->required();
  pr->add_option("--features", pa.features, "JSON file with 'numerical' and 'categorical'");
  pr->add_option("--k", pa.k)->check(CLI::PositiveNumber);
  pr->add_option("--out", pa.out, "write predictions as JSON");

  GradcheckArgs ga;
  auto* gc = app.add_subcommand("gradcheck", "analytic vs finite-difference gradients");
  gc->add_option("--tolerance", ga.tolerance)->check(CLI::PositiveNumber);
  gc->add_option("--seeds", ga.seeds)->check(CLI::PositiveNumber);
  gc->add_option("--first-seed", ga.first_seed);
  gc->add_option("--out", ga.out, "write per-block results as JSON");

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  if (synth->parsed()) return run_synth(sa);
  if (trn->parsed()) return run_train(ta);
  if (ev->parsed()) return run_eval(ea);
  if (pr->parsed()) return run_predict(pa);
  if (gc->parsed()) return run_gradcheck(ga);
  return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const fusenet::ConfigError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
