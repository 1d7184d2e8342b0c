// pipeline.cpp

// Copyright 2026  The slotlm Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "slotlm/pipeline.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "slotlm/arpa.hpp"
#include "slotlm/class_grammar.hpp"
#include "slotlm/dlm.hpp"
#include "slotlm/graph.hpp"
#include "slotlm/io_util.hpp"
#include "slotlm/rescorer.hpp"

namespace slotlm {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

PruneSpec parse_prune(const nlohmann::json& j) {
  if (j.contains("order")) return PruneSpec::target_order(j.at("order").get<int>());
  if (j.contains("threshold")) {
    const auto& t = j.at("threshold");
    if (t.is_number()) return PruneSpec::threshold(t.get<double>());
    PruneSpec s;
    s.mode = PruneSpec::Mode::kThreshold;
    for (const auto& [k, v] : t.items()) s.thresholds[std::stoi(k)] = v.get<double>();
    return s;
  }
  throw ModelError("prune spec needs \"order\" or \"threshold\"");
}

}  // namespace

PipelineManifest load_manifest(const fs::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ModelError("manifest " + path.string() + ": " + e.what());
  }
  const fs::path dir = path.parent_path();
  auto resolve = [&](const std::string& p) { return (dir / p).lexically_normal(); };
  try {
    PipelineManifest m;
    m.root_corpus = resolve(j.at("root_corpus").get<std::string>());
    m.root_order = j.value("root_order", 3);
    if (j.contains("root_prune")) m.root_prune = parse_prune(j.at("root_prune"));
    if (j.contains("common_lm") && !j.at("common_lm").is_null()) {
      m.common_lm = resolve(j.at("common_lm").get<std::string>());
    }
    m.lambda = j.value("lambda", 0.5);
    std::set<std::string> names;
    for (const auto& s : j.at("slots")) {
      SlotConfig c;
      c.name = s.at("name").get<std::string>();
      if (c.name.empty() || !names.insert(c.name).second) {
        throw ModelError("slot names must be non-empty and unique: '" + c.name + "'");
      }
      c.entities = resolve(s.at("entities").get<std::string>());
      c.order = s.value("order", 3);
      if (s.contains("prune")) c.prune = parse_prune(s.at("prune"));
      m.slots.push_back(std::move(c));
    }
    m.output_dir = resolve(j.value("output_dir", std::string("out")));
    m.seed = j.value("seed", std::uint64_t{0});
    m.verify_samples = j.value("verify_samples", std::size_t{1000});
    m.verify_max_len = j.value("verify_max_len", 4);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ModelError("manifest " + path.string() + ": " + e.what());
  }
}

namespace {

struct Options {
  std::string manifest;
  std::string slot;
  std::string entities;
  std::optional<double> lambda;
  std::optional<int> prune_order;
  std::optional<std::uint64_t> seed;
  std::string report;
  std::string out_dir;
  std::string input;
  double beam = kInfinity;
  std::vector<std::string> positional;
};

// Artifact names inside the output directory.
struct Layout {
  fs::path dir;
  fs::path root_b() const { return dir / "root.arpa"; }
  fs::path root_c() const { return dir / "root_pruned.arpa"; }
  fs::path root_a() const { return dir / "root_dlm.arpa"; }
  fs::path sub_b(const std::string& s) const { return dir / ("sub_" + s + ".arpa"); }
  fs::path sub_c(const std::string& s) const { return dir / ("sub_" + s + "_pruned.arpa"); }
  fs::path sub_a(const std::string& s) const { return dir / ("sub_" + s + "_dlm.arpa"); }
  fs::path dlm_manifest() const { return dir / "dlm_manifest.json"; }
  fs::path graph() const { return dir / "graph.slotg"; }
  fs::path graph_root() const { return dir / "graph_root.arpa"; }
  fs::path graph_sub(const std::string& s) const { return dir / ("graph_" + s + ".arpa"); }
};

// Runs fn(i) for i < n on at most thread_cap() threads; rethrows the first
// failure.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(thread_cap(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next++) < n;) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::vector<Sentence> read_sentences(const fs::path& path) {
  std::vector<Sentence> out;
  for (const auto& line : read_lines(path)) out.push_back(split_whitespace(line));
  return out;
}

std::set<std::string> slot_names(const PipelineManifest& m) {
  std::set<std::string> s;
  for (const auto& c : m.slots) s.insert(c.name);
  return s;
}

// Sentences given as positional arguments or, with --input, one per line.
std::vector<Sentence> input_sentences(const Options& o) {
  std::vector<Sentence> out;
  if (!o.input.empty()) out = read_sentences(o.input);
  for (const auto& p : o.positional) out.push_back(split_whitespace(p));
  if (out.empty()) throw UsageError("no input sentences (use --input or arguments)");
  return out;
}

// Writes report lines to --report when given, else to `out`.
void emit(const Options& o, std::ostream& out, const std::string& text) {
  if (o.report.empty()) {
    out << text;
  } else {
    write_file_atomic(o.report, text);
  }
}

int cmd_train(const PipelineManifest& m, const Layout& l, const Options& o,
              std::ostream& out) {
  const auto corpus = read_sentences(m.root_corpus);
  NGramModel root = prefix_root_vocab(train_model(corpus, m.root_order), slot_names(m));
  if (m.common_lm) {
    NGramModel common = read_arpa_file(*m.common_lm);
    std::set<std::string> present;
    for (const auto& s : slot_names(m)) {
      if (common.vocab().contains(s)) present.insert(s);
    }
    root = interpolate(root, prefix_root_vocab(common, present), o.lambda.value_or(m.lambda));
  }
  fs::create_directories(l.dir);
  write_arpa_file(root, l.root_b());
  std::vector<std::size_t> sizes(m.slots.size());
  parallel_for(m.slots.size(), [&](std::size_t i) {
    const SlotConfig& c = m.slots[i];
    const NGramModel sub = train_subgrammar(read_lines(c.entities), c);
    write_arpa_file(sub, l.sub_b(c.name));
    sizes[i] = sub.num_entries();
  });
  json j{{"stage", "train"}, {"root_entries", root.num_entries()}};
  for (std::size_t i = 0; i < m.slots.size(); ++i) j["slots"][m.slots[i].name] = sizes[i];
  out << j.dump() << "\n";
  return kExitOk;
}

int cmd_prune(const PipelineManifest& m, const Layout& l, const Options& o,
              std::ostream& out) {
  auto spec = [&](const PruneSpec& s) {
    return o.prune_order ? PruneSpec::target_order(*o.prune_order) : s;
  };
  const NGramModel root = prune(read_arpa_file(l.root_b()), spec(m.root_prune));
  write_arpa_file(root, l.root_c());
  std::vector<std::size_t> sizes(m.slots.size());
  parallel_for(m.slots.size(), [&](std::size_t i) {
    const SlotConfig& c = m.slots[i];
    const NGramModel sub = prune(read_arpa_file(l.sub_b(c.name)), spec(c.prune));
    write_arpa_file(sub, l.sub_c(c.name));
    sizes[i] = sub.num_entries();
  });
  json j{{"stage", "prune"}, {"root_entries", root.num_entries()}};
  for (std::size_t i = 0; i < m.slots.size(); ++i) j["slots"][m.slots[i].name] = sizes[i];
  out << j.dump() << "\n";
  return kExitOk;
}

int cmd_dlm(const PipelineManifest& m, const Layout& l, std::ostream& out) {
  DlmManifest man;
  man.generation = 1;
  auto one = [&](const fs::path& b_path, const fs::path& c_path,
                 const fs::path& a_path) {
    const NGramModel b = read_arpa_file(b_path), c = read_arpa_file(c_path);
    write_arpa_file(build_dlm(b, c), a_path);
    return DlmManifest::Item{a_path.filename().string(),
                             DlmProvenance{model_fingerprint(b), model_fingerprint(c), 1}};
  };
  man.root = one(l.root_b(), l.root_c(), l.root_a());
  std::vector<DlmManifest::Item> items(m.slots.size());
  parallel_for(m.slots.size(), [&](std::size_t i) {
    const auto& n = m.slots[i].name;
    items[i] = one(l.sub_b(n), l.sub_c(n), l.sub_a(n));
  });
  for (std::size_t i = 0; i < m.slots.size(); ++i) man.slots[m.slots[i].name] = items[i];
  write_dlm_manifest(man, l.dlm_manifest());
  out << json{{"stage", "dlm"}, {"generation", man.generation}}.dump() << "\n";
  return kExitOk;
}

int cmd_build_graph(const PipelineManifest& m, const Layout& l, std::ostream& out) {
  if (m.slots.empty()) throw ModelError("build-graph needs at least one slot");
  const NGramModel root = read_arpa_file(l.root_c());
  const Wfst root_fst = lm_to_fst(root, slot_names(m));
  std::map<std::string, Wfst> subs;
  for (const auto& c : m.slots) {
    const NGramModel sub = read_arpa_file(l.sub_c(c.name));
    subs.emplace(c.name, subgrammar_to_fst(sub, c.name));
    write_arpa_file(sub, l.graph_sub(c.name));
  }
  const Wfst g = replace_slots(root_fst, subs);
  save_wfst(g, l.graph());
  write_arpa_file(root, l.graph_root());
  out << json{{"stage", "build-graph"},
              {"states", g.num_states()},
              {"arcs", g.num_arcs()},
              {"predicted_arcs", predicted_replaced_arcs(root_fst, subs)}}
             .dump()
      << "\n";
  return kExitOk;
}

DlmSet load_dlms(const Layout& l, const DlmManifest& man) {
  DlmSet set;
  set.root = read_arpa_file(l.dir / man.root.file);
  set.root_provenance = man.root.provenance;
  for (const auto& [name, item] : man.slots) {
    set.slots.emplace(name, read_arpa_file(l.dir / item.file));
    set.slot_provenance.emplace(name, item.provenance);
  }
  return set;
}

std::unique_ptr<RescoreContext> load_context(const PipelineManifest& m,
                                             const Layout& l) {
  auto graph = std::make_shared<const Wfst>(load_wfst(l.graph()));
  std::map<std::string, NGramModel> subs;
  for (const auto& c : m.slots) subs.emplace(c.name, read_arpa_file(l.graph_sub(c.name)));
  const DlmManifest man = read_dlm_manifest(l.dlm_manifest());
  return std::make_unique<RescoreContext>(std::move(graph), std::move(subs),
                                          load_dlms(l, man), man.generation);
}

ClassGrammar full_grammar(const PipelineManifest& m, const Layout& l) {
  std::map<std::string, NGramModel> subs;
  for (const auto& c : m.slots) subs.emplace(c.name, read_arpa_file(l.sub_b(c.name)));
  return ClassGrammar(read_arpa_file(l.root_b()), std::move(subs));
}

void error_json(std::ostream& err, const std::string& what, int code,
                const json& extra = json::object()) {
  json j{{"error", what}, {"exit_code", code}};
  for (const auto& [k, v] : extra.items()) j[k] = v;
  err << "slotlm: error: " << what << "\n" << j.dump() << "\n";
}

int cmd_decode(const PipelineManifest& m, const Layout& l, const Options& o,
               std::ostream& out, std::ostream& err) {
  const auto ctx = load_context(m, l);
  int code = kExitOk;
  std::string report;
  for (const auto& s : input_sentences(o)) {
    try {
      report += decode_report_line(s, decode(*ctx, s, o.beam)) + "\n";
    } catch (const GraphError& e) {
      error_json(err, e.what(), kExitCheckFailed);
      code = kExitCheckFailed;
    }
  }
  emit(o, out, report);
  return code;
}

int cmd_score(const PipelineManifest& m, const Layout& l, const Options& o,
              std::ostream& out, std::ostream& err) {
  const ClassGrammar g = full_grammar(m, l);
  int code = kExitOk;
  std::string report;
  for (const auto& s : input_sentences(o)) {
    try {
      const ClassScore cs = class_sentence_score(g, s);
      json parts = json::array();
      for (const auto& p : cs.best) {
        std::string text;
        for (std::size_t i = p.begin; i < p.end; ++i) {
          text += (i > p.begin ? " " : "") + s[i];
        }
        parts.push_back(json{{"phrase", text}, {"class", p.cls}});
      }
      std::string input;
      for (const auto& w : s) input += (input.empty() ? "" : " ") + w;
      report += json{{"input", input}, {"score_log10", cs.score}, {"partition", parts}}
                    .dump() +
                "\n";
    } catch (const ModelError& e) {
      error_json(err, e.what(), kExitCheckFailed);
      code = kExitCheckFailed;
    }
  }
  emit(o, out, report);
  return code;
}

int cmd_update(const PipelineManifest& m, const Layout& l, const Options& o,
               std::ostream& out, std::ostream& err) {
  if (o.slot.empty() || o.entities.empty()) {
    throw UsageError("update needs --slot and --entities");
  }
  const SlotConfig* cfg = nullptr;
  for (const auto& c : m.slots) {
    if (c.name == o.slot) cfg = &c;
  }
  if (!cfg) throw UsageError("unknown slot " + o.slot);
  const auto ctx = load_context(m, l);
  const auto entities = read_lines(o.entities);
  UpdateResult r;
  try {
    r = hot_update(*ctx, o.slot, entities, *cfg);
  } catch (const UpdateRejected& e) {
    error_json(err, e.what(), kExitCheckFailed, json{{"tokens", e.tokens()}});
    return kExitCheckFailed;
  }
  write_arpa_file(r.sub_model, l.sub_b(o.slot));
  write_arpa_file(r.dlm, l.sub_a(o.slot));
  DlmManifest man = read_dlm_manifest(l.dlm_manifest());
  man.generation = r.generation;
  man.slots[o.slot] = DlmManifest::Item{
      l.sub_a(o.slot).filename().string(),
      DlmProvenance{model_fingerprint(r.sub_model),
                    model_fingerprint(ctx->graph_sub(o.slot)), r.generation}};
  write_dlm_manifest(man, l.dlm_manifest());
  out << json{{"stage", "update"},
              {"slot", o.slot},
              {"entities", entities.size()},
              {"generation", r.generation}}
             .dump()
      << "\n";
  return kExitOk;
}

int cmd_interpolate(const Options& o, std::ostream& out) {
  if (o.positional.size() != 3) {
    throw UsageError("interpolate needs A.arpa B.arpa OUT.arpa");
  }
  const double lambda = o.lambda.value_or(0.5);
  const NGramModel r = interpolate(read_arpa_file(o.positional[0]),
                                   read_arpa_file(o.positional[1]), lambda);
  write_arpa_file(r, o.positional[2]);
  out << json{{"stage", "interpolate"}, {"lambda", lambda}, {"entries", r.num_entries()}}
             .dump()
      << "\n";
  return kExitOk;
}

// Input words the graph accepts, in label order.
std::vector<std::string> graph_words(const Wfst& g) {
  std::vector<std::string> out;
  for (Label l = 1; l < g.symbols().size(); ++l) {
    if (g.symbols().kind(l) == SymbolKind::kWord) out.push_back(g.symbols().name(l));
  }
  return out;
}

int cmd_verify(const PipelineManifest& m, const Layout& l, const Options& o,
               std::ostream& out) {
  const std::uint64_t seed = o.seed.value_or(m.seed);
  const DlmManifest man = read_dlm_manifest(l.dlm_manifest());
  const DlmSet dlms = load_dlms(l, man);
  bool pass = true;
  json report;

  auto check = [&](const std::string& name, const NGramModel& a, const NGramModel& b,
                   const NGramModel& c) {
    const SubsetReport sub = verify_subset(b, c);
    const DlmReport d = verify_dlm(a, b, c, m.verify_samples, seed);
    pass = pass && sub.ok() && d.pass;
    json j{{"subset_ok", sub.ok()},
           {"missing_from_b", sub.missing_from_b},
           {"prefix_violations", sub.prefix_violations},
           {"dlm_samples", d.samples},
           {"dlm_max_error", d.max_error},
           {"dlm_pass", d.pass}};
    if (!d.note.empty()) j["note"] = d.note;
    if (d.worst && !d.pass) {
      j["offender"] = json{{"history", d.worst->history},
                           {"word", d.worst->word},
                           {"suspect_history", d.worst->suspect_history},
                           {"suspect_kind", d.worst->suspect_kind}};
    }
    report["models"][name.empty() ? "root" : name] = j;
  };
  check("", dlms.root, read_arpa_file(l.root_b()), read_arpa_file(l.graph_root()));
  for (const auto& c : m.slots) {
    check(c.name, dlms.slots.at(c.name), read_arpa_file(l.sub_b(c.name)),
          read_arpa_file(l.graph_sub(c.name)));
  }

  // Rescoring equivalence: exhaustive when small, sampled otherwise.
  const auto ctx = load_context(m, l);
  const ClassGrammar full = full_grammar(m, l);
  const auto words = graph_words(ctx->graph());
  std::vector<Sentence> sentences{{}};
  double total = 1.0, power = 1.0;
  for (int len = 1; len <= m.verify_max_len; ++len) total += (power *= static_cast<double>(words.size()));
  if (total <= 50000.0) {
    std::vector<Sentence> frontier{{}};
    for (int len = 1; len <= m.verify_max_len; ++len) {
      std::vector<Sentence> grown;
      for (const auto& s : frontier) {
        for (const auto& w : words) {
          grown.push_back(s);
          grown.back().push_back(w);
        }
      }
      sentences.insert(sentences.end(), grown.begin(), grown.end());
      frontier = std::move(grown);
    }
  } else {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> len_dist(1, m.verify_max_len);
    std::uniform_int_distribution<std::size_t> word_dist(0, words.size() - 1);
    for (int i = 0; i < 200; ++i) {
      Sentence s(static_cast<std::size_t>(len_dist(rng)));
      for (auto& w : s) w = words[word_dist(rng)];
      sentences.push_back(std::move(s));
    }
  }
  double max_err = 0.0;
  std::string worst;
  for (const auto& s : sentences) {
    const double got = decode(*ctx, s).total;
    const double want = class_sentence_score_prefixed(full, s).score;
    if (std::abs(got - want) > max_err || !std::isfinite(got - want)) {
      max_err = std::isfinite(got - want) ? std::abs(got - want) : kInfinity;
      worst.clear();
      for (const auto& w : s) worst += (worst.empty() ? "" : " ") + w;
    }
  }
  const bool rescore_ok = max_err <= 1e-6;
  pass = pass && rescore_ok;
  report["rescoring"] = json{{"sentences", sentences.size()},
                             {"max_error", max_err},
                             {"tolerance", 1e-6},
                             {"worst", worst},
                             {"pass", rescore_ok}};
  report["pass"] = pass;
  const fs::path path = o.report.empty() ? l.dir / "verify_report.json" : fs::path(o.report);
  write_file_atomic(path, report.dump(2) + "\n");
  out << json{{"stage", "verify"}, {"pass", pass}, {"report", path.string()}}.dump() << "\n";
  return pass ? kExitOk : kExitCheckFailed;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"slotlm: class-based n-gram grammars with difference-model rescoring"};
  app.require_subcommand(1);
  Options o;

  auto with_manifest = [&](CLI::App* sub) {
    sub->add_option("--manifest", o.manifest, "Pipeline manifest (JSON)")->required();
    sub->add_option("--out", o.out_dir, "Override the manifest output directory");
  };
  auto* train = app.add_subcommand("train", "Train root and sub-grammars");
  with_manifest(train);
  train->add_option("--lambda", o.lambda, "Weight of the root model against the common LM");
  auto* prune_cmd = app.add_subcommand("prune", "Prune every model");
  with_manifest(prune_cmd);
  prune_cmd->add_option("--prune-order", o.prune_order, "Keep orders up to K everywhere");
  auto* dlm = app.add_subcommand("dlm", "Build difference models");
  with_manifest(dlm);
  auto* interp = app.add_subcommand("interpolate", "Interpolate two ARPA models");
  interp->add_option("--lambda", o.lambda, "Weight of the first model");
  interp->add_option("files", o.positional, "A.arpa B.arpa OUT.arpa")->expected(3);
  auto* graph = app.add_subcommand("build-graph", "Build the slot-replaced graph");
  with_manifest(graph);
  auto* score = app.add_subcommand("score", "Class-model score of plain sentences");
  with_manifest(score);
  auto* decode_cmd = app.add_subcommand("decode", "Rescored decode of graph-token sentences");
  with_manifest(decode_cmd);
  decode_cmd->add_option("--beam", o.beam, "Beam width in log10 units");
  auto* update = app.add_subcommand("update", "Hot-update one slot's entities");
  with_manifest(update);
  update->add_option("--slot", o.slot, "Slot name");
  update->add_option("--entities", o.entities, "New entity list");
  auto* verify = app.add_subcommand("verify", "Check subsets, DLMs and rescoring");
  with_manifest(verify);
  verify->add_option("--seed", o.seed, "Sampling seed");
  for (auto* sub : {score, decode_cmd}) {
    sub->add_option("--input", o.input, "File with one sentence per line");
    sub->add_option("sentences", o.positional, "Sentences");
  }
  for (auto* sub : {score, decode_cmd, verify}) {
    sub->add_option("--report", o.report, "Write the report here");
  }

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (interp->parsed()) return cmd_interpolate(o, out);
    const PipelineManifest m = load_manifest(o.manifest);
    Layout l{o.out_dir.empty() ? m.output_dir : fs::path(o.out_dir)};
    if (train->parsed()) return cmd_train(m, l, o, out);
    if (prune_cmd->parsed()) return cmd_prune(m, l, o, out);
    if (dlm->parsed()) return cmd_dlm(m, l, out);
    if (graph->parsed()) return cmd_build_graph(m, l, out);
    if (score->parsed()) return cmd_score(m, l, o, out, err);
    if (decode_cmd->parsed()) return cmd_decode(m, l, o, out, err);
    if (update->parsed()) return cmd_update(m, l, o, out, err);
    if (verify->parsed()) return cmd_verify(m, l, o, out);
  } catch (const std::exception& e) {
    error_json(err, e.what(), kExitUsage);
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace slotlm
