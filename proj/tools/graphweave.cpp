// graphweave: generate graphs, compile them into sparse masked networks,
// train, prune, and extract the structure back out.
//
// Output contract: stdout carries JSON lines (line 1 is the resolved run
// config), stderr carries the human summary. Exit codes: 0 success, 1 runtime
// failure, 2 usage error, 3 round-trip mismatch.

#include <cstdint>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "graphweave/graphweave.hpp"

namespace {

using gw::json;

json stats_to_json(const gw::GraphStats& s) {
  json j;
  j["vertices"] = s.vertices;
  j["edges"] = s.edges;
  if (s.density)
    j["density"] = *s.density;
  else
    j["density"] = nullptr;
  j["layer_count"] = s.layer_count;
  j["layer_sizes"] = s.layer_sizes;
  j["max_path_length"] = s.max_path_length;
  return j;
}

int to_int(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw gw::SpecError(what + " must be an integer, got '" + s + "'");
  }
}

double to_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw gw::SpecError(what + " must be a number, got '" + s + "'");
  }
}

std::vector<int> parse_int_csv(const std::string& csv, const std::string& what) {
  std::vector<int> out;
  if (csv.empty()) return out;
  std::size_t start = 0;
  while (start <= csv.size()) {
    const std::size_t comma = csv.find(',', start);
    const std::string tok = csv.substr(start, comma == std::string::npos ? comma : comma - start);
    out.push_back(to_int(tok, what));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

struct DataOptions {
  std::string source;
  int n = 256;
  std::uint64_t seed = 0;
  double noise = -1.0;
  int label_col = -1;
};

gw::Dataset load_dataset(const DataOptions& d) {
  if (d.source == "xor" || d.source == "blobs")
    return gw::synthesize(gw::synthetic_kind_from_name(d.source), d.n, d.seed, d.noise);
  if (d.source.rfind("csv:", 0) == 0) return gw::load_csv(d.source.substr(4), d.label_col);
  if (d.source.rfind("idx:", 0) == 0) {
    const std::string rest = d.source.substr(4);
    const std::size_t comma = rest.find(',');
    if (comma == std::string::npos)
      throw gw::SpecError("idx source must be idx:IMAGES,LABELS");
    return gw::load_idx(rest.substr(0, comma), rest.substr(comma + 1));
  }
  throw gw::SpecError("unknown data source '" + d.source +
                      "' (expected xor, blobs, csv:PATH, or idx:IMAGES,LABELS)");
}

json data_config(const DataOptions& d) {
  json j;
  j["source"] = d.source;
  j["n"] = d.n;
  j["seed"] = d.seed;
  j["noise"] = d.noise;
  j["label_col"] = d.label_col;
  return j;
}

void emit_prune_report(const gw::PruneReport& report) {
  for (const auto& layer : report.layers) {
    json j;
    j["layer"] = layer.layer;
    j["kept"] = layer.kept;
    j["total"] = layer.total;
    j["density"] = layer.density;
    std::cout << j.dump() << "\n";
  }
  std::cout << json{{"global_density", report.global_density}}.dump() << "\n";
}

// --- subcommand option bags --------------------------------------------------

struct GenerateOpts {
  std::vector<std::string> ws, layered;
  std::uint64_t seed = 0;
  std::string output;
};

struct BuildOpts {
  std::vector<std::string> ffn, dan, cell;
  std::string hidden;
  std::string activation = "relu";
  std::string init_fanin = "dense";
  std::uint64_t seed = 0;
  std::string output;
};

struct TrainOpts {
  std::string ckpt;
  DataOptions data;
  int epochs = 10;
  double lr = 0.1;
  int batch = 0;
  std::uint64_t seed = 0;
  std::string output;
};

struct PruneOpts {
  std::string ckpt;
  double theta = 0.1;
  int rounds = 0;
  double rate = 0.2;
  int train_epochs = 1;
  bool no_rewind = false;
  std::string scope = "layer";
  bool fresh = false;
  bool protect_io = false;
  DataOptions data;
  double lr = 0.1;
  int batch = 0;
  std::uint64_t seed = 0;
  std::string output;
};

struct ExtractOpts {
  std::string ckpt;
  std::string granularity = "neuron";
  std::string edge_rule = "mask_nonzero";
  double epsilon = 0.0;
  long edge_cap = 10'000'000;
  bool force = false;
  std::string probe_shape;
  std::string output;
};

struct StatsOpts {
  std::string graph;
};

struct RoundtripOpts {
  std::string graph;
  int input_size = 2;
  int output_size = 2;
};

// --- subcommand bodies -------------------------------------------------------

int cmd_generate(const GenerateOpts& o) {
  if (o.ws.empty() == o.layered.empty())
    throw gw::SpecError("generate needs exactly one of --ws N K P or --layered N LAYERS P");

  gw::LayeredDag lg;
  json cfg{{"command", "generate"}, {"seed", o.seed}, {"output", o.output}};
  if (!o.ws.empty()) {
    gw::GeneratorSpec spec;
    spec.kind = gw::GeneratorSpec::Kind::watts_strogatz_newman;
    spec.n = to_int(o.ws[0], "n");
    spec.k = to_int(o.ws[1], "k");
    spec.p = to_double(o.ws[2], "p");
    spec.seed = o.seed;
    spec.validate();
    cfg["mode"] = "ws";
    cfg["n"] = spec.n;
    cfg["k"] = spec.k;
    cfg["p"] = spec.p;
    std::cout << cfg.dump() << "\n";
    lg = gw::LayeredDag(gw::orient_to_dag(gw::generate_newman_watts_strogatz(spec)));
  } else {
    const int n = to_int(o.layered[0], "n");
    const int layers = to_int(o.layered[1], "layers");
    const double p = to_double(o.layered[2], "p");
    gw::GeneratorSpec spec;
    spec.kind = gw::GeneratorSpec::Kind::random_layered_dag;
    spec.n = n;
    spec.k = layers;
    spec.p = p;
    spec.seed = o.seed;
    spec.validate();
    cfg["mode"] = "layered";
    cfg["n"] = n;
    cfg["layers"] = layers;
    cfg["p"] = p;
    std::cout << cfg.dump() << "\n";
    lg = gw::generate_random_layered_dag(n, layers, p, o.seed);
  }

  const gw::GraphStats stats = gw::graph_stats(lg);
  std::cout << stats_to_json(stats).dump() << "\n";
  if (!o.output.empty()) gw::save_graph(o.output, lg);

  std::cerr << "generated graph: " << stats.vertices << " vertices, " << stats.edges
            << " edges, " << stats.layer_count << " layers";
  if (!o.output.empty()) std::cerr << " -> " << o.output;
  std::cerr << "\n";
  return 0;
}

int cmd_build(const BuildOpts& o) {
  const int given = (!o.ffn.empty()) + (!o.dan.empty()) + (!o.cell.empty());
  if (given != 1)
    throw gw::SpecError("build needs exactly one of --ffn IN OUT, --dan IN OUT GRAPH, "
                        "--cell CLASSES CHANNELS GRAPH");
  const gw::Activation act = gw::activation_from_name(o.activation);
  gw::InitFanIn fanin;
  if (o.init_fanin == "dense")
    fanin = gw::InitFanIn::dense;
  else if (o.init_fanin == "masked")
    fanin = gw::InitFanIn::masked;
  else
    throw gw::SpecError("--init-fanin must be dense or masked");

  json cfg{{"command", "build"},     {"activation", o.activation},
           {"init_fanin", o.init_fanin}, {"seed", o.seed},
           {"output", o.output}};

  std::unique_ptr<gw::Model> model;
  if (!o.ffn.empty()) {
    const int in = to_int(o.ffn[0], "input size");
    const int out = to_int(o.ffn[1], "output size");
    const std::vector<int> hidden = parse_int_csv(o.hidden, "hidden size");
    cfg["kind"] = "ffn";
    cfg["input_size"] = in;
    cfg["output_size"] = out;
    cfg["hidden_sizes"] = hidden;
    std::cout << cfg.dump() << "\n";
    model = std::make_unique<gw::MaskedDeepFFN>(in, out, hidden, act, o.seed, fanin);
  } else if (!o.dan.empty()) {
    const int in = to_int(o.dan[0], "input size");
    const int out = to_int(o.dan[1], "output size");
    cfg["kind"] = "dan";
    cfg["input_size"] = in;
    cfg["output_size"] = out;
    cfg["graph"] = o.dan[2];
    std::cout << cfg.dump() << "\n";
    model = std::make_unique<gw::MaskedDeepDAN>(in, out, gw::load_graph(o.dan[2]), act, o.seed,
                                                fanin);
  } else {
    const int classes = to_int(o.cell[0], "num classes");
    const int channels = to_int(o.cell[1], "input channels");
    cfg["kind"] = "cell";
    cfg["num_classes"] = classes;
    cfg["input_channel_size"] = channels;
    cfg["graph"] = o.cell[2];
    std::cout << cfg.dump() << "\n";
    model = std::make_unique<gw::DeepCellDAN>(classes, channels,
                                              gw::linear_mixer_constructor(o.seed),
                                              gw::load_graph(o.cell[2]), o.seed, "linear_mixer");
  }

  if (o.output.empty()) throw gw::SpecError("build requires -o OUTPUT");
  gw::save_model(o.output, *model);

  std::size_t params = 0;
  for (const gw::Tensor* t : model->parameters()) params += t->size();
  json summary{{"kind", gw::model_kind_name(model->kind())}, {"parameters", params}};
  if (!model->maskable_layers().empty()) summary["density"] = gw::density(*model);
  std::cout << summary.dump() << "\n";
  std::cerr << "built " << gw::model_kind_name(model->kind()) << " with " << params
            << " parameters -> " << o.output << "\n";
  return 0;
}

int cmd_train(const TrainOpts& o) {
  json cfg{{"command", "train"}, {"checkpoint", o.ckpt}, {"epochs", o.epochs},
           {"lr", o.lr},         {"batch", o.batch},     {"seed", o.seed},
           {"data", data_config(o.data)},
           {"output", o.output.empty() ? o.ckpt : o.output}};
  std::cout << cfg.dump() << "\n";

  const std::unique_ptr<gw::Model> model = gw::load_model(o.ckpt);
  const gw::Dataset data = load_dataset(o.data);

  gw::TrainConfig tc;
  tc.epochs = o.epochs;
  tc.lr = o.lr;
  tc.batch_size = o.batch;
  tc.seed = o.seed;
  const auto history = gw::train(*model, data, tc, [](const gw::EpochStats& s) {
    std::cout << json{{"epoch", s.epoch}, {"loss", s.loss}, {"accuracy", s.accuracy}}.dump()
              << "\n";
  });

  gw::save_model(o.output.empty() ? o.ckpt : o.output, *model);
  if (!history.empty())
    std::cerr << "trained " << o.epochs << " epochs; final loss " << history.back().loss
              << ", accuracy " << history.back().accuracy << "\n";
  return 0;
}

int cmd_prune(const PruneOpts& o) {
  json cfg{{"command", "prune"},   {"checkpoint", o.ckpt},       {"theta", o.theta},
           {"rounds", o.rounds},   {"rate", o.rate},             {"train_epochs", o.train_epochs},
           {"rewind", !o.no_rewind}, {"prune_scope", o.scope},   {"prune_fresh", o.fresh},
           {"protect_io", o.protect_io}, {"lr", o.lr},           {"batch", o.batch},
           {"seed", o.seed},       {"output", o.output.empty() ? o.ckpt : o.output}};
  if (!o.data.source.empty()) cfg["data"] = data_config(o.data);
  std::cout << cfg.dump() << "\n";

  const std::unique_ptr<gw::Model> model = gw::load_model(o.ckpt);

  gw::PruneReport report;
  if (o.rounds == 0) {
    gw::PruneOptions popts;
    popts.protect_io = o.protect_io;
    popts.fresh = o.fresh;
    report = gw::recompute_mask(*model, static_cast<float>(o.theta), popts);
  } else {
    if (o.data.source.empty())
      throw gw::SpecError("iterative pruning (--rounds >= 1) needs --data");
    gw::ImpOptions imp;
    imp.rounds = o.rounds;
    imp.rate = o.rate;
    imp.train_epochs = o.train_epochs;
    imp.rewind = !o.no_rewind;
    imp.scope = o.scope == "global" ? gw::PruneScope::global : gw::PruneScope::layer;
    imp.lr = o.lr;
    imp.batch_size = o.batch;
    imp.seed = o.seed;
    imp.protect_io = o.protect_io;
    if (o.scope != "layer" && o.scope != "global")
      throw gw::SpecError("--prune-scope must be layer or global");
    gw::iterative_magnitude_prune(*model, load_dataset(o.data), imp);
    report = gw::make_prune_report(*model);
  }

  emit_prune_report(report);
  gw::save_model(o.output.empty() ? o.ckpt : o.output, *model);
  std::cerr << "pruned: kept " << report.kept << "/" << report.total << " (global density "
            << report.global_density << ")\n";
  return 0;
}

int cmd_extract(const ExtractOpts& o) {
  json cfg{{"command", "extract"},       {"checkpoint", o.ckpt},
           {"granularity", o.granularity}, {"edge_rule", o.edge_rule},
           {"epsilon", o.epsilon},       {"edge_cap", o.edge_cap},
           {"force", o.force},           {"output", o.output}};
  std::cout << cfg.dump() << "\n";

  const std::unique_ptr<gw::Model> model = gw::load_model(o.ckpt);

  gw::ExtractionConfig ec;
  if (o.granularity == "neuron")
    ec.granularity = gw::Granularity::neuron;
  else if (o.granularity == "layer")
    ec.granularity = gw::Granularity::layer;
  else
    throw gw::SpecError("--granularity must be neuron or layer");
  if (o.edge_rule == "mask_nonzero")
    ec.edge_rule = gw::EdgeRule::mask_nonzero;
  else if (o.edge_rule == "weight_above")
    ec.edge_rule = gw::EdgeRule::weight_above;
  else
    throw gw::SpecError("--edge-rule must be mask_nonzero or weight_above");
  ec.epsilon = o.epsilon;
  ec.edge_cap = o.edge_cap;
  ec.force = o.force;
  if (!o.probe_shape.empty()) {
    ec.probe_shape = parse_int_csv(o.probe_shape, "probe dimension");
  } else if (model->kind() == gw::ModelKind::cell) {
    ec.probe_shape = {model->input_size(), 4, 4};
  } else {
    ec.probe_shape = {model->input_size()};
  }

  const gw::ExtractedGraph extracted = gw::transform(*model, ec);
  json line = stats_to_json(gw::graph_stats(extracted.graph));
  line["hidden_count"] = extracted.hidden_count;
  line["input_count"] = extracted.input_count;
  line["output_count"] = extracted.output_count;
  std::cout << line.dump() << "\n";
  if (!o.output.empty()) gw::save_graph(o.output, extracted.graph);

  std::cerr << "extracted " << extracted.graph.dag().vertex_count() << " vertices, "
            << extracted.graph.dag().edge_count() << " edges";
  if (!o.output.empty()) std::cerr << " -> " << o.output;
  std::cerr << "\n";
  return 0;
}

int cmd_stats(const StatsOpts& o) {
  json cfg{{"command", "stats"}, {"graph", o.graph}};
  std::cout << cfg.dump() << "\n";
  const gw::GraphStats stats = gw::graph_stats(gw::load_graph(o.graph));
  std::cout << stats_to_json(stats).dump() << "\n";
  std::cerr << o.graph << ": " << stats.vertices << " vertices, " << stats.edges << " edges\n";
  return 0;
}

int cmd_roundtrip(const RoundtripOpts& o) {
  json cfg{{"command", "roundtrip"},
           {"graph", o.graph},
           {"input_size", o.input_size},
           {"output_size", o.output_size}};
  std::cout << cfg.dump() << "\n";

  const gw::LayeredDag lg = gw::load_graph(o.graph);
  if (lg.empty()) throw gw::EmptyGraphError(o.graph + " holds an empty graph");
  const gw::RoundtripResult result = gw::roundtrip_check(lg, o.input_size, o.output_size);

  json line{{"roundtrip", result.ok}, {"hidden_count", result.hidden_count}};
  line["missing"] = json::array();
  for (const auto& [u, v] : result.missing) line["missing"].push_back({u, v});
  line["extra"] = json::array();
  for (const auto& [u, v] : result.extra) line["extra"].push_back({u, v});
  std::cout << line.dump() << "\n";

  if (result.ok) {
    std::cerr << "round-trip identity holds (" << result.hidden_count << " vertices)\n";
    return 0;
  }
  std::cerr << "round-trip MISMATCH: " << result.missing.size() << " missing, "
            << result.extra.size() << " extra edges\n";
  return 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"graphweave: round-trip between DAGs and sparse masked networks"};
  app.require_subcommand(1);

  GenerateOpts gen;
  auto* generate = app.add_subcommand("generate", "sample a random graph");
  generate->add_option("--ws", gen.ws, "Newman-Watts-Strogatz ring: N K P")->expected(3);
  generate->add_option("--layered", gen.layered, "random layered DAG: N LAYERS P")->expected(3);
  generate->add_option("--seed", gen.seed, "PRNG seed");
  generate->add_option("-o,--output", gen.output, "graph JSON path");

  BuildOpts build;
  auto* build_cmd = app.add_subcommand("build", "compile a model");
  build_cmd->add_option("--ffn", build.ffn, "feed-forward: IN OUT (see --hidden)")->expected(2);
  build_cmd->add_option("--hidden", build.hidden, "comma-separated hidden sizes for --ffn");
  build_cmd->add_option("--dan", build.dan, "graph-structured: IN OUT GRAPH")->expected(3);
  build_cmd->add_option("--cell", build.cell, "cell network: CLASSES CHANNELS GRAPH")->expected(3);
  build_cmd->add_option("--activation", build.activation, "relu|tanh|identity");
  build_cmd->add_option("--init-fanin", build.init_fanin, "dense|masked");
  build_cmd->add_option("--seed", build.seed, "init seed");
  build_cmd->add_option("-o,--output", build.output, "checkpoint path");

  TrainOpts train;
  auto* train_cmd = app.add_subcommand("train", "SGD training");
  train_cmd->add_option("checkpoint", train.ckpt, "model checkpoint")->required();
  train_cmd->add_option("--data", train.data.source, "xor|blobs|csv:PATH|idx:IMG,LBL")->required();
  train_cmd->add_option("--data-n", train.data.n, "synthetic sample count");
  train_cmd->add_option("--data-seed", train.data.seed, "synthetic data seed");
  train_cmd->add_option("--noise", train.data.noise, "synthetic noise sigma (-1 = default)");
  train_cmd->add_option("--label-col", train.data.label_col, "CSV label column (-1 = last)");
  train_cmd->add_option("--epochs", train.epochs, "epochs");
  train_cmd->add_option("--lr", train.lr, "learning rate");
  train_cmd->add_option("--batch", train.batch, "batch size (0 = full)");
  train_cmd->add_option("--seed", train.seed, "shuffle seed");
  train_cmd->add_option("-o,--output", train.output, "where to save (default: in place)");

  PruneOpts prune;
  auto* prune_cmd = app.add_subcommand("prune", "magnitude pruning");
  prune_cmd->add_option("checkpoint", prune.ckpt, "model checkpoint")->required();
  prune_cmd->add_option("--theta", prune.theta, "magnitude threshold");
  prune_cmd->add_option("--rounds", prune.rounds, "iterative rounds (0 = one-shot theta)");
  prune_cmd->add_option("--rate", prune.rate, "fraction removed per round");
  prune_cmd->add_option("--train-epochs", prune.train_epochs, "epochs per round");
  prune_cmd->add_flag("--no-rewind", prune.no_rewind, "keep trained weights between rounds");
  prune_cmd->add_option("--prune-scope", prune.scope, "layer|global quantiles");
  prune_cmd->add_flag("--prune-fresh", prune.fresh, "rebuild masks from raw magnitudes");
  prune_cmd->add_flag("--protect-io", prune.protect_io, "exempt input/output blocks");
  prune_cmd->add_option("--data", prune.data.source, "dataset for iterative rounds");
  prune_cmd->add_option("--data-n", prune.data.n, "synthetic sample count");
  prune_cmd->add_option("--data-seed", prune.data.seed, "synthetic data seed");
  prune_cmd->add_option("--noise", prune.data.noise, "synthetic noise sigma (-1 = default)");
  prune_cmd->add_option("--label-col", prune.data.label_col, "CSV label column (-1 = last)");
  prune_cmd->add_option("--lr", prune.lr, "learning rate");
  prune_cmd->add_option("--batch", prune.batch, "batch size (0 = full)");
  prune_cmd->add_option("--seed", prune.seed, "training seed");
  prune_cmd->add_option("-o,--output", prune.output, "where to save (default: in place)");

  ExtractOpts extract;
  auto* extract_cmd = app.add_subcommand("extract", "model -> graph transform");
  extract_cmd->add_option("checkpoint", extract.ckpt, "model checkpoint")->required();
  extract_cmd->add_option("--granularity", extract.granularity, "neuron|layer");
  extract_cmd->add_option("--edge-rule", extract.edge_rule, "mask_nonzero|weight_above");
  extract_cmd->add_option("--epsilon", extract.epsilon, "threshold for weight_above");
  extract_cmd->add_option("--edge-cap", extract.edge_cap, "memory guard (estimated edges)");
  extract_cmd->add_flag("--force", extract.force, "override the memory guard");
  extract_cmd->add_option("--probe-shape", extract.probe_shape, "comma-separated probe shape");
  extract_cmd->add_option("-o,--output", extract.output, "graph JSON path");

  StatsOpts stats;
  auto* stats_cmd = app.add_subcommand("stats", "graph statistics");
  stats_cmd->add_option("graph", stats.graph, "graph JSON path")->required();

  RoundtripOpts roundtrip;
  auto* roundtrip_cmd = app.add_subcommand("roundtrip", "verify graph -> model -> graph identity");
  roundtrip_cmd->add_option("graph", roundtrip.graph, "graph JSON path")->required();
  roundtrip_cmd->add_option("--input-size", roundtrip.input_size, "model input width");
  roundtrip_cmd->add_option("--output-size", roundtrip.output_size, "model output width");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (generate->parsed()) return cmd_generate(gen);
    if (build_cmd->parsed()) return cmd_build(build);
    if (train_cmd->parsed()) return cmd_train(train);
    if (prune_cmd->parsed()) return cmd_prune(prune);
    if (extract_cmd->parsed()) return cmd_extract(extract);
    if (stats_cmd->parsed()) return cmd_stats(stats);
    if (roundtrip_cmd->parsed()) return cmd_roundtrip(roundtrip);
  } catch (const gw::SpecError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
