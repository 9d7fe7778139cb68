// Copyright 2026 The hashlab Authors.
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

// hashlab command line: train, encode, eval, query, factorize-cnnh, solve-adsh.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 data error,
// 3 numeric failure.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hashlab/hashlab.hpp"

namespace fs = std::filesystem;
using namespace hashlab;

namespace {

// ---------------------------------------------------------------------------
// Flat key=value config files. Keys are long option names without the dashes;
// the file is spliced in front of the command-line flags, so flags win.

std::vector<std::string> config_tokens(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  for (int number = 1; std::getline(is, line); ++number) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path.string() + ":" + std::to_string(number) + ": expected key=value, got \"" + line + "\"");
    auto trim = [](std::string s) {
      s.erase(0, s.find_first_not_of(" \t\r"));
      s.erase(s.find_last_not_of(" \t\r") + 1);
      return s;
    };
    tokens.push_back("--" + trim(line.substr(0, eq)) + "=" + trim(line.substr(eq + 1)));
  }
  return tokens;
}

/// argv with every `--config FILE` expanded in place after the subcommand name.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::vector<std::string> file_tokens, rest;
  for (std::size_t i = 0; i < args.size(); ++i) {
    std::string value;
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw ConfigError("--config needs a file name");
      value = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      value = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
      continue;
    }
    const auto t = config_tokens(value);
    file_tokens.insert(file_tokens.end(), t.begin(), t.end());
  }
  if (file_tokens.empty() || rest.empty()) return rest;
  std::vector<std::string> out{rest.front()};
  out.insert(out.end(), file_tokens.begin(), file_tokens.end());
  out.insert(out.end(), rest.begin() + 1, rest.end());
  return out;
}

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string metric(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << v;
  return os.str();
}

fs::path default_data_dir() {
  const char* env = std::getenv("HASHLAB_CIFAR_DIR");
  return env ? fs::path(env) : fs::path();
}

LabeledImageSet load_pool(const fs::path& dir) {
  if (dir.empty()) throw DataError("no CIFAR-10 directory: pass --data-dir or set HASHLAB_CIFAR_DIR");
  if (!fs::is_directory(dir)) throw DataError("CIFAR-10 directory " + dir.string() + " does not exist");
  return load_cifar10_all(dir);
}

LabeledImageSet load_images(const fs::path& file, const std::optional<fs::path>& ids_file) {
  LabeledImageSet set = read_cifar_file(file);
  if (!ids_file) return set;
  const auto ids = read_manifest(*ids_file);
  for (auto id : ids)
    if (id >= set.size())
      throw DataError(ids_file->string() + ": id " + std::to_string(id) + " outside " + file.string() + " (" +
                      std::to_string(set.size()) + " records)");
  return set.subset(ids);
}

Method parse_method(const std::string& s) {
  if (s == "srh") return Method::kSrh;
  if (s == "dsh") return Method::kDsh;
  if (s == "cauchy") return Method::kCauchy;
  throw ConfigError("unknown method \"" + s + "\" (expected srh, dsh or cauchy)");
}

Preset parse_preset(const std::string& s) {
  if (s == "desk") return desk_preset();
  if (s == "full") return full_preset();
  throw ConfigError("unknown preset \"" + s + "\" (expected desk or full)");
}

// ---------------------------------------------------------------------------
// train

struct TrainOptions {
  std::string method = "srh";
  std::string preset = "desk";
  std::string data_dir = default_data_dir().string();
  std::string out = "run";
  int k = 12;
  std::optional<double> alpha, alpha_over_beta, margin;
  double beta = 0.01;
  double gamma = 1.0;
  std::optional<int> epochs;
  std::size_t batch = 160;
  double lr = 1e-3, momentum = 0.9, weight_decay = 0.004;
  int lr_step = 0;
  double lr_decay = 0.1;
  double max_grad_norm = 10.0;
  std::string pair_normalization = "sum";
  std::uint64_t seed = 1;
  std::optional<std::size_t> queries, database, train_images, map_at;
  bool all_database = false;
  bool quiet = false;
};

ExperimentConfig resolve(const TrainOptions& o) {
  if (o.alpha && o.alpha_over_beta) throw ConfigError("give either --alpha or --alpha-over-beta, not both");
  const Preset preset = parse_preset(o.preset);
  ExperimentConfig cfg;
  TrainConfig& t = cfg.train;
  t.method = parse_method(o.method);
  t.k = o.k;
  t.beta = o.beta;
  t.alpha = o.alpha_over_beta ? *o.alpha_over_beta * o.beta : o.alpha.value_or(0.01);
  t.margin = o.margin;
  t.gamma = o.gamma;
  t.epochs = o.epochs.value_or(preset.epochs);
  t.batch = o.batch;
  t.learning_rate = o.lr;
  t.momentum = o.momentum;
  t.weight_decay = o.weight_decay;
  t.lr_step = o.lr_step;
  t.lr_decay = o.lr_decay;
  t.max_grad_norm = o.max_grad_norm;
  if (o.pair_normalization == "mean") {
    t.pair_normalization = PairNormalization::kMean;
  } else if (o.pair_normalization == "sum") {
    t.pair_normalization = PairNormalization::kSum;
  } else {
    throw ConfigError("unknown pair normalization \"" + o.pair_normalization + "\" (expected mean or sum)");
  }
  t.seed = o.seed;
  cfg.sizes = preset.sizes;
  if (o.queries) cfg.sizes.queries = *o.queries;
  if (o.all_database) {
    cfg.sizes.database.reset();
  } else if (o.database) {
    cfg.sizes.database = *o.database;
  }
  if (o.train_images) cfg.sizes.train_images = *o.train_images;
  cfg.map_at = o.map_at;
  t.validate();
  return cfg;
}

/// The effective configuration as a config file that reproduces the run.
std::string dump_config(const TrainOptions& o, const ExperimentConfig& c) {
  const TrainConfig& t = c.train;
  std::ostringstream os;
  os << "method=" << to_string(t.method) << '\n'
     << "preset=" << o.preset << '\n'
     << "data-dir=" << o.data_dir << '\n'
     << "k=" << t.k << '\n'
     << "alpha=" << format_double(t.alpha) << '\n'
     << "beta=" << format_double(t.beta) << '\n';
  if (t.margin) os << "margin=" << format_double(*t.margin) << '\n';
  os << "gamma=" << format_double(t.gamma) << '\n'
     << "epochs=" << t.epochs << '\n'
     << "batch=" << t.batch << '\n'
     << "lr=" << format_double(t.learning_rate) << '\n'
     << "momentum=" << format_double(t.momentum) << '\n'
     << "weight-decay=" << format_double(t.weight_decay) << '\n'
     << "lr-step=" << t.lr_step << '\n'
     << "lr-decay=" << format_double(t.lr_decay) << '\n'
     << "max-grad-norm=" << format_double(t.max_grad_norm) << '\n'
     << "pair-normalization=" << (t.pair_normalization == PairNormalization::kMean ? "mean" : "sum") << '\n'
     << "seed=" << t.seed << '\n'
     << "queries=" << c.sizes.queries << '\n';
  if (c.sizes.database) {
    os << "database=" << *c.sizes.database << '\n';
  } else {
    os << "all-database=true\n";
  }
  os << "train-images=" << c.sizes.train_images << '\n';
  if (c.map_at) os << "map-at=" << *c.map_at << '\n';
  return os.str();
}

void add_train_options(CLI::App& cmd, TrainOptions& o) {
  cmd.add_option("--method", o.method, "srh, dsh or cauchy")->capture_default_str();
  cmd.add_option("--preset", o.preset, "desk (200/5000/1000, 30 epochs) or full (1000/59000/5000, 150 epochs)")
      ->capture_default_str();
  cmd.add_option("--data-dir", o.data_dir, "CIFAR-10 binary directory (default $HASHLAB_CIFAR_DIR)");
  cmd.add_option("--out", o.out, "output directory")->capture_default_str();
  cmd.add_option("--k", o.k, "code length in bits")->capture_default_str();
  cmd.add_option("--alpha", o.alpha, "shadow weight (absolute)");
  cmd.add_option("--beta", o.beta, "norm weight")->capture_default_str();
  cmd.add_option("--alpha-over-beta", o.alpha_over_beta, "set alpha = ratio * beta");
  cmd.add_option("--margin", o.margin, "hinge margin on squared distance (default 2k)");
  cmd.add_option("--gamma", o.gamma, "Cauchy scale")->capture_default_str();
  cmd.add_option("--epochs", o.epochs, "outer iterations (default from preset)");
  cmd.add_option("--batch", o.batch, "mini-batch size")->capture_default_str();
  cmd.add_option("--lr", o.lr, "learning rate")->capture_default_str();
  cmd.add_option("--momentum", o.momentum)->capture_default_str();
  cmd.add_option("--weight-decay", o.weight_decay)->capture_default_str();
  cmd.add_option("--lr-step", o.lr_step, "epochs between learning-rate decays, 0 = constant")->capture_default_str();
  cmd.add_option("--lr-decay", o.lr_decay)->capture_default_str();
  cmd.add_option("--max-grad-norm", o.max_grad_norm, "clip each batch gradient to this L2 norm, 0 = off")->capture_default_str();
  cmd.add_option("--pair-normalization", o.pair_normalization, "mean or sum")->capture_default_str();
  cmd.add_option("--seed", o.seed)->capture_default_str();
  cmd.add_option("--queries", o.queries, "query count (default from preset)");
  cmd.add_option("--database", o.database, "database size (default from preset)");
  cmd.add_flag("--all-database", o.all_database, "use every non-query image as database");
  cmd.add_option("--train-images", o.train_images, "training subset size (default from preset)");
  cmd.add_option("--map-at", o.map_at, "mAP cutoff (default: full ranking)");
  cmd.add_flag("--quiet", o.quiet, "no per-epoch progress on stderr");
}

int run_train(const TrainOptions& o) {
  const ExperimentConfig cfg = resolve(o);
  const LabeledImageSet pool = load_pool(o.data_dir);
  const fs::path out(o.out);
  fs::create_directories(out);
  {
    std::ofstream os(out / "config.txt", std::ios::trunc);
    os << dump_config(o, cfg);
  }
  const auto result = run_experiment(pool, cfg, [&](const EpochStats& s) {
    if (!o.quiet) std::cerr << "epoch " << format_trace_line(s) << '\n';
  });
  write_experiment(out, result);
  std::cout << "queries=" << result.query_codes.size() << '\n'
            << "database=" << result.database_codes.size() << '\n'
            << "train_images=" << result.split.train.size() << '\n'
            << "map=" << metric(result.map.map) << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// encode / eval / query

struct EncodeOptions {
  std::string model, images, out;
  std::optional<std::string> ids;
  std::optional<int> k;
  std::size_t batch = 160;
};

int run_encode(const EncodeOptions& o) {
  const Network<float> net = load_checkpoint(o.model);
  const int k = static_cast<int>(net.output_width());
  if (o.k && *o.k != k)
    throw ConfigError("checkpoint " + o.model + " emits " + std::to_string(k) + " bits, --k asks for " + std::to_string(*o.k));
  const LabeledImageSet set = load_images(o.images, o.ids ? std::optional<fs::path>(*o.ids) : std::nullopt);
  if (set.size() && set.images.shape().size() > 1 && Shape(set.images.shape().begin() + 1, set.images.shape().end()) != net.input_shape())
    throw DataError("images are " + shape_string(set.images.shape()) + ", model expects " + shape_string(net.input_shape()));
  const PackedCodes codes = set.size() ? binarize_and_pack(encode_outputs(net, set, o.batch)) : PackedCodes(0, k);
  write_codes(o.out, codes);
  std::cout << "codes=" << codes.size() << "\nbits=" << k << '\n';
  return 0;
}

struct EvalOptions {
  std::string query_codes, db_codes, query_labels, db_labels;
  std::optional<std::size_t> map_at, precision_at;
  std::optional<int> radius;
};

void check_label_cover(const std::string& what, std::size_t codes, std::size_t labels, const std::string& file) {
  if (labels >= codes) return;
  std::string ids = std::to_string(labels);
  if (codes - labels > 1) ids += ".." + std::to_string(codes - 1);
  throw DataError(file + " has " + std::to_string(labels) + " labels for " + std::to_string(codes) + " " + what +
                  " codes; missing ids " + ids);
}

int run_eval(const EvalOptions& o) {
  const PackedCodes q = read_codes(o.query_codes);
  const PackedCodes db = read_codes(o.db_codes);
  if (q.bits() != db.bits())
    throw ConfigError("query codes have " + std::to_string(q.bits()) + " bits, database codes " + std::to_string(db.bits()));
  const auto ql = read_labels(o.query_labels);
  const auto dl = read_labels(o.db_labels);
  check_label_cover("query", q.size(), ql.size(), o.query_labels);
  check_label_cover("database", db.size(), dl.size(), o.db_labels);

  std::vector<RankedResult> rankings;
  for (std::size_t i = 0; i < q.size(); ++i) rankings.push_back(rank_database(q.code(i), db, std::nullopt, i));
  const Relevance rel = [&](std::size_t a, std::size_t b) { return ql[a] == dl[b]; };
  const MapReport map = mean_average_precision(rankings, rel, o.map_at);
  std::cout << "queries=" << q.size() << '\n'
            << "database=" << db.size() << '\n'
            << "evaluated_queries=" << map.evaluated_queries << '\n'
            << "excluded_queries=" << map.excluded_queries << '\n'
            << "map=" << metric(map.map) << '\n';
  if (o.precision_at) std::cout << "precision_at_" << *o.precision_at << '=' << metric(precision_at(rankings, rel, *o.precision_at)) << '\n';
  if (o.radius) {
    if (*o.radius < 0 || *o.radius > q.bits()) throw ConfigError("radius must lie in [0, k]");
    const auto r = radius_metrics(rankings, rel, *o.radius);
    std::cout << "radius_precision=" << metric(r.precision) << '\n' << "radius_recall=" << metric(r.recall) << '\n';
  }
  return 0;
}

struct QueryOptions {
  std::string db_codes;
  std::optional<std::string> code, query_codes, model, images;
  std::size_t index = 0;
  std::size_t top = 10;
};

int run_query(const QueryOptions& o) {
  const PackedCodes db = read_codes(o.db_codes);
  const int given = int(o.code.has_value()) + int(o.query_codes.has_value()) + int(o.model.has_value());
  if (given != 1) throw ConfigError("give exactly one of --code, --query-codes or --model/--images");
  PackedCodes query(1, db.bits());
  if (o.code) {
    if (o.code->size() != static_cast<std::size_t>(db.bits()))
      throw ConfigError("--code has " + std::to_string(o.code->size()) + " bits, database codes have " + std::to_string(db.bits()));
    for (std::size_t j = 0; j < o.code->size(); ++j) {
      const char ch = (*o.code)[j];
      if (ch != '0' && ch != '1') throw ConfigError("--code must be a string of 0 and 1");
      query.set_bit(0, j, ch == '1');
    }
  } else if (o.query_codes) {
    const PackedCodes all = read_codes(*o.query_codes);
    if (o.index >= all.size()) throw ConfigError("--index " + std::to_string(o.index) + " outside " + *o.query_codes);
    query = PackedCodes(1, all.bits(), std::vector<std::uint64_t>(all.code(o.index).words.begin(), all.code(o.index).words.end()));
  } else {
    if (!o.images) throw ConfigError("--model needs --images");
    const Network<float> net = load_checkpoint(*o.model);
    const LabeledImageSet set = read_cifar_file(*o.images);
    if (o.index >= set.size()) throw ConfigError("--index " + std::to_string(o.index) + " outside " + *o.images);
    const std::vector<std::size_t> one{o.index};
    query = binarize_and_pack(encode_outputs(net, set.subset(one), 1));
  }
  const auto ranked = rank_database(query.code(0), db, o.top);
  for (const auto& h : ranked.hits) std::cout << h.id << '\t' << h.distance << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// factorize-cnnh / solve-adsh

struct CnnhOptions {
  std::string labels, out;
  int q = 12;
  int sweeps = 10;
  std::uint64_t seed = 1;
};

int run_cnnh(const CnnhOptions& o) {
  const auto labels = read_labels(o.labels);
  std::vector<std::size_t> ids(labels.size());
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  const Matrix<double> S = SimilarityOracle(labels).sign_similarity(ids, ids);
  const auto r = cnnh_factorize(S, o.q, o.sweeps, o.seed);
  write_codes(o.out, pack_signs(r.codes));
  std::cout << "codes=" << labels.size() << '\n'
            << "objective=" << metric(r.objective) << '\n'
            << "binarized_objective=" << metric(r.binarized_objective) << '\n';
  return 0;
}

struct AdshOptions {
  std::string preset = "desk";
  std::string data_dir = default_data_dir().string();
  std::string out = "adsh";
  AdshConfig cfg;
  std::optional<std::size_t> queries, database;
  bool quiet = false;
};

int run_adsh(const AdshOptions& o) {
  o.cfg.validate();
  const Preset preset = parse_preset(o.preset);
  const LabeledImageSet pool = load_pool(o.data_dir);
  const Split split = make_split(pool.labels, o.queries.value_or(preset.sizes.queries),
                                 o.database ? std::optional<std::size_t>(*o.database) : preset.sizes.database, 0,
                                 o.cfg.seed);
  const LabeledImageSet db = pool.subset(split.database);
  const LabeledImageSet queries = pool.subset(split.query);
  const auto result = adsh_train(db, o.cfg, [&](int it, double objective) {
    if (!o.quiet) std::cerr << "iteration " << it << '\t' << std::setprecision(9) << objective << '\n';
  });
  const PackedCodes db_codes = pack_signs(result.V);
  const PackedCodes q_codes =
      queries.size() ? binarize_and_pack(encode_outputs(result.net, queries, o.cfg.batch)) : PackedCodes(0, o.cfg.c);
  const fs::path out(o.out);
  fs::create_directories(out);
  save_checkpoint(out / artifact::kModel, result.net);
  write_codes(out / artifact::kQueryCodes, q_codes);
  write_codes(out / artifact::kDatabaseCodes, db_codes);
  write_labels(out / artifact::kQueryLabels, queries.labels);
  write_labels(out / artifact::kDatabaseLabels, db.labels);
  write_manifest(out / artifact::kQueryIds, split.query);
  write_manifest(out / artifact::kDatabaseIds, split.database);
  {
    std::ofstream os(out / "objective_trace.tsv", std::ios::trunc);
    for (std::size_t i = 0; i < result.objective_trace.size(); ++i)
      os << i + 1 << '\t' << std::setprecision(9) << result.objective_trace[i] << '\n';
  }
  const MapReport map = evaluate_codes(q_codes, db_codes, queries.labels, db.labels);
  std::cout << "queries=" << q_codes.size() << '\n' << "database=" << db_codes.size() << '\n' << "map=" << metric(map.map) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hashlab: supervised binary hashing for image retrieval", "hashlab"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.add_option("--config", "flat key=value file with option defaults; flags override")->group("");

  TrainOptions train_opts;
  auto* train_cmd = app.add_subcommand("train", "train a hashing network and write codes, model and trace");
  train_cmd->add_option("--config", "flat key=value file with option defaults; flags override");
  add_train_options(*train_cmd, train_opts);
  std::optional<std::string> dump_path;
  train_cmd->add_option("--dump-config", dump_path, "write the effective config to this file and exit");

  EncodeOptions enc;
  auto* encode_cmd = app.add_subcommand("encode", "encode CIFAR-format images with a trained model");
  encode_cmd->add_option("--model", enc.model, "checkpoint file")->required();
  encode_cmd->add_option("--images", enc.images, "CIFAR-10 binary file")->required();
  encode_cmd->add_option("--ids", enc.ids, "manifest of record ids to encode (default: all)");
  encode_cmd->add_option("--k", enc.k, "expected code length");
  encode_cmd->add_option("--batch", enc.batch)->capture_default_str();
  encode_cmd->add_option("--out", enc.out, "codes file")->required();

  EvalOptions ev;
  auto* eval_cmd = app.add_subcommand("eval", "score query codes against database codes");
  eval_cmd->add_option("--query-codes", ev.query_codes)->required();
  eval_cmd->add_option("--db-codes", ev.db_codes)->required();
  eval_cmd->add_option("--query-labels", ev.query_labels)->required();
  eval_cmd->add_option("--db-labels", ev.db_labels)->required();
  eval_cmd->add_option("--map-at", ev.map_at, "mAP cutoff (default: full ranking)");
  eval_cmd->add_option("--precision-at", ev.precision_at, "also report precision at this depth");
  eval_cmd->add_option("--radius", ev.radius, "also report precision/recall within this Hamming radius");

  QueryOptions qo;
  auto* query_cmd = app.add_subcommand("query", "rank database codes for one query");
  query_cmd->add_option("--db-codes", qo.db_codes)->required();
  query_cmd->add_option("--code", qo.code, "query bits as a 0/1 string, bit 0 first");
  query_cmd->add_option("--query-codes", qo.query_codes, "codes file holding the query");
  query_cmd->add_option("--model", qo.model, "checkpoint used to encode --images");
  query_cmd->add_option("--images", qo.images, "CIFAR-10 binary file holding the query image");
  query_cmd->add_option("--index", qo.index, "row of --query-codes or --images")->capture_default_str();
  query_cmd->add_option("--top", qo.top, "number of hits")->capture_default_str();

  CnnhOptions co;
  auto* cnnh_cmd = app.add_subcommand("factorize-cnnh", "factorize the label similarity into target codes");
  cnnh_cmd->add_option("--labels", co.labels, "label file, one integer per line")->required();
  cnnh_cmd->add_option("--q", co.q, "bits")->capture_default_str();
  cnnh_cmd->add_option("--sweeps", co.sweeps)->capture_default_str();
  cnnh_cmd->add_option("--seed", co.seed)->capture_default_str();
  cnnh_cmd->add_option("--out", co.out, "codes file")->required();

  AdshOptions ao;
  auto* adsh_cmd = app.add_subcommand("solve-adsh", "asymmetric hashing baseline");
  adsh_cmd->add_option("--config", "flat key=value file with option defaults; flags override");
  adsh_cmd->add_option("--preset", ao.preset)->capture_default_str();
  adsh_cmd->add_option("--data-dir", ao.data_dir, "CIFAR-10 binary directory (default $HASHLAB_CIFAR_DIR)");
  adsh_cmd->add_option("--out", ao.out)->capture_default_str();
  adsh_cmd->add_option("--c", ao.cfg.c, "bits")->capture_default_str();
  adsh_cmd->add_option("--gamma", ao.cfg.gamma)->capture_default_str();
  adsh_cmd->add_option("--iterations", ao.cfg.outer_iterations)->capture_default_str();
  adsh_cmd->add_option("--network-epochs", ao.cfg.network_epochs)->capture_default_str();
  adsh_cmd->add_option("--sampled-queries", ao.cfg.queries, "database points used as training queries")->capture_default_str();
  adsh_cmd->add_option("--batch", ao.cfg.batch)->capture_default_str();
  adsh_cmd->add_option("--lr", ao.cfg.learning_rate)->capture_default_str();
  adsh_cmd->add_option("--momentum", ao.cfg.momentum)->capture_default_str();
  adsh_cmd->add_option("--weight-decay", ao.cfg.weight_decay)->capture_default_str();
  adsh_cmd->add_option("--seed", ao.cfg.seed)->capture_default_str();
  adsh_cmd->add_option("--queries", ao.queries, "evaluation query count (default from preset)");
  adsh_cmd->add_option("--database", ao.database, "database size (default from preset)");
  adsh_cmd->add_flag("--quiet", ao.quiet);

  try {
    std::vector<std::string> args = expand_config(argc, argv);
    std::reverse(args.begin(), args.end());
    app.parse(args);
    if (train_cmd->parsed()) {
      if (dump_path) {
        std::ofstream os(*dump_path, std::ios::trunc);
        if (!os) throw DataError("cannot open " + *dump_path + " for writing");
        os << dump_config(train_opts, resolve(train_opts));
        return 0;
      }
      return run_train(train_opts);
    }
    if (encode_cmd->parsed()) return run_encode(enc);
    if (eval_cmd->parsed()) return run_eval(ev);
    if (query_cmd->parsed()) return run_query(qo);
    if (cnnh_cmd->parsed()) return run_cnnh(co);
    if (adsh_cmd->parsed()) return run_adsh(ao);
    return 1;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const hashlab::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.exit_code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
