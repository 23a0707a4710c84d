#pragma once

// Command-line surface: gen, train, eval, shapley, geodesic, compare.
// Exit codes: 0 ok, 1 I/O or data error, 2 bad arguments, 3 divergence.

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "g2l/errors.hpp"
#include "g2l/game.hpp"
#include "g2l/geodesic.hpp"
#include "g2l/parallel.hpp"
#include "g2l/synthdata.hpp"
#include "g2l/trainer.hpp"
#include "json.hpp"

namespace g2l::cli {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kDataError = 1, kArgumentError = 2, kDiverged = 3 };

struct ArgumentError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Runs f, reporting a DomainError as a bad argument.
template <class F>
auto as_argument_check(F&& f) {
  try {
    return f();
  } catch (const DomainError& e) {
    throw ArgumentError(e.what());
  }
}

inline std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Accumulates what a run needs to be reproduced; written next to outputs.
class Manifest {
 public:
  Manifest(std::string command, const std::vector<std::string>& argv) {
    j_["tool"] = "g2l";
    j_["version"] = kVersion;
    j_["formats"] = {{"dataset", kDatasetMagic}, {"encoder", kEncoderMagic}};
    j_["command"] = std::move(command);
    j_["argv"] = argv;
    j_["inputs"] = nlohmann::json::array();
    j_["outputs"] = nlohmann::json::array();
    j_["started_at"] = utc_now();
  }

  void input(const std::filesystem::path& p) { j_["inputs"].push_back(p.string()); }
  void output(const std::filesystem::path& p) { j_["outputs"].push_back(p.string()); }
  nlohmann::json& operator[](const char* key) { return j_[key]; }

  void write(const std::filesystem::path& path) {
    j_["finished_at"] = utc_now();
    detail::write_file_atomic(path, j_.dump(2) + "\n");
  }

 private:
  nlohmann::json j_;
};

inline std::filesystem::path manifest_path_for(const std::filesystem::path& output) {
  return output.string() + ".manifest.json";
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  detail::write_file_atomic(path, text);
}

// "1,5" -> {1, 5}
template <class T>
std::vector<T> parse_list(const std::string& text, const std::string& flag) {
  std::vector<T> out;
  std::string item;
  auto flush = [&] {
    if (item.empty() || !std::all_of(item.begin(), item.end(), [](unsigned char c) { return std::isdigit(c); }))
      throw ArgumentError(flag + ": expected a comma-separated list of non-negative integers, got \"" + text + "\"");
    try {
      out.push_back(static_cast<T>(std::stoull(item)));
    } catch (const std::out_of_range&) {
      throw ArgumentError(flag + ": value " + item + " out of range");
    }
    item.clear();
  };
  for (char c : text) {
    if (c == ',') {
      flush();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      item.push_back(c);
    }
  }
  flush();
  return out;
}

// ---------------------------------------------------------------- game files

// {"players": N, "values": {"<bitmask>": score, ...}}; bitmask in decimal,
// 0b binary or 0x hex. Coalitions not listed score 0.
inline Game game_from_json(const nlohmann::json& j) {
  try {
    const auto players = j.at("players").get<std::size_t>();
    if (players < 1 || players > 63) throw ParseError("game: players must lie in [1, 63]");
    auto table = std::make_shared<std::map<Coalition, double>>();
    for (const auto& [key, value] : j.at("values").items()) {
      std::size_t used = 0;
      Coalition mask = 0;
      try {
        if (key.rfind("0b", 0) == 0) {
          mask = std::stoull(key.substr(2), &used, 2);
          used += 2;
        } else if (key.rfind("0x", 0) == 0) {
          mask = std::stoull(key.substr(2), &used, 16);
          used += 2;
        } else {
          mask = std::stoull(key, &used, 10);
        }
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != key.size()) throw ParseError("game: bad coalition key \"" + key + "\"");
      if (mask > full_coalition(players))
        throw ParseError("game: coalition " + key + " names players beyond " + std::to_string(players));
      if (!value.is_number()) throw ParseError("game: score for coalition " + key + " is not a number");
      (*table)[mask] = value.get<double>();
    }
    return Game{players, [table](Coalition u) {
                  const auto it = table->find(u);
                  return it == table->end() ? 0.0 : it->second;
                }};
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("game: ") + e.what());
  }
}

inline nlohmann::json parse_json_file(const std::filesystem::path& path) {
  const std::string text = detail::read_file(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": malformed JSON at byte offset " + std::to_string(e.byte));
  }
}

// ---------------------------------------------------------------- compare

struct CompareCell {
  Mode mode = Mode::baseline;
  std::uint64_t seed = 0;
  EpochMetrics final;
};

inline std::vector<CompareCell> run_compare(const SynthDataset& ds, const TrainConfig& base,
                                            const std::vector<Mode>& modes,
                                            const std::vector<std::uint64_t>& seeds) {
  std::vector<CompareCell> cells;
  for (Mode m : modes)
    for (std::uint64_t s : seeds) cells.push_back({m, s, {}});
  parallel_for(cells.size(), [&](std::size_t i) {
    TrainConfig cfg = base;
    cfg.mode = cells[i].mode;
    cfg.seed = cells[i].seed;
    cells[i].final = train(ds, cfg).report.final();
  });
  return cells;
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single value
};

inline MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd r;
  if (xs.empty()) return r;
  for (double x : xs) r.mean += x;
  r.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - r.mean) * (x - r.mean);
    r.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return r;
}

inline constexpr const char* kCompareHeader = "row,mode,seed,r1,r5,alignment,uniformity,l_total,l_vg,l_cl,l_ssi";

inline std::vector<double> compare_fields(const EpochMetrics& m) {
  return {m.r1, m.r5, m.alignment, m.uniformity, m.l_total, m.l_vg, m.l_cl, m.l_ssi};
}

// One row per cell, then one "summary" row per mode with mean±std entries.
inline std::string compare_csv(const std::vector<CompareCell>& cells, const std::vector<Mode>& modes) {
  std::string out = std::string(kCompareHeader) + "\n";
  for (const CompareCell& c : cells) {
    out += std::string("cell,") + to_string(c.mode) + "," + std::to_string(c.seed);
    for (double v : compare_fields(c.final)) out += "," + format_double(v);
    out += "\n";
  }
  for (Mode m : modes) {
    std::vector<std::vector<double>> columns(8);
    for (const CompareCell& c : cells) {
      if (c.mode != m) continue;
      const auto f = compare_fields(c.final);
      for (std::size_t k = 0; k < f.size(); ++k) columns[k].push_back(f[k]);
    }
    out += std::string("summary,") + to_string(m) + ",";
    for (const auto& col : columns) {
      const MeanStd ms = mean_std(col);
      out += "," + format_double(ms.mean) + "\xC2\xB1" + format_double(ms.std);
    }
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------------- flags

struct TrainFlags {
  std::string mode = "g2l";
  std::size_t epochs = TrainConfig{}.epochs;
  std::size_t batch = TrainConfig{}.batch_size;
  std::optional<double> lr;
  std::string optimizer = "adam";
  std::uint64_t seed = 0;
  double tau = GclConfig{}.temperature;
  double tau_vg = GclConfig{}.grounding_temperature;
  std::size_t topk = GclConfig{}.topk;
  std::size_t neighbors = GclConfig{}.neighbors;
  double g_cap = GclConfig{}.g_cap;
  std::size_t ssi_k = GclConfig{}.ssi_moments_per_query;
  std::size_t ssi_samples = GclConfig{}.ssi_mc_samples;
  std::string denominator = "literal";
  bool negate_weight = false;
  std::size_t hidden = 0;
  std::size_t out_dim = 0;
  std::size_t warmup = 0;
  std::vector<std::string> ablate;
  bool record_time = false;

  void add_to(CLI::App* app, bool with_mode_and_seed) {
    if (with_mode_and_seed) {
      app->add_option("--mode", mode, "baseline or g2l")->check(CLI::IsMember({"baseline", "g2l"}));
      app->add_option("--seed", seed, "training seed");
    }
    app->add_option("--epochs", epochs)->check(CLI::PositiveNumber);
    app->add_option("--batch", batch, "queries per batch")->check(CLI::PositiveNumber);
    app->add_option("--lr", lr, "learning rate (default 1e-2 sgd, 1e-3 adam)")->check(CLI::NonNegativeNumber);
    app->add_option("--optimizer", optimizer)->check(CLI::IsMember({"sgd", "adam"}));
    app->add_option("--tau", tau, "contrastive temperature")->check(CLI::PositiveNumber);
    app->add_option("--tau-vg", tau_vg, "grounding temperature")->check(CLI::PositiveNumber);
    app->add_option("--topk", topk, "semantic positives per query")->check(CLI::PositiveNumber);
    app->add_option("--neighbors", neighbors, "K-NN graph out-degree")->check(CLI::PositiveNumber);
    app->add_option("--g-cap", g_cap, "distance assigned to unreachable moments")->check(CLI::PositiveNumber);
    app->add_option("--ssi-k", ssi_k, "moments per query in each alignment game")->check(CLI::PositiveNumber);
    app->add_option("--ssi-samples", ssi_samples, "Monte-Carlo samples per interaction")
        ->check(CLI::PositiveNumber);
    app->add_option("--denominator", denominator)->check(CLI::IsMember({"literal", "tempered", "plain"}));
    app->add_flag("--negate-weight", negate_weight, "flip the sign of the geodesic weight");
    app->add_option("--hidden", hidden, "tanh hidden width (0: linear encoder)");
    app->add_option("--out-dim", out_dim, "encoder output width (0: data dim)");
    app->add_option("--warmup", warmup, "epochs before geometry terms switch on");
    app->add_option("--ablate", ablate, "disable vcl, gcl, ssi, sa or su (repeatable)")
        ->delimiter(',')
        ->check(CLI::IsMember({"vcl", "gcl", "ssi", "sa", "su"}));
    app->add_flag("--record-time", record_time, "fill the seconds column with wall-clock time");
  }

  TrainConfig to_config() const {
    TrainConfig c;
    c.mode = mode == "baseline" ? Mode::baseline : Mode::g2l;
    c.epochs = epochs;
    c.batch_size = batch;
    c.optimizer = optimizer == "sgd" ? OptimizerKind::sgd : OptimizerKind::adam;
    c.learning_rate = lr ? *lr : TrainConfig::default_learning_rate(c.optimizer);
    c.seed = seed;
    c.gcl.temperature = tau;
    c.gcl.grounding_temperature = tau_vg;
    c.gcl.topk = topk;
    c.gcl.neighbors = neighbors;
    c.gcl.g_cap = g_cap;
    c.gcl.ssi_moments_per_query = ssi_k;
    c.gcl.ssi_mc_samples = ssi_samples;
    c.gcl.denominator = denominator == "tempered" ? DenominatorMode::tempered
                        : denominator == "plain"  ? DenominatorMode::plain
                                                  : DenominatorMode::literal;
    c.gcl.negate_weight = negate_weight;
    c.hidden_dim = hidden;
    c.output_dim = out_dim;
    c.warmup_epochs = warmup;
    c.record_time = record_time;
    for (const std::string& a : ablate) {
      if (a == "vcl") c.ablate.vcl = true;
      if (a == "gcl") c.ablate.gcl = true;
      if (a == "ssi") c.ablate.ssi = true;
      if (a == "sa") c.ablate.sa = true;
      if (a == "su") c.ablate.su = true;
    }
    as_argument_check([&] {
      c.validate(std::numeric_limits<std::size_t>::max());
      return 0;
    });
    return c;
  }
};

inline SynthDataset load_dataset(const std::filesystem::path& path) { return load(path); }

// ---------------------------------------------------------------- commands

struct GenArgs {
  std::filesystem::path out;
  SynthConfig cfg;
};

inline int cmd_gen(const GenArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  Manifest manifest("gen", argv);
  as_argument_check([&] {
    a.cfg.validate();
    return 0;
  });
  const SynthDataset ds = generate(a.cfg);
  save(ds, a.out);
  manifest["config"] = to_json(a.cfg);
  manifest["seed"] = a.cfg.seed;
  manifest.output(a.out);
  manifest.write(manifest_path_for(a.out));
  out << "wrote " << a.out.string() << " (" << ds.moments.rows() << " moments, " << ds.query_count()
      << " queries)\n";
  return kOk;
}

struct TrainArgs {
  std::filesystem::path data;
  std::filesystem::path out_dir;
  TrainFlags flags;
};

inline int cmd_train(const TrainArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  Manifest manifest("train", argv);
  const TrainConfig cfg = a.flags.to_config();
  const SynthDataset ds = load_dataset(a.data);
  as_argument_check([&] {
    cfg.validate(ds.query_count());
    return 0;
  });
  manifest.input(a.data);
  manifest["config"] = to_json(cfg);
  manifest["seed"] = cfg.seed;

  const TrainResult r = train(ds, cfg);
  std::error_code ec;
  std::filesystem::create_directories(a.out_dir, ec);
  if (ec) throw IoError("cannot create " + a.out_dir.string() + ": " + ec.message());
  const auto csv = a.out_dir / "metrics.csv";
  const auto json = a.out_dir / "metrics.json";
  const auto ckpt = a.out_dir / "encoder.g2le";
  write_text(csv, r.report.to_csv());
  write_text(json, r.report.to_json().dump(2) + "\n");
  save(r.encoder, ckpt);
  for (const auto& p : {csv, json, ckpt}) manifest.output(p);
  manifest.write(a.out_dir / "manifest.json");

  const EpochMetrics& f = r.report.final();
  out << "epochs " << r.report.epochs.size() << " r1 " << format_double(f.r1) << " r5 " << format_double(f.r5)
      << " alignment " << format_double(f.alignment) << " uniformity " << format_double(f.uniformity) << "\n";
  return kOk;
}

struct EvalArgs {
  std::filesystem::path data;
  std::filesystem::path encoder;
  std::string n = "1,5";
  std::filesystem::path out;
};

inline int cmd_eval(const EvalArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  Manifest manifest("eval", argv);
  const auto ns = parse_list<std::size_t>(a.n, "--n");
  for (std::size_t n : ns)
    if (n < 1) throw ArgumentError("--n: recall cutoffs must be >= 1");
  const SynthDataset ds = load_dataset(a.data);
  const Encoder enc = load_encoder(a.encoder);
  const EncodedDataset e = encode_dataset(enc, ds);
  if (ds.query_count() == 0) throw DomainError("eval: dataset has no queries");

  nlohmann::ordered_json result;
  for (std::size_t n : ns) result["r" + std::to_string(n)] = recall_at_n(e, ds, n);
  const EvalMetrics m = evaluate(enc, ds);
  result["alignment"] = m.alignment;
  result["uniformity"] = m.uniformity;
  out << result.dump(2) << "\n";

  if (!a.out.empty()) {
    write_text(a.out, result.dump(2) + "\n");
    manifest.input(a.data);
    manifest.input(a.encoder);
    manifest.output(a.out);
    manifest.write(manifest_path_for(a.out));
  }
  return kOk;
}

struct ShapleyArgs {
  std::filesystem::path game;
  bool exact = false;
  std::optional<std::size_t> sampled;
  std::uint64_t seed = 0;
  std::string interaction;
  std::filesystem::path out;
};

inline int cmd_shapley(const ShapleyArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  Manifest manifest("shapley", argv);
  if (a.exact && a.sampled) throw ArgumentError("--exact and --sampled are mutually exclusive");
  if (a.sampled && *a.sampled < 1) throw ArgumentError("--sampled: need at least 1 sample");
  const Game game = game_from_json(parse_json_file(a.game));
  const bool exact = !a.sampled;
  if (exact && game.players > kMaxExactPlayers)
    throw ArgumentError("--exact: game has " + std::to_string(game.players) + " players, limit is " +
                        std::to_string(kMaxExactPlayers));

  nlohmann::ordered_json result;
  result["players"] = game.players;
  result["method"] = exact ? "exact" : "sampled";
  if (!exact) {
    result["samples"] = *a.sampled;
    result["seed"] = a.seed;
  }
  if (!a.interaction.empty()) {
    const auto members = parse_list<std::size_t>(a.interaction, "--interaction");
    Coalition mask = 0;
    for (std::size_t p : members) {
      if (p >= game.players)
        throw ArgumentError("--interaction: player " + std::to_string(p) + " out of range");
      if (mask & player_bit(p)) throw ArgumentError("--interaction: player " + std::to_string(p) + " repeated");
      mask |= player_bit(p);
    }
    result["interaction"]["players"] = members;
    if (exact) {
      result["interaction"]["value"] = shapley_interaction_exact(game, mask);
    } else {
      if (members.size() != 2) throw ArgumentError("--interaction: sampling supports pairs only");
      RngStream rng(a.seed, 21);
      const Estimate e = pair_interaction_sampled(game, members[0], members[1], *a.sampled, rng);
      result["interaction"]["value"] = e.mean;
      result["interaction"]["std_error"] = e.std_error;
    }
  } else if (exact) {
    result["values"] = shapley_values_exact(game);
  } else {
    std::vector<double> means, errs;
    for (std::size_t i = 0; i < game.players; ++i) {
      RngStream rng = RngStream(a.seed, 20).derive(i);
      const Estimate e = shapley_value_sampled(game, i, *a.sampled, rng);
      means.push_back(e.mean);
      errs.push_back(e.std_error);
    }
    result["values"] = means;
    result["std_errors"] = errs;
  }
  out << result.dump(2) << "\n";

  if (!a.out.empty()) {
    write_text(a.out, result.dump(2) + "\n");
    manifest.input(a.game);
    manifest.output(a.out);
    manifest["seed"] = a.seed;
    manifest.write(manifest_path_for(a.out));
  }
  return kOk;
}

struct GeodesicArgs {
  std::filesystem::path data;
  std::size_t video = 0;
  std::string targets;
  std::size_t n = GclConfig{}.neighbors;
  double g_cap = kDefaultGeodesicCap;
  std::filesystem::path out;
};

inline int cmd_geodesic(const GeodesicArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  Manifest manifest("geodesic", argv);
  const auto targets = parse_list<std::size_t>(a.targets, "--targets");
  const SynthDataset ds = load_dataset(a.data);
  if (a.video >= ds.videos())
    throw DomainError("geodesic: video " + std::to_string(a.video) + " out of range (dataset has " +
                      std::to_string(ds.videos()) + ")");
  const std::size_t nm = ds.moments_per_video();
  std::vector<std::size_t> rows(nm);
  std::iota(rows.begin(), rows.end(), a.video * nm);
  const EmbeddingMatrix block{detail::gather_rows(ds.moments.values, rows), true};
  for (std::size_t t : targets)
    if (t >= nm)
      throw DomainError("geodesic: target " + std::to_string(t) + " out of range (video has " + std::to_string(nm) +
                        " moments)");

  const MomentGraph graph = build_knn_graph(block, a.n);
  std::vector<GeodesicTable> tables;
  for (std::size_t t : targets) tables.push_back(dijkstra(graph, t, a.g_cap));
  const std::string text = geodesic_to_json(graph, tables).dump() + "\n";
  out << text;

  if (!a.out.empty()) {
    write_text(a.out, text);
    manifest.input(a.data);
    manifest.output(a.out);
    manifest.write(manifest_path_for(a.out));
  }
  return kOk;
}

struct CompareArgs {
  std::filesystem::path data;
  std::string seeds = "1,2,3,4,5";
  std::vector<std::string> modes{"baseline", "g2l"};
  std::filesystem::path out;
  TrainFlags flags;
};

inline int cmd_compare(const CompareArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  Manifest manifest("compare", argv);
  const auto seeds = parse_list<std::uint64_t>(a.seeds, "--seeds");
  std::vector<Mode> modes;
  for (const std::string& m : a.modes) modes.push_back(m == "baseline" ? Mode::baseline : Mode::g2l);
  const TrainConfig base = a.flags.to_config();
  const SynthDataset ds = load_dataset(a.data);
  as_argument_check([&] {
    base.validate(ds.query_count());
    return 0;
  });

  const std::string csv = compare_csv(run_compare(ds, base, modes, seeds), modes);
  if (a.out.empty()) {
    out << csv;
    return kOk;
  }
  write_text(a.out, csv);
  manifest.input(a.data);
  manifest.output(a.out);
  manifest["config"] = to_json(base);
  manifest["seeds"] = seeds;
  manifest["modes"] = a.modes;
  manifest.write(manifest_path_for(a.out));
  out << "wrote " << a.out.string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------- entry

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"g2l: geodesic and Shapley-interaction alignment on synthetic moment/query embeddings", "g2l"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "generate a synthetic dataset");
  gen_cmd->add_option("--out", gen.out, "dataset path")->required();
  gen_cmd->add_option("--videos", gen.cfg.videos);
  gen_cmd->add_option("--moments", gen.cfg.moments_per_video, "moments per video")->check(CLI::Range(2, 1 << 20));
  gen_cmd->add_option("--queries", gen.cfg.queries_per_video, "queries per video")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--dim", gen.cfg.dim)->check(CLI::PositiveNumber);
  gen_cmd->add_option("--topics", gen.cfg.topics)->check(CLI::PositiveNumber);
  gen_cmd->add_option("--overlap", gen.cfg.overlap, "overlap rate in [0, 1]")->check(CLI::Range(0.0, 1.0));
  gen_cmd->add_option("--annotated", gen.cfg.annotated_fraction, "annotated fraction in (0, 1]")
      ->check(CLI::Range(0.0, 1.0));
  gen_cmd->add_option("--noise", gen.cfg.noise)->check(CLI::NonNegativeNumber);
  gen_cmd->add_option("--seed", gen.cfg.seed);
  gen_cmd->add_flag("--orthogonal", gen.cfg.orthogonal_topics, "orthonormal topic directions");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "train an encoder");
  train_cmd->add_option("--data", tr.data)->required();
  train_cmd->add_option("--out", tr.out_dir, "output directory")->required();
  tr.flags.add_to(train_cmd, true);

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate an encoder checkpoint");
  eval_cmd->add_option("--data", ev.data)->required();
  eval_cmd->add_option("--encoder", ev.encoder)->required();
  eval_cmd->add_option("--n", ev.n, "recall cutoffs, e.g. 1,5");
  eval_cmd->add_option("--out", ev.out, "also write the JSON here");

  ShapleyArgs sh;
  auto* shapley_cmd = app.add_subcommand("shapley", "Shapley values / interactions of a game file");
  shapley_cmd->add_option("--game", sh.game)->required();
  shapley_cmd->add_flag("--exact", sh.exact);
  shapley_cmd->add_option("--sampled", sh.sampled, "Monte-Carlo samples");
  shapley_cmd->add_option("--seed", sh.seed);
  shapley_cmd->add_option("--interaction", sh.interaction, "players of the coalition, e.g. 0,1");
  shapley_cmd->add_option("--out", sh.out, "also write the JSON here");

  GeodesicArgs geo;
  auto* geo_cmd = app.add_subcommand("geodesic", "dump a video's moment graph and geodesic tables");
  geo_cmd->add_option("--data", geo.data)->required();
  geo_cmd->add_option("--video", geo.video)->required();
  geo_cmd->add_option("--targets", geo.targets, "moment indices within the video")->required();
  geo_cmd->add_option("--n", geo.n, "K-NN out-degree")->check(CLI::PositiveNumber);
  geo_cmd->add_option("--g-cap", geo.g_cap)->check(CLI::PositiveNumber);
  geo_cmd->add_option("--out", geo.out, "also write the JSON here");

  CompareArgs cmp;
  auto* cmp_cmd = app.add_subcommand("compare", "train every (mode, seed) cell and tabulate");
  cmp_cmd->add_option("--data", cmp.data)->required();
  cmp_cmd->add_option("--seeds", cmp.seeds);
  cmp_cmd->add_option("--modes", cmp.modes)->delimiter(',')->check(CLI::IsMember({"baseline", "g2l"}));
  cmp_cmd->add_option("--out", cmp.out, "CSV path (default: stdout)");
  cmp.flags.add_to(cmp_cmd, false);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success) ? kOk : kArgumentError;
  }

  try {
    if (*gen_cmd) return cmd_gen(gen, args, out);
    if (*train_cmd) return cmd_train(tr, args, out);
    if (*eval_cmd) return cmd_eval(ev, args, out);
    if (*shapley_cmd) return cmd_shapley(sh, args, out);
    if (*geo_cmd) return cmd_geodesic(geo, args, out);
    if (*cmp_cmd) return cmd_compare(cmp, args, out);
  } catch (const ArgumentError& e) {
    err << "error: " << e.what() << "\n";
    return kArgumentError;
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << " (epoch " << e.epoch << ", step " << e.step << ")\n";
    return kDiverged;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kArgumentError;
}

}  // namespace g2l::cli
