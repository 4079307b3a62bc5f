// Copyright 2026 The dictpfl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dictpfl/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "dictpfl/netsim.hpp"
#include "dictpfl/trainer.hpp"

namespace dictpfl::cli {

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct Options {
  std::string strategy = "dictpfl";
  int clients = 3;
  int rounds = 30;
  int rank = 4;
  double prune = 0.7;
  int tau = 3;
  double beta = 0.2;
  double alpha = std::numeric_limits<double>::infinity();
  double lr = 0.5;
  int epochs = 1;
  int topk_layers = 1;
  double sae_fraction = 0.1;
  std::vector<int> hidden = {64};
  std::uint64_t seed = 1;
  std::string backend = "mock";
  std::string net = "lan";
  std::string timing = "sim";
  std::string packing = "compact";
  int threads = 0;
  std::string out;
  std::string config_path;

  // Data source: an existing dataset file wins over synthesis.
  std::string dataset_path;
  int classes = 4;
  int dim = 32;
  int samples_per_class = 200;
  double margin = 6.0;

  std::string manifest;
};

protocol::SessionConfig to_session_config(const Options& o) {
  protocol::SessionConfig cfg;
  cfg.strategy = parse_strategy(o.strategy);
  cfg.clients = o.clients;
  cfg.rank = o.rank;
  cfg.prune.s = o.prune;
  cfg.prune.tau = o.tau;
  cfg.prune.beta = o.beta;
  cfg.lr = o.lr;
  cfg.local_epochs = o.epochs;
  cfg.topk_layers = o.topk_layers;
  cfg.sae_fraction = o.sae_fraction;
  cfg.alpha = o.alpha;
  cfg.hidden.assign(o.hidden.begin(), o.hidden.end());
  cfg.packing = protocol::parse_packing(o.packing);
  cfg.timing = protocol::parse_timing(o.timing);
  cfg.threads = o.threads;
  cfg.seed = o.seed;
  cfg.backend = he::parse_backend(o.backend);
  cfg.he_params = cfg.backend == he::Backend::kMock ? he::HeParams::accounting()
                                                    : he::HeParams::toy();
  cfg.net = netsim::NetProfile::named(o.net);
  return cfg;
}

trainer::Dataset make_dataset(const Options& o) {
  if (!o.dataset_path.empty()) {
    return trainer::read_dataset(o.dataset_path);
  }
  trainer::SynthSpec spec;
  spec.classes = o.classes;
  spec.dim = o.dim;
  spec.samples_per_class = o.samples_per_class;
  spec.margin = o.margin;
  return trainer::synth_blobs(spec, o.seed);
}

void apply_env_seed(Options& o) {
  const char* env = std::getenv("DICTPFL_SEED");
  if (!env || !*env) return;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (end == env || *end != '\0') {
    throw ParameterError("DICTPFL_SEED: not an unsigned integer");
  }
  o.seed = v;
}

int cmd_run(const Options& options) {
  protocol::Federation fed;
  int rounds = 0;
  try {
    if (options.rounds < 1) {
      throw ParameterError("run: rounds must be >= 1");
    }
    rounds = options.rounds;
    const protocol::SessionConfig cfg = to_session_config(options);
    const trainer::Dataset dataset = make_dataset(options);
    fed = protocol::setup(cfg, dataset);
  } catch (const Error& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    const std::vector<protocol::RoundMetrics> metrics =
        protocol::run_rounds(fed, rounds);
    std::uint64_t up = 0;
    std::uint64_t down = 0;
    for (const auto& m : metrics) {
      up += m.ciphertext_up_bytes + m.plaintext_up_bytes;
      down += m.ciphertext_down_bytes + m.plaintext_down_bytes;
    }
    if (options.out.empty()) {
      write_metrics_csv(std::cout, metrics);
    } else {
      std::ofstream out(options.out, std::ios::binary);
      if (!out) throw IoError("cannot open '" + options.out + "' for writing");
      write_metrics_csv(out, metrics);
      if (!out) throw IoError("write failed for '" + options.out + "'");
      char line[256];
      std::snprintf(line, sizeof line,
                    "strategy=%s rounds=%d up_bytes=%llu down_bytes=%llu "
                    "final_loss=%.9g final_accuracy=%.9g\n",
                    options.strategy.c_str(), rounds,
                    static_cast<unsigned long long>(up),
                    static_cast<unsigned long long>(down),
                    metrics.empty() ? 0.0 : metrics.back().loss,
                    metrics.empty() ? 0.0 : metrics.back().accuracy);
      std::cout << line;
    }
    return 0;
  } catch (const Error& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

int cmd_dryrun(const Options& options) {
  try {
    if (options.manifest.empty()) {
      throw ParameterError("dryrun needs --manifest");
    }
    const std::vector<netsim::LayerShape> layers =
        netsim::load_manifest(options.manifest);
    netsim::DryRunRequest req;
    req.strategy = parse_strategy(options.strategy);
    req.clients = options.clients;
    req.rank = options.rank;
    req.prune_fraction = options.prune;
    req.topk_layers = options.topk_layers;
    req.sae_fraction = options.sae_fraction;
    const netsim::DryRunReport rep = netsim::dry_run(layers, req);

    for (const std::string& w : rep.warnings) {
      std::cerr << "warning: " << w << "\n";
    }
    auto u64 = [](std::uint64_t v) {
      return static_cast<unsigned long long>(v);
    };
    char buf[1024];
    std::snprintf(
        buf, sizeof buf,
        "strategy=%s\nclients=%d\nmodel_elements=%llu\n"
        "enc_elements_warmup=%llu\nenc_elements_steady=%llu\n"
        "plain_elements=%llu\nchunks_warmup=%llu\nchunks_steady=%llu\n"
        "ciphertext_bytes=%llu\nup_bytes_warmup=%llu\nup_bytes_steady=%llu\n"
        "down_bytes_warmup=%llu\ndown_bytes_steady=%llu\n"
        "plain_up_bytes=%llu\nplain_down_bytes=%llu\n",
        std::string(to_string(rep.strategy)).c_str(), rep.clients,
        u64(rep.model_elements), u64(rep.enc_elements_warmup),
        u64(rep.enc_elements_steady), u64(rep.plain_elements),
        u64(rep.chunks_warmup), u64(rep.chunks_steady),
        u64(rep.ciphertext_bytes_each), u64(rep.up_bytes_warmup),
        u64(rep.up_bytes_steady), u64(rep.down_bytes_warmup),
        u64(rep.down_bytes_steady), u64(rep.plain_up_bytes),
        u64(rep.plain_down_bytes));
    std::cout << buf;

    if (req.strategy != Strategy::kFedHeFull) {
      netsim::DryRunRequest full = req;
      full.strategy = Strategy::kFedHeFull;
      const netsim::DryRunReport base = netsim::dry_run(layers, full);
      const double elem_red =
          static_cast<double>(base.enc_elements_steady) /
          static_cast<double>(std::max<std::uint64_t>(1, rep.enc_elements_steady));
      const std::uint64_t steady_total =
          rep.up_bytes_steady + rep.down_bytes_steady + rep.plain_up_bytes +
          rep.plain_down_bytes;
      const double byte_red =
          static_cast<double>(base.up_bytes_steady + base.down_bytes_steady) /
          static_cast<double>(std::max<std::uint64_t>(1, steady_total));
      std::snprintf(buf, sizeof buf,
                    "reduction_elements=%.6g\nreduction_bytes=%.6g\n",
                    elem_red, byte_red);
      std::cout << buf;
    }
    return 0;
  } catch (const Error& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  }
}

}  // namespace

void write_metrics_csv(std::ostream& out,
                       std::span<const protocol::RoundMetrics> rounds) {
  out << "round,local_train_s,encrypt_s,upload_s,aggregate_s,download_s,"
         "decrypt_s,update_s,ciphertext_up_bytes,ciphertext_down_bytes,"
         "plaintext_up_bytes,plaintext_down_bytes,ct_count,loss,accuracy\n";
  char line[512];
  for (const protocol::RoundMetrics& m : rounds) {
    std::snprintf(
        line, sizeof line,
        "%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%llu,%llu,%llu,%llu,%llu,"
        "%.9g,%.9g\n",
        m.round, m.local_train_s, m.encrypt_s, m.upload_s, m.aggregate_s,
        m.download_s, m.decrypt_s, m.update_s,
        static_cast<unsigned long long>(m.ciphertext_up_bytes),
        static_cast<unsigned long long>(m.ciphertext_down_bytes),
        static_cast<unsigned long long>(m.plaintext_up_bytes),
        static_cast<unsigned long long>(m.plaintext_down_bytes),
        static_cast<unsigned long long>(m.ciphertext_count), m.loss,
        m.accuracy);
    out << line;
  }
}

// CLI11 only processes config options attached to the root command, so the
// per-subcommand flag loads the file itself: flat key=value lines, blank
// lines and '#' comments allowed. A key already given on the command line
// keeps its command-line value.
void apply_config_file(CLI::App& cmd, const std::string& path) {
  if (path.empty()) return;
  std::ifstream in(path);
  if (!in) {
    throw ParameterError("config file not readable: " + path);
  }
  const auto strip = [](const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return std::string();
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  };
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string text = strip(line);
    if (text.empty() || text[0] == '#') continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      throw ParameterError(path + ":" + std::to_string(lineno) +
                           ": expected key=value");
    }
    const std::string key = strip(text.substr(0, eq));
    const std::string value = strip(text.substr(eq + 1));
    if (key.empty()) {
      throw ParameterError(path + ":" + std::to_string(lineno) +
                           ": empty key");
    }
    CLI::Option* op = cmd.get_option_no_throw("--" + key);
    if (op == nullptr || op->get_name() == "--config") {
      throw ParameterError(path + ":" + std::to_string(lineno) +
                           ": unknown key '" + key + "'");
    }
    if (op->count() > 0) continue;
    op->add_result(value);
    op->run_callback();
  }
}

int run_main(int argc, const char* const* argv) {
  Options o;
  CLI::App app{"Federated learning simulator with encrypted aggregation"};
  app.require_subcommand(1);

  auto add_common = [&](CLI::App* cmd, bool with_run_only) {
    cmd->add_option("--strategy", o.strategy,
                    "dictpfl, full, topk or sae")
        ->check(CLI::IsMember({"dictpfl", "full", "topk", "sae"}));
    cmd->add_option("--clients", o.clients, "number of clients");
    cmd->add_option("--rank", o.rank, "dictionary rank");
    cmd->add_option("--prune", o.prune, "pruned fraction per round");
    cmd->add_option("--topk-layers", o.topk_layers,
                    "transmitted layer count for topk");
    cmd->add_option("--sae-fraction", o.sae_fraction,
                    "encrypted fraction for sae");
    if (with_run_only) {
      cmd->add_option("--rounds", o.rounds, "federated rounds");
      cmd->add_option("--tau", o.tau, "pruning history window");
      cmd->add_option("--beta", o.beta, "reactivation decay");
      cmd->add_option("--alpha", o.alpha,
                      "Dirichlet concentration (inf = homogeneous)");
      cmd->add_option("--lr", o.lr, "learning rate");
      cmd->add_option("--epochs", o.epochs, "local epochs per round");
      cmd->add_option("--hidden", o.hidden, "hidden layer sizes")
          ->delimiter(',');
      cmd->add_option("--seed", o.seed, "base seed");
      cmd->add_option("--backend", o.backend, "mock or rlwe")
          ->check(CLI::IsMember({"mock", "rlwe"}));
      cmd->add_option("--net", o.net, "lan or wan")
          ->check(CLI::IsMember({"lan", "wan"}));
      cmd->add_option("--timing", o.timing, "sim or wall")
          ->check(CLI::IsMember({"sim", "wall"}));
      cmd->add_option("--packing", o.packing, "compact or dense")
          ->check(CLI::IsMember({"compact", "dense"}));
      cmd->add_option("--threads", o.threads,
                      "client threads (0 = one per client)");
      cmd->add_option("--out", o.out, "metrics CSV path (default stdout)");
      cmd->add_option("--dataset", o.dataset_path, "dataset file to load");
      cmd->add_option("--classes", o.classes, "synthetic class count");
      cmd->add_option("--dim", o.dim, "synthetic feature count");
      cmd->add_option("--samples-per-class", o.samples_per_class,
                      "synthetic samples per class");
      cmd->add_option("--margin", o.margin, "synthetic class separation");
    }
  };

  CLI::App* run = app.add_subcommand("run", "simulate federated rounds");
  run->add_option("--config", o.config_path, "flat key=value option file");
  add_common(run, true);

  CLI::App* dryrun =
      app.add_subcommand("dryrun", "communication accounting from a manifest");
  dryrun->add_option("--config", o.config_path, "flat key=value option file");
  add_common(dryrun, false);
  dryrun->add_option("--manifest", o.manifest, "layer shape manifest");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    apply_config_file(app.got_subcommand(run) ? *run : *dryrun, o.config_path);
    apply_env_seed(o);
  } catch (const CLI::ParseError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  }

  if (app.got_subcommand(run)) return cmd_run(o);
  return cmd_dryrun(o);
}

}  // namespace dictpfl::cli
