// Command-line driver: train, reconstruct, generate, evaluate, schedule-dump.
// Exit codes: 0 ok, 1 usage, 2 data error, 3 numerical divergence.

#ifndef DPCDVAE_TOOLS_CLI_HPP_
#define DPCDVAE_TOOLS_CLI_HPP_

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dpcdvae/dpcdvae.hpp"

namespace dpcdvae::cli {

enum ExitCode { kOk = 0, kUsage = 1, kDataError = 2, kDivergence = 3 };

namespace detail {

struct Options {
  std::string config, data, out, ckpt, generated, reference, mode = "recon", variant;
  int count = 0;
  int steps = 1000;
  double gamma_min = -10, gamma_max = 10;
  std::optional<std::uint64_t> seed;
};

inline void resolve_seed(RunConfig& cfg, const Options& o) {
  apply_seed_override(cfg);
  if (o.seed)
    cfg.seed = *o.seed;
}

inline NoiseSchedule schedule_of(const RunConfig& c) {
  return make_sigmoid_schedule(c.schedule_steps, c.gamma_min, c.gamma_max);
}

inline std::string epoch_file(const std::string& dir, int epoch) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "checkpoint_epoch%04d.dpcv", epoch);
  return (std::filesystem::path(dir) / buf).string();
}

inline int cmd_train(const Options& o, std::ostream& err) {
  RunConfig cfg = o.config.empty() ? RunConfig{} : read_config(o.config);
  resolve_seed(cfg, o);
  auto records = read_jsonl(o.data);
  auto data = structures_of(records);
  fit_model_config(cfg.model, data);
  cfg.train.seed = cfg.seed + 1;
  std::filesystem::create_directories(o.out);

  Model model(cfg.model, cfg.seed);
  NoiseSchedule schedule = schedule_of(cfg);
  std::ofstream csv(std::filesystem::path(o.out) / "loss.csv", std::ios::binary);
  if (!csv)
    throw ParseError("cannot write loss.csv in " + o.out);
  write_loss_csv_header(csv);
  train(model, data, schedule, cfg.train, [&](const EpochRecord& r) {
    write_loss_csv_row(csv, r);
    csv.flush();
    err << "epoch " << r.epoch << " loss " << r.mean.total << '\n';
    if (cfg.save_every > 0 && r.epoch % cfg.save_every == 0)
      save_checkpoint(epoch_file(o.out, r.epoch), make_checkpoint(cfg, model));
  });
  save_checkpoint((std::filesystem::path(o.out) / "model.dpcv").string(),
                  make_checkpoint(cfg, model));
  return kOk;
}

inline SampleOptions sample_options(const RunConfig& cfg, const Options& o) {
  SampleOptions so = cfg.sampler;
  if (!o.variant.empty())
    so.sampler.variant = dpcdvae::detail::parse_variant(o.variant);
  return so;
}

inline int cmd_reconstruct(const Options& o, std::ostream& err) {
  auto [cfg, model] = restore(load_checkpoint(o.ckpt));
  resolve_seed(cfg, o);
  auto records = read_jsonl(o.data);
  NoiseSchedule schedule = schedule_of(cfg);
  SampleOptions so = sample_options(cfg, o);
  Rng rng(cfg.seed);
  std::vector<DatasetRecord> out;
  for (size_t i = 0; i < records.size(); ++i) {
    Rng local = rng.split();
    out.push_back({model.reconstruct(records[i].structure, schedule, local, so), std::nullopt,
                   records[i].id});
    err << "reconstructed " << i + 1 << "/" << records.size() << '\n';
  }
  write_jsonl(o.out, out);
  return kOk;
}

inline int cmd_generate(const Options& o, std::ostream& err) {
  if (o.count < 1)
    throw InvalidInput("--count must be >= 1");
  auto [cfg, model] = restore(load_checkpoint(o.ckpt));
  resolve_seed(cfg, o);
  NoiseSchedule schedule = schedule_of(cfg);
  SampleOptions so = sample_options(cfg, o);
  Rng rng(cfg.seed);
  std::vector<DatasetRecord> out;
  for (int i = 0; i < o.count; ++i) {
    Rng local = rng.split();
    out.push_back({model.generate(schedule, local, so), std::nullopt, std::nullopt});
    err << "generated " << i + 1 << "/" << o.count << '\n';
  }
  write_jsonl(o.out, out);
  return kOk;
}

inline int cmd_evaluate(const Options& o, std::ostream& out) {
  RunConfig cfg = o.config.empty() ? RunConfig{} : read_config(o.config);
  auto gen = read_jsonl(o.generated);
  auto ref = read_jsonl(o.reference);
  auto gs = structures_of(gen), rs = structures_of(ref);
  MetricsReport r;
  if (o.mode == "recon") {
    MatchSummary m = match_rate_and_rms(rs, gs, cfg.matcher);
    r.match_rate = m.match_rate;
    r.mean_delta_rms = m.mean_delta_rms;
  } else if (o.mode == "gen") {
    double vs = 0, vc = 0;
    std::vector<double> rho_g, rho_r, ne_g, ne_r;
    for (const auto& s : gs) {
      Validity v = validity(s);
      vs += v.structural;
      vc += v.compositional;
      rho_g.push_back(density(s));
      ne_g.push_back(n_elements(s));
    }
    for (const auto& s : rs) {
      rho_r.push_back(density(s));
      ne_r.push_back(n_elements(s));
    }
    r.validity_struct = 100.0 * vs / static_cast<double>(gs.size());
    r.validity_comp = 100.0 * vc / static_cast<double>(gs.size());
    CoverageResult c = coverage(gs, rs, cfg.coverage);
    r.cov_r = c.cov_r;
    r.cov_p = c.cov_p;
    r.wasserstein_rho = wasserstein_1d(rho_g, rho_r);
    r.wasserstein_nelem = wasserstein_1d(ne_g, ne_r);
  } else if (o.mode == "ground-state") {
    std::vector<double> eg, er;
    for (const auto& g : gen) {
      if (!g.energy_per_atom)
        throw ParseError("ground-state mode needs energy_per_atom in " + o.generated);
      eg.push_back(*g.energy_per_atom);
    }
    for (const auto& g : ref) {
      if (!g.energy_per_atom)
        throw ParseError("ground-state mode needs energy_per_atom in " + o.reference);
      er.push_back(*g.energy_per_atom);
    }
    GroundStateSummary g = ground_state_compare(gs, rs, eg, er, cfg.matcher);
    r.match_rate = g.match.match_rate;
    r.mean_delta_rms = g.match.mean_delta_rms;
    r.delta_v_rms = g.delta_v_rms;
    r.delta_e_rms = g.delta_e_rms;
  } else {
    throw InvalidInput("unknown mode '" + o.mode + "'");
  }
  std::string text = report_to_json(r).dump(2) + "\n";
  if (o.out.empty()) {
    out << text;
  } else {
    std::ofstream f(o.out, std::ios::binary);
    if (!f)
      throw ParseError("cannot write " + o.out);
    f << text;
  }
  return kOk;
}

inline int cmd_schedule_dump(const Options& o, std::ostream& out) {
  NoiseSchedule s = make_sigmoid_schedule(o.steps, o.gamma_min, o.gamma_max);
  out << "t,alpha,alpha_bar,sigma,sigma_prime\n";
  char buf[160];
  for (int t = 1; t <= s.steps(); ++t) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g\n", t, s.alpha(t), s.alpha_bar(t),
                  s.sigma(t), s.sigma_prime_at(t));
    out << buf;
  }
  return kOk;
}

}  // namespace detail

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  detail::Options o;
  CLI::App app{"Periodic-diffusion crystal VAE: training, sampling and evaluation"};
  app.require_subcommand(1);
  auto seed_opt = [&](CLI::App* c) {
    c->add_option_function<std::uint64_t>(
        "--seed", [&](const std::uint64_t& v) { o.seed = v; }, "RNG seed (overrides config and DPCV_SEED)");
  };

  auto* train = app.add_subcommand("train", "Train a model and write checkpoints and loss CSV");
  train->add_option("--config", o.config, "Run configuration JSON");
  train->add_option("--data", o.data, "Training set (JSONL)")->required();
  train->add_option("--out", o.out, "Output directory")->required();
  seed_opt(train);

  auto* recon = app.add_subcommand("reconstruct", "Encode and resample each input structure");
  recon->add_option("--ckpt", o.ckpt, "Checkpoint file")->required();
  recon->add_option("--data", o.data, "Structures to reconstruct (JSONL)")->required();
  recon->add_option("--out", o.out, "Output JSONL")->required();
  recon->add_option("--variant", o.variant, "Reverse step: periodic or standard")
      ->check(CLI::IsMember({"periodic", "standard"}));
  seed_opt(recon);

  auto* gen = app.add_subcommand("generate", "Sample structures from the prior");
  gen->add_option("--ckpt", o.ckpt, "Checkpoint file")->required();
  gen->add_option("--count", o.count, "Number of structures")->required();
  gen->add_option("--out", o.out, "Output JSONL")->required();
  gen->add_option("--variant", o.variant, "Reverse step: periodic or standard")
      ->check(CLI::IsMember({"periodic", "standard"}));
  seed_opt(gen);

  auto* eval = app.add_subcommand("evaluate", "Compute a metrics report");
  eval->add_option("--mode", o.mode, "recon, gen or ground-state")
      ->check(CLI::IsMember({"recon", "gen", "ground-state"}));
  eval->add_option("--generated", o.generated, "Generated structures (JSONL)")->required();
  eval->add_option("--reference", o.reference, "Reference structures (JSONL)")->required();
  eval->add_option("--config", o.config, "Run configuration JSON (tolerances)");
  eval->add_option("--out", o.out, "Write the report here instead of stdout");

  auto* dump = app.add_subcommand("schedule-dump", "Print the noise schedule as CSV");
  dump->add_option("--T", o.steps, "Number of diffusion steps");
  dump->add_option("--gamma-min", o.gamma_min, "Schedule start");
  dump->add_option("--gamma-max", o.gamma_max, "Schedule end");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kOk;
    }
    err << "error: " << e.what() << "\n" << "run with --help for usage\n";
    return kUsage;
  }

  try {
    if (train->parsed())
      return detail::cmd_train(o, err);
    if (recon->parsed())
      return detail::cmd_reconstruct(o, err);
    if (gen->parsed())
      return detail::cmd_generate(o, err);
    if (eval->parsed())
      return detail::cmd_evaluate(o, out);
    return detail::cmd_schedule_dump(o, out);
  } catch (const DivergenceError& e) {
    err << "divergence: " << e.what() << '\n';
    return kDivergence;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
}

}  // namespace dpcdvae::cli
#endif
