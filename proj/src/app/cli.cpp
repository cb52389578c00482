#include "ngd/app/cli.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include "ngd/app/checkpoint.hpp"
#include "ngd/app/config.hpp"
#include "ngd/app/server.hpp"
#include "ngd/app/session.hpp"
#include "ngd/core/error.hpp"
#include "ngd/core/log.hpp"
#include "ngd/detector/evaluation.hpp"
#include "ngd/narrate/narrate.hpp"
#include "ngd/policy/policy.hpp"
#include "ngd/synthesis/synthesis.hpp"

namespace ngd::app {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string data_dir;
  bool verbose = false;

  RunConfig load() const {
    RunConfig c = config_path.empty() ? RunConfig{} : load_run_config(config_path);
    if (seed) c.set_seed(*seed);
    if (!data_dir.empty()) c.data_dir = data_dir;
    return c;
  }
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "RunConfig JSON file");
  cmd->add_option("--seed", c.seed, "master seed (overrides every module seed)");
  cmd->add_option("--data-dir", c.data_dir, "artifact directory (default $NGD_DATA_DIR)");
  cmd->add_flag("-v,--verbose", c.verbose, "progress messages");
}

fs::path in_data(const RunConfig& c, const std::string& given, const char* fallback) {
  if (!given.empty()) return given;
  fs::create_directories(c.data_path());
  return c.data_path() / fallback;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
  if (!f) throw IoError("failed writing " + path.string());
}

lang::Relation relation_arg(const std::string& name) {
  for (auto r : lang::kAllRelations)
    if (name == lang::relation_short(r) || name == lang::relation_label(r)) return r;
  throw ConfigError("unknown relation '" + name + "' (in, behind, left, right)");
}

std::shared_ptr<const detector::DetectorModel> load_detector(const std::string& path) {
  return std::make_shared<const detector::DetectorModel>(
      detector_from_checkpoint(load_checkpoint(path, "detector")));
}

std::string policy_table(const std::vector<std::pair<std::string, std::pair<double, double>>>& rows) {
  std::size_t width = 8;
  for (const auto& [name, _] : rows) width = std::max(width, name.size());
  std::string out = std::string(width, ' ') + "     seen   unseen\n";
  char buf[64];
  for (const auto& [name, r] : rows) {
    std::snprintf(buf, sizeof buf, "  %7.2f  %7.2f\n", r.first, r.second);
    out += name + std::string(width - name.size(), ' ') + buf;
  }
  return out;
}

volatile std::sig_atomic_t g_stop = 0;
InstructServer* g_server = nullptr;

void on_signal(int) {
  g_stop = 1;
  if (g_server) g_server->stop();
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out,
                std::ostream& err) {
  CLI::App app{"Instructable perceptual rewards from narrated demonstrations", "ngd"};
  app.require_subcommand(1);

  // demos
  auto* demos = app.add_subcommand("demos", "synthetic narrated demonstrations");
  demos->require_subcommand(1);
  Common gen_c;
  std::string gen_out;
  std::optional<std::size_t> gen_videos;
  auto* gen = demos->add_subcommand("gen", "generate a dataset");
  add_common(gen, gen_c);
  gen->add_option("--out", gen_out, "dataset path (default <data>/demos.jsonl)");
  gen->add_option("--videos", gen_videos, "number of videos");

  // detector
  auto* det = app.add_subcommand("detector", "reward detector");
  det->require_subcommand(1);
  Common dt_c;
  std::string dt_data, dt_out, dt_metrics, dt_neg;
  std::optional<std::size_t> dt_epochs;
  auto* dtrain = det->add_subcommand("train", "train on a dataset");
  add_common(dtrain, dt_c);
  dtrain->add_option("--data", dt_data, "dataset (default <data>/demos.jsonl)");
  dtrain->add_option("--out", dt_out, "checkpoint (default <data>/detector.ckpt)");
  dtrain->add_option("--metrics", dt_metrics, "loss history JSON");
  dtrain->add_option("--negatives", dt_neg, "hard | random")->check(CLI::IsMember({"hard", "random"}));
  dtrain->add_option("--epochs", dt_epochs, "contrastive epochs");

  Common de_c;
  std::vector<std::string> de_ckpts, de_labels;
  std::size_t de_n = 100;
  std::string de_out;
  bool de_baseline = false;
  auto* deval = det->add_subcommand("eval", "classification accuracy per relation");
  add_common(deval, de_c);
  deval->add_option("--ckpt", de_ckpts, "detector checkpoint(s)")->required();
  deval->add_option("--label", de_labels, "row label per checkpoint");
  deval->add_option("--n", de_n, "scenes per relation");
  deval->add_option("--out", de_out, "report JSON");
  deval->add_flag("--baseline", de_baseline, "add an untrained row");

  Common dr_c;
  std::string dr_ckpt, dr_rel = "in", dr_out;
  std::size_t dr_pool = 75, dr_pos = 15;
  auto* dret = det->add_subcommand("retrieve", "rank a same-pair pool by score");
  add_common(dret, dr_c);
  dret->add_option("--ckpt", dr_ckpt, "detector checkpoint")->required();
  dret->add_option("--relation", dr_rel, "in | behind | left | right");
  dret->add_option("--pool", dr_pool, "pool size");
  dret->add_option("--positives", dr_pos, "satisfying scenes in the pool");
  dret->add_option("--out", dr_out, "ranking JSON");

  std::string da_ckpt;
  std::vector<std::string> da_text;
  auto* datt = det->add_subcommand("attention", "attention weights per token");
  datt->add_option("--ckpt", da_ckpt, "detector checkpoint")->required();
  datt->add_option("--text", da_text, "utterance(s)")->required();

  // goal
  auto* goal = app.add_subcommand("goal", "analysis-by-synthesis goals");
  goal->require_subcommand(1);
  Common gs_c;
  std::string gs_ckpt, gs_text, gs_scene;
  auto* gsynth = goal->add_subcommand("synth", "best-scoring subject placement");
  add_common(gsynth, gs_c);
  gsynth->add_option("--ckpt", gs_ckpt, "detector checkpoint")->required();
  gsynth->add_option("--text", gs_text, "instruction")->required();
  gsynth->add_option("--scene", gs_scene, "scene JSON (default: random scene)");

  // policy
  auto* pol = app.add_subcommand("policy", "pick-and-place policies");
  pol->require_subcommand(1);
  Common pt_c;
  std::string pt_variant = "object", pt_reward = "gt", pt_det, pt_out, pt_curve;
  std::optional<std::size_t> pt_episodes, pt_batch;
  auto* ptrain = pol->add_subcommand("train", "DQN training");
  add_common(ptrain, pt_c);
  ptrain->add_option("--variant", pt_variant, "object | raster")->check(CLI::IsMember({"object", "raster"}));
  ptrain->add_option("--reward", pt_reward, "gt | d | binary")->check(CLI::IsMember({"gt", "d", "binary"}));
  ptrain->add_option("--detector", pt_det, "detector checkpoint (needed for --reward d)");
  ptrain->add_option("--episodes", pt_episodes, "episode budget");
  ptrain->add_option("--batch", pt_batch, "minibatch size");
  ptrain->add_option("--out", pt_out, "checkpoint path");
  ptrain->add_option("--curve", pt_curve, "learning curve CSV");

  Common pe_c;
  std::vector<std::string> pe_ckpts, pe_labels;
  std::size_t pe_n = 500;
  std::string pe_out;
  auto* peval = pol->add_subcommand("eval", "greedy success on seen and unseen objects");
  add_common(peval, pe_c);
  peval->add_option("--ckpt", pe_ckpts, "policy checkpoint(s)")->required();
  peval->add_option("--label", pe_labels, "row label per checkpoint");
  peval->add_option("--episodes", pe_n, "episodes per object set");
  peval->add_option("--out", pe_out, "report JSON");

  // instruct
  auto* ins = app.add_subcommand("instruct", "interactive instruction following");
  ins->require_subcommand(1);
  Common ir_c;
  std::string ir_det, ir_pol;
  auto* repl = ins->add_subcommand("repl", "terminal session");
  add_common(repl, ir_c);
  repl->add_option("--detector", ir_det, "detector checkpoint");
  repl->add_option("--policy", ir_pol, "policy checkpoint");
  Common is_c;
  std::string is_det, is_pol, is_host = "127.0.0.1";
  int is_port = 8080;
  auto* serve = ins->add_subcommand("serve", "HTTP JSON server");
  add_common(serve, is_c);
  serve->add_option("--detector", is_det, "detector checkpoint")->required();
  serve->add_option("--policy", is_pol, "policy checkpoint");
  serve->add_option("--host", is_host, "bind address");
  serve->add_option("--port", is_port, "port (0 picks a free one)");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const CLI::App* sub = &app;
    while (!sub->get_subcommands().empty()) sub = sub->get_subcommands().front();
    err << sub->help();
    return 2;
  }

  auto models_for = [](const RunConfig& cfg, const std::string& det_path,
                       const std::string& pol_path) {
    auto m = std::make_shared<InstructModels>();
    if (!det_path.empty()) m->detector = load_detector(det_path);
    if (!pol_path.empty())
      m->policy = std::make_shared<const policy::QNetwork>(
          policy_from_checkpoint(load_checkpoint(pol_path, "policy")));
    m->episode = cfg.episode;
    m->synthesis = cfg.synthesis;
    return std::shared_ptr<const InstructModels>(m);
  };

  try {
    for (const Common* c : {&gen_c, &dt_c, &de_c, &dr_c, &gs_c, &pt_c, &pe_c, &ir_c, &is_c})
      if (c->verbose) set_log_level(LogLevel::Info);

    if (gen->parsed()) {
      RunConfig cfg = gen_c.load();
      if (gen_videos) cfg.generator.n_videos = *gen_videos;
      const auto ds = narrate::generate_dataset(cfg.generator);
      const fs::path path = in_data(cfg, gen_out, "demos.jsonl");
      narrate::save_dataset(path, ds);
      out << "wrote " << path.string() << ": " << ds.videos.size() << " videos, "
          << ds.frame_count() << " frames, " << narrate::segment_dataset(ds).size()
          << " segments\n";
    } else if (dtrain->parsed()) {
      RunConfig cfg = dt_c.load();
      if (!dt_neg.empty())
        cfg.detector.negative_mode =
            dt_neg == "hard" ? detector::NegativeMode::Hard : detector::NegativeMode::Random;
      if (dt_epochs) cfg.detector.epochs = *dt_epochs;
      const auto ds = narrate::load_dataset(in_data(cfg, dt_data, "demos.jsonl"));
      const auto res = detector::train_detector(ds, cfg.detector);
      const fs::path ckpt = in_data(cfg, dt_out, "detector.ckpt");
      save_checkpoint(ckpt, detector_checkpoint(res.model, json(cfg.detector)));
      if (!dt_metrics.empty())
        write_text(dt_metrics, json{{"loss_history", res.loss_history},
                                    {"threshold_history", res.threshold_history}}
                                   .dump(2) + "\n");
      out << "wrote " << ckpt.string() << " (final loss "
          << (res.loss_history.empty() ? 0.0 : res.loss_history.back()) << ")\n";
    } else if (deval->parsed()) {
      const RunConfig cfg = de_c.load();
      const auto benchmarks = detector::gen_benchmarks(de_n, cfg.seed);
      std::vector<std::pair<std::string, detector::EvalReport>> rows;
      json report = json::object();
      for (std::size_t i = 0; i < de_ckpts.size(); ++i) {
        const auto model = load_detector(de_ckpts[i]);
        const detector::DetectorScorer scorer(*model);
        const std::string label =
            i < de_labels.size() ? de_labels[i] : fs::path(de_ckpts[i]).stem().string();
        rows.emplace_back(label, detector::eval_classification(scorer, benchmarks));
        report[label] = detector::report_json(rows.back().second);
      }
      if (de_baseline) {
        detector::DetectorModel untrained{load_detector(de_ckpts.front())->vocab()};
        Rng rng = make_rng(cfg.seed, "detector.untrained");
        untrained.init(rng);
        const detector::DetectorScorer scorer(untrained);
        rows.emplace_back("Untrained", detector::eval_classification(scorer, benchmarks));
        report["Untrained"] = detector::report_json(rows.back().second);
      }
      out << detector::report_table(rows);
      if (!de_out.empty()) write_text(de_out, report.dump(2) + "\n");
    } else if (dret->parsed()) {
      const RunConfig cfg = dr_c.load();
      const auto model = load_detector(dr_ckpt);
      const detector::DetectorScorer scorer(*model);
      const auto rel = relation_arg(dr_rel);
      Rng rng = make_rng(cfg.seed, "detector.retrieve");
      const auto pool = detector::gen_pool(rel, dr_pool, dr_pos, rng);
      const auto ranking = detector::rank_pool(scorer, pool.front().utterance, pool);
      out << pool.front().utterance << "\nrank  scene  score    label\n";
      char buf[96];
      for (std::size_t r = 0; r < std::min<std::size_t>(10, ranking.order.size()); ++r) {
        const auto i = ranking.order[r];
        std::snprintf(buf, sizeof buf, "%4zu  %5zu  %7.3f  %d\n", r + 1, i,
                      ranking.scores[i], pool[i].label ? 1 : 0);
        out << buf;
      }
      out << "precision@5 " << ranking.precision_at_5 << "\n";
      if (!dr_out.empty())
        write_text(dr_out, json{{"utterance", pool.front().utterance},
                                {"order", ranking.order},
                                {"scores", ranking.scores},
                                {"precision_at_5", ranking.precision_at_5}}
                               .dump(2) + "\n");
    } else if (datt->parsed()) {
      const auto model = load_detector(da_ckpt);
      for (const auto& row : detector::attention_report(*model, da_text)) {
        out << row.utterance << "\n";
        char buf[96];
        for (const auto& [tok, w] : row.weights) {
          std::snprintf(buf, sizeof buf, "  %-12s %.3f\n", tok.c_str(), w);
          out << buf;
        }
      }
    } else if (gsynth->parsed()) {
      const RunConfig cfg = gs_c.load();
      const auto model = load_detector(gs_ckpt);
      const detector::DetectorScorer scorer(*model);
      world::Scene scene;
      if (!gs_scene.empty()) {
        std::ifstream f(gs_scene);
        if (!f) throw IoError("cannot read scene " + gs_scene);
        try {
          scene = json::parse(f).get<world::Scene>();
        } catch (const json::exception& e) {
          throw FormatError(std::string("scene file: ") + e.what());
        }
      } else {
        const auto parsed = lang::parse_text(gs_text);
        const auto& lib = narrate::ObjectLibrary::standard();
        const auto* s = lib.find(parsed.subject);
        const auto* o = lib.find(parsed.object);
        if (!s || !o) throw UnknownCategory("no library category for the named objects");
        Rng rng = make_rng(cfg.seed, "goal.scene");
        scene.objects = {narrate::make_instance(*o, 0, 30.0, 30.0, rng),
                         narrate::make_instance(*s, 1, uniform(rng, 10.0, 50.0),
                                                uniform(rng, 10.0, 20.0), rng)};
      }
      const auto g = synthesis::synthesize_goal(scorer, gs_text, scene, cfg.synthesis);
      out << json{{"utterance", gs_text}, {"goal", g}}.dump(2) << "\n";
    } else if (ptrain->parsed()) {
      RunConfig cfg = pt_c.load();
      if (pt_episodes) cfg.dqn.episodes = *pt_episodes;
      if (pt_batch) cfg.dqn.batch = *pt_batch;
      const auto variant = policy::variant_from_name(pt_variant);
      const auto source = policy::reward_source_from_name(pt_reward);
      std::shared_ptr<const detector::DetectorModel> model;
      std::unique_ptr<detector::DetectorScorer> scorer;
      if (!pt_det.empty()) {
        model = load_detector(pt_det);
        scorer = std::make_unique<detector::DetectorScorer>(*model);
      }
      const auto res =
          policy::train_dqn(cfg.episode, cfg.dqn, source, variant, scorer.get(), cfg.synthesis);
      const std::string tag = pt_variant + "_" + pt_reward;
      const fs::path ckpt = in_data(cfg, pt_out, ("policy_" + tag + ".ckpt").c_str());
      const fs::path curve = in_data(cfg, pt_curve, ("curve_" + tag + ".csv").c_str());
      save_checkpoint(ckpt, policy_checkpoint(res.net, json{{"dqn", cfg.dqn},
                                                             {"episode", cfg.episode},
                                                             {"reward", pt_reward}}));
      write_text(curve, policy::curve_csv(res.curve));
      out << "wrote " << ckpt.string() << " and " << curve.string() << " (final success "
          << (res.curve.empty() ? 0.0 : res.curve.back().success_rate) << ")\n";
    } else if (peval->parsed()) {
      const RunConfig cfg = pe_c.load();
      std::vector<std::pair<std::string, std::pair<double, double>>> rows;
      json report = json::object();
      for (std::size_t i = 0; i < pe_ckpts.size(); ++i) {
        const auto net = policy_from_checkpoint(load_checkpoint(pe_ckpts[i], "policy"));
        Rng seen = make_rng(cfg.seed, "policy.eval.seen");
        Rng unseen = make_rng(cfg.seed, "policy.eval.unseen");
        const double s = policy::evaluate_policy(net, cfg.episode, pe_n, false, seen);
        const double u = policy::evaluate_policy(net, cfg.episode, pe_n, true, unseen);
        const std::string label =
            i < pe_labels.size() ? pe_labels[i] : fs::path(pe_ckpts[i]).stem().string();
        rows.push_back({label, {s, u}});
        report[label] = {{"seen", s}, {"unseen", u}, {"episodes", pe_n}};
      }
      out << policy_table(rows);
      if (!pe_out.empty()) write_text(pe_out, report.dump(2) + "\n");
    } else if (repl->parsed()) {
      const RunConfig cfg = ir_c.load();
      InstructSession session(models_for(cfg, ir_det, ir_pol), cfg.seed);
      out << session.state().dump() << "\n";
      std::string line;
      while (std::getline(std::cin, line)) {
        if (line == "quit" || line == "exit") break;
        if (line.empty()) continue;
        try {
          if (line == "state") {
            out << session.state().dump() << "\n";
          } else if (line.rfind("step", 0) == 0) {
            const std::string rest = line.substr(4);
            out << session.step(rest.empty() ? 1 : std::stoul(rest)).dump() << "\n";
          } else if (line.rfind("reset", 0) == 0) {
            const std::string rest = line.substr(5);
            session.reset(rest.empty() ? std::nullopt
                                       : std::optional<std::uint64_t>(std::stoull(rest)));
            out << session.state().dump() << "\n";
          } else {
            out << session.instruct(line).dump() << "\n";
          }
        } catch (const Error& e) {
          err << "error: " << e.what() << "\n";
        } catch (const std::logic_error& e) {
          err << "error: bad number: " << e.what() << "\n";
        }
      }
    } else if (serve->parsed()) {
      const RunConfig cfg = is_c.load();
      InstructServer server(models_for(cfg, is_det, is_pol), cfg.seed);
      if (!server.bind(is_host, is_port))
        throw IoError("cannot bind " + is_host + ":" + std::to_string(is_port));
      out << "listening on http://" << is_host << ":" << server.port() << "\n" << std::flush;
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      server.listen();
      g_server = nullptr;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

int run_command(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_command(args, std::cout, std::cerr);
}

}  // namespace ngd::app
