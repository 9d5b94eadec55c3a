#include "dronegate/cli.hpp"

#include <atomic>
#include <chrono>
#include <csignal>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "dronegate/eval.hpp"
#include "dronegate/gate.hpp"
#include "dronegate/kg.hpp"
#include "dronegate/text.hpp"

namespace dronegate::cli {

namespace {

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

// Reads a code file, or standard input when the name is "-".
std::string read_source(const std::string& name) {
  std::ostringstream buffer;
  if (name == "-") {
    buffer << std::cin.rdbuf();
    return buffer.str();
  }
  std::ifstream in(name, std::ios::binary);
  if (!in) throw std::runtime_error(cat("cannot open '", name, "'"));
  buffer << in.rdbuf();
  return buffer.str();
}

std::string slurp(const std::string& name) {
  std::ifstream in(name, std::ios::binary);
  if (!in) throw std::runtime_error(cat("cannot open '", name, "'"));
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Safety gate for drone-control code: static trajectory analysis, rule "
               "prompting, dataset tooling, and a line-oriented network service.",
               "dronegate"};
  app.require_subcommand(1);
  int exit_code = 0;

  // --- verify ---------------------------------------------------------------
  auto* verify = app.add_subcommand("verify", "Judge one code file (- for standard input)");
  std::string verify_file;
  std::string verify_config = "data/gate_config.json";
  verify->add_option("file", verify_file, "Code file, or - for standard input")->required();
  verify->add_option("--config", verify_config, "Gate configuration file")
      ->capture_default_str();
  verify->callback([&] {
    const gate::GateConfig config = gate::load_config(verify_config);
    const gate::GateContext context = gate::load_context(config);
    const gate::GateDecision decision =
        gate::gate_submit(config, context, read_source(verify_file), verify_file);
    out << gate::decision_to_json(decision, 2) << "\n";
    exit_code = decision.label == analyzer::SafetyLabel::Safe ? 0 : 1;
  });

  // --- simulate -------------------------------------------------------------
  auto* simulate = app.add_subcommand(
      "simulate", "Judge one code file and print the flight log when it is SAFE");
  std::string simulate_file;
  std::string simulate_config = "data/gate_config.json";
  simulate->add_option("file", simulate_file, "Code file, or - for standard input")
      ->required();
  simulate->add_option("--config", simulate_config, "Gate configuration file")
      ->capture_default_str();
  simulate->callback([&] {
    const gate::GateConfig config = gate::load_config(simulate_config);
    const gate::GateContext context = gate::load_context(config);
    const gate::GateDecision decision =
        gate::gate_submit(config, context, read_source(simulate_file), simulate_file);
    if (decision.label == analyzer::SafetyLabel::Safe && decision.flight_log) {
      out << analyzer::trajectory_to_json(*decision.flight_log) << "\n";
      exit_code = 0;
    } else {
      out << gate::decision_to_json(decision, 2) << "\n";
      exit_code = 1;
    }
  });

  // --- eval -----------------------------------------------------------------
  auto* eval_cmd =
      app.add_subcommand("eval", "Run a classifier over a labeled dataset and report metrics");
  std::string eval_dataset;
  std::string eval_classifier = "static";
  std::string eval_config = "data/gate_config.json";
  std::string eval_format = "text";
  bool eval_kgp = false;
  int flip_unsafe = 0;
  int flip_safe = 0;
  eval_cmd->add_option("--dataset", eval_dataset, "Dataset file, one record per line")
      ->required();
  eval_cmd->add_option("--classifier", eval_classifier, "Which classifier to evaluate")
      ->check(CLI::IsMember({"static", "remote", "scripted"}))
      ->capture_default_str();
  eval_cmd->add_flag("--kgp", eval_kgp, "Include the rendered rule prompt in LLM prompts");
  eval_cmd->add_option("--config", eval_config, "Gate configuration file")
      ->capture_default_str();
  eval_cmd->add_option("--format", eval_format, "Report format")
      ->check(CLI::IsMember({"text", "json"}))
      ->capture_default_str();
  eval_cmd->add_option("--flip-unsafe", flip_unsafe,
                       "Scripted only: how many UNSAFE rows to misread as SAFE");
  eval_cmd->add_option("--flip-safe", flip_safe,
                       "Scripted only: how many SAFE rows to misread as UNSAFE");
  eval_cmd->callback([&] {
    const gate::GateConfig config = gate::load_config(eval_config);
    const gate::GateContext context = gate::load_context(config);
    const std::vector<eval::LabeledExample> dataset =
        eval::load_dataset(std::filesystem::path(eval_dataset));
    classifier::ClassifierConfig cc = config.classifier;
    if (eval_classifier == "static") {
      cc.kind = classifier::ClassifierKind::Static;
    } else if (eval_classifier == "remote") {
      cc.kind = classifier::ClassifierKind::Remote;
    } else {
      cc.kind = classifier::ClassifierKind::Scripted;
      std::vector<classifier::ScriptRow> rows;
      for (const eval::LabeledExample& example : dataset) {
        if (example.split != "test") continue;
        classifier::ScriptRow row;
        row.id = example.id;
        row.label = example.label;
        row.category = example.category;
        rows.push_back(std::move(row));
      }
      cc.script = classifier::make_script(std::move(rows), flip_unsafe, flip_safe);
    }
    cc.use_kgp = eval_kgp;
    cc.kgp_text = context.kgp_text;
    const eval::MetricsReport report =
        eval::evaluate(cc, dataset, context.scene, context.rules);
    out << eval::render_report(report, eval_format == "json" ? eval::ReportFormat::Json
                                                             : eval::ReportFormat::TextTable);
  });

  // --- gen-dataset ------------------------------------------------------------
  auto* gen = app.add_subcommand(
      "gen-dataset", "Generate a labeled dataset using the static analyzer as the oracle");
  std::uint64_t seed = 7;
  std::string gen_out;
  std::string gen_config = "data/gate_config.json";
  int count_altitude = 10;
  int count_object = 30;
  int count_crowd = 30;
  int count_hover = 30;
  double train_fraction = 0.2;
  gen->add_option("--seed", seed, "Generator seed")->capture_default_str();
  gen->add_option("--out", gen_out, "Output dataset file")->required();
  gen->add_option("--config", gen_config, "Gate configuration file")->capture_default_str();
  gen->add_option("--count-altitude", count_altitude, "Altitude examples (half SAFE)")
      ->capture_default_str();
  gen->add_option("--count-object", count_object, "Obstacle-distance examples (half SAFE)")
      ->capture_default_str();
  gen->add_option("--count-crowd", count_crowd, "Crowd-distance examples (half SAFE)")
      ->capture_default_str();
  gen->add_option("--count-hover", count_hover, "Crowd-overflight examples (half SAFE)")
      ->capture_default_str();
  gen->add_option("--train-fraction", train_fraction,
                  "Trailing fraction of each (category, label) group marked as train split")
      ->capture_default_str();
  gen->callback([&] {
    const gate::GateConfig config = gate::load_config(gen_config);
    const gate::GateContext context = gate::load_context(config);
    eval::GenerationSpec spec;
    spec.seed = seed;
    spec.per_category = {{analyzer::Category::Altitude, count_altitude},
                         {analyzer::Category::DistObject, count_object},
                         {analyzer::Category::DistCrowd, count_crowd},
                         {analyzer::Category::HoverCrowd, count_hover}};
    spec.train_fraction = train_fraction;
    const std::vector<eval::LabeledExample> dataset =
        eval::generate_dataset(spec, context.scene, context.rules);
    eval::save_dataset(gen_out, dataset);
    std::size_t test_rows = 0;
    for (const eval::LabeledExample& example : dataset) {
      if (example.split == "test") ++test_rows;
    }
    out << "wrote " << dataset.size() << " examples (" << test_rows << " test, "
        << dataset.size() - test_rows << " train) to " << gen_out << "\n";
  });

  // --- render-kgp -------------------------------------------------------------
  auto* render = app.add_subcommand("render-kgp",
                                    "Render the rule prompt from triples and templates");
  std::string kg_path;
  std::string templates_path;
  render->add_option("--kg", kg_path, "Triples file")->required();
  render->add_option("--templates", templates_path, "Sentence templates file")->required();
  render->callback([&] {
    const kg::KnowledgeGraph graph = kg::parse_triples(slurp(kg_path));
    const std::vector<kg::PredicateTemplate> templates =
        kg::parse_templates(slurp(templates_path));
    out << kg::render_kgp(graph, templates, kg::default_preamble(), kg::default_epilogue());
  });

  // --- serve --------------------------------------------------------------------
  auto* serve = app.add_subcommand("serve", "Run the line-oriented gate service");
  std::string serve_config;
  serve->add_option("--config", serve_config, "Gate configuration file")->required();
  serve->callback([&] {
    gate::GateService service(gate::load_config(serve_config));
    service.start();
    out << "listening on port " << service.port() << "\n" << std::flush;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    while (!g_interrupted) {
      std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
    service.stop();
    out << "stopped\n";
  });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return exit_code;
}

}  // namespace dronegate::cli
