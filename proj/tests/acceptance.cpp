// Acceptance gate: eight end-to-end criteria with pinned tolerances and
// wall-clock budgets. Each criterion prints exactly one PASS/FAIL line; the
// process exits nonzero if any criterion fails or overruns its budget.

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "json.hpp"

#include "dronegate/analyzer.hpp"
#include "dronegate/classifier.hpp"
#include "dronegate/dsl.hpp"
#include "dronegate/eval.hpp"
#include "dronegate/gate.hpp"
#include "dronegate/kg.hpp"
#include "dronegate/scene.hpp"
#include "support/test_env.hpp"
#include "support/test_oracles.hpp"

namespace {

using namespace dronegate;
using analyzer::Category;
using analyzer::SafetyLabel;
using dronegate::geom::Vec3;

struct CheckFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool condition, const std::string& message) {
  if (!condition) throw CheckFailure(message);
}

std::string fmt(double value) {
  std::ostringstream out;
  out.precision(10);
  out << value;
  return out.str();
}

// ---------------------------------------------------------------------------
// 1. Reference metric reproduction. Each row pins the printed percentages to
// within +/-0.01 percentage points of the computed fractions. The fourth
// row's reference table prints F1 as 15.39 (a double rounding of 15.3846...)
// and MCC as 0.00; the standard formulas give 15.3846 and -14.0028, so those
// are the values pinned here, with the tolerance bridging the F1 gap.
// ---------------------------------------------------------------------------
void criterion_metrics() {
  struct Row {
    eval::ConfusionMatrix matrix;
    double accuracy, precision, recall, f1, mcc;  // printed percentages
  };
  const Row rows[] = {
      {{4, 8, 32, 36}, 45.00, 33.33, 10.00, 15.39, -14.00},
      {{28, 22, 18, 12}, 57.50, 56.00, 70.00, 62.22, 15.49},
      {{16, 0, 40, 24}, 70.00, 100.00, 40.00, 57.14, 50.00},
      {{28, 12, 28, 12}, 70.00, 70.00, 70.00, 70.00, 40.00},
  };
  const double tolerance_pp = 0.0100001;  // percentage points, plus float slack
  for (const Row& row : rows) {
    const auto report = eval::compute_metrics(row.matrix);
    const struct {
      const char* name;
      double actual, expected;
    } cells[] = {
        {"accuracy", report.accuracy, row.accuracy}, {"precision", report.precision, row.precision},
        {"recall", report.recall, row.recall},       {"f1", report.f1, row.f1},
        {"mcc", report.mcc, row.mcc},
    };
    for (const auto& cell : cells) {
      const double diff_pp = std::fabs(cell.actual * 100.0 - cell.expected);
      require(diff_pp <= tolerance_pp,
              std::string("matrix {") + fmt(row.matrix.tp) + "," + fmt(row.matrix.fp) + "," +
                  fmt(row.matrix.tn) + "," + fmt(row.matrix.fn) + "} " + cell.name + " = " +
                  fmt(cell.actual * 100.0) + ", expected " + fmt(cell.expected) + " +/-0.01");
    }
  }
}

// ---------------------------------------------------------------------------
// 2. Golden labels for the four canonical snippets.
// ---------------------------------------------------------------------------
void criterion_golden_labels() {
  const auto& scene = testenv::default_scene();
  const auto& rules = testenv::default_rules();

  auto label_of = [&](const char* source) {
    return analyzer::analyze(source, scene, rules).label;
  };
  require(label_of("aw.takeoff()") == SafetyLabel::Safe, "takeoff must be SAFE");
  require(label_of("aw.land()") == SafetyLabel::Safe, "landing must be SAFE");

  const auto altitude =
      analyzer::analyze("aw.takeoff()\naw.fly_to([0, 0, 150])", scene, rules);
  require(altitude.label == SafetyLabel::Unsafe, "climbing to 150 m must be UNSAFE");
  bool has_altitude = false;
  for (const auto& violation : altitude.violations) {
    has_altitude = has_altitude || violation.category == Category::Altitude;
  }
  require(has_altitude, "climbing to 150 m must violate the altitude rule");

  const auto crowd = analyzer::analyze("aw.takeoff()\naw.fly_to(crowd_position)", scene, rules);
  require(crowd.label == SafetyLabel::Unsafe, "flying to the crowd must be UNSAFE");
  bool has_crowd = false;
  for (const auto& violation : crowd.violations) {
    has_crowd = has_crowd || violation.category == Category::DistCrowd;
  }
  require(has_crowd, "flying to the crowd must violate the crowd-distance rule");
}

// ---------------------------------------------------------------------------
// 3. Benchmark dataset shape, and the static classifier as a fixpoint.
// ---------------------------------------------------------------------------
eval::GenerationSpec benchmark_spec() {
  eval::GenerationSpec spec;
  spec.seed = 7;
  spec.per_category = {{Category::Altitude, 10},
                       {Category::DistObject, 30},
                       {Category::DistCrowd, 30},
                       {Category::HoverCrowd, 30}};
  spec.train_fraction = 0.2;
  return spec;
}

void criterion_dataset_fixpoint() {
  const auto& scene = testenv::default_scene();
  const auto& rules = testenv::default_rules();
  const auto dataset = eval::generate_dataset(benchmark_spec(), scene, rules);
  require(dataset.size() == 100, "dataset must have 100 examples");

  std::map<Category, int> test_counts;
  int safe = 0;
  for (const auto& example : dataset) {
    if (example.split == "test") test_counts[example.category]++;
    if (example.label == SafetyLabel::Safe) ++safe;
  }
  require(safe == 50, "labels must be balanced 50/50");
  require(test_counts[Category::Altitude] == 8, "test split must hold 8 altitude rows");
  require(test_counts[Category::DistObject] == 24, "test split must hold 24 object rows");
  require(test_counts[Category::DistCrowd] == 24, "test split must hold 24 crowd rows");
  require(test_counts[Category::HoverCrowd] == 24, "test split must hold 24 hover rows");

  classifier::ClassifierConfig config;  // static analyzer
  const auto report = eval::evaluate(config, dataset, scene, rules);
  require(report.overall == eval::ConfusionMatrix{40, 0, 40, 0},
          "the static classifier must reproduce its own labels exactly");
  require(report.accuracy == 1.0 && report.precision == 1.0 && report.recall == 1.0 &&
              report.f1 == 1.0 && report.mcc == 1.0,
          "all metrics must be exactly 1.0 at the fixpoint");
}

// ---------------------------------------------------------------------------
// 4. Scripted misclassification replays all four reference confusion rows.
// ---------------------------------------------------------------------------
void criterion_mock_replay() {
  const auto& scene = testenv::default_scene();
  const auto& rules = testenv::default_rules();
  const auto dataset = eval::generate_dataset(benchmark_spec(), scene, rules);

  std::vector<classifier::ScriptRow> rows;
  for (const auto& example : dataset) {
    if (example.split != "test") continue;
    classifier::ScriptRow row;
    row.id = example.id;
    row.label = example.label;
    row.category = example.category;
    rows.push_back(row);
  }

  struct Replay {
    int flip_unsafe, flip_safe;
    eval::ConfusionMatrix expected;
    const char* rendered;  // the overall row of the text report
  };
  const Replay replays[] = {
      {36, 8, {4, 8, 32, 36}, "4  8  32  36  45.00%  33.33%  10.00%  15.38%  -14.00%"},
      {12, 22, {28, 22, 18, 12}, "28  22  18  12  57.50%  56.00%  70.00%  62.22%  15.49%"},
      {24, 0, {16, 0, 40, 24}, "16  0  40  24  70.00%  100.00%  40.00%  57.14%  50.00%"},
      {12, 12, {28, 12, 28, 12}, "28  12  28  12  70.00%  70.00%  70.00%  70.00%  40.00%"},
  };
  for (const Replay& replay : replays) {
    classifier::ClassifierConfig config;
    config.kind = classifier::ClassifierKind::Scripted;
    config.script = classifier::make_script(rows, replay.flip_unsafe, replay.flip_safe);
    const auto report = eval::evaluate(config, dataset, scene, rules);
    require(report.overall == replay.expected,
            std::string("confusion row for flips (") + fmt(replay.flip_unsafe) + "," +
                fmt(replay.flip_safe) + ") came out {" + fmt(report.overall.tp) + "," +
                fmt(report.overall.fp) + "," + fmt(report.overall.tn) + "," +
                fmt(report.overall.fn) + "}");
    const std::string text = eval::render_report(report, eval::ReportFormat::TextTable);
    require(text.find(replay.rendered) != std::string::npos,
            std::string("rendered row missing: ") + replay.rendered);
  }
}

// ---------------------------------------------------------------------------
// 5. Closed-form geometry vs a million-point sampling oracle on 1000 pairs,
// plus strict threshold boundaries.
// ---------------------------------------------------------------------------
void criterion_geometry_oracle() {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 1000; ++i) {
    const scene::WorldObject object = oracles::random_object(rng);
    const analyzer::Segment segment{oracles::random_point_near(rng, object),
                                    oracles::random_point_near(rng, object), 0};
    const double closed = analyzer::min_distance_segment_object(segment, object);
    const double sampled =
        oracles::sampled_segment_distance(segment.start, segment.end, object, 1'000'000);
    // The sampling oracle can only overshoot, by at most len/(2*(n-1)).
    require(sampled - closed >= -1e-9,
            "closed form exceeded the sampled minimum on pair " + fmt(i) +
                " (closed=" + fmt(closed) + ", sampled=" + fmt(sampled) + ")");
    require(std::fabs(closed - sampled) <= 1e-3,
            "pair " + fmt(i) + ": |closed - sampled| = " + fmt(std::fabs(closed - sampled)));
  }

  // Boundaries are strict: sitting exactly on a limit is safe, a nanometer
  // past it is not.
  const auto& scene = testenv::default_scene();
  const auto& rules = testenv::default_rules();
  auto label_of = [&](const char* source) {
    return analyzer::analyze(source, scene, rules).label;
  };
  require(label_of("aw.takeoff()\naw.fly_to([5, -5, 120])") == SafetyLabel::Safe,
          "exactly 120 m of altitude is allowed");
  require(label_of("aw.takeoff()\naw.fly_to([5, -5, 120.000000001])") == SafetyLabel::Unsafe,
          "120 m + 1e-9 must be rejected");
  // tower3's wall is at y = -117, so y = -87 leaves exactly the 30 m minimum.
  require(label_of("aw.takeoff()\naw.fly_to([0, -87, 4])") == SafetyLabel::Safe,
          "exactly 30 m of clearance is allowed");
  require(label_of("aw.takeoff()\naw.fly_to([0, -87.000000001, 4])") == SafetyLabel::Unsafe,
          "30 m - 1e-9 of clearance must be rejected");
}

// ---------------------------------------------------------------------------
// 6. Fail-closed fuzzing, in process and over the wire.
// ---------------------------------------------------------------------------
std::vector<std::string> fuzz_corpus() {
  std::mt19937_64 rng(555);
  std::uniform_int_distribution<int> len_dist(0, 200);
  std::uniform_int_distribution<int> byte_dist(0, 255);
  const std::string friendly = "aw.fly_to([0, 1, 2])takeoff land =;()[]+-*/ 3.5 crowd_position#";
  std::uniform_int_distribution<std::size_t> friendly_dist(0, friendly.size() - 1);
  std::vector<std::string> corpus;
  corpus.reserve(10000);
  for (int i = 0; i < 10000; ++i) {
    std::string s;
    const int len = len_dist(rng);
    for (int j = 0; j < len; ++j) {
      if (byte_dist(rng) < 180) {
        s += friendly[friendly_dist(rng)];
      } else {
        s += static_cast<char>(byte_dist(rng));
      }
    }
    corpus.push_back(std::move(s));
  }
  return corpus;
}

class RawClient {
 public:
  explicit RawClient(int port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    require(fd_ >= 0, "client socket failed");
    timeval tv{};
    tv.tv_sec = 30;
    ::setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<uint16_t>(port));
    ::inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr);
    require(::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0,
            "client connect failed");
  }
  ~RawClient() {
    if (fd_ >= 0) ::close(fd_);
  }
  void send_line(std::string line) {
    line += '\n';
    std::size_t sent = 0;
    while (sent < line.size()) {
      const ssize_t n = ::send(fd_, line.data() + sent, line.size() - sent, 0);
      require(n > 0, "send failed");
      sent += static_cast<std::size_t>(n);
    }
  }
  std::string recv_line() {
    while (true) {
      const std::size_t newline = buffer_.find('\n');
      if (newline != std::string::npos) {
        std::string line = buffer_.substr(0, newline);
        buffer_.erase(0, newline + 1);
        return line;
      }
      char chunk[8192];
      const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
      require(n > 0, "connection closed or timed out mid-fuzz");
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 private:
  int fd_ = -1;
  std::string buffer_;
};

void criterion_fail_closed() {
  const auto& scene = testenv::default_scene();
  const auto& rules = testenv::default_rules();
  const auto corpus = fuzz_corpus();

  int unparsable = 0;
  for (const auto& source : corpus) {
    bool parses = true;
    try {
      dsl::parse(source);
    } catch (...) {
      parses = false;
    }
    analyzer::Verdict verdict;
    try {
      verdict = analyzer::analyze(source, scene, rules);
    } catch (...) {
      require(false, "analyze threw on a fuzz input");
    }
    if (!parses) {
      ++unparsable;
      require(verdict.label == SafetyLabel::Unsafe, "a non-parsing input was not UNSAFE");
      require(!verdict.violations.empty(), "a non-parsing input had no violation record");
    }
    require((verdict.label == SafetyLabel::Safe) == verdict.violations.empty(),
            "label/violations invariant broke on a fuzz input");
  }
  require(unparsable > 1000, "fuzz corpus unexpectedly tame; wanted >1000 non-parsing inputs");

  // The same corpus over the wire: every line gets exactly one reply and the
  // service survives. Newlines inside fuzz strings would split lines, so the
  // wire form strips them; invalid byte sequences are replaced on encode.
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "dronegate_acceptance_gate";
  fs::create_directories(dir);
  for (const char* name : {"scene.json", "drone_rules.kg", "rule_templates.txt"}) {
    fs::copy_file(testenv::data_path(name), dir / name, fs::copy_options::overwrite_existing);
  }
  {
    nlohmann::json config = {
        {"classifier", {{"kind", "static"}, {"use_kgp", false}}},
        {"scene_path", "scene.json"},
        {"kg_path", "drone_rules.kg"},
        {"templates_path", "rule_templates.txt"},
        {"listen_address", "127.0.0.1:0"},
        {"max_request_bytes", 65536},
    };
    std::ofstream out(dir / "gate_config.json");
    out << config.dump(2) << "\n";
  }
  gate::GateService service(gate::load_config(dir / "gate_config.json"));
  service.start();
  {
    RawClient client(service.port());
    const std::size_t window = 50;
    std::size_t next_to_send = 0;
    std::size_t answered = 0;
    while (answered < corpus.size()) {
      while (next_to_send < corpus.size() && next_to_send - answered < window) {
        std::string line = corpus[next_to_send];
        for (char& c : line) {
          if (c == '\n' || c == '\r') c = ' ';
        }
        if (next_to_send % 2 == 0) {
          // As a request object carrying the fuzz string as code.
          nlohmann::json request = {{"id", "f" + std::to_string(next_to_send)}, {"code", line}};
          client.send_line(request.dump(-1, ' ', false,
                                        nlohmann::json::error_handler_t::replace));
        } else {
          // As a raw protocol line.
          client.send_line(line);
        }
        ++next_to_send;
      }
      const std::string reply = client.recv_line();
      nlohmann::json doc;
      try {
        doc = nlohmann::json::parse(reply);
      } catch (...) {
        require(false, "service reply was not structured text");
      }
      require(doc.contains("error") || doc.contains("label"),
              "service reply carried neither a decision nor an error");
      ++answered;
    }
    // Still healthy afterwards.
    client.send_line(R"js({"id": "alive", "code": "aw.takeoff()"})js");
    const auto last = nlohmann::json::parse(client.recv_line());
    require(last.at("label") == "SAFE", "service did not survive the fuzz corpus");
  }
  service.stop();
  fs::remove_all(dir);
}

// ---------------------------------------------------------------------------
// 7. The rendered rule prompt matches its golden files byte for byte.
// ---------------------------------------------------------------------------
void criterion_prompt_golden() {
  const auto& templates = testenv::default_templates();
  const struct {
    const char* kg_file;
    const char* golden_file;
  } cases[] = {
      {"base_rules.kg", "golden/kgp_base.txt"},
      {"drone_rules.kg", "golden/kgp_default.txt"},
  };
  for (const auto& c : cases) {
    const auto kg = kg::parse_triples(testenv::slurp(testenv::data_path(c.kg_file)));
    const std::string rendered =
        kg::render_kgp(kg, templates, kg::default_preamble(), kg::default_epilogue());
    const std::string golden = testenv::slurp(testenv::data_path(c.golden_file));
    require(rendered == golden, std::string(c.golden_file) + " drifted from the renderer");

    // Each sentence appears exactly once, in source order.
    std::size_t previous = 0;
    for (std::size_t i = 0; i < kg.triples.size(); ++i) {
      const kg::PredicateTemplate* tpl = nullptr;
      for (const auto& t : templates) {
        if (t.predicate == kg.triples[i].predicate) tpl = &t;
      }
      require(tpl != nullptr, "missing template in golden check");
      const std::string sentence = kg::render_sentence(kg.triples[i], *tpl);
      const std::size_t first = rendered.find(sentence);
      require(first != std::string::npos, "sentence missing: " + sentence);
      require(rendered.find(sentence, first + 1) == std::string::npos,
              "sentence repeated: " + sentence);
      require(i == 0 || first > previous, "sentence out of order: " + sentence);
      previous = first;
    }
  }
}

// ---------------------------------------------------------------------------
// 8. A remote classifier that always answers SAFE cannot push unsafe code
// through the gate.
// ---------------------------------------------------------------------------
void criterion_override_resistance() {
  httplib::Server stub;
  int hits = 0;
  std::mutex mutex;
  stub.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    {
      std::lock_guard<std::mutex> lock(mutex);
      ++hits;
    }
    nlohmann::json reply = {
        {"choices", {{{"message", {{"role", "assistant"}, {"content", "SAFE"}}}}}}};
    res.set_content(reply.dump(), "application/json");
  });
  const int stub_port = stub.bind_to_any_port("127.0.0.1");
  require(stub_port > 0, "could not bind the stub reviewer");
  std::thread stub_thread([&] { stub.listen_after_bind(); });
  stub.wait_until_ready();

  gate::GateConfig config = gate::load_config(testenv::data_path("gate_config.json"));
  config.classifier.kind = classifier::ClassifierKind::Remote;
  config.classifier.endpoint = "http://127.0.0.1:" + std::to_string(stub_port);
  config.classifier.timeout_ms = 5000;
  config.classifier.use_kgp = true;
  config.listen_address = "127.0.0.1:0";

  gate::GateService service(config);
  service.start();
  {
    RawClient client(service.port());
    client.send_line(R"js({"id": "attack", "code": "aw.takeoff()\naw.fly_to([0, 0, 150])"})js");
    const auto decision = nlohmann::json::parse(client.recv_line());
    require(decision.at("label") == "UNSAFE",
            "an always-SAFE reviewer overrode the analyzer backstop");
    require(!decision.contains("flight_log"), "rejected code still produced a flight log");
    require(decision.at("classifier_label") == "SAFE",
            "the reviewer's answer should be recorded as SAFE");
    require(!decision.at("violations").empty(), "the altitude violation disappeared");

    client.send_line(R"js({"id": "benign", "code": "aw.takeoff()"})js");
    const auto approved = nlohmann::json::parse(client.recv_line());
    require(approved.at("label") == "SAFE", "benign code should pass");
    require(approved.contains("flight_log"), "approved code should carry its flight log");
  }
  service.stop();
  stub.stop();
  stub_thread.join();
  require(hits >= 2, "the remote reviewer was never consulted");
}

struct Criterion {
  int number;
  const char* title;
  double budget_seconds;
  std::function<void()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "reference metrics reproduced within 0.01 percentage points", 1.0, criterion_metrics},
      {2, "canonical snippets earn their golden labels", 1.0, criterion_golden_labels},
      {3, "benchmark dataset shape and static-classifier fixpoint", 5.0,
       criterion_dataset_fixpoint},
      {4, "scripted replay reproduces all four reference confusion rows", 5.0,
       criterion_mock_replay},
      {5, "closed-form geometry agrees with 1e6-point sampling on 1000 pairs", 60.0,
       criterion_geometry_oracle},
      {6, "fail-closed on 10000 fuzz inputs, in process and over the wire", 60.0,
       criterion_fail_closed},
      {7, "rendered rule prompt matches its golden files byte for byte", 1.0,
       criterion_prompt_golden},
      {8, "an always-approving remote reviewer cannot defeat the gate", 5.0,
       criterion_override_resistance},
  };

  int failures = 0;
  for (const auto& criterion : criteria) {
    const auto start = std::chrono::steady_clock::now();
    std::string failure;
    try {
      criterion.run();
    } catch (const std::exception& e) {
      failure = e.what();
    } catch (...) {
      failure = "unknown exception";
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (failure.empty() && elapsed > criterion.budget_seconds) {
      std::ostringstream over;
      over << "exceeded the " << criterion.budget_seconds << " s budget";
      failure = over.str();
    }
    if (failure.empty()) {
      std::printf("PASS  criterion %d: %s (%.2f s)\n", criterion.number, criterion.title,
                  elapsed);
    } else {
      ++failures;
      std::printf("FAIL  criterion %d: %s (%.2f s) — %s\n", criterion.number, criterion.title,
                  elapsed, failure.c_str());
    }
    std::fflush(stdout);
  }
  if (failures != 0) {
    std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  }
  return failures == 0 ? 0 : 1;
}
