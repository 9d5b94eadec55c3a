#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <string>
#include <vector>

#include "dronegate/kg.hpp"
#include "support/test_env.hpp"

using namespace dronegate::kg;

TEST_CASE("parse_triples reads one parenthesized fact per line") {
  const KnowledgeGraph kg = parse_triples("(Drone, must_not_fly_higher_than, 120_meters)");
  REQUIRE(kg.triples.size() == 1);
  CHECK(kg.triples[0].subject == "Drone");
  CHECK(kg.triples[0].predicate == "must_not_fly_higher_than");
  CHECK(kg.triples[0].object == "120_meters");
}

TEST_CASE("parse_triples skips comments and blank lines and keeps source order") {
  const KnowledgeGraph kg = parse_triples(
      "# header comment\n"
      "\n"
      "(Drone, a, b)\n"
      "   \n"
      "(Drone, c, d)  # trailing comment\n");
  REQUIRE(kg.triples.size() == 2);
  CHECK(kg.triples[0].predicate == "a");
  CHECK(kg.triples[1].predicate == "c");
}

TEST_CASE("parse_triples of empty text yields an empty graph") {
  CHECK(parse_triples("").triples.empty());
}

TEST_CASE("parse_triples rejects a two-component line with its line number") {
  try {
    parse_triples("(Drone, must_not_hover_above)");
    FAIL("expected TripleFormatError");
  } catch (const TripleFormatError& e) {
    CHECK(e.line == 1);
  }
  try {
    parse_triples("# c\n\n(bad stuff here");
    FAIL("expected TripleFormatError");
  } catch (const TripleFormatError& e) {
    CHECK(e.line == 3);
  }
}

TEST_CASE("parse_triples rejects duplicate facts") {
  CHECK_THROWS_AS(parse_triples("(Drone, a, b)\n(Drone, a, b)"), DuplicateTripleError);
}

TEST_CASE("parse_templates reads predicate, sentence, and rule kind") {
  const auto templates = parse_templates(
      "must_not_fly_higher_than = A {subject} must not fly higher than {object}. | altitude_limit");
  REQUIRE(templates.size() == 1);
  CHECK(templates[0].predicate == "must_not_fly_higher_than");
  CHECK(templates[0].sentence_template == "A {subject} must not fly higher than {object}.");
  CHECK(templates[0].rule_kind == RuleKind::AltitudeLimit);
}

TEST_CASE("parse_templates rejects malformed lines") {
  CHECK_THROWS_AS(parse_templates("just words without equals"), TemplateFormatError);
  CHECK_THROWS_AS(parse_templates("p = A {subject} does {object}. | frobnicate"),
                  TemplateFormatError);
  // each placeholder must appear exactly once
  CHECK_THROWS_AS(parse_templates("p = A {subject} flies. | altitude_limit"),
                  TemplateFormatError);
  CHECK_THROWS_AS(parse_templates("p = {object} and {object} by {subject}. | context_flag"),
                  TemplateFormatError);
}

TEST_CASE("render_sentence substitutes components and expands underscores to spaces") {
  const Triple triple{"Drone", "must_not_fly_higher_than", "120_meters"};
  const PredicateTemplate tpl{"must_not_fly_higher_than",
                              "A {subject} must not fly higher than {object}.",
                              RuleKind::AltitudeLimit};
  CHECK(render_sentence(triple, tpl) == "A Drone must not fly higher than 120 meters.");
}

TEST_CASE("render_kgp of an empty graph is preamble, blank line, epilogue") {
  CHECK(render_kgp(KnowledgeGraph{}, {}, "PRE", "EPI") == "PRE\n\nEPI\n");
}

TEST_CASE("render_kgp reproduces the frozen prompt files byte for byte") {
  const auto& templates = testenv::default_templates();
  const KnowledgeGraph base = parse_triples(testenv::slurp(testenv::data_path("base_rules.kg")));
  CHECK(render_kgp(base, templates, default_preamble(), default_epilogue()) ==
        testenv::slurp(testenv::data_path("golden/kgp_base.txt")));
  const KnowledgeGraph full = parse_triples(testenv::slurp(testenv::data_path("drone_rules.kg")));
  CHECK(render_kgp(full, templates, default_preamble(), default_epilogue()) ==
        testenv::slurp(testenv::data_path("golden/kgp_default.txt")));
}

TEST_CASE("render_kgp contains every sentence exactly once, in triple order") {
  const auto& templates = testenv::default_templates();
  const KnowledgeGraph kg = parse_triples(testenv::slurp(testenv::data_path("drone_rules.kg")));
  const std::string prompt = render_kgp(kg, templates, default_preamble(), default_epilogue());
  std::size_t previous = 0;
  for (std::size_t i = 0; i < kg.triples.size(); ++i) {
    const PredicateTemplate* tpl = nullptr;
    for (const auto& t : templates) {
      if (t.predicate == kg.triples[i].predicate) tpl = &t;
    }
    REQUIRE(tpl != nullptr);
    const std::string sentence = render_sentence(kg.triples[i], *tpl);
    const std::size_t first = prompt.find(sentence);
    REQUIRE(first != std::string::npos);
    CHECK(prompt.find(sentence, first + 1) == std::string::npos);  // exactly once
    if (i > 0) CHECK(first > previous);                            // source order
    previous = first;
  }
}

TEST_CASE("render_kgp and compile_rules reject a predicate with no template") {
  const KnowledgeGraph kg = parse_triples("(Drone, mystery_predicate, thing)");
  try {
    compile_rules(kg, testenv::default_templates());
    FAIL("expected MissingTemplateError");
  } catch (const MissingTemplateError& e) {
    CHECK(e.predicate == "mystery_predicate");
  }
  CHECK_THROWS_AS(render_kgp(kg, testenv::default_templates(), "P", "E"), MissingTemplateError);
}

TEST_CASE("compile_rules turns the altitude fact into a 120 m limit") {
  const auto rules = testenv::default_rules();
  REQUIRE(!rules.rules.empty());
  const auto* limit = std::get_if<AltitudeLimit>(&rules.rules[0].node);
  REQUIRE(limit != nullptr);
  CHECK(limit->max_altitude_m == 120.0);
  CHECK(rules.rules[0].triple_index == 0);
  CHECK(rule_to_string(rules.rules[0]) == "altitude limit 120 m");
}

TEST_CASE("compile_rules compiles the default graph to one rule per triple, in order") {
  const auto& rules = testenv::default_rules();
  REQUIRE(rules.rules.size() == 6);
  CHECK(rules.source.triples.size() == 6);

  const auto* crowd_dist = std::get_if<MinDistance>(&rules.rules[1].node);
  REQUIRE(crowd_dist != nullptr);
  CHECK(crowd_dist->target_class == TargetClass::Crowd);
  CHECK(crowd_dist->min_m == 30.0);

  const auto* hover = std::get_if<NoHoverAbove>(&rules.rules[2].node);
  REQUIRE(hover != nullptr);
  CHECK(hover->target_class == TargetClass::Crowd);

  const auto* daytime = std::get_if<ContextFlag>(&rules.rules[3].node);
  REQUIRE(daytime != nullptr);
  CHECK(daytime->condition == Condition::Daytime);

  const auto* weather = std::get_if<ContextFlag>(&rules.rules[4].node);
  REQUIRE(weather != nullptr);
  CHECK(weather->condition == Condition::SafeWeather);

  const auto* object_dist = std::get_if<MinDistance>(&rules.rules[5].node);
  REQUIRE(object_dist != nullptr);
  CHECK(object_dist->target_class == TargetClass::Object);
  CHECK(object_dist->min_m == 30.0);

  for (std::size_t i = 0; i < rules.rules.size(); ++i) {
    CHECK(rules.rules[i].triple_index == i);
  }
}

TEST_CASE("every rule is evaluable except context flags, and counts add up") {
  const auto& rules = testenv::default_rules();
  int evaluable = 0;
  int context = 0;
  for (const auto& rule : rules.rules) {
    (is_evaluable(rule) ? evaluable : context)++;
    CHECK(is_evaluable(rule) == !std::holds_alternative<ContextFlag>(rule.node));
  }
  CHECK(evaluable == 4);
  CHECK(context == 2);
  CHECK(evaluable + context == static_cast<int>(rules.source.triples.size()));
}

TEST_CASE("distance rules read the threshold and the target class from the object token") {
  const auto templates =
      parse_templates("must_maintain_distance_from = A {subject} keeps {object}. | min_distance_crowd");
  const auto rules = compile_rules(
      parse_triples("(Drone, must_maintain_distance_from, people_25_meters)\n"
                    "(Drone, must_maintain_distance_from, Objects_12_meters)"),
      templates);
  REQUIRE(rules.rules.size() == 2);
  const auto* people = std::get_if<MinDistance>(&rules.rules[0].node);
  REQUIRE(people != nullptr);
  CHECK(people->target_class == TargetClass::Crowd);
  CHECK(people->min_m == 25.0);
  CHECK(rule_to_string(rules.rules[0]) == "min distance 25 m to crowd");
  const auto* objects = std::get_if<MinDistance>(&rules.rules[1].node);
  REQUIRE(objects != nullptr);
  CHECK(objects->target_class == TargetClass::Object);
  CHECK(objects->min_m == 12.0);
}

TEST_CASE("a quantity rule whose object has no number is rejected") {
  const auto templates =
      parse_templates("must_not_fly_higher_than = A {subject} caps at {object}. | altitude_limit");
  CHECK_THROWS_AS(
      compile_rules(parse_triples("(Drone, must_not_fly_higher_than, very_high)"), templates),
      UnparsableQuantityError);
}

TEST_CASE("changing one fact changes exactly one sentence and one rule") {
  const auto& templates = testenv::default_templates();
  const std::string original_text = testenv::slurp(testenv::data_path("drone_rules.kg"));
  std::string modified_text = original_text;
  const std::size_t at = modified_text.find("120_meters");
  REQUIRE(at != std::string::npos);
  modified_text.replace(at, 3, "100");  // 120_meters -> 100_meters

  const KnowledgeGraph original = parse_triples(original_text);
  const KnowledgeGraph modified = parse_triples(modified_text);
  const std::string prompt_a = render_kgp(original, templates, "P", "E");
  const std::string prompt_b = render_kgp(modified, templates, "P", "E");
  CHECK(prompt_a != prompt_b);
  CHECK(prompt_b.find("100 meters") != std::string::npos);
  CHECK(prompt_b.find("120 meters") == std::string::npos);

  const RuleSet rules_a = compile_rules(original, templates);
  const RuleSet rules_b = compile_rules(modified, templates);
  REQUIRE(rules_a.rules.size() == rules_b.rules.size());
  int differing = 0;
  for (std::size_t i = 0; i < rules_a.rules.size(); ++i) {
    if (!(rules_a.rules[i] == rules_b.rules[i])) ++differing;
  }
  CHECK(differing == 1);
  const auto* limit = std::get_if<AltitudeLimit>(&rules_b.rules[0].node);
  REQUIRE(limit != nullptr);
  CHECK(limit->max_altitude_m == 100.0);
}
