// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <httplib.h>

#include <random>

#include "lift/errors.hpp"
#include "lift/scripted_generator.hpp"
#include "lift/taskgen.hpp"
#include "support.hpp"

using namespace lift;

namespace {

const std::string kGoldenDir = LIFT_GOLDEN_DIR;

// The fixed unit every golden file was rendered from.
SentenceUnit golden_unit() {
  return SentenceUnit{"golden", 2, " A lighthouse keeper named Ada logged 42 vessels on 3 March.",
                      "The harbor was quiet that morning. Ships waited offshore."};
}

std::string payload(int n, const std::string& prefix = "Q") {
  json list = json::array();
  for (int i = 0; i < n; ++i) {
    list.push_back({{"question", prefix + std::to_string(i) + "?"}, {"answer", "A" + std::to_string(i)}});
  }
  return json{{"qa_list", list}}.dump();
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Validation;
}

}  // namespace

TEST_CASE("rendered prompts match the golden files") {
  for (auto [kind, name] : {std::pair{PromptKind::squad, "squad"}, std::pair{PromptKind::niah, "niah"},
                            std::pair{PromptKind::generic, "generic"}}) {
    CAPTURE(name);
    GenerationConfig cfg;
    cfg.prompt_kind = kind;
    cfg.qas_per_sentence = 5;
    const auto p = render_prompt(golden_unit(), cfg);
    CHECK(p.system == test::read_file(kGoldenDir + "/" + name + "_system.txt"));
    CHECK(p.user == test::read_file(kGoldenDir + "/" + name + "_user.txt"));
    const auto msgs = p.messages();
    REQUIRE(msgs.size() == 2);
    CHECK(msgs[0].role == "system");
    CHECK(msgs[1].role == "user");
  }
}

TEST_CASE("prompt kinds differ in their example blocks") {
  GenerationConfig cfg;
  cfg.qas_per_sentence = 10;
  cfg.prompt_kind = PromptKind::niah;
  auto p = render_prompt(golden_unit(), cfg);
  CHECK(p.user.ends_with(
      "Generate 10 different questions based on the content of the last part of the paragraph."));
  CHECK(p.system.find("Dolores") == std::string::npos);
  CHECK(p.system.find("Portland") != std::string::npos);

  cfg.prompt_kind = PromptKind::squad;
  p = render_prompt(golden_unit(), cfg);
  CHECK(p.system.find("Survivor Foundation") != std::string::npos);
  CHECK(p.system.find("Montana") != std::string::npos);

  cfg.prompt_kind = PromptKind::generic;
  p = render_prompt(golden_unit(), cfg);
  CHECK(p.system.find("Example") == std::string::npos);
  CHECK(p.system.find("at most 10 different questions") != std::string::npos);
}

TEST_CASE("prompt hash tracks the rendered messages") {
  GenerationConfig cfg;
  const auto a = render_prompt(golden_unit(), cfg);
  CHECK(a.digest() == render_prompt(golden_unit(), cfg).digest());
  CHECK(a.digest().size() == 64);
  cfg.qas_per_sentence = 6;
  CHECK(a.digest() != render_prompt(golden_unit(), cfg).digest());
}

TEST_CASE("substitute is single pass") {
  CHECK(substitute("{a}{b}", {{"a", "{b}"}, {"b", "x"}}) == "{b}x");
  CHECK(substitute("{\"k\": {a}}", {{"a", "1"}}) == "{\"k\": 1}");
  CHECK(substitute("{", {}) == "{");
}

TEST_CASE("parse_qa_response") {
  using V = std::vector<QAText>;
  CHECK(parse_qa_response(R"({"qa_list":[{"question":"Q","answer":"A"}]})", 5) == V{{"Q", "A"}});
  CHECK(kind_of([] { parse_qa_response(R"({"qa_list":[]})", 5); }) == ErrorKind::EmptyList);
  CHECK(kind_of([] { parse_qa_response("not json", 5); }) == ErrorKind::MalformedResponse);
  CHECK(kind_of([] { parse_qa_response(R"({"qa":[]})", 5); }) == ErrorKind::MalformedResponse);
  CHECK(kind_of([] { parse_qa_response(R"({"qa_list":[{"question":"","answer":"A"}]})", 5); }) ==
        ErrorKind::MalformedResponse);
  // truncation to m and trimming
  CHECK(parse_qa_response(payload(7), 3).size() == 3);
  CHECK(parse_qa_response(R"({"qa_list":[{"question":"  Q ","answer":"\tA\n"}]})", 1) ==
        V{{"Q", "A"}});
  // an earlier unrelated object is skipped
  CHECK(parse_qa_response(R"(note {"x": 1} then {"qa_list":[{"question":"Q","answer":"A"}]})", 2)
            .size() == 1);
}

TEST_CASE("parse_qa_response fuzz over decorations") {
  std::mt19937_64 rng(5);
  const std::vector<std::pair<std::string, std::string>> wrappers = {
      {"", ""},
      {"```json\n", "\n```"},
      {"```\n", "\n```"},
      {"  \n", "\n\n "},
      {"Here are the pairs:\n", "\nHope this helps."},
      {"```json\n", "\n```\n"},
      {"Sure! {not json} ", ""},
  };
  for (int round = 0; round < 300; ++round) {
    const int n = 1 + static_cast<int>(rng() % 12);
    const int m = 1 + static_cast<int>(rng() % 10);
    const auto& [pre, post] = wrappers[rng() % wrappers.size()];
    json list = json::array();
    for (int i = 0; i < n; ++i) {
      list.push_back({{"question", "what {is} \"" + std::to_string(rng() % 100) + "\"?"},
                      {"answer", "ans}" + std::to_string(i)}});
    }
    const auto body = json{{"qa_list", list}}.dump(rng() % 2 ? 2 : -1);
    const auto pairs = parse_qa_response(pre + body + post, m);
    REQUIRE(pairs.size() == static_cast<std::size_t>(std::min(n, m)));
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      CHECK(pairs[i].first == list[i]["question"].get<std::string>());
      CHECK(pairs[i].second == list[i]["answer"].get<std::string>());
    }
  }
}

TEST_CASE("generate_for_sentence retry semantics") {
  const auto unit = golden_unit();
  auto cfg = test::scripted_gen(5);

  SUBCASE("healthy endpoint") {
    test::FnChatClient client([](const ChatRequest&, int) { return payload(5); });
    const auto out = generate_for_sentence(unit, cfg, client);
    CHECK(out.status == OutcomeStatus::ok);
    CHECK(out.attempts == 1);
    REQUIRE(out.pairs.size() == 5);
    for (int i = 0; i < 5; ++i) {
      CHECK(out.pairs[i].qa_index == i);
      CHECK(out.pairs[i].sentence_index == 2);
      CHECK(out.pairs[i].doc_id == "golden");
      CHECK(out.pairs[i].generator_model == "scripted");
      CHECK(out.pairs[i].prompt_hash == render_prompt(unit, cfg).digest());
    }
  }
  SUBCASE("fails twice then succeeds") {
    cfg.max_retries = 3;
    test::FnChatClient client([](const ChatRequest&, int call) -> std::string {
      if (call < 2) throw Error(ErrorKind::Transport, "connection refused");
      return payload(5);
    });
    const auto out = generate_for_sentence(unit, cfg, client);
    CHECK(out.status == OutcomeStatus::ok);
    CHECK(out.attempts == 3);
  }
  SUBCASE("always malformed") {
    cfg.max_retries = 2;
    test::FnChatClient client([](const ChatRequest&, int) { return std::string("garbage"); });
    const auto out = generate_for_sentence(unit, cfg, client);
    CHECK(out.status == OutcomeStatus::skipped);
    CHECK(out.attempts == 3);
    CHECK(out.pairs.empty());
    CHECK(client.calls() == 3);
    CHECK(out.last_error.find("MalformedResponse") != std::string::npos);
  }
  SUBCASE("partial") {
    test::FnChatClient client([](const ChatRequest&, int) { return payload(2); });
    const auto out = generate_for_sentence(unit, cfg, client);
    CHECK(out.status == OutcomeStatus::partial);
    CHECK(out.pairs.size() == 2);
  }
  SUBCASE("empty list is final") {
    test::FnChatClient client([](const ChatRequest&, int) { return std::string(R"({"qa_list":[]})"); });
    const auto out = generate_for_sentence(unit, cfg, client);
    CHECK(out.status == OutcomeStatus::skipped);
    CHECK(client.calls() == 1);
  }
  SUBCASE("request carries the rendered prompt and sampling") {
    cfg.sampling.temperature = 0.3;
    cfg.sampling.max_output_tokens = 77;
    ChatRequest seen;
    test::FnChatClient client([&](const ChatRequest& r, int) {
      seen = r;
      return payload(1);
    });
    (void)generate_for_sentence(unit, cfg, client);
    CHECK(seen.model == "scripted");
    CHECK(seen.temperature == 0.3);
    CHECK(seen.max_tokens == 77);
    CHECK(seen.messages == render_prompt(unit, cfg).messages());
  }
  SUBCASE("config errors propagate") {
    cfg.qas_per_sentence = 0;
    test::FnChatClient client([](const ChatRequest&, int) { return payload(1); });
    CHECK_THROWS_AS(generate_for_sentence(unit, cfg, client), ValidationError);
  }
}

TEST_CASE("scripted generator echoes the target sentence") {
  ScriptedChatClient client;
  auto cfg = test::scripted_gen(3);
  const auto out = generate_for_sentence(golden_unit(), cfg, client);
  REQUIRE(out.status == OutcomeStatus::ok);
  for (const auto& p : out.pairs) {
    CHECK(p.answer == "A lighthouse keeper named Ada logged 42 vessels on 3 March.");
  }
  const auto parsed = parse_user_message(render_prompt(golden_unit(), cfg).user);
  CHECK(parsed.num_questions == 3);
  CHECK(parsed.target_sentence == "A lighthouse keeper named Ada logged 42 vessels on 3 March.");

  const auto opts = ScriptedChatClient::parse_url("scripted://echo?latency_ms=5&focus=Dolores%20Park");
  CHECK(opts.latency == std::chrono::milliseconds(5));
  CHECK(opts.focus == "Dolores Park");
  ScriptedChatClient focused(opts);
  CHECK(kind_of([&] {
          parse_qa_response(focused.complete({"m", render_prompt(golden_unit(), cfg).messages()}), 3);
        }) == ErrorKind::EmptyList);
}

TEST_CASE("cost model arithmetic") {
  CHECK(estimate_training_cost({5, 100}, true) == 50000);
  CHECK(estimate_training_cost({5, 100}, false) == 250000);
  CHECK(estimate_training_cost({1, 7}, true) == estimate_training_cost({1, 7}, false));
  std::mt19937_64 rng(9);
  for (int i = 0; i < 200; ++i) {
    const CostModel c{1 + static_cast<std::int64_t>(rng() % 64),
                      1 + static_cast<std::int64_t>(rng() % 4096)};
    const auto split = estimate_training_cost(c, true);
    const auto whole = estimate_training_cost(c, false);
    CHECK(split * static_cast<std::uint64_t>(c.qa_count) == whole);
    CHECK(split <= whole);
    CHECK((split == whole) == (c.qa_count == 1));
  }
  CHECK_THROWS_AS(estimate_training_cost({0, 1}, true), ValidationError);
}

TEST_CASE("http chat client wire format") {
  httplib::Server server;
  std::string seen_auth;
  json seen_body;
  int status = 200;
  std::string reply = json{{"choices", {{{"message", {{"role", "assistant"}, {"content", "hi"}}}}}}}.dump();
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    seen_auth = req.get_header_value("Authorization");
    seen_body = json::parse(req.body);
    res.status = status;
    res.set_content(reply, "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  const std::string url = "http://127.0.0.1:" + std::to_string(port);
  HttpChatClient client(url, "sekret", std::chrono::seconds(5));
  ChatRequest req{"gen-model", {{"system", "S"}, {"user", "U"}}, 0.5, 99};
  CHECK(client.complete(req) == "hi");
  CHECK(seen_auth == "Bearer sekret");
  CHECK(seen_body["model"] == "gen-model");
  CHECK(seen_body["temperature"] == 0.5);
  CHECK(seen_body["max_tokens"] == 99);
  CHECK(seen_body["messages"][1]["content"] == "U");

  status = 503;
  CHECK(kind_of([&] { client.complete(req); }) == ErrorKind::Transport);
  status = 200;
  reply = R"({"choices": []})";
  CHECK(kind_of([&] { client.complete(req); }) == ErrorKind::MalformedResponse);

  server.stop();
  th.join();
  CHECK(kind_of([&] { client.complete(req); }) == ErrorKind::Transport);
}
