#include <doctest.h>

#include <deque>
#include <mutex>

#include "examples.hpp"
#include "vitaudit/decompose.hpp"
#include "vitaudit/prompts.hpp"

using namespace vitaudit;
using namespace vitaudit::testing;

namespace {

/// Replies from a fixed queue; records every prompt it sees.
struct Queue {
  std::deque<std::string> replies;
  std::vector<std::string> prompts;

  MockBackend::Responder responder() {
    return [this](std::span<const ChatMessage> m) {
      prompts.push_back(m.back().text);
      if (replies.empty()) throw std::runtime_error("queue exhausted");
      auto r = replies.front();
      replies.pop_front();
      return r;
    };
  }
};

Sample sample(std::string response) { return Sample{"x", "img.png", "Describe the image.", std::move(response), {}}; }

}  // namespace

TEST_CASE("three steps on the stamp example") {
  Queue q{{examples::kStampMarked, "Cleaned Response: This is a 1976 postage stamp.",
           "Visual Summary: A 1976 postage stamp."},
          {}};
  MockBackend b(q.responder());
  const auto d = decompose(sample(examples::kStampInput), b);
  CHECK(d.attempts == StepAttempts{1, 1, 1});
  CHECK(d.draft == "This is a 1976 postage stamp.");
  CHECK(d.visual_summary == "A 1976 postage stamp.");
  CHECK_FALSE(d.tagging_fallback);
  CHECK(serialize(d.annotated) == strip_required_prefix(examples::kStampMarked, kMarkedResponsePrefix));
  REQUIRE(q.prompts.size() == 3);
  CHECK(q.prompts[0] == prompts::render(prompts::kSemanticTagging, {{"response", examples::kStampInput}}));
  CHECK(q.prompts[1].find("<KNOW>a country in Central Europe</KNOW>") != std::string::npos);
  CHECK(q.prompts[2].find("This is a 1976 postage stamp.") != std::string::npos);
  CHECK(b.calls() == 3);
}

TEST_CASE("untagged response skips distillation") {
  Queue q{{examples::kCanMarked, "Visual Summary: A red can of Coca-Cola."}, {}};
  MockBackend b(q.responder());
  const auto d = decompose(sample(examples::kCanInput), b);
  CHECK(d.attempts == StepAttempts{1, 0, 1});
  CHECK(d.draft == examples::kCanInput);
  CHECK(d.raw_distillation.empty());
}

TEST_CASE("tagging retries then falls back") {
  SUBCASE("altered words") {
    Queue q{{"Marked Response: The image shows a bottle of Coca-Cola.",
             "Marked Response: The image shows <INFER>a can of Coca-Cola.",
             "The image shows a can of Coca-Cola.", "Visual Summary: s"},
            {}};
    MockBackend b(q.responder());
    const auto d = decompose(sample(examples::kCanInput), b);
    CHECK(d.tagging_fallback);
    CHECK(d.attempts.tagging == 3);
    CHECK(d.annotated == AnnotatedResponse::plain(examples::kCanInput));
    REQUIRE_FALSE(d.warnings.empty());
    CHECK(d.warnings[0].find("start with") != std::string::npos);
  }
  SUBCASE("second attempt accepted") {
    Queue q{{"Marked Response: changed words.", examples::kCanMarked}, {}};
    MockBackend b(q.responder());
    const auto t = semantic_tagging(sample(examples::kCanInput), b);
    CHECK_FALSE(t.fallback);
    CHECK(t.attempts == 2);
    REQUIRE(t.rejections.size() == 1);
    CHECK(t.rejections[0].find("token 0") != std::string::npos);
  }
}

TEST_CASE("distillation rejects residual tags") {
  const auto a = parse_annotated("A stamp, <KNOW>from Hungary</KNOW>.");
  Queue q{{"Cleaned Response: A stamp, <KNOW>from Hungary</KNOW>.", "Cleaned Response: still <INFER>x</INFER>",
           "Cleaned Response: </KNOW>"},
          {}};
  MockBackend b(q.responder());
  try {
    visual_distillation(sample("A stamp, from Hungary."), a, b);
    FAIL("expected StepError");
  } catch (const StepError& e) {
    CHECK(e.step() == kStepDistillation);
    CHECK(e.attempts() == 3);
  }
}

TEST_CASE("distillation warns when untagged text is dropped") {
  const auto a = parse_annotated("A stamp on a table, <KNOW>from Hungary</KNOW>.");
  Queue q{{"Cleaned Response: A stamp."}, {}};
  MockBackend b(q.responder());
  const auto r = visual_distillation(sample("A stamp on a table, from Hungary."), a, b);
  CHECK(r.draft == "A stamp.");
  REQUIRE(r.warnings.size() == 1);
  CHECK(r.warnings[0].find("\"A stamp on a table\"") != std::string::npos);
}

TEST_CASE("synthesis") {
  SUBCASE("empty draft makes no call") {
    Queue q;
    MockBackend b(q.responder());
    const auto r = fluent_synthesis(sample("x"), "  ", b);
    CHECK(r.summary.empty());
    CHECK(r.attempts == 0);
    CHECK(b.calls() == 0);
  }
  SUBCASE("empty output fails after retries") {
    Queue q{{"Visual Summary:", "Visual Summary:   ", "nothing"}, {}};
    MockBackend b(q.responder());
    CHECK_THROWS_AS(fluent_synthesis(sample("x"), "draft", b), StepError);
    CHECK(b.calls() == 3);
  }
}

TEST_CASE("backend failures name the step") {
  int n = 0;
  MockBackend b([&](std::span<const ChatMessage>) -> std::string {
    if (++n == 1) return examples::kStampMarked;
    throw BackendError(BackendError::Kind::Timeout, "slow", 4);
  });
  try {
    decompose(sample(examples::kStampInput), b);
    FAIL("expected StepError");
  } catch (const StepError& e) {
    CHECK(e.step() == kStepDistillation);
    CHECK(e.attempts() == 4);
    CHECK(e.cause().find("slow") != std::string::npos);
  }
}

TEST_CASE("persisted form round trips") {
  Queue q{{examples::kLightingMarked, "Cleaned Response: The lighting in the room is soft.",
           "Visual Summary: Soft light fills the room."},
          {}};
  MockBackend b(q.responder());
  const auto d = decompose(sample(examples::kLightingInput), b);
  const auto back = decomposed_from_json(nlohmann::json::parse(to_json(d).dump()));
  CHECK(back.annotated == d.annotated);
  CHECK(back.draft == d.draft);
  CHECK(back.visual_summary == d.visual_summary);
  CHECK(back.attempts == d.attempts);
  CHECK(back.warnings == d.warnings);
}
