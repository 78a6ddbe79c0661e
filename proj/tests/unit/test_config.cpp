#include <doctest.h>

#include "testutil.hpp"
#include "vitaudit/config.hpp"

using namespace vitaudit;
using namespace vitaudit::testing;

TEST_CASE("toml subset") {
  const auto t = ConfigTable::parse(R"(
# top comment
seed = 1_000   # trailing comment
name = "a # not a comment"
path = 'C:\raw\string'
ratio = 0.5
flag = true

[backend.text]
endpoint = "http://h:1/v1/chat/completions"
escaped = "tab\there \"q\""
)");
  CHECK(std::get<std::int64_t>(*t.find("seed")) == 1000);
  CHECK(std::get<std::string>(*t.find("name")) == "a # not a comment");
  CHECK(std::get<std::string>(*t.find("path")) == "C:\\raw\\string");
  CHECK(std::get<double>(*t.find("ratio")) == 0.5);
  CHECK(std::get<bool>(*t.find("flag")));
  CHECK(std::get<std::string>(*t.find("backend.text.escaped")) == "tab\there \"q\"");
  CHECK(t.find("missing") == nullptr);
}

TEST_CASE("toml errors") {
  CHECK_THROWS_AS(ConfigTable::parse("a = 1\na = 2"), ConfigError);
  CHECK_THROWS_AS(ConfigTable::parse("a = \"open"), ConfigError);
  CHECK_THROWS_AS(ConfigTable::parse("a = nope"), ConfigError);
  CHECK_THROWS_AS(ConfigTable::parse("[unclosed\na = 1"), ConfigError);
  CHECK_THROWS_AS(ConfigTable::parse("just text"), ConfigError);
  CHECK_THROWS_AS(ConfigTable::parse("a = "), ConfigError);
}

TEST_CASE("run config from a file") {
  TempDir dir("config");
  write_file(dir / "mock.json", "{}");
  write_file(dir / "run.toml", R"(
[run]
seed = 7
concurrency = 8
challenge_fraction = 0.5
weights = "vision-centric"
axes = "logic,vision"
mock_script = "mock.json"

[backend.text]
endpoint = "http://localhost:8000/v1/chat/completions"
model = "text-model"
max_retries = 5
timeout_ms = 3000

[backend.vision]
model = "vl-model"
temperature = 0.2
max_in_flight = 2
)");
  const auto c = RunConfig::load(dir / "run.toml");
  CHECK(c.seed == 7);
  CHECK(c.concurrency == 8);
  CHECK(c.challenge_fraction == 0.5);
  CHECK(c.weights == WeightScheme::vision_centric());
  CHECK(c.axes.to_string() == "logic,vision");
  CHECK(c.mock_script == dir / "mock.json");
  CHECK(c.text_backend.model_id == "text-model");
  CHECK(c.text_backend.max_retries == 5);
  CHECK(c.text_backend.timeout.count() == 3000);
  CHECK_FALSE(c.text_backend.vision);
  CHECK(c.vision_backend.vision);
  CHECK(c.vision_backend.temperature_override == 0.2);
  CHECK(c.vision_backend.max_in_flight == 2);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("run config rejects bad values") {
  RunConfig c;
  CHECK_THROWS_AS(c.apply(ConfigTable::parse("colour = 1")), ConfigError);
  CHECK_THROWS_AS(c.apply(ConfigTable::parse("seed = \"x\"")), ConfigError);
  CHECK_THROWS_AS(c.apply(ConfigTable::parse("seed = -1")), ConfigError);
  CHECK_THROWS_AS(c.apply(ConfigTable::parse("weights = \"1,1,1\"")), ConfigError);
  CHECK_THROWS_AS(c.apply(ConfigTable::parse("[backend.text]\nbogus = 1")), ConfigError);

  RunConfig f;
  f.challenge_fraction = 1.5;
  CHECK_THROWS_AS(f.validate(), ConfigError);
  RunConfig m;
  m.mock_script = "/nonexistent/mock.json";
  CHECK_THROWS_AS(m.validate(), ConfigError);
  RunConfig defaults;
  CHECK_NOTHROW(defaults.validate());
  CHECK(defaults.challenge_fraction == doctest::Approx(5.0 / 6.0));
}
