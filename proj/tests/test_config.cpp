#include "doctest.h"
#include "qcseis/config.hpp"

#include <cstdlib>

using namespace qcseis;

namespace {

json base() {
  return json::parse(R"({"data": {"task": "denoise", "height": 32, "width": 32, "n_patches": 20},
                         "train": {"epochs": 2}})");
}

}  // namespace

TEST_CASE("defaults are materialized in the resolved document") {
  const auto cfg = run_config_from_json(base());
  CHECK(cfg.family() == Family::Gan);
  CHECK(cfg.model.kind == NetKind::Generator);
  CHECK(cfg.model.height == 32);
  CHECK(cfg.train.resolved_lr(Family::Gan) == doctest::Approx(1e-5));
  const json out = run_config_to_json(cfg);
  CHECK(out.at("train").at("batch_size") == 16);
  CHECK(out.at("model").at("blocks").is_number());
  CHECK(out.at("data").at("dx").is_number());
  // The resolved document parses back to the same config.
  const auto again = run_config_from_json(out);
  CHECK(run_config_to_json(again) == out);
}

TEST_CASE("unknown keys are rejected with their path") {
  for (const char* section : {"data", "model", "train", "eval"}) {
    json j = base();
    j[section]["bogus_key"] = 1;
    try {
      run_config_from_json(j);
      FAIL("accepted an unknown key in " << section);
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("bogus_key") != std::string::npos);
    }
  }
  json top = base();
  top["extra"] = true;
  CHECK_THROWS_AS(run_config_from_json(top), ConfigError);
}

TEST_CASE("the model kind follows the task") {
  json j = base();
  j["data"]["task"] = "lfe";
  CHECK(run_config_from_json(j).model.kind == NetKind::UNet);
  j["model"]["kind"] = "generator";
  CHECK_THROWS_AS(run_config_from_json(j), ConfigError);
  j = base();
  j["model"]["height"] = 64;
  CHECK_THROWS_AS(run_config_from_json(j), ConfigError);
  j = base();
  j["data"]["n_patches"] = 3;
  CHECK_THROWS_AS(run_config_from_json(j), ConfigError);
}

TEST_CASE("QCSEIS_SEED replaces every seed") {
  auto cfg = run_config_from_json(base());
  ::unsetenv("QCSEIS_SEED");
  CHECK_FALSE(apply_seed_override(cfg));
  ::setenv("QCSEIS_SEED", "42", 1);
  CHECK(apply_seed_override(cfg));
  CHECK(cfg.data.degradation.seed == 42);
  CHECK(cfg.model.seed == 42);
  CHECK(cfg.model.qlayer.seed == 42);
  CHECK(cfg.train.seed == 42);
  ::setenv("QCSEIS_SEED", "12abc", 1);
  CHECK_THROWS_AS(apply_seed_override(cfg), ConfigError);
  ::unsetenv("QCSEIS_SEED");
}
