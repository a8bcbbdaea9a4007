// Copyright 2026 The lqsid Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "lqsid/cli.hpp"
#include "lqsid/io.hpp"
#include "lqsid/moments.hpp"
#include "lqsid/solver.hpp"

namespace lqsid {
namespace {

namespace fs = std::filesystem;

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun lqsid(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("lqsid_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  // Quick search setup and a two-subject synthetic cohort.
  nlohmann::json base_config() const {
    const CompareConfig quick = fixture::quick_compare_config();
    nlohmann::json sessions = fixture::session_config(6);
    sessions["params"] = fixture::truth_params();
    return {{"schema_version", 1},
            {"out", "out"},
            {"manifest", "out/simulate/manifest.json"},
            {"seed", 7},
            {"jobs", 1},
            {"isoc", quick.isoc},
            {"simulate", {{"kind", "sessions"}, {"subjects", 2}, {"sessions", sessions}}}};
  }

  fs::path write_config(const nlohmann::json& j, const std::string& name = "run.json") {
    const fs::path p = dir_ / name;
    write_json(p, j);
    return p;
  }

  fs::path dir_;
};

TEST_F(CliTest, HelpAndUsageErrors) {
  EXPECT_EQ(lqsid({"--help"}).code, kExitOk);
  EXPECT_EQ(lqsid({}).code, kExitUsage);
  EXPECT_EQ(lqsid({"fit"}).code, kExitUsage);
  const fs::path cfg = write_config(base_config());
  EXPECT_EQ(lqsid({"prep"}).code, kExitUsage);
  EXPECT_EQ(lqsid({"prep", "--config", cfg.string(), "--bogus"}).code, kExitUsage);
  EXPECT_EQ(lqsid({"simulate", "--config", cfg.string(), "--model", "lqr"}).code,
            kExitUsage);
  EXPECT_EQ(lqsid({"simulate", "--config", cfg.string(), "--jobs", "-1"}).code,
            kExitUsage);
  EXPECT_EQ(lqsid({"prep", "--config", (dir_ / "missing.json").string()}).code,
            kExitUsage);
}

TEST_F(CliTest, ConfigErrorsExitWithUsageCode) {
  nlohmann::json j = base_config();
  j.erase("schema_version");
  EXPECT_EQ(lqsid({"prep", "--config", write_config(j).string()}).code, kExitUsage);
  j["schema_version"] = 9;
  EXPECT_EQ(lqsid({"prep", "--config", write_config(j).string()}).code, kExitUsage);

  j = base_config();
  j["weights"]["lq"]["cost"] = {{"w_m", {0.9, 0.9}}, {"w_v", {0.1, 0.0}}};
  EXPECT_EQ(lqsid({"compare", "--config", write_config(j).string()}).code, kExitUsage);

  j = base_config();
  j["simulate"] = {{"kind", "rollout"}, {"trials", 0}};
  EXPECT_EQ(lqsid({"simulate", "--config", write_config(j).string()}).code, kExitUsage);

  std::ofstream(dir_ / "broken.json") << "{\"schema_version\": 1,";
  EXPECT_EQ(lqsid({"prep", "--config", (dir_ / "broken.json").string()}).code,
            kExitUsage);
}

TEST_F(CliTest, MissingInputsExitWithUsageCode) {
  const fs::path cfg = write_config(base_config());
  const CliRun prep = lqsid({"prep", "--config", cfg.string()});
  EXPECT_EQ(prep.code, kExitUsage);
  EXPECT_NE(prep.err.find("manifest"), std::string::npos);
  EXPECT_EQ(lqsid({"compare", "--config", cfg.string()}).code, kExitUsage);
  EXPECT_EQ(lqsid({"report", "--config", cfg.string()}).code, kExitUsage);

  fs::create_directories(dir_ / "empty");
  write_json(dir_ / "empty" / "manifest.json", {{"schema_version", 1}, {"subjects", nlohmann::json::array()}});
  nlohmann::json j = base_config();
  j["manifest"] = "empty/manifest.json";
  EXPECT_EQ(lqsid({"prep", "--config", write_config(j).string()}).code, kExitUsage);
}

TEST_F(CliTest, RolloutSimulationIsSeededAndMatchesModelMoments) {
  nlohmann::json j = base_config();
  j["simulate"] = {{"kind", "rollout"},
                   {"trials", 4000},
                   {"N", 40},
                   {"params", fixture::truth_params()},
                   {"x0_var", {1e-4, 1e-3}}};
  const fs::path cfg = write_config(j);
  ASSERT_EQ(lqsid({"simulate", "--config", cfg.string(), "--out",
                   (dir_ / "a").string()}).code, kExitOk);
  ASSERT_EQ(lqsid({"simulate", "--config", cfg.string(), "--out",
                   (dir_ / "b").string(), "--jobs", "2"}).code, kExitOk);
  EXPECT_EQ(slurp(dir_ / "a/simulate/moments.csv"), slurp(dir_ / "b/simulate/moments.csv"));
  ASSERT_EQ(lqsid({"simulate", "--config", cfg.string(), "--out",
                   (dir_ / "c").string(), "--seed", "8"}).code, kExitOk);
  EXPECT_NE(slurp(dir_ / "a/simulate/moments.csv"), slurp(dir_ / "c/simulate/moments.csv"));

  const CsvTable t = read_csv(dir_ / "a/simulate/moments.csv");
  ASSERT_EQ(t.rows.size(), 41u);
  for (const auto& row : t.rows) {
    // Sample mean within 5 standard errors of the model mean.
    for (int k = 0; k < 2; ++k) {
      const double se = std::sqrt(row[3 + k] / 4000.0) + 1e-9;
      EXPECT_LT(std::abs(row[5 + k] - row[1 + k]), 5.0 * se);
    }
  }
}

TEST_F(CliTest, PrepCompareReportPipeline) {
  const fs::path cfg = write_config(base_config());
  const CliRun sim = lqsid({"simulate", "--config", cfg.string()});
  ASSERT_EQ(sim.code, kExitOk) << sim.err;
  ASSERT_TRUE(fs::exists(dir_ / "out/simulate/manifest.json"));

  const CliRun prep = lqsid({"prep", "--config", cfg.string()});
  ASSERT_EQ(prep.code, kExitOk) << prep.err;
  for (const char* f : {"S01_train.json", "S01_validation.json", "S02_train.json",
                        "S02_validation.json", "index.json"}) {
    EXPECT_TRUE(fs::exists(dir_ / "out/ensembles" / f)) << f;
  }
  const std::string first = slurp(dir_ / "out/ensembles/S02_validation.json");
  ASSERT_EQ(lqsid({"prep", "--config", cfg.string()}).code, kExitOk);
  EXPECT_EQ(slurp(dir_ / "out/ensembles/S02_validation.json"), first);

  const std::vector<SubjectEnsembles> ens =
      load_ensembles(dir_ / "out/ensembles/index.json");
  ASSERT_EQ(ens.size(), 2u);
  EXPECT_EQ(ens[0].train.trials.size(), 6u);
  EXPECT_EQ(ens[0].validation.trials.size(), 6u);

  const CliRun ident = lqsid({"identify", "--config", cfg.string(), "--model", "lqg"});
  ASSERT_EQ(ident.code, kExitOk) << ident.err;
  const nlohmann::json fit = read_json(dir_ / "out/identify/lqg/S01.json");
  EXPECT_EQ(fit.at("model"), "lqg");
  EXPECT_EQ(fit.at("chain").size(), 2u);

  const CliRun cmp = lqsid({"compare", "--config", cfg.string()});
  ASSERT_EQ(cmp.code, kExitOk) << cmp.err;
  const ComparisonReport rep = read_report(dir_ / "out/compare");
  for (const char* id : {"S01", "S02"}) {
    EXPECT_NEAR(rep.row(id, ModelKind::kLq, "validation").vaf.mean_phi,
                rep.row(id, ModelKind::kLqg, "validation").vaf.mean_phi, 1e-9);
  }
  const std::string table = slurp(dir_ / "out/compare/vaf_table.csv");
  fs::remove(dir_ / "out/compare/vaf_table.csv");
  const CliRun report = lqsid({"report", "--config", cfg.string()});
  ASSERT_EQ(report.code, kExitOk) << report.err;
  EXPECT_EQ(slurp(dir_ / "out/compare/vaf_table.csv"), table);
}

}  // namespace
}  // namespace lqsid
