#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <fstream>

#include "dgtta/error.hpp"
#include "dgtta/io.hpp"
#include "dgtta/kvdoc.hpp"
#include "dgtta/manifest.hpp"
#include "dgtta/report.hpp"
#include "dgtta/ssc.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace dgtta;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + DGTTA_CLI + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

const fs::path kSmoke = fs::path(DGTTA_TEST_DATA).parent_path().parent_path() / "configs" / "smoke.cfg";

}  // namespace

TEST(Cli, UsageAndConfigErrorsExitTwo) {
  testutil::TempDir dir("cli_cfg");
  EXPECT_EQ(run_cli("--help"), 0);
  EXPECT_EQ(run_cli("no-such-command"), 2);
  std::ofstream(dir / "bad.cfg") << "[tta]\nnum_stepz = 3\n";
  EXPECT_EQ(run_cli("synth-gen --config " + q(dir / "bad.cfg") + " --out " + q(dir / "d")), 2);
  EXPECT_EQ(run_cli("--device gpu synth-gen --out " + q(dir / "d")), 2);
  EXPECT_FALSE(fs::exists(dir / "d"));
}

TEST(Cli, MissingDataExitsThree) {
  testutil::TempDir dir("cli_data");
  EXPECT_EQ(run_cli("pretrain --data " + q(dir / "nothing") + " --out " + q(dir / "ck")), 3);
  EXPECT_EQ(run_cli("descriptor --in " + q(dir / "nothing.nii") + " --out " + q(dir / "o.nii")), 3);
}

TEST(Cli, DescriptorMatchesLibrary) {
  testutil::TempDir dir("cli_desc");
  std::mt19937_64 rng(3);
  std::normal_distribution<float> n(0.0f, 1.0f);
  std::vector<float> data(10 * 11 * 12);
  for (auto& v : data) v = n(rng);
  const Volume v(1, {10, 11, 12}, {1.0, 1.0, 2.0}, data);
  save_volume(v, dir / "in.nii.gz");
  ASSERT_EQ(run_cli("descriptor --in " + q(dir / "in.nii.gz") + " --out " + q(dir / "out.nii.gz")), 0);
  const Volume got = load_volume(dir / "out.nii.gz");
  const Volume want = ssc_descriptor(load_volume(dir / "in.nii.gz"), SscConfig{});
  ASSERT_EQ(got.channels(), 12u);
  ASSERT_EQ(got.shape(), want.shape());
  for (std::size_t i = 0; i < got.size(); ++i) ASSERT_EQ(got.data()[i], want.data()[i]);
}

TEST(Cli, SmokeScenarioWritesOneManifestPerArtifactDir) {
  testutil::TempDir dir("cli_smoke");
  ASSERT_EQ(run_cli("run-scenario --config " + q(kSmoke) + " --out " + q(dir / "run")), 0);
  const auto scores = read_scores(dir / "run" / "scores.csv");
  EXPECT_FALSE(scores.empty());
  for (const char* f : {"summary.csv", "dice_boxplot.svg", "hd95_boxplot.svg"})
    EXPECT_TRUE(fs::exists(dir / "run" / "report" / f)) << f;
  // Any directory holding artifacts (not just subdirectories) carries a manifest.
  std::size_t dirs = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir / "run")) {
    if (!e.is_directory()) continue;
    bool has_files = false;
    for (const auto& f : fs::directory_iterator(e.path())) has_files |= f.is_regular_file();
    if (!has_files) continue;
    ++dirs;
    EXPECT_TRUE(fs::exists(e.path() / kManifestFile)) << e.path();
  }
  EXPECT_TRUE(fs::exists(dir / "run" / kManifestFile));
  EXPECT_GE(dirs, 5u);
  const auto m = KeyValueDocument::read(dir / "run" / "checkpoints" / "plain" / kManifestFile);
  EXPECT_TRUE(m.has_section("run"));
}

TEST(Cli, PipelineSubcommandsChain) {
  testutil::TempDir dir("cli_chain");
  const std::string cfg = " --config " + q(kSmoke);
  ASSERT_EQ(run_cli("synth-gen" + cfg + " --out " + q(dir / "data")), 0);
  ASSERT_EQ(run_cli("pretrain" + cfg + " --data " + q(dir / "data") + " --out " + q(dir / "ck") + " --trace " +
                    q(dir / "trace.txt")),
            0);
  EXPECT_TRUE(fs::exists(dir / "ck" / kManifestFile));
  ASSERT_EQ(run_cli("predict --ckpt " + q(dir / "ck") + " --data " + q(dir / "data") +
                    " --domain domain_b --split test --out " + q(dir / "pred")),
            0);
  const auto target = dir / "data" / "domain_b";
  const fs::path image = target / "case_003_image";
  EXPECT_EQ(run_cli("tta" + cfg + " --ckpt " + q(dir / "ck") + " --target " + q(image) + " --steps 1 --patches 1 --out " +
                    q(dir / "adapted.nii.gz")),
            0);
  EXPECT_TRUE(fs::exists(dir / "adapted.nii.gz"));
  EXPECT_EQ(run_cli("tta" + cfg + " --ckpt " + q(dir / "ck") + " --target " + q(image) + " --classes 9 --out " +
                    q(dir / "x.nii.gz")),
            2);
  ASSERT_EQ(run_cli("evaluate --pred " + q(dir / "pred") + " --ref " + q(target) + " --classes 1,2,3 --method m --out " +
                    q(dir / "s.csv")),
            0);
  ASSERT_EQ(run_cli("report --scores " + q(dir / "s.csv") + " --out " + q(dir / "rep")), 0);
  EXPECT_TRUE(fs::exists(dir / "rep" / "summary.csv"));
}
