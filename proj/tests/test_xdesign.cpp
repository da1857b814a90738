#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "quicfec/xdesign.hpp"

namespace {

using namespace quicfec;
using namespace quicfec::xdesign;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("quicfec_xdesign_" + name)).string();
}

TEST(Halton, RadicalInverseBase2And3) {
  EXPECT_DOUBLE_EQ(detail::radical_inverse(1, 2), 0.5);
  EXPECT_DOUBLE_EQ(detail::radical_inverse(2, 2), 0.25);
  EXPECT_DOUBLE_EQ(detail::radical_inverse(3, 2), 0.75);
  EXPECT_DOUBLE_EQ(detail::radical_inverse(1, 3), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(detail::radical_inverse(4, 3), 1.0 / 3.0 + 1.0 / 9.0);
}

TEST(Halton, ShiftedPoolStaysInUnitCube) {
  const auto pool = candidate_pool(5, 1024, 7);
  for (const auto& p : pool) {
    for (double x : p) {
      EXPECT_GE(x, 0.0);
      EXPECT_LT(x, 1.0);
    }
  }
}

TEST(Wsp, ExactCountMinimumDistanceAndMarginalCoverage) {
  const auto space = preset_space(SpaceKind::ge);
  const auto res = wsp_sample(space, 120, 1);
  ASSERT_EQ(res.points.size(), 120u);
  ASSERT_GT(res.d, 0.0);

  double min_d2 = 1e9;
  for (std::size_t i = 0; i < res.unit_points.size(); ++i) {
    for (std::size_t j = i + 1; j < res.unit_points.size(); ++j) {
      min_d2 = std::min(min_d2, detail::dist2(res.unit_points[i], res.unit_points[j]));
    }
  }
  EXPECT_GE(std::sqrt(min_d2), 0.9 * res.d);

  for (std::size_t dim = 0; dim < space.size(); ++dim) {
    std::set<int> deciles;
    for (const auto& u : res.unit_points) deciles.insert(static_cast<int>(u[dim] * 10.0));
    EXPECT_EQ(deciles.size(), 10u) << space.dims[dim].name;
  }
  for (const auto& p : res.points) {
    for (std::size_t dim = 0; dim < space.size(); ++dim) {
      EXPECT_GE(p[dim], space.dims[dim].lo);
      EXPECT_LE(p[dim], space.dims[dim].hi);
    }
  }
}

TEST(Wsp, DeterministicPerSeed) {
  const auto space = preset_space(SpaceKind::simplified);
  const auto a = wsp_sample(space, 40, 3);
  const auto b = wsp_sample(space, 40, 3);
  const auto c = wsp_sample(space, 40, 4);
  EXPECT_EQ(a.points, b.points);
  EXPECT_NE(a.points, c.points);
}

TEST(Wsp, SinglePointAndBadRequests) {
  const auto space = preset_space(SpaceKind::uniform);
  EXPECT_EQ(wsp_sample(space, 1, 1).points.size(), 1u);
  EXPECT_THROW(wsp_sample(space, 0, 1), UsageError);
  EXPECT_THROW(wsp_sample(space, kWspPoolSize + 1, 1), UsageError);
  EXPECT_THROW(wsp_sample(ParamSpace{}, 5, 1), UsageError);
  EXPECT_THROW(wsp_sample(ParamSpace{{{"x", 1.0, 0.0}}}, 5, 1), UsageError);
}

TEST(SpaceFile, PresetWithOverride) {
  const auto root = YAML::Load(R"(
schema: 1
preset: simplified
dimensions:
  - {name: owd_ms, min: 10, max: 50}
  - {name: extra, min: 0, max: 1}
)");
  const auto space = parse_space(root);
  ASSERT_EQ(space.size(), 4u);
  EXPECT_EQ(space.dims[2].name, "owd_ms");
  EXPECT_EQ(space.dims[2].lo, 10.0);
  EXPECT_EQ(space.dims[3].name, "extra");
}

TEST(SpaceFile, SchemaRequired) {
  EXPECT_THROW(check_schema(YAML::Load("preset: ge"), "x"), UsageError);
  EXPECT_THROW(check_schema(YAML::Load("schema: 2"), "x"), UsageError);
}

const char* kSmallCampaign = R"(
schema: 1
name: small
seed: 9
points: 3
repeats: 2
space: ge
ranges:
  p: [0.001, 0.01]
  owd_ms: [10, 40]
buffer_ms: 100
duration_s: 1
contenders:
  - {name: plain, mode: plain}
  - {name: rs, mode: fec, scheme: rs, n: 30, k: 20}
  - {name: rlc, mode: fec, scheme: rlc, n: 3, k: 2, window: 20}
)";

TEST(Campaign, ParsesContendersAndRanges) {
  const auto spec = parse_campaign(YAML::Load(kSmallCampaign));
  EXPECT_EQ(spec.seed, 9u);
  EXPECT_EQ(spec.points, 3u);
  EXPECT_EQ(spec.repeats, 2u);
  ASSERT_EQ(spec.contenders.size(), 3u);
  EXPECT_EQ(spec.contenders[0].mode, transport::DeliveryMode::unreliable);
  EXPECT_EQ(spec.contenders[1].scheme.id, codec::SchemeId::reed_solomon);
  EXPECT_EQ(spec.contenders[2].scheme.window, 20u);
  EXPECT_EQ(spec.space.dims[spec.space.index_of("owd_ms")].hi, 40.0);
}

TEST(Campaign, RejectsMalformedFiles) {
  EXPECT_THROW(parse_campaign(YAML::Load("schema: 1\ncontenders: []")), UsageError);
  EXPECT_THROW(parse_campaign(YAML::Load("contenders: [{name: a, mode: plain}]")), UsageError);
  EXPECT_THROW(parse_campaign(YAML::Load("schema: 1\ncontenders: [{name: a, mode: fec, scheme: ldpc}]")), UsageError);
  EXPECT_THROW(parse_campaign(YAML::Load("schema: 1\ncontenders: [{name: a, mode: plain}, {name: a, mode: plain}]")),
               UsageError);
  EXPECT_THROW(parse_campaign(YAML::Load("schema: 1\nranges: {nope: [0, 1]}\ncontenders: [{name: a, mode: plain}]")),
               UsageError);
  EXPECT_THROW(parse_campaign(YAML::Load("schema: 1\ncontenders: [{name: a, mode: plain, paths: 3}]")), UsageError);
}

TEST(Campaign, SweepDefinesPointsInOrder) {
  const auto spec = parse_campaign(YAML::Load(R"(
schema: 1
space: ge
sweep:
  fixed: {p: 0.005, r: 0.25, k_good: 0.99, h_bad: 0.1}
  owd_ms: [0, 50, 200]
contenders: [{name: plain, mode: plain}]
)"));
  const auto pts = campaign_points(spec);
  ASSERT_EQ(pts.size(), 3u);
  EXPECT_EQ(pts[2].owd_ms, 200.0);
  EXPECT_EQ(pts[0].path1, (netem::GEParams{0.005, 0.25, 0.99, 0.1}));
}

TEST(Campaign, UniformPointsAreGoodOnlyChains) {
  CampaignSpec spec;
  spec.space_kind = SpaceKind::uniform;
  spec.space = preset_space(SpaceKind::uniform);
  spec.points = 10;
  for (const auto& pt : campaign_points(spec)) {
    EXPECT_EQ(pt.path1.p, 0.0);
    EXPECT_EQ(pt.path1.h_bad, 0.0);
    EXPECT_NEAR(pt.path1.stationary_loss(), 1.0 - pt.path1.k_good, 1e-15);
    EXPECT_LE(pt.path1.stationary_loss(), 0.03);
  }
}

TEST(Campaign, SeedsDependOnPointAndRepeatOnly) {
  EXPECT_EQ(run_seed(1, 2, 0), run_seed(1, 2, 0));
  EXPECT_NE(run_seed(1, 2, 0), run_seed(1, 2, 1));
  EXPECT_NE(run_seed(1, 2, 0), run_seed(1, 3, 0));
  EXPECT_NE(run_seed(1, 2, 0), run_seed(2, 2, 0));
}

TEST(Campaign, RunWritesOrderedRowsAndResumesToIdenticalBytes) {
  const auto spec = parse_campaign(YAML::Load(kSmallCampaign));
  const auto full = temp_path("full.csv");
  std::filesystem::remove(full);
  const auto prog = run_campaign(spec, full, 1);
  EXPECT_EQ(prog.rows_total, 9u);
  EXPECT_EQ(prog.rows_skipped, 0u);
  EXPECT_EQ(prog.runs, 18u);
  EXPECT_EQ(prog.failed, 0u);

  const auto rows = read_results(full);
  ASSERT_EQ(rows.size(), 9u);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].point_id, i / 3);
    EXPECT_EQ(rows[i].contender, spec.contenders[i % 3].name);
    EXPECT_EQ(rows[i].status, "ok");
    EXPECT_GE(rows[i].fraction_received, 0.0);
    EXPECT_LE(rows[i].fraction_received, 1.0);
  }
  const std::string bytes = slurp(full);
  EXPECT_EQ(bytes.substr(0, bytes.find('\n')), csv_header(false));

  // Simulate a crash after four rows and a torn fifth line.
  const auto partial = temp_path("partial.csv");
  {
    std::size_t pos = 0;
    for (int line = 0; line < 5; ++line) pos = bytes.find('\n', pos) + 1;
    std::ofstream(partial, std::ios::binary | std::ios::trunc) << bytes.substr(0, pos) << "2,pla";
  }
  const auto resumed = run_campaign(spec, partial, 1);
  EXPECT_EQ(resumed.rows_skipped, 4u);
  EXPECT_EQ(slurp(partial), bytes);

  // Parallel workers produce the same file.
  const auto par = temp_path("parallel.csv");
  std::filesystem::remove(par);
  run_campaign(spec, par, 3);
  EXPECT_EQ(slurp(par), bytes);

  // Without resume the file is rewritten from scratch.
  run_campaign(spec, partial, 1, false);
  EXPECT_EQ(slurp(partial), bytes);
}

TEST(Campaign, ContendersWithSameConfigSeeIdenticalChannels) {
  auto spec = parse_campaign(YAML::Load(R"(
schema: 1
seed: 4
points: 2
repeats: 1
duration_s: 1
contenders:
  - {name: a, mode: fec, scheme: rs, n: 30, k: 20}
  - {name: b, mode: fec, scheme: rs, n: 30, k: 20}
)"));
  const auto path = temp_path("paired.csv");
  std::filesystem::remove(path);
  run_campaign(spec, path, 1);
  const auto rows = read_results(path);
  ASSERT_EQ(rows.size(), 4u);
  for (std::size_t i = 0; i < rows.size(); i += 2) {
    EXPECT_EQ(rows[i].fraction_received, rows[i + 1].fraction_received);
    EXPECT_EQ(rows[i].rebuffer_ms, rows[i + 1].rebuffer_ms);
  }
}

TEST(Campaign, HeterogeneousRowsCarrySecondPath) {
  auto spec = parse_campaign(YAML::Load(R"(
schema: 1
seed: 2
points: 1
repeats: 1
space: heterogeneous
duration_s: 1
contenders:
  - {name: rr, mode: fec, scheme: rs, n: 30, k: 20, scheduler: round_robin, paths: 2}
)"));
  const auto path = temp_path("het.csv");
  std::filesystem::remove(path);
  run_campaign(spec, path, 1);
  const auto text = slurp(path);
  EXPECT_EQ(text.substr(0, text.find('\n')), csv_header(true));
  const auto rows = read_results(path);
  ASSERT_EQ(rows.size(), 1u);
  ASSERT_TRUE(rows[0].point.path2.has_value());
  EXPECT_EQ(rows[0].point.path2->k_good, 1.0);
}

TEST(Summaries, MedianOddEvenAndEmpty) {
  EXPECT_EQ(median(std::vector<double>{3, 1, 2}), 2.0);
  EXPECT_EQ(median(std::vector<double>{4, 1, 2, 3}), 2.5);
  EXPECT_THROW(median(std::vector<double>{}), UsageError);
}

TEST(Summaries, EcdfSteps) {
  const auto e = ecdf({4, 2, 1, 2});
  ASSERT_EQ(e.size(), 3u);
  EXPECT_EQ(e[0], (std::pair<double, double>{1, 0.25}));
  EXPECT_EQ(e[1], (std::pair<double, double>{2, 0.75}));
  EXPECT_EQ(e[2], (std::pair<double, double>{4, 1.0}));
  EXPECT_THROW(ecdf({}), UsageError);
}

TEST(Summaries, RatioConventions) {
  EXPECT_EQ(ratio(0.0, 0.0), 1.0);
  EXPECT_TRUE(std::isinf(ratio(5.0, 0.0)));
  EXPECT_EQ(ratio(3.0, 6.0), 0.5);
}

TEST(Summaries, RatioTablePairsByPoint) {
  std::vector<ResultRow> rows(4);
  rows[0].point_id = 0, rows[0].contender = "a", rows[0].rebuffer_ms = 10;
  rows[1].point_id = 0, rows[1].contender = "b", rows[1].rebuffer_ms = 20;
  rows[2].point_id = 1, rows[2].contender = "a", rows[2].rebuffer_ms = 0;
  rows[3].point_id = 1, rows[3].contender = "b", rows[3].rebuffer_ms = 0;
  const auto t = ratio_table(rows, "a", "b", "rebuffer_ms");
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t[0].value, 0.5);
  EXPECT_EQ(t[1].value, 1.0);
  rows.pop_back();
  EXPECT_THROW(ratio_table(rows, "a", "b", "rebuffer_ms"), UsageError);
  EXPECT_THROW(metric_value(rows[0], "goodput"), UsageError);
}

TEST(Results, MissingColumnRejected) {
  const auto path = temp_path("bad.csv");
  std::ofstream(path, std::ios::trunc) << "point_id,contender\n0,a\n";
  EXPECT_THROW(read_results(path), UsageError);
}

}  // namespace
