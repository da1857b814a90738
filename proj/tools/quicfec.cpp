#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "oracles/oracles.hpp"
#include "quicfec/xdesign.hpp"

namespace {

using namespace quicfec;

int cmd_run(const std::string& campaign, const std::string& out, unsigned jobs, bool no_resume, bool quiet) {
  const auto spec = xdesign::load_campaign_file(campaign);
  std::size_t done = 0;
  const std::size_t total = spec.points * spec.contenders.size();
  const auto progress = xdesign::run_campaign(spec, out, jobs, !no_resume, [&](const xdesign::ResultRow& r) {
    ++done;
    if (!quiet) {
      fmt::print(stderr, "[{}] point {} {}: fraction={:.4f} rebuffer={:.0f}ms {}\n", done, r.point_id, r.contender,
                 r.fraction_received, r.rebuffer_ms, r.status);
    }
  });
  fmt::print(stderr, "{}: {} rows ({} kept from a previous run), {} simulations, {} failed\n", out, total,
             progress.rows_skipped, progress.runs, progress.failed);
  return progress.failed == 0 ? 0 : 1;
}

int cmd_sample(const std::string& space_file, std::size_t n, std::uint64_t seed, const std::string& out) {
  const auto space = xdesign::load_space_file(space_file);
  const auto res = xdesign::wsp_sample(space, n, seed);
  std::ofstream file;
  std::ostream* os = &std::cout;
  if (!out.empty()) {
    file.open(out, std::ios::trunc);
    if (!file) throw xdesign::UsageError("cannot write " + out);
    os = &file;
  }
  *os << "point_id";
  for (const auto& d : space.dims) *os << ',' << d.name;
  *os << '\n';
  for (std::size_t i = 0; i < res.points.size(); ++i) {
    *os << i;
    for (double x : res.points[i]) *os << fmt::format(",{:.9g}", x);
    *os << '\n';
  }
  fmt::print(stderr, "{} points, elimination distance {:.6f}\n", res.points.size(), res.d);
  return 0;
}

int cmd_report(const std::string& in, const std::string& ecdf_metric, const std::vector<std::string>& ratio,
               const std::string& ratio_metric, const std::string& contender, const std::string& out) {
  const auto rows = xdesign::read_results(in);
  std::ofstream file;
  std::ostream* os = &std::cout;
  if (!out.empty()) {
    file.open(out, std::ios::trunc);
    if (!file) throw xdesign::UsageError("cannot write " + out);
    os = &file;
  }
  if (!ratio.empty()) {
    const auto table = xdesign::ratio_table(rows, ratio[0], ratio[1], ratio_metric);
    std::vector<double> values;
    for (const auto& r : table) values.push_back(r.value);
    *os << "ratio,fraction\n";
    for (const auto& [v, f] : xdesign::ecdf(values)) *os << fmt::format("{:.9g},{:.9g}\n", v, f);
    return 0;
  }
  std::vector<std::string> names;
  std::set<std::string> seen;
  for (const auto& r : rows) {
    if ((contender.empty() || r.contender == contender) && seen.insert(r.contender).second) names.push_back(r.contender);
  }
  if (names.empty()) throw xdesign::UsageError("no rows for contender '" + contender + "'");
  *os << "contender,value,fraction\n";
  for (const auto& name : names) {
    const auto values = xdesign::metric_values(rows, name, ecdf_metric);
    if (values.empty()) continue;
    for (const auto& [v, f] : xdesign::ecdf(values)) *os << fmt::format("{},{:.9g},{:.9g}\n", name, v, f);
  }
  return 0;
}

unsigned parse_byte(const std::string& s) {
  const unsigned long v = std::stoul(s, nullptr, 0);
  if (v > 255) throw xdesign::UsageError("'" + s + "' is not a byte");
  return static_cast<unsigned>(v);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Packet-level FEC for a QUIC-like transport: simulator, campaigns and reports"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run a campaign and write one median row per (point, contender)");
  std::string campaign, run_out;
  unsigned jobs = 1;
  bool no_resume = false, quiet = false;
  run->add_option("--campaign", campaign, "Campaign YAML file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", run_out, "Results CSV")->required();
  run->add_option("--jobs", jobs, "Worker threads")->check(CLI::Range(1u, 1024u));
  run->add_flag("--no-resume", no_resume, "Ignore rows already present in --out");
  run->add_flag("--quiet", quiet, "Only print the summary line");

  auto* sample = app.add_subcommand("sample", "Draw a space-filling design over a parameter space");
  std::string space_file, sample_out;
  std::size_t n = 120;
  std::uint64_t seed = 1;
  sample->add_option("--space", space_file, "Space YAML file")->required()->check(CLI::ExistingFile);
  sample->add_option("--n", n, "Number of points")->check(CLI::Range(std::size_t{1}, xdesign::kWspPoolSize));
  sample->add_option("--seed", seed, "Seed");
  sample->add_option("--out", sample_out, "Output CSV (default stdout)");

  auto* report = app.add_subcommand("report", "Summarise a results CSV");
  std::string report_in, report_out, ecdf_metric, ratio_metric = "rebuffer_ms", contender;
  std::vector<std::string> ratio;
  report->add_option("--in", report_in, "Results CSV")->required()->check(CLI::ExistingFile);
  auto* ecdf_opt = report->add_option("--ecdf", ecdf_metric, "ECDF of fraction_received or rebuffer_ms per contender");
  auto* ratio_opt = report->add_option("--ratio", ratio, "ECDF of per-point ratios A/B")->expected(2);
  ecdf_opt->excludes(ratio_opt);
  report->add_option("--metric", ratio_metric, "Metric for --ratio");
  report->add_option("--contender", contender, "Restrict --ecdf to one contender");
  report->add_option("--out", report_out, "Output CSV (default stdout)");

  auto* oracle_cmd = app.add_subcommand("oracle", "Reference computations from independent implementations");
  oracle_cmd->require_subcommand(1);
  std::vector<std::string> args;
  auto* gf_mul = oracle_cmd->add_subcommand("gf-mul", "Product of two field elements");
  gf_mul->add_option("operands", args, "a b")->expected(2)->required();
  auto* gf_inv = oracle_cmd->add_subcommand("gf-inv", "Inverse of a field element");
  gf_inv->add_option("operand", args, "a")->expected(1)->required();
  auto* pm = oracle_cmd->add_subcommand("park-miller", "Park-Miller sequence");
  std::uint32_t pm_seed = 1;
  std::size_t count = 10;
  pm->add_option("--seed", pm_seed)->check(CLI::Range(1u, 2147483646u));
  pm->add_option("--count", count);
  auto* rlc = oracle_cmd->add_subcommand("rlc-coeffs", "Random linear coefficients for one repair symbol");
  std::uint16_t rlc_seed = 1;
  std::string threshold = "255";
  std::size_t width = 20;
  rlc->add_option("--seed", rlc_seed);
  rlc->add_option("--threshold", threshold, "Density byte");
  rlc->add_option("--width", width);
  auto* ge = oracle_cmd->add_subcommand("ge-loss", "Stationary loss of a Gilbert-Elliott channel");
  std::vector<double> ge_params;
  ge->add_option("params", ge_params, "p r k h")->expected(4)->required();
  auto* burst = oracle_cmd->add_subcommand("burst", "Fraction of recoverable bursts on one path under round-robin");
  unsigned bn = 6, bk = 4;
  std::size_t blen = 2, bpaths = 2;
  burst->add_option("--n", bn);
  burst->add_option("--k", bk);
  burst->add_option("--len", blen);
  burst->add_option("--paths", bpaths);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(campaign, run_out, jobs, no_resume, quiet);
    if (*sample) return cmd_sample(space_file, n, seed, sample_out);
    if (*report) {
      if (ecdf_metric.empty() && ratio.empty()) throw xdesign::UsageError("report needs --ecdf or --ratio");
      return cmd_report(report_in, ecdf_metric, ratio, ratio_metric, contender, report_out);
    }
    if (*gf_mul) {
      fmt::print("{:#04x}\n", oracle::gf_mul(parse_byte(args[0]), parse_byte(args[1])));
    } else if (*gf_inv) {
      fmt::print("{:#04x}\n", oracle::gf_inv(parse_byte(args[0])));
    } else if (*pm) {
      std::uint32_t x = pm_seed;
      for (std::size_t i = 0; i < count; ++i) fmt::print("{}\n", x = oracle::park_miller_next(x));
    } else if (*rlc) {
      const auto c = oracle::rlc_coefficients(rlc_seed, static_cast<std::uint8_t>(parse_byte(threshold)), width);
      for (std::size_t i = 0; i < c.size(); ++i) fmt::print("{}{:02x}", i ? " " : "", c[i]);
      fmt::print("\n");
    } else if (*ge) {
      fmt::print("{:.9g}\n", oracle::ge_stationary_loss(ge_params[0], ge_params[1], ge_params[2], ge_params[3]));
    } else if (*burst) {
      if (bk == 0 || bk >= bn || bpaths == 0 || blen == 0) throw xdesign::UsageError("burst: need 0 < k < n, len > 0, paths > 0");
      const auto [good, total] = oracle::burst_recoverable(bn, bk, blen, bpaths);
      fmt::print("{}/{} = {:.6f}\n", good, total, static_cast<double>(good) / static_cast<double>(total));
    }
  } catch (const xdesign::UsageError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 2;
  } catch (const YAML::Exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}
