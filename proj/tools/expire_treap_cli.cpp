// Command-line front end: workload generation, benchmark scenarios, the
// expirable-store demo and the randomized oracle check.

#include <cerrno>
#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <string>

#include "CLI11.hpp"
#include "expire_treap/bench.hpp"
#include "expire_treap/errors.hpp"
#include "expire_treap/store.hpp"
#include "expire_treap/verify.hpp"
#include "expire_treap/workload.hpp"

namespace fs = std::filesystem;
namespace et = expire_treap;

namespace {

constexpr int kRuntimeFailure = 1;
constexpr int kUsageError = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::uint64_t default_seed() {
  const char* env = std::getenv("EXPIRE_TREAP_SEED");
  if (env == nullptr || *env == '\0') {
    return 1;
  }
  std::uint64_t seed = 0;
  const char* end = env + std::strlen(env);
  const auto r = std::from_chars(env, end, seed);
  if (r.ec != std::errc{} || r.ptr != end) {
    throw UsageError(std::string("EXPIRE_TREAP_SEED is not an unsigned integer: '") + env + "'");
  }
  return seed;
}

struct GenerateArgs {
  double b = 0.5;
  unsigned l = 10;
  std::uint64_t n = 100'000;
  std::string lifetime = "fixed:1000";
  std::uint64_t bucket_ms = 1;
  std::uint64_t seed = 0;
  std::string out;
};

int run_generate(const GenerateArgs& a) {
  const et::BModelParams params{a.b, a.l, a.n, a.seed};
  const et::LifetimeDistribution lifetime = et::LifetimeDistribution::parse(a.lifetime);
  const et::WorkloadTrace trace = et::generate(params, lifetime, a.bucket_ms);
  std::ofstream out(a.out, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw et::Error(a.out + ": cannot open for writing: " + std::strerror(errno));
  }
  et::write_trace(out, trace);
  out.flush();
  if (!out) {
    throw et::Error(a.out + ": write failed");
  }
  std::cout << "wrote " << trace.total() << " records in " << trace.bucket_counts.size() << " buckets to " << a.out
            << '\n';
  return 0;
}

int run_bench(const std::string& config_path, const std::string& out_dir) {
  const et::bench::ScenarioConfig cfg = et::bench::load_config(config_path);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) {
    throw et::Error(out_dir + ": cannot create directory: " + ec.message());
  }
  const et::bench::BenchReport report = et::bench::run_scenario(cfg);
  const fs::path base = fs::path(out_dir) / cfg.name;
  const fs::path rows = base.string() + ".csv";
  const fs::path summary = base.string() + "_summary.csv";
  const fs::path pdf = base.string() + "_pdf.csv";
  et::bench::emit_csv(report, rows);
  et::bench::emit_summary_csv(report, summary);
  et::bench::emit_pdf_csv(report, pdf);
  std::cout << cfg.name << ": " << report.rows.size() << " rows -> " << rows.string() << ", " << summary.string()
            << ", " << pdf.string() << '\n';
  return 0;
}

struct DemoArgs {
  std::string trace;
  std::uint64_t cadence_ms = 100;
  std::string policy = "cadence";
  bool verbose = false;
};

int run_demo(const DemoArgs& a) {
  std::ifstream in(a.trace);
  if (!in) {
    throw et::Error(a.trace + ": cannot open: " + std::strerror(errno));
  }
  const et::WorkloadTrace trace = et::read_trace(in);

  et::StoreOptions options;
  options.expire_cadence_ms = a.cadence_ms;
  options.policy = a.policy == "eager" ? et::SweepPolicy::EagerMinExpiration : et::SweepPolicy::Cadence;
  options.seed = trace.params.seed;
  et::ExpirableStore<std::uint64_t, std::uint32_t> store(et::Clock::simulated(0), options);

  std::uint64_t expelled = 0;
  store.set_expiration_hook([&](const auto& rec) {
    ++expelled;
    if (a.verbose) {
      std::cout << "expired key=" << rec.key << " exp=" << rec.expiration << " at=" << store.now_ms() << '\n';
    }
  });

  std::uint64_t puts = 0;
  std::uint64_t max_physical = 0;
  std::uint64_t last_expiration = 0;
  std::uint32_t payload = 0;
  trace.for_each_arrival([&](std::uint64_t at, const et::TraceRecord& rec) {
    store.tick(at - store.now_ms());
    const bool never = rec.lifetime_ms == et::kNeverExpires;
    const std::uint64_t exp_ms = never ? 0 : at + std::max<std::uint64_t>(1, rec.lifetime_ms);
    const auto exp = never ? et::ExpirationTime::infinity() : et::ExpirationTime::at(exp_ms);
    if (store.put(rec.key, exp, payload++).inserted) {
      ++puts;
      last_expiration = std::max(last_expiration, exp_ms);
    }
    max_physical = std::max<std::uint64_t>(max_physical, store.physical_size());
  });
  const std::uint64_t trace_end = store.now_ms();
  const auto visible = [&] { return store.scan(0, std::numeric_limits<std::uint64_t>::max()).size(); };
  const std::size_t visible_at_trace_end = visible();

  // Let every finite record run out; a cadence sweep may land past it.
  if (last_expiration > store.now_ms()) {
    store.tick(last_expiration - store.now_ms());
  }
  store.run_expiration();

  std::cout << "records=" << trace.total() << " puts=" << puts << " expired=" << expelled
            << " visible_at_end=" << visible() << " physical_at_end=" << store.physical_size()
            << " peak_physical=" << max_physical << " trace_end_ms=" << trace_end
            << " visible_at_trace_end=" << visible_at_trace_end << " end_ms=" << store.now_ms() << '\n';
  return 0;
}

int run_verify(std::uint64_t ops, std::uint64_t sequences, std::uint64_t seed) {
  et::verify::SequenceOptions opt;
  opt.ops = ops;
  opt.snapshot_at = ops / 2;
  const et::verify::SuiteReport r = et::verify::run_suite(sequences, seed, opt);
  std::cout << (r.ok() ? "PASS " : "FAIL ") << et::verify::describe(r) << '\n';
  if (!r.ok()) {
    std::cout << "first failure: " << r.first_failure << '\n';
  }
  return r.ok() ? 0 : kRuntimeFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Expiration-time indexing with persistent treaps"};
  app.name("expire_treap");
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  try {
    seed = default_seed();
  } catch (const UsageError& e) {
    std::cerr << "expire_treap: " << e.what() << '\n';
    return kUsageError;
  }

  GenerateArgs gen;
  gen.seed = seed;
  auto* generate = app.add_subcommand("generate", "Write a b-model workload trace");
  generate->add_option("--b", gen.b, "Bias in [0.5, 1)")->capture_default_str();
  generate->add_option("--l", gen.l, "Aggregation levels (2^l buckets)")->capture_default_str();
  generate->add_option("--n", gen.n, "Total number of records")->capture_default_str();
  generate->add_option("--lifetime", gen.lifetime, "fixed:MS | uniform:LO:HI | exp:MEAN | inf")->capture_default_str();
  generate->add_option("--bucket-ms", gen.bucket_ms, "Simulated duration of one bucket")->capture_default_str();
  generate->add_option("--seed", gen.seed, "Seed (default: $EXPIRE_TREAP_SEED or 1)")->capture_default_str();
  generate->add_option("--out", gen.out, "Output trace file")->required();

  std::string config_path;
  std::string out_dir;
  auto* bench = app.add_subcommand("bench", "Run a benchmark scenario and write CSV reports");
  bench->add_option("--config", config_path, "Scenario file (key = value lines)")->required()->check(CLI::ExistingFile);
  bench->add_option("--out", out_dir, "Output directory (created if missing)")->required();

  DemoArgs demo_args;
  auto* demo = app.add_subcommand("demo", "Replay a trace through the expirable store");
  demo->add_option("--trace", demo_args.trace, "Trace file written by generate")->required()->check(CLI::ExistingFile);
  demo->add_option("--cadence", demo_args.cadence_ms, "Sweep cadence in simulated ms")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  demo->add_option("--policy", demo_args.policy, "cadence | eager")
      ->capture_default_str()
      ->check(CLI::IsMember({"cadence", "eager"}));
  demo->add_flag("--verbose", demo_args.verbose, "Print every expired record");

  std::uint64_t ops = 10'000;
  std::uint64_t sequences = 10;
  std::uint64_t verify_seed = seed;
  auto* verify = app.add_subcommand("verify", "Check the treap against a sorted-map oracle");
  verify->add_option("--ops", ops, "Operations per sequence")->capture_default_str()->check(CLI::PositiveNumber);
  verify->add_option("--sequences", sequences, "Number of random sequences")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  verify->add_option("--seed", verify_seed, "Seed (default: $EXPIRE_TREAP_SEED or 1)")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "expire_treap: " << e.what() << "\n" << app.help();
    return kUsageError;
  }

  try {
    if (*generate) {
      return run_generate(gen);
    }
    if (*bench) {
      return run_bench(config_path, out_dir);
    }
    if (*demo) {
      return run_demo(demo_args);
    }
    return run_verify(ops, sequences, verify_seed);
  } catch (const et::ConfigError& e) {
    std::cerr << "expire_treap: configuration error: " << e.what() << '\n';
    return kRuntimeFailure;
  } catch (const std::exception& e) {
    std::cerr << "expire_treap: error: " << e.what() << '\n';
    return kRuntimeFailure;
  }
}
