#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "pearl/common.hpp"
#include "pearl/eval.hpp"
#include "pearl/text_key.hpp"

using namespace pearl;
using namespace pearl::eval;
using pearl::emb::HashProvider;
using pearl::emb::Modality;
using pearl::emb::ProviderSet;

namespace {

scoring::ModelConfig tiny_config(arsm::Mode mode = arsm::Mode::adaptive) {
  scoring::ModelConfig cfg;
  cfg.img_encoders = {{"e1", Modality::both, 5}, {"e2", Modality::both, 4}};
  cfg.ref_encoders = {{"e1", Modality::both, 5}, {"e2", Modality::both, 4}};
  cfg.vss.d_model = 8;
  cfg.vss.n_queries = 2;
  cfg.vss.layers_transformer = 1;
  cfg.vss.layers_qformer = 1;
  cfg.vss.n_heads = 2;
  cfg.arsm_mode = mode;
  cfg.hadamard.layers = 2;
  cfg.hadamard.hidden_channels = 3;
  return cfg;
}

ProviderSet tiny_providers() {
  ProviderSet set;
  set.add(std::make_unique<HashProvider>("e1", 5, 1));
  set.add(std::make_unique<HashProvider>("e2", 4, 2));
  return set;
}

std::vector<data::CaptionRecord> judged_records(int n, bool with_refs) {
  std::vector<data::CaptionRecord> out;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    data::CaptionRecord r;
    r.sample_id = "s" + std::to_string(i);
    r.image_key = "img" + std::to_string(i);
    r.candidate = "caption number " + std::to_string(i);
    if (with_refs) r.references = {"ref one " + std::to_string(i), "ref two"};
    r.judgment = u(rng);
    out.push_back(r);
  }
  return out;
}

data::DatasetSplit tiny_split() {
  data::DatasetSplit split;
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 16; ++i) {
    data::CaptionRecord r;
    r.sample_id = "t" + std::to_string(i);
    r.image_key = "img" + std::to_string(i % 7);
    r.candidate = "candidate text " + std::to_string(i);
    if (i % 2 == 0) r.references = {"ref a " + std::to_string(i)};
    r.judgment = u(rng);
    split.train.push_back(r);
  }
  for (int i = 0; i < 8; ++i) {
    data::CaptionRecord r;
    r.sample_id = "v" + std::to_string(i);
    r.image_key = "img" + std::to_string(i % 5);
    r.candidate = "validation text " + std::to_string(i);
    if (i % 2 == 1) r.references = {"val ref " + std::to_string(i)};
    r.judgment = u(rng);
    split.validation.push_back(r);
  }
  for (int i = 0; i < 6; ++i) {
    data::CaptionRecord r;
    r.sample_id = "x" + std::to_string(i);
    r.image_key = "img" + std::to_string(i % 3);
    r.candidate = "test text " + std::to_string(i);
    if (i % 2 == 0) r.references = {"test ref " + std::to_string(i)};
    r.judgment = u(rng);
    split.test.push_back(r);
  }
  return split;
}

train::TrainConfig fast_config() {
  train::TrainConfig cfg;
  cfg.lr = 1e-3;
  cfg.batch_size = 5;
  cfg.max_epochs = 2;
  cfg.seed = 7;
  return cfg;
}

std::vector<data::FoilPair> foil_pairs(int n) {
  std::vector<data::FoilPair> pairs;
  for (int i = 0; i < n; ++i) {
    data::FoilPair p;
    p.image_key = "img" + std::to_string(i);
    p.correct = "a cat sits on mat " + std::to_string(i);
    p.foil = "a dog sits on mat " + std::to_string(i);
    p.references = {"ref w " + std::to_string(i), "ref x " + std::to_string(i),
                    "ref y " + std::to_string(i), "ref z " + std::to_string(i)};
    pairs.push_back(p);
  }
  return pairs;
}

std::vector<nlohmann::json> read_json_lines(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(bool(in));
  std::vector<nlohmann::json> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(nlohmann::json::parse(line));
  return lines;
}

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(bool(in));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name)
      : path((std::filesystem::temp_directory_path() / name).string()) {}
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("benchmark hits tau = +1 / -1 when judgments echo or invert scores") {
  scoring::PearlModel model(tiny_config(), 3, nullptr);
  ProviderSet providers = tiny_providers();
  auto records = judged_records(12, true);

  std::vector<double> scores;
  for (auto& r : records) scores.push_back(model.score(r, providers).y_final);
  for (std::size_t i = 1; i < scores.size(); ++i) {
    CHECK(scores[i] != scores[0]);
  }

  for (std::size_t i = 0; i < records.size(); ++i) records[i].judgment = scores[i];
  BenchmarkResult aligned = run_benchmark(model, records, providers);
  CHECK(aligned.n_scored == 12);
  CHECK(aligned.report.n == 12);
  CHECK(aligned.report.tau_b == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(aligned.report.tau_c == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(aligned.report.discordant == 0);

  for (std::size_t i = 0; i < records.size(); ++i) {
    records[i].judgment = 1.0 - scores[i];
  }
  BenchmarkResult inverted = run_benchmark(model, records, providers);
  CHECK(inverted.report.tau_b == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(inverted.report.concordant == 0);
}

TEST_CASE("benchmark report equals a manual correlation over the same scores") {
  scoring::PearlModel model(tiny_config(), 5, nullptr);
  ProviderSet providers = tiny_providers();
  auto records = judged_records(10, false);

  std::vector<double> scores, judgments;
  for (const auto& r : records) {
    scores.push_back(model.score(r, providers).y_final);
    judgments.push_back(*r.judgment);
  }
  metrics::CorrelationReport manual = metrics::kendall_report(scores, judgments);
  BenchmarkResult bench = run_benchmark(model, records, providers);
  CHECK(bench.report.tau_b == manual.tau_b);
  CHECK(bench.report.tau_c == manual.tau_c);
  CHECK(bench.report.concordant == manual.concordant);
  CHECK(bench.report.discordant == manual.discordant);
  const std::int64_t pair_total = bench.report.concordant + bench.report.discordant +
                                  bench.report.ties_x_only + bench.report.ties_y_only +
                                  bench.report.ties_both;
  CHECK(pair_total == 10 * 9 / 2);
  CHECK(bench.wall_seconds >= 0.0);
}

TEST_CASE("benchmark rejects records without judgments by sample id") {
  scoring::PearlModel model(tiny_config(), 3, nullptr);
  ProviderSet providers = tiny_providers();
  auto records = judged_records(3, false);
  records[1].judgment.reset();
  CHECK_THROWS_WITH_AS(run_benchmark(model, records, providers),
                       doctest::Contains("s1"), ValidationError);
}

TEST_CASE("foil accuracy matches a manual strict comparison") {
  scoring::PearlModel model(tiny_config(), 9, nullptr);
  ProviderSet providers = tiny_providers();
  auto pairs = foil_pairs(8);

  int wins = 0;
  for (const auto& p : pairs) {
    data::CaptionRecord rec;
    rec.image_key = p.image_key;
    rec.references = {p.references[0], p.references[1]};
    rec.sample_id = "m";
    rec.candidate = p.correct;
    const double c = model.score(rec, providers).y_final;
    rec.candidate = p.foil;
    const double f = model.score(rec, providers).y_final;
    if (c > f) ++wins;
  }
  const double expected = 100.0 * wins / 8.0;
  CHECK(foil_accuracy(model, pairs, providers,
                      scoring::SettingPolicy::auto_detect, 2) == expected);
}

TEST_CASE("foil ties count as failures") {
  scoring::PearlModel model(tiny_config(), 9, nullptr);
  ProviderSet providers = tiny_providers();
  auto pairs = foil_pairs(5);
  for (auto& p : pairs) p.foil = p.correct;
  CHECK(foil_accuracy(model, pairs, providers,
                      scoring::SettingPolicy::auto_detect, 1) == 0.0);
}

TEST_CASE("foil reference handling: truncation, shortage, and ref-free policy") {
  scoring::PearlModel model(tiny_config(), 9, nullptr);
  ProviderSet providers = tiny_providers();
  auto pairs = foil_pairs(4);

  SUBCASE("n_refs larger than the pool throws") {
    CHECK_THROWS_WITH_AS(foil_accuracy(model, pairs, providers,
                                       scoring::SettingPolicy::auto_detect, 5),
                         doctest::Contains("img0"), ValidationError);
  }
  SUBCASE("n_refs must be positive and pairs non-empty") {
    CHECK_THROWS_AS(foil_accuracy(model, pairs, providers,
                                  scoring::SettingPolicy::auto_detect, 0),
                    ValidationError);
    CHECK_THROWS_AS(foil_accuracy(model, {}, providers,
                                  scoring::SettingPolicy::auto_detect, 1),
                    ValidationError);
  }
  SUBCASE("reference-free policy ignores the reference pool entirely") {
    const double with_refs = foil_accuracy(
        model, pairs, providers, scoring::SettingPolicy::force_reference_free, 1);
    auto stripped = pairs;
    for (auto& p : stripped) p.references.clear();
    const double without = foil_accuracy(
        model, stripped, providers, scoring::SettingPolicy::force_reference_free, 1);
    CHECK(with_refs == without);
  }
  SUBCASE("n_refs = 1 differs from n_refs = 4 only through the reference set") {
    const double one = foil_accuracy(model, pairs, providers,
                                     scoring::SettingPolicy::auto_detect, 1);
    const double four = foil_accuracy(model, pairs, providers,
                                      scoring::SettingPolicy::auto_detect, 4);
    CHECK(one >= 0.0);
    CHECK(one <= 100.0);
    CHECK(four >= 0.0);
    CHECK(four <= 100.0);
  }
}

TEST_CASE("encoder restriction keeps order and rejects empty GEMs") {
  scoring::ModelConfig base;
  base.img_encoders = {{"a", Modality::both, 4}, {"b", Modality::both, 6}};
  base.ref_encoders = {{"a", Modality::both, 4}, {"c", Modality::text, 8}};

  scoring::ModelConfig only_a = restrict_encoders(base, {"a"});
  REQUIRE(only_a.img_encoders.size() == 1);
  REQUIRE(only_a.ref_encoders.size() == 1);
  CHECK(only_a.img_encoders[0].name == "a");
  CHECK(only_a.ref_encoders[0].name == "a");

  scoring::ModelConfig both = restrict_encoders(base, {"c", "b", "a"});
  REQUIRE(both.img_encoders.size() == 2);
  CHECK(both.img_encoders[0].name == "a");
  CHECK(both.img_encoders[1].name == "b");
  REQUIRE(both.ref_encoders.size() == 2);
  CHECK(both.ref_encoders[0].name == "a");
  CHECK(both.ref_encoders[1].name == "c");

  CHECK_THROWS_AS(restrict_encoders(base, {"b"}), ConfigError);
  CHECK_THROWS_AS(restrict_encoders(base, {}), ConfigError);
  CHECK_THROWS_AS(restrict_encoders(base, {"nope"}), ConfigError);
}

TEST_CASE("ablation rows cover every axis value with the expected labels") {
  data::DatasetSplit split = tiny_split();
  ProviderSet providers = tiny_providers();
  AblationAxes axes;
  axes.arsm_modes = {arsm::Mode::none, arsm::Mode::ruse_fixed};
  axes.encoder_subsets = {{"e1"}};
  axes.dataset_filters = {train::DatasetFilter::all};

  auto rows = run_ablation(tiny_config(), fast_config(), nullptr, split,
                           providers, axes);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].label == "none");
  CHECK(rows[1].label == "RUSE-type");
  CHECK(rows[2].label == "encoders:e1");
  CHECK(rows[3].label == "filter:all");
  for (const auto& row : rows) {
    CHECK(std::isfinite(row.report.tau_b));
    CHECK(row.report.tau_b >= -1.0);
    CHECK(row.report.tau_b <= 1.0);
    CHECK(row.best_val_tau_c >= -1.0);
    CHECK(row.best_val_tau_c <= 1.0);
    CHECK(row.report.n == 6);
    CHECK(row.wall_seconds > 0.0);
  }

  CHECK_THROWS_AS(
      run_ablation(tiny_config(), fast_config(), nullptr, split, providers, {}),
      ConfigError);
}

TEST_CASE("ablation runs are deterministic for a fixed seed") {
  data::DatasetSplit split = tiny_split();
  ProviderSet providers = tiny_providers();
  AblationAxes axes;
  axes.arsm_modes = {arsm::Mode::adaptive};
  axes.dataset_filters = {train::DatasetFilter::reference_free_only};

  auto a = run_ablation(tiny_config(), fast_config(), nullptr, split, providers,
                        axes);
  auto b = run_ablation(tiny_config(), fast_config(), nullptr, split, providers,
                        axes);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].label == b[i].label);
    CHECK(a[i].report.tau_b == b[i].report.tau_b);
    CHECK(a[i].report.tau_c == b[i].report.tau_c);
    CHECK(a[i].best_val_tau_c == b[i].best_val_tau_c);
  }
}

TEST_CASE("benchmark report files are self-describing and timing is opt-in") {
  scoring::PearlModel model(tiny_config(), 3, nullptr);
  ProviderSet providers = tiny_providers();
  auto records = judged_records(8, true);
  BenchmarkResult result = run_benchmark(model, records, providers);

  TempFile timed("pearl_eval_report_timed.jsonl");
  TempFile plain("pearl_eval_report_plain.jsonl");
  TempFile again("pearl_eval_report_again.jsonl");
  const std::string echo = "vss.d_model = 8\n";
  write_benchmark_report(timed.path, result, echo, 77, true);
  write_benchmark_report(plain.path, result, echo, 77, false);
  write_benchmark_report(again.path, result, echo, 77, false);

  auto lines = read_json_lines(timed.path);
  REQUIRE(lines.size() == 3);
  CHECK(lines[0]["type"] == "header");
  CHECK(lines[0]["version"] == 1);
  CHECK(lines[0]["seed"] == 77);
  CHECK(lines[0]["config_hash"] == emb::text_key(echo));
  CHECK(lines[1]["type"] == "correlation");
  CHECK(lines[1]["tau_b"].get<double>() == result.report.tau_b);
  CHECK(lines[1]["n"].get<std::int64_t>() == result.n_scored);
  CHECK(lines[2]["type"] == "timing");
  CHECK(lines[2]["wall_seconds"].get<double>() == result.wall_seconds);

  auto plain_lines = read_json_lines(plain.path);
  REQUIRE(plain_lines.size() == 2);
  CHECK(plain_lines[1]["type"] == "correlation");
  CHECK(read_bytes(plain.path) == read_bytes(again.path));
}

TEST_CASE("ablation report lists one labeled row per variant") {
  std::vector<AblationRow> rows(2);
  rows[0].label = "none";
  rows[0].report.tau_b = 0.25;
  rows[0].report.tau_c = 0.24;
  rows[0].best_val_tau_c = 0.3;
  rows[0].wall_seconds = 1.5;
  rows[1].label = "encoders:e1";
  rows[1].report.tau_b = -0.5;
  rows[1].report.tau_c = -0.5;
  rows[1].best_val_tau_c = 0.1;
  rows[1].wall_seconds = 2.5;

  TempFile path("pearl_eval_ablation.jsonl");
  write_ablation_report(path.path, rows, "echo", 5, false);
  auto lines = read_json_lines(path.path);
  REQUIRE(lines.size() == 3);
  CHECK(lines[0]["type"] == "header");
  CHECK(lines[1]["type"] == "ablation_row");
  CHECK(lines[1]["label"] == "none");
  CHECK(lines[1]["tau_b"].get<double>() == 0.25);
  CHECK(lines[1]["best_val_tau_c"].get<double>() == 0.3);
  CHECK(!lines[1].contains("wall_seconds"));
  CHECK(lines[2]["label"] == "encoders:e1");

  write_ablation_report(path.path, rows, "echo", 5, true);
  auto timed = read_json_lines(path.path);
  CHECK(timed[1]["wall_seconds"].get<double>() == 1.5);

  CHECK_THROWS_AS(
      write_ablation_report("/nonexistent-dir/x.jsonl", rows, "e", 1, false),
      IoError);
}
