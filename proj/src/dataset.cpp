#include "pearl/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <unordered_set>

#include "json.hpp"
#include "pearl/common.hpp"

namespace pearl::data {

namespace {

using nlohmann::json;

[[noreturn]] void fail_line(const std::string& path, std::size_t line,
                            const std::string& what) {
  throw ValidationError(path + ":" + std::to_string(line) + ": " + what);
}

void warn(std::vector<std::string>* sink, const std::string& msg) {
  if (sink) {
    sink->push_back(msg);
  } else {
    std::fprintf(stderr, "warning: %s\n", msg.c_str());
  }
}

json require_key(const json& obj, const char* key, const std::string& path,
                 std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) fail_line(path, line, std::string("missing key '") + key + "'");
  return *it;
}

CaptionRecord parse_record(const json& obj, const std::string& path,
                           std::size_t line, std::vector<std::string>* warnings) {
  static const std::unordered_set<std::string> known = {
      "sample_id", "image_key", "candidate", "references", "judgment",
      "raw_judgment"};
  if (!obj.is_object()) fail_line(path, line, "record is not an object");
  for (const auto& [key, _] : obj.items()) {
    if (!known.count(key)) {
      warn(warnings, path + ":" + std::to_string(line) + ": ignoring unknown key '" +
                         key + "'");
    }
  }

  CaptionRecord rec;
  json v = require_key(obj, "sample_id", path, line);
  if (!v.is_string() || v.get<std::string>().empty()) {
    fail_line(path, line, "sample_id must be a non-empty string");
  }
  rec.sample_id = v.get<std::string>();

  v = require_key(obj, "image_key", path, line);
  if (!v.is_string() || v.get<std::string>().empty()) {
    fail_line(path, line, "image_key must be a non-empty string");
  }
  rec.image_key = v.get<std::string>();

  v = require_key(obj, "candidate", path, line);
  if (!v.is_string() || v.get<std::string>().empty()) {
    fail_line(path, line, "candidate must be a non-empty string");
  }
  rec.candidate = v.get<std::string>();

  v = require_key(obj, "references", path, line);
  if (!v.is_array()) fail_line(path, line, "references must be an array");
  for (const auto& ref : v) {
    if (!ref.is_string()) fail_line(path, line, "references must contain strings");
    rec.references.push_back(ref.get<std::string>());
  }

  if (auto it = obj.find("judgment"); it != obj.end()) {
    if (!it->is_number()) fail_line(path, line, "judgment must be a number");
    double j = it->get<double>();
    if (!(j >= 0.0 && j <= 1.0)) {
      fail_line(path, line, "judgment " + std::to_string(j) + " outside [0,1]");
    }
    rec.judgment = j;
  }
  if (auto it = obj.find("raw_judgment"); it != obj.end()) {
    if (!it->is_number_integer()) {
      fail_line(path, line, "raw_judgment must be an integer");
    }
    int raw = it->get<int>();
    if (raw < 1 || raw > 5) {
      fail_line(path, line, "raw_judgment " + std::to_string(raw) + " outside 1..5");
    }
    rec.raw_judgment = raw;
  }
  return rec;
}

}  // namespace

std::vector<CaptionRecord> load_dataset(const std::string& path,
                                        std::vector<std::string>* warnings) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset file '" + path + "'");

  std::vector<CaptionRecord> records;
  std::unordered_set<std::string> seen_ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      fail_line(path, lineno, std::string("malformed record: ") + e.what());
    }
    CaptionRecord rec = parse_record(obj, path, lineno, warnings);
    if (!seen_ids.insert(rec.sample_id).second) {
      fail_line(path, lineno, "duplicate sample_id '" + rec.sample_id + "'");
    }
    records.push_back(std::move(rec));
  }
  return records;
}

void save_dataset(const std::string& path,
                  const std::vector<CaptionRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write dataset file '" + path + "'");
  for (const auto& rec : records) {
    json obj;
    obj["sample_id"] = rec.sample_id;
    obj["image_key"] = rec.image_key;
    obj["candidate"] = rec.candidate;
    obj["references"] = rec.references;
    if (rec.judgment) obj["judgment"] = *rec.judgment;
    if (rec.raw_judgment) obj["raw_judgment"] = *rec.raw_judgment;
    out << obj.dump() << '\n';
  }
  if (!out) throw IoError("failed writing dataset file '" + path + "'");
}

std::vector<FoilPair> load_foil_pairs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open foil pair file '" + path + "'");
  std::vector<FoilPair> pairs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      fail_line(path, lineno, std::string("malformed record: ") + e.what());
    }
    FoilPair p;
    p.image_key = require_key(obj, "image_key", path, lineno).get<std::string>();
    p.correct = require_key(obj, "correct", path, lineno).get<std::string>();
    p.foil = require_key(obj, "foil", path, lineno).get<std::string>();
    for (const auto& ref : require_key(obj, "references", path, lineno)) {
      p.references.push_back(ref.get<std::string>());
    }
    pairs.push_back(std::move(p));
  }
  return pairs;
}

void save_foil_pairs(const std::string& path, const std::vector<FoilPair>& pairs) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write foil pair file '" + path + "'");
  for (const auto& p : pairs) {
    json obj;
    obj["image_key"] = p.image_key;
    obj["correct"] = p.correct;
    obj["foil"] = p.foil;
    obj["references"] = p.references;
    out << obj.dump() << '\n';
  }
  if (!out) throw IoError("failed writing foil pair file '" + path + "'");
}

double normalize_judgment(int raw) {
  if (raw < 1 || raw > 5) {
    throw ValidationError("raw judgment " + std::to_string(raw) +
                          " outside the five-point scale 1..5");
  }
  return double(raw - 1) / 4.0;
}

DatasetSplit split_dataset(const std::vector<CaptionRecord>& records,
                           double train_frac, double validation_frac,
                           double test_frac, std::uint64_t seed) {
  if (records.empty()) throw ValidationError("cannot split an empty dataset");
  if (train_frac <= 0.0 || validation_frac <= 0.0 || test_frac <= 0.0) {
    throw ValidationError("split fractions must be positive");
  }
  if (std::abs(train_frac + validation_frac + test_frac - 1.0) > 1e-9) {
    throw ValidationError("split fractions must sum to 1");
  }

  std::vector<std::size_t> order(records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const auto n = double(records.size());
  std::size_t n_train = std::size_t(std::llround(train_frac * n));
  std::size_t n_val =
      std::size_t(std::llround((train_frac + validation_frac) * n)) - n_train;
  n_train = std::min(n_train, records.size());
  n_val = std::min(n_val, records.size() - n_train);

  DatasetSplit split;
  split.seed = seed;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const CaptionRecord& rec = records[order[i]];
    if (i < n_train) {
      split.train.push_back(rec);
    } else if (i < n_train + n_val) {
      split.validation.push_back(rec);
    } else {
      split.test.push_back(rec);
    }
  }
  return split;
}

}  // namespace pearl::data
