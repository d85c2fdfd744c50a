#pragma once

#include <optional>
#include <string>
#include <vector>

// Judged caption samples: on-disk schema, validation, and splitting.
namespace pearl::data {

struct CaptionRecord {
  std::string sample_id;
  std::string image_key;
  std::string candidate;
  std::vector<std::string> references;  // empty = reference-free sample
  std::optional<double> judgment;       // in [0,1]
  std::optional<int> raw_judgment;      // original 1..5 rating, kept for audit

  bool operator==(const CaptionRecord&) const = default;
};

struct DatasetSplit {
  std::vector<CaptionRecord> train;
  std::vector<CaptionRecord> validation;
  std::vector<CaptionRecord> test;
  std::uint64_t seed = 0;
};

// A hallucination-detection pair: same image and references, one faithful
// and one mismatched caption.
struct FoilPair {
  std::string image_key;
  std::string correct;
  std::string foil;
  std::vector<std::string> references;

  bool operator==(const FoilPair&) const = default;
};

// Line-delimited records; malformed input errors name the offending line.
// Unknown keys are reported through *warnings when given, else to stderr.
std::vector<CaptionRecord> load_dataset(const std::string& path,
                                        std::vector<std::string>* warnings = nullptr);
void save_dataset(const std::string& path,
                  const std::vector<CaptionRecord>& records);

std::vector<FoilPair> load_foil_pairs(const std::string& path);
void save_foil_pairs(const std::string& path, const std::vector<FoilPair>& pairs);

// Maps the five-point rating scale onto [0,1] affinely.
double normalize_judgment(int raw);

// Deterministic shuffle-and-partition; fractions must be positive and sum
// to 1 within 1e-9.
DatasetSplit split_dataset(const std::vector<CaptionRecord>& records,
                           double train_frac, double validation_frac,
                           double test_frac, std::uint64_t seed);

}  // namespace pearl::data
