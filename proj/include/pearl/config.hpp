#pragma once

#include <map>
#include <string>
#include <vector>

#include "pearl/arsm.hpp"
#include "pearl/scoring.hpp"
#include "pearl/train.hpp"
#include "pearl/vss.hpp"

// Flat `section.key = value` configuration with typed access and a canonical
// echo for artifact headers. Precedence: flags > environment > file > defaults.
namespace pearl::cfg {

using KvMap = std::map<std::string, std::string>;

enum class ValueType { text, integer, unsigned_integer, real, boolean };

struct KeySpec {
  ValueType type;
  std::string default_value;
};

// Every recognized key with its type and default. Unknown keys are rejected
// at resolve time.
const std::map<std::string, KeySpec>& key_table();

// Environment override name for a key: PEARL_ prefix, dots to underscores,
// uppercased (train.lr -> PEARL_TRAIN_LR).
std::string env_var_name(const std::string& key);

// Parses config file text. Blank lines and # comments are skipped; later
// duplicates win. Errors carry the 1-based line number.
KvMap parse_config_text(const std::string& text);
KvMap load_config_file(const std::string& path);

// Fully resolved view: every known key present, values canonicalized through
// their declared type so the echo is stable across spellings.
class RunConfig {
 public:
  static RunConfig resolve(const KvMap& file_values, const KvMap& flag_values,
                           bool use_env = true);

  const std::string& raw(const std::string& key) const;
  std::string get_string(const std::string& key) const;
  std::int64_t get_int(const std::string& key) const;
  std::uint64_t get_uint(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;

  // Sorted `key = value` lines; hash this for artifact headers.
  std::string echo() const;

  const KvMap& values() const { return values_; }

 private:
  KvMap values_;
};

// Comma-separated encoder list, each item name:dim or name:dim:modality
// (modality defaults to both).
std::vector<emb::EncoderSpec> parse_encoder_list(const std::string& text);
std::string encoder_list_string(const std::vector<emb::EncoderSpec>& encoders);

arsm::HadamardConfig hadamard_config_from(const RunConfig& rc);
arsm::PretrainBudget pretrain_budget_from(const RunConfig& rc);
vss::VssConfig vss_config_from(const RunConfig& rc);
scoring::ModelConfig model_config_from(const RunConfig& rc);
train::TrainConfig train_config_from(const RunConfig& rc);

}  // namespace pearl::cfg
