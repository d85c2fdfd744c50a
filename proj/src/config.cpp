#include "pearl/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "pearl/common.hpp"

namespace pearl::cfg {

namespace {

std::string trim(const std::string& s) {
  std::size_t begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  std::size_t end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(item);
  if (!s.empty() && s.back() == sep) out.push_back("");
  return out;
}

std::int64_t parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(
        fmt::format("config key '{}': cannot parse '{}' as an integer", key, value));
  }
}

std::uint64_t parse_uint(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    if (!value.empty() && value[0] == '-') throw std::invalid_argument(value);
    const unsigned long long v = std::stoull(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(fmt::format(
        "config key '{}': cannot parse '{}' as a non-negative integer", key, value));
  }
}

double parse_real(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(
        fmt::format("config key '{}': cannot parse '{}' as a real", key, value));
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  std::string v;
  for (char c : value) v += char(std::tolower(static_cast<unsigned char>(c)));
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(
      fmt::format("config key '{}': cannot parse '{}' as a boolean", key, value));
}

std::string canonicalize(const std::string& key, ValueType type,
                         const std::string& value) {
  switch (type) {
    case ValueType::text:
      return value;
    case ValueType::integer:
      return fmt::format("{}", parse_int(key, value));
    case ValueType::unsigned_integer:
      return fmt::format("{}", parse_uint(key, value));
    case ValueType::real:
      return fmt::format("{}", parse_real(key, value));
    case ValueType::boolean:
      return parse_bool(key, value) ? "true" : "false";
  }
  throw ConfigError("config key '" + key + "': unhandled value type");
}

}  // namespace

const std::map<std::string, KeySpec>& key_table() {
  static const std::map<std::string, KeySpec> table = {
      {"data.seed", {ValueType::unsigned_integer, "0"}},
      {"data.dim", {ValueType::integer, "64"}},
      {"data.n_images", {ValueType::integer, "200"}},
      {"data.captions_per_image", {ValueType::integer, "3"}},
      {"data.train_frac", {ValueType::real, "0.7"}},
      {"data.validation_frac", {ValueType::real, "0.15"}},
      {"data.test_frac", {ValueType::real, "0.15"}},
      {"embeddings.img_encoders",
       {ValueType::text, "clip:512,blip2:768,beit3:1024"}},
      {"embeddings.ref_encoders",
       {ValueType::text, "blip2:768,beit3:1024,stella:1024:text"}},
      {"arsm.mode", {ValueType::text, "adaptive"}},
      {"arsm.diff_init", {ValueType::text, "identity"}},
      {"arsm.hadamard.layers", {ValueType::integer, "8"}},
      {"arsm.hadamard.hidden_channels", {ValueType::integer, "16"}},
      {"arsm.hadamard.a", {ValueType::real, "0"}},
      {"arsm.hadamard.b", {ValueType::real, "1"}},
      {"arsm.hadamard.pretrain_dim", {ValueType::integer, "64"}},
      {"arsm.hadamard.n_samples", {ValueType::integer, "20000"}},
      {"arsm.hadamard.seed", {ValueType::unsigned_integer, "0"}},
      {"arsm.hadamard.batch_size", {ValueType::integer, "64"}},
      {"arsm.hadamard.max_epochs", {ValueType::integer, "20"}},
      {"arsm.hadamard.lr", {ValueType::real, "0.001"}},
      {"arsm.hadamard.tolerance", {ValueType::real, "0.001"}},
      {"arsm.hadamard.heldout_samples", {ValueType::integer, "2000"}},
      {"vss.d_model", {ValueType::integer, "256"}},
      {"vss.n_queries", {ValueType::integer, "8"}},
      {"vss.layers_transformer", {ValueType::integer, "2"}},
      {"vss.layers_qformer", {ValueType::integer, "1"}},
      {"vss.mlp_hidden", {ValueType::integer, "0"}},
      {"vss.n_heads", {ValueType::integer, "4"}},
      {"scoring.lambda", {ValueType::real, "0.5"}},
      {"train.lr", {ValueType::real, "1e-05"}},
      {"train.beta1", {ValueType::real, "0.9"}},
      {"train.beta2", {ValueType::real, "0.999"}},
      {"train.batch_size", {ValueType::integer, "16"}},
      {"train.max_epochs", {ValueType::integer, "5"}},
      {"train.huber_delta", {ValueType::real, "1"}},
      {"train.seed", {ValueType::unsigned_integer, "0"}},
      {"train.filter", {ValueType::text, "all"}},
      {"eval.n_refs", {ValueType::integer, "4"}},
      {"eval.include_timing", {ValueType::boolean, "true"}},
  };
  return table;
}

std::string env_var_name(const std::string& key) {
  std::string out = "PEARL_";
  for (char c : key) {
    out += c == '.' ? '_' : char(std::toupper(static_cast<unsigned char>(c)));
  }
  return out;
}

KvMap parse_config_text(const std::string& text) {
  KvMap out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(
          fmt::format("config line {}: expected 'key = value', got '{}'",
                      line_no, stripped));
    }
    const std::string key = trim(stripped.substr(0, eq));
    if (key.empty()) {
      throw ConfigError(fmt::format("config line {}: empty key", line_no));
    }
    out[key] = trim(stripped.substr(eq + 1));
  }
  return out;
}

KvMap load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

RunConfig RunConfig::resolve(const KvMap& file_values, const KvMap& flag_values,
                             bool use_env) {
  const auto& table = key_table();
  auto check_known = [&](const KvMap& kv, const char* origin) {
    for (const auto& [key, _] : kv) {
      if (!table.count(key)) {
        throw ConfigError(fmt::format("unknown config key '{}' (from {})", key, origin));
      }
    }
  };
  check_known(file_values, "config file");
  check_known(flag_values, "flags");

  RunConfig rc;
  for (const auto& [key, spec] : table) {
    std::string value = spec.default_value;
    if (auto it = file_values.find(key); it != file_values.end()) value = it->second;
    if (use_env) {
      if (const char* env = std::getenv(env_var_name(key).c_str())) value = env;
    }
    if (auto it = flag_values.find(key); it != flag_values.end()) value = it->second;
    rc.values_[key] = canonicalize(key, spec.type, value);
  }
  return rc;
}

const std::string& RunConfig::raw(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

std::string RunConfig::get_string(const std::string& key) const { return raw(key); }

std::int64_t RunConfig::get_int(const std::string& key) const {
  return parse_int(key, raw(key));
}

std::uint64_t RunConfig::get_uint(const std::string& key) const {
  return parse_uint(key, raw(key));
}

double RunConfig::get_double(const std::string& key) const {
  return parse_real(key, raw(key));
}

bool RunConfig::get_bool(const std::string& key) const {
  return parse_bool(key, raw(key));
}

std::string RunConfig::echo() const {
  std::string out;
  for (const auto& [key, value] : values_) {
    out += fmt::format("{} = {}\n", key, value);
  }
  return out;
}

std::vector<emb::EncoderSpec> parse_encoder_list(const std::string& text) {
  std::vector<emb::EncoderSpec> out;
  if (trim(text).empty()) return out;
  for (const std::string& raw_item : split(text, ',')) {
    const std::string item = trim(raw_item);
    if (item.empty()) throw ConfigError("encoder list has an empty item");
    const std::vector<std::string> parts = split(item, ':');
    if (parts.size() < 2 || parts.size() > 3) {
      throw ConfigError(fmt::format(
          "encoder '{}' must be name:dim or name:dim:modality", item));
    }
    emb::EncoderSpec spec;
    spec.name = trim(parts[0]);
    if (spec.name.empty()) throw ConfigError("encoder item '" + item + "' has no name");
    spec.dim = Eigen::Index(parse_int("encoder '" + spec.name + "' dim", trim(parts[1])));
    spec.modality =
        parts.size() == 3 ? emb::parse_modality(trim(parts[2])) : emb::Modality::both;
    out.push_back(std::move(spec));
  }
  return out;
}

std::string encoder_list_string(const std::vector<emb::EncoderSpec>& encoders) {
  std::string out;
  for (std::size_t i = 0; i < encoders.size(); ++i) {
    if (i) out += ',';
    out += fmt::format("{}:{}:{}", encoders[i].name, encoders[i].dim,
                       emb::modality_name(encoders[i].modality));
  }
  return out;
}

arsm::HadamardConfig hadamard_config_from(const RunConfig& rc) {
  arsm::HadamardConfig cfg;
  cfg.layers = int(rc.get_int("arsm.hadamard.layers"));
  cfg.hidden_channels = int(rc.get_int("arsm.hadamard.hidden_channels"));
  cfg.a = rc.get_double("arsm.hadamard.a");
  cfg.b = rc.get_double("arsm.hadamard.b");
  return cfg;
}

arsm::PretrainBudget pretrain_budget_from(const RunConfig& rc) {
  arsm::PretrainBudget budget;
  budget.batch_size = int(rc.get_int("arsm.hadamard.batch_size"));
  budget.max_epochs = int(rc.get_int("arsm.hadamard.max_epochs"));
  budget.lr = rc.get_double("arsm.hadamard.lr");
  budget.tolerance = rc.get_double("arsm.hadamard.tolerance");
  budget.heldout_samples = int(rc.get_int("arsm.hadamard.heldout_samples"));
  return budget;
}

vss::VssConfig vss_config_from(const RunConfig& rc) {
  vss::VssConfig cfg;
  cfg.d_model = Eigen::Index(rc.get_int("vss.d_model"));
  cfg.n_queries = Eigen::Index(rc.get_int("vss.n_queries"));
  cfg.layers_transformer = int(rc.get_int("vss.layers_transformer"));
  cfg.layers_qformer = int(rc.get_int("vss.layers_qformer"));
  cfg.mlp_hidden = Eigen::Index(rc.get_int("vss.mlp_hidden"));
  cfg.n_heads = int(rc.get_int("vss.n_heads"));
  return cfg;
}

scoring::ModelConfig model_config_from(const RunConfig& rc) {
  scoring::ModelConfig cfg;
  cfg.img_encoders = parse_encoder_list(rc.get_string("embeddings.img_encoders"));
  cfg.ref_encoders = parse_encoder_list(rc.get_string("embeddings.ref_encoders"));
  cfg.vss = vss_config_from(rc);
  cfg.arsm_mode = arsm::parse_mode(rc.get_string("arsm.mode"));
  cfg.diff_init = arsm::parse_diff_init(rc.get_string("arsm.diff_init"));
  cfg.hadamard = hadamard_config_from(rc);
  cfg.lambda = rc.get_double("scoring.lambda");
  return cfg;
}

train::TrainConfig train_config_from(const RunConfig& rc) {
  train::TrainConfig cfg;
  cfg.lr = rc.get_double("train.lr");
  cfg.beta1 = rc.get_double("train.beta1");
  cfg.beta2 = rc.get_double("train.beta2");
  cfg.batch_size = int(rc.get_int("train.batch_size"));
  cfg.max_epochs = int(rc.get_int("train.max_epochs"));
  cfg.huber_delta = rc.get_double("train.huber_delta");
  cfg.seed = rc.get_uint("train.seed");
  cfg.dataset_filter = train::parse_filter(rc.get_string("train.filter"));
  return cfg;
}

}  // namespace pearl::cfg
