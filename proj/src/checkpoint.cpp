#include "pearl/checkpoint.hpp"

#include <set>

#include <fmt/format.h>

#include "pearl/binio.hpp"
#include "pearl/common.hpp"
#include "pearl/text_key.hpp"

namespace pearl::ckpt {

namespace {
constexpr char kMagic[] = "PCKP";
constexpr std::uint8_t kVersion = 0x01;
}  // namespace

Checkpoint snapshot(std::uint64_t seed, const std::string& config_echo,
                    const train::TrainState& state,
                    const nn::ParamRegistry& reg) {
  Checkpoint c;
  c.seed = seed;
  c.config_echo = config_echo;
  c.config_hash = emb::text_key(config_echo);
  c.state = state;
  for (const auto& name : reg.names()) {
    const ad::Var v = reg.get(name);
    c.params.push_back({name, v.value(), v.node()->requires_grad});
  }
  return c;
}

void save_checkpoint(const std::string& path, const Checkpoint& c) {
  io::ByteWriter out;
  out.raw(kMagic, 4);
  out.u8(kVersion);
  out.u64(c.seed);
  out.str32(c.config_echo);
  out.str16(c.config_hash.empty() ? emb::text_key(c.config_echo) : c.config_hash);

  out.u32(std::uint32_t(c.state.epoch));
  out.u32(std::uint32_t(c.state.best_epoch));
  out.f64(c.state.best_val_tau_c);
  out.u8(c.state.stopped_early ? 1 : 0);
  out.u32(std::uint32_t(c.state.val_tau_c_history.size()));
  for (double v : c.state.val_tau_c_history) out.f64(v);

  out.u32(std::uint32_t(c.params.size()));
  for (const auto& p : c.params) {
    out.str16(p.name);
    out.u8(p.trainable ? 1 : 0);
    out.mat(p.value);
  }
  out.write_file(path);
}

Checkpoint load_checkpoint(const std::string& path) {
  io::ByteReader r = io::ByteReader::from_file(path);
  r.expect_magic(kMagic, kVersion, "checkpoint");
  Checkpoint c;
  c.seed = r.u64();
  c.config_echo = r.str32();
  c.config_hash = r.str16();
  if (c.config_hash != emb::text_key(c.config_echo)) {
    r.fail("config hash does not match config text");
  }

  c.state.epoch = int(r.u32());
  c.state.best_epoch = int(r.u32());
  c.state.best_val_tau_c = r.f64();
  c.state.stopped_early = r.u8() != 0;
  const std::uint32_t hist = r.u32();
  for (std::uint32_t i = 0; i < hist; ++i) {
    c.state.val_tau_c_history.push_back(r.f64());
  }

  const std::uint32_t count = r.u32();
  std::set<std::string> seen;
  for (std::uint32_t i = 0; i < count; ++i) {
    ParamBlob p;
    p.name = r.str16();
    p.trainable = r.u8() != 0;
    p.value = r.mat();
    if (!seen.insert(p.name).second) r.fail("duplicate parameter '" + p.name + "'");
    c.params.push_back(std::move(p));
  }
  r.expect_end();
  return c;
}

void apply_params(const Checkpoint& c, nn::ParamRegistry& reg) {
  if (c.params.size() != reg.size()) {
    throw ConfigError(fmt::format(
        "checkpoint has {} parameters but the model has {}", c.params.size(),
        reg.size()));
  }
  for (const auto& p : c.params) {
    if (!reg.has(p.name)) {
      throw ConfigError("checkpoint parameter '" + p.name +
                        "' does not exist in the model");
    }
    ad::Var v = reg.get(p.name);
    if (v.value().rows() != p.value.rows() || v.value().cols() != p.value.cols()) {
      throw ConfigError(fmt::format(
          "checkpoint parameter '{}' is {}x{} but the model expects {}x{}",
          p.name, p.value.rows(), p.value.cols(), v.value().rows(),
          v.value().cols()));
    }
    v.mutable_value() = p.value;
    v.node()->requires_grad = p.trainable;
  }
}

}  // namespace pearl::ckpt
