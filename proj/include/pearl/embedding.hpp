#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

// Frozen-encoder embeddings: persisted tables plus lookup providers.
namespace pearl::emb {

enum class Modality { image, text, both };

std::string modality_name(Modality m);
Modality parse_modality(const std::string& s);

struct EncoderSpec {
  std::string name;
  Modality modality = Modality::text;
  Eigen::Index dim = 0;
};

// One persisted (encoder, modality) table. Keys are image keys or hashed
// caption text; vectors are stored in file order as float32.
struct EmbeddingTable {
  EncoderSpec encoder;  // modality is image or text, never both
  std::map<std::string, Eigen::VectorXf> entries;
};

// Binary table format, fixed for interchange: magic "PEMB", version 0x01,
// little-endian u32 dim, u32 count, then per record a u16 key length, the
// key bytes, and dim float32 values. A sidecar <path>.meta line records
// encoder name and modality.
void save_table(const std::string& path, const EmbeddingTable& table);
EmbeddingTable load_table(const std::string& path);

// Lookup interface over one encoder; throws MissingEmbeddingError on a key
// miss and ConfigError on an unsupported modality.
class Provider {
 public:
  virtual ~Provider() = default;
  const EncoderSpec& spec() const { return spec_; }
  virtual Eigen::VectorXd embed_text(const std::string& text) const = 0;
  virtual Eigen::VectorXd embed_image(const std::string& image_key) const = 0;

 protected:
  explicit Provider(EncoderSpec spec) : spec_(std::move(spec)) {}
  EncoderSpec spec_;
};

// Serves precomputed tables; one per modality.
class TableProvider : public Provider {
 public:
  explicit TableProvider(EmbeddingTable table);
  TableProvider(EmbeddingTable image_table, EmbeddingTable text_table);
  Eigen::VectorXd embed_text(const std::string& text) const override;
  Eigen::VectorXd embed_image(const std::string& image_key) const override;

 private:
  Eigen::VectorXd lookup(const EmbeddingTable& table, const std::string& key) const;
  EmbeddingTable image_, text_;
};

// Deterministic pseudo-random unit vectors for any key; test fixture and
// desk-scale stand-in when no table is supplied.
class HashProvider : public Provider {
 public:
  HashProvider(std::string name, Eigen::Index dim, std::uint64_t seed,
               Modality modality = Modality::both);
  Eigen::VectorXd embed_text(const std::string& text) const override;
  Eigen::VectorXd embed_image(const std::string& image_key) const override;

 private:
  Eigen::VectorXd generate(const std::string& tag) const;
  std::uint64_t seed_;
};

// Named collection of providers covering a model's encoder list.
class ProviderSet {
 public:
  void add(std::unique_ptr<Provider> provider);
  const Provider& get(const std::string& name) const;
  bool has(const std::string& name) const;
  std::vector<std::string> names() const;

 private:
  std::map<std::string, std::unique_ptr<Provider>> providers_;
};

// Loads every *.pemb table under dir and groups them into providers by
// encoder name; modalities of one encoder must agree on dim.
ProviderSet load_providers(const std::string& dir);

}  // namespace pearl::emb
