#include "pearl/embedding.hpp"

#include <filesystem>
#include <fstream>
#include <random>

#include "pearl/binio.hpp"
#include "pearl/common.hpp"
#include "pearl/text_key.hpp"

namespace pearl::emb {

namespace {

namespace fs = std::filesystem;

std::string meta_path(const std::string& path) { return path + ".meta"; }

void save_meta(const std::string& path, const EncoderSpec& spec) {
  std::ofstream out(meta_path(path), std::ios::trunc);
  if (!out) throw IoError("cannot write sidecar '" + meta_path(path) + "'");
  out << "encoder=" << spec.name << " modality=" << modality_name(spec.modality)
      << "\n";
}

EncoderSpec load_meta(const std::string& path) {
  std::ifstream in(meta_path(path));
  if (!in) throw IoError("missing sidecar '" + meta_path(path) + "'");
  std::string line;
  std::getline(in, line);
  EncoderSpec spec;
  const std::string enc_tag = "encoder=", mod_tag = " modality=";
  auto mod_at = line.find(mod_tag);
  if (line.rfind(enc_tag, 0) != 0 || mod_at == std::string::npos) {
    throw ValidationError("malformed sidecar '" + meta_path(path) + "'");
  }
  spec.name = line.substr(enc_tag.size(), mod_at - enc_tag.size());
  spec.modality = parse_modality(line.substr(mod_at + mod_tag.size()));
  if (spec.name.empty()) {
    throw ValidationError("sidecar '" + meta_path(path) + "' has an empty encoder name");
  }
  return spec;
}

void check_finite(const Eigen::VectorXd& v, const std::string& encoder,
                  const std::string& key) {
  if (!v.allFinite()) {
    throw ValidationError("non-finite embedding for key '" + key +
                          "' in encoder '" + encoder + "'");
  }
}

}  // namespace

std::string modality_name(Modality m) {
  switch (m) {
    case Modality::image: return "image";
    case Modality::text: return "text";
    case Modality::both: return "both";
  }
  throw ConfigError("unknown modality");
}

Modality parse_modality(const std::string& s) {
  if (s == "image") return Modality::image;
  if (s == "text") return Modality::text;
  if (s == "both") return Modality::both;
  throw ValidationError("unknown modality '" + s + "'");
}

void save_table(const std::string& path, const EmbeddingTable& table) {
  if (table.encoder.dim <= 0) throw ValidationError("table dim must be positive");
  if (table.encoder.modality == Modality::both) {
    throw ValidationError("a table file holds a single modality");
  }
  io::ByteWriter out;
  out.raw("PEMB", 4);
  out.u8(0x01);
  out.u32(std::uint32_t(table.encoder.dim));
  out.u32(std::uint32_t(table.entries.size()));
  for (const auto& [key, vec] : table.entries) {
    if (vec.size() != table.encoder.dim) {
      throw ValidationError("entry '" + key + "' has length " +
                            std::to_string(vec.size()) + ", expected " +
                            std::to_string(table.encoder.dim));
    }
    out.str16(key);
    for (Eigen::Index i = 0; i < vec.size(); ++i) out.f32(vec[i]);
  }
  out.write_file(path);
  save_meta(path, table.encoder);
}

EmbeddingTable load_table(const std::string& path) {
  io::ByteReader r = io::ByteReader::from_file(path);
  r.expect_magic("PEMB", 0x01, "embedding table");
  EmbeddingTable table;
  table.encoder = load_meta(path);
  table.encoder.dim = Eigen::Index(r.u32());
  if (table.encoder.dim <= 0) {
    throw ValidationError("'" + path + "' declares a non-positive dim");
  }
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string key = r.str16();
    if (key.empty()) throw ValidationError("'" + path + "' contains an empty key");
    Eigen::VectorXf vec(table.encoder.dim);
    for (Eigen::Index j = 0; j < table.encoder.dim; ++j) vec[j] = r.f32();
    if (!table.entries.emplace(std::move(key), std::move(vec)).second) {
      throw ValidationError("'" + path + "' contains a duplicate key");
    }
  }
  r.expect_end();
  return table;
}

TableProvider::TableProvider(EmbeddingTable table)
    : Provider(table.encoder) {
  if (table.encoder.modality == Modality::image) {
    image_ = std::move(table);
  } else if (table.encoder.modality == Modality::text) {
    text_ = std::move(table);
  } else {
    throw ConfigError("single-table provider needs an image or text table");
  }
}

TableProvider::TableProvider(EmbeddingTable image_table, EmbeddingTable text_table)
    : Provider(image_table.encoder),
      image_(std::move(image_table)),
      text_(std::move(text_table)) {
  if (image_.encoder.modality != Modality::image ||
      text_.encoder.modality != Modality::text) {
    throw ConfigError("two-table provider needs one image and one text table");
  }
  if (image_.encoder.name != text_.encoder.name) {
    throw ConfigError("provider tables belong to different encoders: '" +
                      image_.encoder.name + "' vs '" + text_.encoder.name + "'");
  }
  if (image_.encoder.dim != text_.encoder.dim) {
    throw ValidationError("encoder '" + image_.encoder.name +
                          "' has mismatched dims across modalities");
  }
  spec_.modality = Modality::both;
}

Eigen::VectorXd TableProvider::lookup(const EmbeddingTable& table,
                                      const std::string& key) const {
  auto it = table.entries.find(key);
  if (it == table.entries.end()) {
    throw MissingEmbeddingError(spec_.name, key);
  }
  Eigen::VectorXd v = it->second.cast<double>();
  check_finite(v, spec_.name, key);
  return v;
}

Eigen::VectorXd TableProvider::embed_text(const std::string& text) const {
  if (text_.encoder.dim == 0) {
    throw ConfigError("encoder '" + spec_.name + "' has no text modality");
  }
  return lookup(text_, text_key(text));
}

Eigen::VectorXd TableProvider::embed_image(const std::string& image_key) const {
  if (image_.encoder.dim == 0) {
    throw ConfigError("encoder '" + spec_.name + "' has no image modality");
  }
  return lookup(image_, image_key);
}

HashProvider::HashProvider(std::string name, Eigen::Index dim, std::uint64_t seed,
                           Modality modality)
    : Provider({std::move(name), modality, dim}), seed_(seed) {
  if (dim <= 0) throw ConfigError("provider dim must be positive");
}

Eigen::VectorXd HashProvider::generate(const std::string& tag) const {
  std::mt19937_64 rng(derived_seed(seed_, spec_.name + "/" + tag));
  std::normal_distribution<double> dist(0.0, 1.0);
  Eigen::VectorXd v(spec_.dim);
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = dist(rng);
  v.normalize();
  return v;
}

Eigen::VectorXd HashProvider::embed_text(const std::string& text) const {
  if (spec_.modality == Modality::image) {
    throw ConfigError("encoder '" + spec_.name + "' has no text modality");
  }
  return generate("text/" + text_key(text));
}

Eigen::VectorXd HashProvider::embed_image(const std::string& image_key) const {
  if (spec_.modality == Modality::text) {
    throw ConfigError("encoder '" + spec_.name + "' has no image modality");
  }
  return generate("image/" + image_key);
}

void ProviderSet::add(std::unique_ptr<Provider> provider) {
  const std::string name = provider->spec().name;
  if (!providers_.emplace(name, std::move(provider)).second) {
    throw ConfigError("duplicate provider '" + name + "'");
  }
}

const Provider& ProviderSet::get(const std::string& name) const {
  auto it = providers_.find(name);
  if (it == providers_.end()) {
    throw ConfigError("no provider for encoder '" + name + "'");
  }
  return *it->second;
}

bool ProviderSet::has(const std::string& name) const {
  return providers_.count(name) != 0;
}

std::vector<std::string> ProviderSet::names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : providers_) out.push_back(name);
  return out;
}

ProviderSet load_providers(const std::string& dir) {
  if (!fs::is_directory(dir)) {
    throw IoError("embedding directory '" + dir + "' does not exist");
  }
  std::map<std::string, std::map<Modality, EmbeddingTable>> by_encoder;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() == ".pemb") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& file : files) {
    EmbeddingTable table = load_table(file.string());
    auto& slots = by_encoder[table.encoder.name];
    if (!slots.emplace(table.encoder.modality, std::move(table)).second) {
      throw ValidationError("encoder '" + file.string() +
                            "' appears twice for one modality");
    }
  }
  if (by_encoder.empty()) {
    throw IoError("no .pemb tables found under '" + dir + "'");
  }
  ProviderSet set;
  for (auto& [name, slots] : by_encoder) {
    auto img = slots.find(Modality::image);
    auto txt = slots.find(Modality::text);
    if (img != slots.end() && txt != slots.end()) {
      set.add(std::make_unique<TableProvider>(std::move(img->second),
                                              std::move(txt->second)));
    } else if (img != slots.end()) {
      set.add(std::make_unique<TableProvider>(std::move(img->second)));
    } else {
      set.add(std::make_unique<TableProvider>(std::move(txt->second)));
    }
  }
  return set;
}

}  // namespace pearl::emb
