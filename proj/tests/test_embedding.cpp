#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "pearl/common.hpp"
#include "pearl/embedding.hpp"
#include "pearl/text_key.hpp"

using namespace pearl;
using namespace pearl::emb;

namespace {

std::string temp_path(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "pearl-tests";
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

EmbeddingTable sample_table(const std::string& name, Modality modality,
                            Eigen::Index dim, std::uint64_t seed) {
  EmbeddingTable t{{name, modality, dim}, {}};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> dist(-2.0f, 2.0f);
  for (int i = 0; i < 5; ++i) {
    Eigen::VectorXf v(dim);
    for (Eigen::Index j = 0; j < dim; ++j) v[j] = dist(rng);
    t.entries["key" + std::to_string(i)] = v;
  }
  return t;
}

bool bit_equal(const Eigen::VectorXf& a, const Eigen::VectorXf& b) {
  return a.size() == b.size() && (a.array() == b.array()).all();
}

}  // namespace

TEST_CASE("text_key pins the SHA-256 of the normalized bytes") {
  // "abc" is NFC-stable, so the key equals the standard SHA-256 test vector.
  CHECK(text_key("abc") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(text_key("abc").size() == 64);
}

TEST_CASE("text_key unifies unicode-equivalent spellings") {
  const std::string precomposed = "caf\xC3\xA9";       // U+00E9
  const std::string decomposed = "cafe\xCC\x81";       // e + U+0301
  CHECK(precomposed != decomposed);
  CHECK(normalize_nfc(decomposed) == precomposed);
  CHECK(text_key(precomposed) == text_key(decomposed));
  CHECK(text_key("one caption") != text_key("another caption"));
}

TEST_CASE("embedding tables round-trip bit-exactly") {
  EmbeddingTable t = sample_table("enc", Modality::text, 7, 11);
  auto path = temp_path("roundtrip.pemb");
  save_table(path, t);
  EmbeddingTable loaded = load_table(path);
  CHECK(loaded.encoder.name == "enc");
  CHECK(loaded.encoder.modality == Modality::text);
  CHECK(loaded.encoder.dim == 7);
  REQUIRE(loaded.entries.size() == t.entries.size());
  for (const auto& [key, vec] : t.entries) {
    REQUIRE(loaded.entries.count(key) == 1);
    CHECK(bit_equal(loaded.entries.at(key), vec));
  }
}

TEST_CASE("table save rejects invariant violations") {
  EmbeddingTable t = sample_table("enc", Modality::text, 4, 12);
  t.entries["short"] = Eigen::VectorXf::Zero(3);
  CHECK_THROWS_AS(save_table(temp_path("bad.pemb"), t), ValidationError);

  EmbeddingTable both = sample_table("enc", Modality::both, 4, 13);
  CHECK_THROWS_AS(save_table(temp_path("both.pemb"), both), ValidationError);
}

TEST_CASE("table load rejects corrupt files") {
  EmbeddingTable t = sample_table("enc", Modality::image, 4, 14);
  auto path = temp_path("corrupt.pemb");
  save_table(path, t);

  auto mutate = [&](auto fn, const std::string& out_name) {
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
    fn(bytes);
    auto out_path = temp_path(out_name);
    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    out << bytes;
    out.close();
    std::filesystem::copy_file(
        path + ".meta", out_path + ".meta",
        std::filesystem::copy_options::overwrite_existing);
    return out_path;
  };

  auto bad_magic =
      mutate([](std::string& b) { b[0] = 'X'; }, "badmagic.pemb");
  CHECK_THROWS_AS(load_table(bad_magic), ValidationError);

  auto bad_version =
      mutate([](std::string& b) { b[4] = 0x7f; }, "badversion.pemb");
  CHECK_THROWS_AS(load_table(bad_version), ValidationError);

  auto truncated =
      mutate([](std::string& b) { b.resize(b.size() - 3); }, "trunc.pemb");
  CHECK_THROWS_AS(load_table(truncated), ValidationError);

  auto trailing =
      mutate([](std::string& b) { b += "xx"; }, "trailing.pemb");
  CHECK_THROWS_AS(load_table(trailing), ValidationError);
}

TEST_CASE("missing sidecar fails the load") {
  EmbeddingTable t = sample_table("enc", Modality::image, 4, 15);
  auto path = temp_path("nosidecar.pemb");
  save_table(path, t);
  std::filesystem::remove(path + ".meta");
  CHECK_THROWS_AS(load_table(path), IoError);
}

TEST_CASE("table provider serves exact-match lookups") {
  EmbeddingTable img = sample_table("enc", Modality::image, 6, 16);
  TableProvider provider(img);
  Eigen::VectorXd v = provider.embed_image("key0");
  CHECK(v.size() == 6);
  CHECK(v.cast<float>().isApprox(img.entries.at("key0")));

  try {
    provider.embed_image("unknown");
    FAIL("expected a missing-embedding error");
  } catch (const MissingEmbeddingError& e) {
    CHECK(e.key == "unknown");
  }
  CHECK_THROWS_AS(provider.embed_text("any"), ConfigError);
}

TEST_CASE("two-table provider validates encoder consistency") {
  EmbeddingTable img = sample_table("enc", Modality::image, 6, 17);
  EmbeddingTable txt = sample_table("enc", Modality::text, 6, 18);
  TableProvider good(img, txt);
  CHECK(good.spec().modality == Modality::both);

  EmbeddingTable wrong_dim = sample_table("enc", Modality::text, 5, 19);
  CHECK_THROWS_AS(TableProvider(img, wrong_dim), ValidationError);
  EmbeddingTable wrong_name = sample_table("other", Modality::text, 6, 20);
  CHECK_THROWS_AS(TableProvider(img, wrong_name), ConfigError);
}

TEST_CASE("hash provider is deterministic and unit-norm") {
  HashProvider p("synthetic-h", 24, 99);
  Eigen::VectorXd a = p.embed_text("a dog runs");
  Eigen::VectorXd b = p.embed_text("a dog runs");
  CHECK(a.isApprox(b, 0.0));
  CHECK(a.norm() == doctest::Approx(1.0));
  CHECK_FALSE(a.isApprox(p.embed_text("a cat sits")));
  CHECK_FALSE(a.isApprox(p.embed_image("a dog runs")));

  HashProvider text_only("t", 8, 1, Modality::text);
  CHECK_THROWS_AS(text_only.embed_image("img"), ConfigError);
}

TEST_CASE("provider directory loading groups by encoder") {
  auto dir = temp_path("provider-dir");
  std::filesystem::create_directories(dir);
  save_table(dir + "/alpha.image.pemb", sample_table("alpha", Modality::image, 4, 21));
  save_table(dir + "/alpha.text.pemb", sample_table("alpha", Modality::text, 4, 22));
  save_table(dir + "/beta.text.pemb", sample_table("beta", Modality::text, 3, 23));

  ProviderSet set = load_providers(dir);
  CHECK(set.names() == std::vector<std::string>{"alpha", "beta"});
  CHECK(set.get("alpha").spec().modality == Modality::both);
  CHECK(set.get("beta").spec().modality == Modality::text);
  CHECK(set.get("beta").spec().dim == 3);
  CHECK_THROWS_AS(set.get("gamma"), ConfigError);
  CHECK_THROWS_AS(load_providers(temp_path("missing-dir")), IoError);
}
