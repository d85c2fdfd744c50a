#include "pearl/synthetic.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "pearl/common.hpp"
#include "pearl/text_key.hpp"

namespace pearl::emb {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

VectorXd gaussian(std::mt19937_64& rng, Eigen::Index dim) {
  std::normal_distribution<double> dist(0.0, 1.0);
  VectorXd v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v[i] = dist(rng);
  return v;
}

VectorXd unit_gaussian(std::mt19937_64& rng, Eigen::Index dim) {
  while (true) {
    VectorXd v = gaussian(rng, dim);
    const double n = v.norm();
    if (n > 1e-9) return v / n;
  }
}

// Unit vector with exact cosine c against the unit vector z.
VectorXd rotate_towards(std::mt19937_64& rng, const VectorXd& z, double c) {
  while (true) {
    VectorXd g = gaussian(rng, z.size());
    VectorXd w = g - g.dot(z) * z;
    const double n = w.norm();
    if (n <= 1e-9) continue;
    w /= n;
    return c * z + std::sqrt(std::max(0.0, 1.0 - c * c)) * w;
  }
}

MatrixXd random_orthogonal(std::mt19937_64& rng, Eigen::Index dim) {
  MatrixXd g(dim, dim);
  std::normal_distribution<double> dist(0.0, 1.0);
  for (Eigen::Index i = 0; i < dim; ++i)
    for (Eigen::Index j = 0; j < dim; ++j) g(i, j) = dist(rng);
  return Eigen::HouseholderQR<MatrixXd>(g).householderQ();
}

}  // namespace

SyntheticWorld synthetic_world(std::uint64_t seed, Eigen::Index dim,
                               int n_images, int captions_per_image,
                               const SyntheticOptions& opt) {
  if (dim <= 0 || n_images <= 0 || captions_per_image <= 0) {
    throw ValidationError("synthetic world sizes must be positive");
  }
  std::mt19937_64 rng(derived_seed(seed, "synthetic-world"));
  std::uniform_real_distribution<double> cand_cos(opt.cand_cos_lo, opt.cand_cos_hi);
  std::uniform_real_distribution<double> ref_cos(opt.ref_cos_lo, opt.ref_cos_hi);
  std::uniform_real_distribution<double> noise(-opt.epsilon, opt.epsilon);

  const Eigen::Index dim_b = std::max<Eigen::Index>(4, dim / 2);
  const MatrixXd map_a = random_orthogonal(rng, dim);
  MatrixXd map_b(dim_b, dim);
  {
    std::normal_distribution<double> dist(0.0, 1.0);
    for (Eigen::Index i = 0; i < dim_b; ++i)
      for (Eigen::Index j = 0; j < dim; ++j) map_b(i, j) = dist(rng);
    map_b /= std::sqrt(double(dim));
  }
  const MatrixXd map_c = random_orthogonal(rng, dim);

  SyntheticWorld world;
  EmbeddingTable a_img{{"synthetic-a", Modality::image, dim}, {}};
  EmbeddingTable a_txt{{"synthetic-a", Modality::text, dim}, {}};
  EmbeddingTable b_img{{"synthetic-b", Modality::image, dim_b}, {}};
  EmbeddingTable b_txt{{"synthetic-b", Modality::text, dim_b}, {}};
  EmbeddingTable c_txt{{"synthetic-c", Modality::text, dim}, {}};

  auto store_image = [&](const std::string& key, const VectorXd& latent) {
    a_img.entries[key] = (map_a * latent).cast<float>();
    b_img.entries[key] = (map_b * latent).normalized().cast<float>();
  };
  auto store_text = [&](const std::string& text, const VectorXd& latent) {
    const std::string key = text_key(text);
    a_txt.entries[key] = (map_a * latent).cast<float>();
    b_txt.entries[key] = (map_b * latent).normalized().cast<float>();
    c_txt.entries[key] = (map_c * latent).cast<float>();
  };

  std::vector<VectorXd> image_latents(n_images);
  for (int k = 0; k < n_images; ++k) {
    image_latents[k] = unit_gaussian(rng, dim);
    store_image(fmt::format("img{:04d}", k), image_latents[k]);
  }

  for (int k = 0; k < n_images; ++k) {
    const std::string image_key = fmt::format("img{:04d}", k);
    const bool with_refs = k % 2 == 0;

    std::vector<std::string> refs;
    for (int r = 0; with_refs && r < opt.refs_per_image; ++r) {
      std::string text = fmt::format("image {} reference {}", k, r);
      store_text(text, rotate_towards(rng, image_latents[k], ref_cos(rng)));
      refs.push_back(std::move(text));
    }

    for (int i = 0; i < captions_per_image; ++i) {
      const double c = cand_cos(rng);
      std::string text = fmt::format("image {} caption {}", k, i);
      store_text(text, rotate_towards(rng, image_latents[k], c));

      data::CaptionRecord rec;
      rec.sample_id = fmt::format("img{:04d}-c{}", k, i);
      rec.image_key = image_key;
      rec.candidate = std::move(text);
      rec.references = refs;
      rec.judgment = std::clamp((c + 1.0) / 2.0 + noise(rng), 0.0, 1.0);
      world.records.push_back(std::move(rec));
    }
  }

  // Foil pairs: the faithful caption tracks its own image, the foil tracks
  // the next image's latent with the same rotation profile.
  for (int k = 0; k < n_images; ++k) {
    data::FoilPair pair;
    pair.image_key = fmt::format("img{:04d}", k);
    pair.correct = fmt::format("image {} foil-correct", k);
    store_text(pair.correct, rotate_towards(rng, image_latents[k], ref_cos(rng)));
    const int other = (k + 1) % n_images;
    pair.foil = fmt::format("image {} foil-wrong", k);
    store_text(pair.foil, rotate_towards(rng, image_latents[other], ref_cos(rng)));
    for (int r = 0; r < opt.foil_refs; ++r) {
      std::string text = fmt::format("image {} foil-reference {}", k, r);
      store_text(text, rotate_towards(rng, image_latents[k], ref_cos(rng)));
      pair.references.push_back(std::move(text));
    }
    world.foil_pairs.push_back(std::move(pair));
  }

  world.tables = {std::move(a_img), std::move(a_txt), std::move(b_img),
                  std::move(b_txt), std::move(c_txt)};
  return world;
}

}  // namespace pearl::emb
