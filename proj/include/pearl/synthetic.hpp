#pragma once

#include <cstdint>
#include <vector>

#include "pearl/dataset.hpp"
#include "pearl/embedding.hpp"

// Desk-scale generated stand-in for a judged caption dataset plus frozen
// encoders. Every caption embedding is a controlled rotation of its image's
// latent vector, so the planted judgment is a smooth function of embedding
// geometry that a model can recover.
namespace pearl::emb {

struct SyntheticOptions {
  double epsilon = 0.01;        // judgment noise half-width
  int refs_per_image = 2;       // references on reference-based samples
  int foil_refs = 4;            // references carried by each foil pair
  double ref_cos_lo = 0.85;     // reference rotation range
  double ref_cos_hi = 0.99;
  double cand_cos_lo = -0.2;    // candidate rotation range
  double cand_cos_hi = 1.0;
};

struct SyntheticWorld {
  std::vector<data::CaptionRecord> records;
  std::vector<EmbeddingTable> tables;
  std::vector<data::FoilPair> foil_pairs;
};

// Emits three synthetic encoders over a shared latent space: an orthogonal
// image+text encoder, a lossy-projection image+text encoder at half the
// dimension, and a second orthogonal text-only encoder. Even-indexed images
// produce reference-based records, odd-indexed ones reference-free. One
// foil pair per image pairs a faithful caption with a caption planted on a
// different image's latent.
SyntheticWorld synthetic_world(std::uint64_t seed, Eigen::Index dim,
                               int n_images, int captions_per_image,
                               const SyntheticOptions& opt = {});

}  // namespace pearl::emb
