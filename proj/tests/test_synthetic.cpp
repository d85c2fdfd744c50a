#include <cmath>

#include "doctest.h"
#include "pearl/common.hpp"
#include "pearl/metrics.hpp"
#include "pearl/synthetic.hpp"
#include "pearl/text_key.hpp"

using namespace pearl;
using namespace pearl::emb;

namespace {

const EmbeddingTable& table_for(const SyntheticWorld& w, const std::string& name,
                                Modality modality) {
  for (const auto& t : w.tables) {
    if (t.encoder.name == name && t.encoder.modality == modality) return t;
  }
  FAIL("no such table");
  return w.tables.front();
}

double cosine(const Eigen::VectorXf& a, const Eigen::VectorXf& b) {
  return double(a.dot(b)) / (double(a.norm()) * double(b.norm()));
}

}  // namespace

TEST_CASE("world shape: records, settings, and coverage") {
  SyntheticWorld w = synthetic_world(0, 16, 10, 3);
  CHECK(w.records.size() == 30);
  CHECK(w.foil_pairs.size() == 10);
  CHECK(w.tables.size() == 5);

  const auto& a_img = table_for(w, "synthetic-a", Modality::image);
  const auto& a_txt = table_for(w, "synthetic-a", Modality::text);
  const auto& b_txt = table_for(w, "synthetic-b", Modality::text);
  const auto& c_txt = table_for(w, "synthetic-c", Modality::text);
  CHECK(table_for(w, "synthetic-b", Modality::image).encoder.dim == 8);

  for (const auto& rec : w.records) {
    REQUIRE(rec.judgment.has_value());
    CHECK(*rec.judgment >= 0.0);
    CHECK(*rec.judgment <= 1.0);
    const bool even_image = (rec.image_key.back() - '0') % 2 == 0;
    CHECK(rec.references.empty() == !even_image);

    CHECK(a_img.entries.count(rec.image_key) == 1);
    for (const auto* text : {&rec.candidate}) {
      const std::string key = text_key(*text);
      CHECK(a_txt.entries.count(key) == 1);
      CHECK(b_txt.entries.count(key) == 1);
      CHECK(c_txt.entries.count(key) == 1);
    }
    for (const auto& ref : rec.references) {
      CHECK(a_txt.entries.count(text_key(ref)) == 1);
    }
  }
  for (const auto& pair : w.foil_pairs) {
    CHECK(pair.references.size() == 4);
    CHECK(a_txt.entries.count(text_key(pair.correct)) == 1);
    CHECK(a_txt.entries.count(text_key(pair.foil)) == 1);
  }
}

TEST_CASE("planted judgments track embedding cosine") {
  SyntheticWorld w = synthetic_world(3, 32, 40, 3);
  const auto& img = table_for(w, "synthetic-a", Modality::image);
  const auto& txt = table_for(w, "synthetic-a", Modality::text);
  std::vector<double> judgments, cosines;
  for (const auto& rec : w.records) {
    judgments.push_back(*rec.judgment);
    cosines.push_back(cosine(img.entries.at(rec.image_key),
                             txt.entries.at(text_key(rec.candidate))));
  }
  CHECK(metrics::kendall_tau_b(judgments, cosines) > 0.9);
}

TEST_CASE("zero-rotation candidates score near one") {
  SyntheticOptions opt;
  opt.cand_cos_lo = 1.0;
  opt.cand_cos_hi = 1.0;
  SyntheticWorld w = synthetic_world(4, 16, 6, 2, opt);
  for (const auto& rec : w.records) {
    CHECK(*rec.judgment >= 1.0 - opt.epsilon);
  }
}

TEST_CASE("worlds are seed-deterministic and seed-sensitive") {
  SyntheticWorld w1 = synthetic_world(5, 16, 4, 2);
  SyntheticWorld w2 = synthetic_world(5, 16, 4, 2);
  SyntheticWorld w3 = synthetic_world(6, 16, 4, 2);
  CHECK(w1.records == w2.records);
  const auto& t1 = table_for(w1, "synthetic-a", Modality::image);
  const auto& t2 = table_for(w2, "synthetic-a", Modality::image);
  const auto& t3 = table_for(w3, "synthetic-a", Modality::image);
  for (const auto& [key, vec] : t1.entries) {
    CHECK((t2.entries.at(key).array() == vec.array()).all());
    CHECK_FALSE(t3.entries.at(key).isApprox(vec));
  }
}

TEST_CASE("foil captions sit far from their paired image") {
  SyntheticWorld w = synthetic_world(7, 32, 20, 2);
  const auto& img = table_for(w, "synthetic-a", Modality::image);
  const auto& txt = table_for(w, "synthetic-a", Modality::text);
  double correct_sum = 0.0, foil_sum = 0.0;
  for (const auto& pair : w.foil_pairs) {
    const auto& z = img.entries.at(pair.image_key);
    correct_sum += cosine(z, txt.entries.at(text_key(pair.correct)));
    foil_sum += cosine(z, txt.entries.at(text_key(pair.foil)));
  }
  const double n = double(w.foil_pairs.size());
  CHECK(correct_sum / n > 0.8);
  CHECK(foil_sum / n < 0.4);
}

TEST_CASE("size validation") {
  CHECK_THROWS_AS(synthetic_world(0, 0, 5, 2), ValidationError);
  CHECK_THROWS_AS(synthetic_world(0, 8, 0, 2), ValidationError);
  CHECK_THROWS_AS(synthetic_world(0, 8, 5, 0), ValidationError);
}
