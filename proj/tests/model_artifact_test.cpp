#include <sstream>

#include <gtest/gtest.h>

#include "uctc/model_artifact.hpp"
#include "uctc/random_instances.hpp"

using namespace uctc;

namespace {

RatingData demo() { return parse_ratings(std::string("u1,p1,4\nu1,p2,5\nu2,p1,3\n"), Schema{}); }

std::string saved(const CompletionModel& m, const IdMap& ids) {
  std::ostringstream out;
  save_model(out, m, ids, {{"epsilon", 1e-12}});
  return out.str();
}

ModelArtifact loaded(const std::string& text) {
  std::istringstream in(text);
  return load_model(in);
}

}  // namespace

TEST(ModelArtifact, DemoPredictsClosedForm) {
  const auto data = demo();
  CompletionConfig tight;
  tight.scaling.epsilon = 1e-20;
  const auto art = loaded(saved(tca(data.tensor, 1, tight), data.ids));
  // Missing corner of a 2x2 block: r12 * r21 / r11.
  EXPECT_NEAR(art.model.predict(art.ids.resolve({"u2", "p2"})), 5.0 * 3.0 / 4.0, 1e-9);
  EXPECT_EQ(art.model.predict(art.ids.resolve({"u1", "p2"})), 5.0);
  EXPECT_EQ(art.config.at("epsilon"), 1e-12);
}

TEST(ModelArtifact, RoundTripIsBitIdentical) {
  Rng rng(61);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t d = 2 + trial % 2;
    Extents ext(d, 5);
    const auto t = random_tensor(rng, ext, 0.5);
    IdMap ids(d);
    for (std::size_t m = 0; m < d; ++m) {
      for (int c = 1; c <= 5; ++c) ids.intern(m, "id" + std::to_string(c));
    }
    for (int k = 1; k < static_cast<int>(d); ++k) {
      const auto model = tca(t, k);
      const auto art = loaded(saved(model, ids));
      EXPECT_EQ(art.model.source(), t);
      EXPECT_EQ(art.ids, ids);
      EXPECT_EQ(art.model.report().v_trace, model.report().v_trace);
      IndexVector idx(d, 1);
      do {
        EXPECT_EQ(art.model.predict(idx), model.predict(idx));
      } while (advance_index(idx, ext));
    }
  }
}

TEST(ModelArtifact, RejectsCorruption) {
  const auto data = demo();
  auto j = nlohmann::json::parse(saved(tca(data.tensor, 1), data.ids));
  EXPECT_THROW(loaded("not json"), ParseError);

  auto wrong_version = j;
  wrong_version["version"] = 99;
  EXPECT_THROW(loaded(wrong_version.dump()), ParseError);

  auto tampered = j;
  tampered["entries"][0][2] = 4.5;
  EXPECT_THROW(loaded(tampered.dump()), ParseError);

  auto missing = j;
  missing.erase("subtensors");
  EXPECT_THROW(loaded(missing.dump()), ParseError);

  auto format = j;
  format["format"] = "other";
  EXPECT_THROW(loaded(format.dump()), ParseError);
}

TEST(ModelArtifact, StoresLogCoefficients) {
  const auto data = demo();
  const auto model = tca(data.tensor, 1);
  const auto j = nlohmann::json::parse(saved(model, data.ids));
  ASSERT_EQ(j.at("subtensors").size(), model.scaling().size());
  for (std::size_t i = 0; i < model.scaling().size(); ++i) {
    EXPECT_EQ(j["subtensors"][i]["log_coeff"].get<double>(), model.scaling().log_coeff(i));
  }
  EXPECT_EQ(j.at("source_digest"), content_digest(data.tensor, data.ids));
}
