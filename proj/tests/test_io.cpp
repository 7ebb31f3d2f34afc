#include <gtest/gtest.h>

#include <cstdlib>
#include <cstring>
#include <sstream>
#include <string>

#include "test_util.hpp"

namespace dpcdvae {
namespace {

using testing::random_structure;
using testing::rocksalt;

std::string fixture(const char* name) { return std::string(DPCDVAE_TEST_DATA) + "/" + name; }

const char* kCarbonLine =
    R"({"lattice":[[2,0,0],[0,2,0],[0,0,2]],"frac_coords":[[0,0,0]],"atomic_numbers":[6]})";

template <class E>
std::string error_of(auto&& f) {
  try {
    f();
  } catch (const E& e) {
    return e.what();
  }
  return "";
}

// ---- JSONL ------------------------------------------------------------------

TEST(JsonlTest, SingleCarbonRecord) {
  std::istringstream in(std::string(kCarbonLine) + "\n");
  auto recs = parse_jsonl(in);
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].structure.num_atoms(), 1);
  EXPECT_EQ(recs[0].structure.atomic_numbers()[0], 6);
  EXPECT_FALSE(recs[0].energy_per_atom.has_value());
}

TEST(JsonlTest, RoundTripIsBitExact) {
  Rng rng(1);
  std::vector<DatasetRecord> recs;
  for (int i = 0; i < 20; ++i)
    recs.push_back({random_structure(rng, 1 + i % 6), i % 2 ? std::optional<double>(rng.normal())
                                                           : std::nullopt,
                    "s" + std::to_string(i)});
  std::stringstream buf;
  write_jsonl(buf, recs);
  auto back = parse_jsonl(buf);
  ASSERT_EQ(back.size(), recs.size());
  for (size_t i = 0; i < recs.size(); ++i) {
    EXPECT_EQ(back[i].structure.lattice().matrix(), recs[i].structure.lattice().matrix());
    EXPECT_EQ(back[i].structure.frac_coords(), recs[i].structure.frac_coords());
    EXPECT_EQ(back[i].structure.atomic_numbers(), recs[i].structure.atomic_numbers());
    EXPECT_EQ(back[i].energy_per_atom, recs[i].energy_per_atom);
    EXPECT_EQ(back[i].id, recs[i].id);
  }
}

TEST(JsonlTest, MalformedLineIsNamed) {
  std::string text = std::string(kCarbonLine) + "\n" + kCarbonLine + "\n{\"lattice\": [\n";
  std::istringstream in(text);
  std::string msg = error_of<ParseError>([&] { parse_jsonl(in, "data.jsonl"); });
  EXPECT_NE(msg.find("data.jsonl:3:"), std::string::npos) << msg;
}

TEST(JsonlTest, RejectsInvalidRecords) {
  auto fails = [](const std::string& line) {
    std::istringstream in(line + "\n");
    return !error_of<ParseError>([&] { parse_jsonl(in); }).empty();
  };
  EXPECT_TRUE(fails(R"({"lattice":[[2,0,0],[0,2,0],[0,0,2]],"frac_coords":[[1.0,0,0]],"atomic_numbers":[6]})"));
  EXPECT_TRUE(fails(R"({"lattice":[[2,0,0],[0,2,0],[0,0,2]],"frac_coords":[[0,0,0]],"atomic_numbers":[6],"extra":1})"));
  EXPECT_TRUE(fails(R"({"lattice":[[2,0,0],[0,2,0]],"frac_coords":[[0,0,0]],"atomic_numbers":[6]})"));
  EXPECT_TRUE(fails(R"({"lattice":[[2,0,0],[0,2,0],[0,0,2]],"frac_coords":[[0,0,0]],"atomic_numbers":[0]})"));
  EXPECT_TRUE(fails(R"({"lattice":[[2,0,0],[0,2,0],[0,0,2]],"frac_coords":[[0,0]],"atomic_numbers":[6]})"));
  EXPECT_TRUE(fails(R"({"lattice":[[2,0,0],[0,2,0],[0,0,-2]],"frac_coords":[[0,0,0]],"atomic_numbers":[6]})"));
  EXPECT_TRUE(fails(R"({"lattice":[[2,0,0],[0,2,0],[0,0,2]],"frac_coords":[[0,0,0]],"atomic_numbers":[6.5]})"));
  EXPECT_TRUE(fails(R"({"frac_coords":[[0,0,0]],"atomic_numbers":[6]})"));
  EXPECT_TRUE(fails(R"([1,2,3])"));
}

TEST(JsonlTest, EmptyInputRejected) {
  std::istringstream in("\n  \n");
  EXPECT_THROW(parse_jsonl(in), ParseError);
  EXPECT_THROW(read_jsonl("/nonexistent/file.jsonl"), ParseError);
}

// ---- CIF ----------------------------------------------------------------------

TEST(CifTest, DiamondFixture) {
  CrystalStructure s = read_cif_p1(fixture("diamond_p1.cif"));
  EXPECT_EQ(s.num_atoms(), 8);
  auto p = s.lattice().parameters();
  EXPECT_NEAR(p.a, 3.567, 1e-12);
  EXPECT_NEAR(p.b, 3.567, 1e-12);
  EXPECT_NEAR(p.c, 3.567, 1e-12);
  EXPECT_NEAR(p.gamma, 90, 1e-12);
  for (int z : s.atomic_numbers())
    EXPECT_EQ(z, 6);
  EXPECT_NEAR(density(s), 3.515676640850054, 1e-9);
}

const char* kCifHeader = R"(data_x
_cell_length_a 4.0(2)
_cell_length_b 4.0
_cell_length_c 4.0
_cell_angle_alpha 90
_cell_angle_beta 90
_cell_angle_gamma 90
)";

TEST(CifTest, UncertaintiesLabelsAndWrapping) {
  std::istringstream in(std::string(kCifHeader) + R"(
# comment line
loop_
_atom_site_label
_atom_site_fract_x
_atom_site_fract_y
_atom_site_fract_z
Na1 0.0 0.0 1.0
Cl2 0.5(1) -0.5 0.5
)");
  CrystalStructure s = parse_cif_p1(in);
  ASSERT_EQ(s.num_atoms(), 2);
  EXPECT_EQ(s.atomic_numbers()[0], 11);
  EXPECT_EQ(s.atomic_numbers()[1], 17);
  EXPECT_EQ(s.frac_coords()(0, 2), 0.0);
  EXPECT_EQ(s.frac_coords()(1, 1), 0.5);
  EXPECT_NEAR(s.lattice().parameters().a, 4.0, 1e-12);
}

TEST(CifTest, SymmetryLoopRejected) {
  std::istringstream in(std::string(kCifHeader) + R"(
loop_
_symmetry_equiv_pos_as_xyz
'x, y, z'
'-x, -y, z'
'-x, y, -z'
'x, -y, -z'
loop_
_atom_site_type_symbol
_atom_site_fract_x
_atom_site_fract_y
_atom_site_fract_z
C 0 0 0
)");
  EXPECT_THROW(parse_cif_p1(in), UnsupportedSymmetry);
}

TEST(CifTest, NonP1SpaceGroupRejected) {
  std::istringstream in(std::string(kCifHeader) + R"(
_symmetry_space_group_name_H-M 'F d -3 m'
loop_
_atom_site_type_symbol
_atom_site_fract_x
_atom_site_fract_y
_atom_site_fract_z
C 0 0 0
)");
  EXPECT_THROW(parse_cif_p1(in), UnsupportedSymmetry);
}

TEST(CifTest, UnknownElementAndMissingTag) {
  std::istringstream bad(std::string(kCifHeader) + R"(
loop_
_atom_site_type_symbol
_atom_site_fract_x
_atom_site_fract_y
_atom_site_fract_z
Xx 0 0 0
)");
  std::string msg = error_of<ParseError>([&] { parse_cif_p1(bad); });
  EXPECT_NE(msg.find("Xx"), std::string::npos) << msg;

  std::istringstream missing(R"(data_x
_cell_length_a 4
_cell_length_b 4
_cell_angle_alpha 90
_cell_angle_beta 90
_cell_angle_gamma 90
loop_
_atom_site_type_symbol
_atom_site_fract_x
_atom_site_fract_y
_atom_site_fract_z
C 0 0 0
)");
  msg = error_of<ParseError>([&] { parse_cif_p1(missing); });
  EXPECT_NE(msg.find("_cell_length_c"), std::string::npos) << msg;
}

// ---- config -------------------------------------------------------------------

TEST(ConfigTest, RoundTripAndDefaults) {
  RunConfig c;
  c.seed = 42;
  c.model.elements = {11, 17};
  c.model.hidden = 32;
  c.train.epochs = 7;
  c.sampler.sampler.variant = ReverseVariant::kStandard;
  RunConfig back = config_from_json(config_to_json(c));
  EXPECT_EQ(config_to_json(back), config_to_json(c));
  EXPECT_EQ(back.seed, 42u);
  EXPECT_EQ(back.model.hidden, 32);

  RunConfig d = config_from_json(nlohmann::json::object());
  EXPECT_EQ(config_to_json(d), config_to_json(RunConfig{}));
}

TEST(ConfigTest, UnknownKeysRejected) {
  using nlohmann::json;
  EXPECT_THROW(config_from_json(json{{"sead", 1}}), ParseError);
  EXPECT_THROW(config_from_json(json{{"model", {{"hiden", 3}}}}), ParseError);
  EXPECT_THROW(config_from_json(json{{"sampler", {{"variant", "sideways"}}}}), ParseError);
  EXPECT_THROW(config_from_json(json{{"model", {{"hidden", "big"}}}}), ParseError);
  EXPECT_THROW(config_from_json(json{{"matcher", {{"stol", -1}}}}), Error);
}

TEST(ConfigTest, SeedEnvironmentOverride) {
  RunConfig c;
  c.seed = 5;
  ::unsetenv("DPCV_SEED");
  apply_seed_override(c);
  EXPECT_EQ(c.seed, 5u);
  ::setenv("DPCV_SEED", "123", 1);
  apply_seed_override(c);
  EXPECT_EQ(c.seed, 123u);
  ::setenv("DPCV_SEED", "12x", 1);
  EXPECT_THROW(apply_seed_override(c), ParseError);
  ::unsetenv("DPCV_SEED");
}

// ---- checkpoints ----------------------------------------------------------------

RunConfig small_config() {
  RunConfig c;
  c.model.elements = {11, 17};
  c.model.hidden = 16;
  c.model.latent_dim = 8;
  c.model.layers = 1;
  c.model.encoder_layers = 1;
  return c;
}

TEST(CheckpointTest, BitExactRoundTrip) {
  RunConfig cfg = small_config();
  Model model(cfg.model, 9);
  std::stringstream buf;
  write_checkpoint(buf, make_checkpoint(cfg, model));
  std::string bytes = buf.str();
  EXPECT_EQ(bytes.substr(0, 4), "DPCV");
  Checkpoint ck = read_checkpoint(buf);
  auto [cfg2, model2] = restore(ck);
  EXPECT_EQ(config_to_json(cfg2), config_to_json(cfg));
  const auto& a = model.params().tensors();
  const auto& b = model2.params().tensors();
  ASSERT_EQ(a.size(), b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].name, b[i].name);
    ASSERT_EQ(a[i].value.size(), b[i].value.size());
    EXPECT_EQ(std::memcmp(a[i].value.data(), b[i].value.data(), sizeof(double) * a[i].value.size()), 0);
  }
  std::stringstream again;
  write_checkpoint(again, make_checkpoint(cfg2, model2));
  EXPECT_EQ(again.str(), bytes);
}

TEST(CheckpointTest, CorruptionRejected) {
  RunConfig cfg = small_config();
  Model model(cfg.model, 9);
  std::stringstream buf;
  write_checkpoint(buf, make_checkpoint(cfg, model));
  const std::string good = buf.str();

  std::string bad_magic = good;
  bad_magic[0] = 'X';
  std::istringstream m(bad_magic);
  EXPECT_NE(error_of<ParseError>([&] { read_checkpoint(m); }).find("magic"), std::string::npos);

  std::string bad_version = good;
  bad_version[4] = 2;
  std::istringstream v(bad_version);
  std::string msg = error_of<ParseError>([&] { read_checkpoint(v); });
  EXPECT_NE(msg.find("version 2"), std::string::npos) << msg;

  std::istringstream t(good.substr(0, good.size() - 3));
  EXPECT_THROW(read_checkpoint(t), ParseError);
  std::istringstream extra(good + "x");
  EXPECT_THROW(read_checkpoint(extra), ParseError);
}

TEST(CheckpointTest, ShapeMismatchOnRestore) {
  RunConfig cfg = small_config();
  Model model(cfg.model, 9);
  Checkpoint ck = make_checkpoint(cfg, model);
  ck.config["model"]["hidden"] = 24;
  EXPECT_THROW(restore(ck), Error);
}

// ---- reports ----------------------------------------------------------------------

TEST(ReportTest, OmitsAbsentAndNonFinite) {
  MetricsReport r;
  r.match_rate = 50.0;
  r.mean_delta_rms = std::nan("");
  auto j = report_to_json(r);
  EXPECT_EQ(j.size(), 1u);
  EXPECT_EQ(j["match_rate"], 50.0);
}

TEST(ReportTest, LossCsvFormat) {
  std::ostringstream out;
  write_loss_csv_header(out);
  EpochRecord rec;
  rec.epoch = 3;
  rec.mean.total = 1.5;
  write_loss_csv_row(out, rec);
  EXPECT_EQ(out.str(), "epoch,L_total,L_simple,CE,KLD,latt,comp,N_a\n3,1.5,0,0,0,0,0,0\n");
}

}  // namespace
}  // namespace dpcdvae
