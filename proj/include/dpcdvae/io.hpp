// Persistence: JSONL datasets, P1 CIF input, binary checkpoints, run
// configuration and metrics reports.

#ifndef DPCDVAE_IO_HPP_
#define DPCDVAE_IO_HPP_

#include <bit>
#include <cctype>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "elements.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "train.hpp"

namespace dpcdvae {

using json = nlohmann::json;

// ---- JSONL datasets ---------------------------------------------------------

struct DatasetRecord {
  CrystalStructure structure;
  std::optional<double> energy_per_atom;  // eV
  std::optional<std::string> id;
};

namespace detail {

inline double finite_number(const json& j, const char* what) {
  if (!j.is_number())
    throw ParseError(std::string(what) + " must be a number");
  double v = j.get<double>();
  if (!std::isfinite(v))
    throw ParseError(std::string(what) + " must be finite");
  return v;
}

inline DatasetRecord record_from_json(const json& j) {
  static const std::set<std::string> known{"lattice", "frac_coords", "atomic_numbers",
                                           "energy_per_atom", "id"};
  if (!j.is_object())
    throw ParseError("record must be a JSON object");
  for (const auto& [k, v] : j.items())
    if (!known.count(k))
      throw ParseError("unknown key '" + k + "'");
  for (const char* k : {"lattice", "frac_coords", "atomic_numbers"})
    if (!j.contains(k))
      throw ParseError(std::string("missing key '") + k + "'");

  const json& jl = j["lattice"];
  if (!jl.is_array() || jl.size() != 3)
    throw ParseError("lattice must be a 3x3 array");
  Eigen::Matrix3d m;
  for (int r = 0; r < 3; ++r) {
    if (!jl[r].is_array() || jl[r].size() != 3)
      throw ParseError("lattice must be a 3x3 array");
    for (int c = 0; c < 3; ++c)
      m(r, c) = finite_number(jl[r][c], "lattice entry");
  }
  const json& jf = j["frac_coords"];
  const json& jz = j["atomic_numbers"];
  if (!jf.is_array() || !jz.is_array())
    throw ParseError("frac_coords and atomic_numbers must be arrays");
  if (jf.size() != jz.size())
    throw ParseError("frac_coords and atomic_numbers differ in length");
  Coords f(static_cast<Eigen::Index>(jf.size()), 3);
  std::vector<int> z;
  for (size_t i = 0; i < jf.size(); ++i) {
    if (!jf[i].is_array() || jf[i].size() != 3)
      throw ParseError("each frac_coords entry must have 3 components");
    for (int c = 0; c < 3; ++c)
      f(static_cast<Eigen::Index>(i), c) = finite_number(jf[i][c], "fractional coordinate");
    if (!jz[i].is_number_integer())
      throw ParseError("atomic numbers must be integers");
    z.push_back(jz[i].get<int>());
  }
  DatasetRecord rec{CrystalStructure(Lattice::from_matrix(m), f, std::move(z)), {}, {}};
  if (j.contains("energy_per_atom"))
    rec.energy_per_atom = finite_number(j["energy_per_atom"], "energy_per_atom");
  if (j.contains("id")) {
    if (!j["id"].is_string())
      throw ParseError("id must be a string");
    rec.id = j["id"].get<std::string>();
  }
  return rec;
}

}  // namespace detail

inline json record_to_json(const DatasetRecord& r) {
  json j;
  const Eigen::Matrix3d& m = r.structure.lattice().matrix();
  j["lattice"] = json::array();
  for (int i = 0; i < 3; ++i)
    j["lattice"].push_back({m(i, 0), m(i, 1), m(i, 2)});
  j["frac_coords"] = json::array();
  const Coords& f = r.structure.frac_coords();
  for (Eigen::Index i = 0; i < f.rows(); ++i)
    j["frac_coords"].push_back({f(i, 0), f(i, 1), f(i, 2)});
  j["atomic_numbers"] = r.structure.atomic_numbers();
  if (r.energy_per_atom)
    j["energy_per_atom"] = *r.energy_per_atom;
  if (r.id)
    j["id"] = *r.id;
  return j;
}

inline std::vector<DatasetRecord> parse_jsonl(std::istream& in, const std::string& name = "input") {
  std::vector<DatasetRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    try {
      out.push_back(detail::record_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ParseError(name + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      throw ParseError(name + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (out.empty())
    throw ParseError(name + ": no records");
  return out;
}

inline std::vector<DatasetRecord> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw ParseError("cannot open " + path);
  return parse_jsonl(in, path);
}

inline void write_jsonl(std::ostream& out, const std::vector<DatasetRecord>& records) {
  for (const auto& r : records)
    out << record_to_json(r).dump() << '\n';
}

inline void write_jsonl(const std::string& path, const std::vector<DatasetRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw ParseError("cannot write " + path);
  write_jsonl(out, records);
}

inline std::vector<CrystalStructure> structures_of(const std::vector<DatasetRecord>& records) {
  std::vector<CrystalStructure> s;
  s.reserve(records.size());
  for (const auto& r : records)
    s.push_back(r.structure);
  return s;
}

// ---- P1 CIF -------------------------------------------------------------------

namespace detail {

// CIF tokens: whitespace separated, quotes group, '#' comments, ';' text fields.
inline std::vector<std::string> cif_tokens(std::istream& in) {
  std::vector<std::string> out;
  std::string line;
  bool in_text = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (!line.empty() && line[0] == ';') {
      in_text = !in_text;
      if (!in_text)
        out.push_back("<text>");
      continue;
    }
    if (in_text)
      continue;
    size_t i = 0;
    while (i < line.size()) {
      char c = line[i];
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++i;
      } else if (c == '#') {
        break;
      } else if (c == '\'' || c == '"') {
        size_t j = i + 1;
        while (j < line.size() &&
               !(line[j] == c && (j + 1 == line.size() ||
                                  std::isspace(static_cast<unsigned char>(line[j + 1])))))
          ++j;
        out.push_back(line.substr(i + 1, j - i - 1));
        i = j + 1;
      } else {
        size_t j = i;
        while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j])))
          ++j;
        out.push_back(line.substr(i, j - i));
        i = j;
      }
    }
  }
  return out;
}

// Parses "5.431(2)" as 5.431.
inline double cif_number(const std::string& s, const std::string& tag) {
  std::string t = s.substr(0, s.find('('));
  char* end = nullptr;
  double v = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size() || !std::isfinite(v))
    throw ParseError("bad number '" + s + "' for " + tag);
  return v;
}

inline std::string lower(std::string s) {
  for (char& c : s)
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline bool is_identity_op(std::string op) {
  std::string t;
  for (char c : lower(op))
    if (!std::isspace(static_cast<unsigned char>(c)))
      t += c;
  return t == "x,y,z" || t == "+x,+y,+z";
}

// "Na1+" or "Na1" -> "Na".
inline std::string element_part(const std::string& s) {
  std::string e;
  for (char c : s) {
    if (!std::isalpha(static_cast<unsigned char>(c)))
      break;
    e += e.empty() ? static_cast<char>(std::toupper(static_cast<unsigned char>(c)))
                   : static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return e;
}

}  // namespace detail

inline CrystalStructure parse_cif_p1(std::istream& in) {
  std::vector<std::string> tok = detail::cif_tokens(in);
  std::map<std::string, std::string> items;
  std::vector<std::string> site_cols;
  std::vector<std::vector<std::string>> site_rows;
  bool seen_site_loop = false;

  for (size_t i = 0; i < tok.size();) {
    std::string t = detail::lower(tok[i]);
    if (t == "loop_") {
      ++i;
      std::vector<std::string> cols;
      while (i < tok.size() && tok[i][0] == '_')
        cols.push_back(detail::lower(tok[i++]));
      std::vector<std::string> vals;
      while (i < tok.size() && tok[i][0] != '_' && detail::lower(tok[i]) != "loop_" &&
             detail::lower(tok[i]).rfind("data_", 0) != 0)
        vals.push_back(tok[i++]);
      if (cols.empty() || vals.size() % cols.size() != 0)
        throw ParseError("malformed loop");
      const size_t nrows = vals.size() / cols.size();
      for (size_t c = 0; c < cols.size(); ++c) {
        if (cols[c] == "_symmetry_equiv_pos_as_xyz" ||
            cols[c] == "_space_group_symop_operation_xyz") {
          if (nrows > 1 || (nrows == 1 && !detail::is_identity_op(vals[c])))
            throw UnsupportedSymmetry("symmetry loop with " + std::to_string(nrows) +
                                      " operations; only P1 is supported");
        }
      }
      if (cols[0].rfind("_atom_site_", 0) == 0 &&
          std::find(cols.begin(), cols.end(), "_atom_site_fract_x") != cols.end()) {
        if (seen_site_loop)
          throw ParseError("more than one atom_site loop");
        seen_site_loop = true;
        site_cols = cols;
        for (size_t r = 0; r < nrows; ++r)
          site_rows.emplace_back(vals.begin() + r * cols.size(),
                                 vals.begin() + (r + 1) * cols.size());
      }
    } else if (t[0] == '_') {
      if (i + 1 >= tok.size())
        throw ParseError("tag " + tok[i] + " has no value");
      items[t] = tok[i + 1];
      i += 2;
    } else {
      ++i;  // data_ block headers and stray values
    }
  }

  for (const char* tag : {"_symmetry_space_group_name_h-m", "_space_group_name_h-m_alt"}) {
    auto it = items.find(tag);
    if (it != items.end()) {
      std::string name;
      for (char c : detail::lower(it->second))
        if (!std::isspace(static_cast<unsigned char>(c)))
          name += c;
      if (name != "p1" && name != "?" && name != ".")
        throw UnsupportedSymmetry("space group '" + it->second + "' is not P1");
    }
  }
  auto get = [&](const char* tag) {
    auto it = items.find(tag);
    if (it == items.end())
      throw ParseError(std::string("missing tag ") + tag);
    return detail::cif_number(it->second, tag);
  };
  LatticeParams p{get("_cell_length_a"), get("_cell_length_b"),  get("_cell_length_c"),
                  get("_cell_angle_alpha"), get("_cell_angle_beta"), get("_cell_angle_gamma")};
  if (!seen_site_loop)
    throw ParseError("missing atom_site loop with fractional coordinates");
  auto col = [&](const std::string& name) -> int {
    auto it = std::find(site_cols.begin(), site_cols.end(), name);
    return it == site_cols.end() ? -1 : static_cast<int>(it - site_cols.begin());
  };
  const int cx = col("_atom_site_fract_x"), cy = col("_atom_site_fract_y"),
            cz = col("_atom_site_fract_z");
  int csym = col("_atom_site_type_symbol");
  if (csym < 0)
    csym = col("_atom_site_label");
  if (cy < 0 || cz < 0 || csym < 0)
    throw ParseError("atom_site loop needs fract_x/y/z and type_symbol or label");
  if (site_rows.empty())
    throw ParseError("atom_site loop is empty");

  Coords f(static_cast<Eigen::Index>(site_rows.size()), 3);
  std::vector<int> z;
  for (size_t r = 0; r < site_rows.size(); ++r) {
    const auto& row = site_rows[r];
    f(static_cast<Eigen::Index>(r), 0) = detail::cif_number(row[cx], "_atom_site_fract_x");
    f(static_cast<Eigen::Index>(r), 1) = detail::cif_number(row[cy], "_atom_site_fract_y");
    f(static_cast<Eigen::Index>(r), 2) = detail::cif_number(row[cz], "_atom_site_fract_z");
    auto num = atomic_number_from_symbol(detail::element_part(row[csym]));
    if (!num)
      throw ParseError("unknown element symbol '" + row[csym] + "'");
    z.push_back(*num);
  }
  return CrystalStructure(lattice_from_params(p), wrap_pi(f), std::move(z));
}

inline CrystalStructure read_cif_p1(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw ParseError("cannot open " + path);
  return parse_cif_p1(in);
}

// ---- run configuration --------------------------------------------------------

struct RunConfig {
  std::uint64_t seed = 0;
  int schedule_steps = 1000;
  double gamma_min = -10.0, gamma_max = 10.0;
  ModelConfig model;
  TrainConfig train;
  int save_every = 0;  // epochs between checkpoints, 0 = final only
  MatchCriteria matcher;
  CoverageThresholds coverage;
  SampleOptions sampler;
};

namespace detail {

inline void check_keys(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object())
    throw ParseError(where + " must be an object");
  for (const auto& [k, v] : j.items())
    if (!known.count(k))
      throw ParseError("unknown key '" + k + "' in " + where);
}

template <class T>
void read_opt(const json& j, const char* key, T& out) {
  if (!j.contains(key))
    return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ParseError(std::string("bad value for '") + key + "'");
  }
}

inline std::string variant_name(ReverseVariant v) {
  return v == ReverseVariant::kPeriodic ? "periodic" : "standard";
}

inline ReverseVariant parse_variant(const std::string& s) {
  if (s == "periodic")
    return ReverseVariant::kPeriodic;
  if (s == "standard")
    return ReverseVariant::kStandard;
  throw ParseError("variant must be 'periodic' or 'standard', got '" + s + "'");
}

}  // namespace detail

inline json config_to_json(const RunConfig& c) {
  const ModelConfig& m = c.model;
  const TrainConfig& t = c.train;
  return json{
      {"seed", c.seed},
      {"schedule", {{"steps", c.schedule_steps}, {"gamma_min", c.gamma_min}, {"gamma_max", c.gamma_max}}},
      {"model",
       {{"elements", m.elements},
        {"latent_dim", m.latent_dim},
        {"hidden", m.hidden},
        {"layers", m.layers},
        {"encoder_layers", m.encoder_layers},
        {"num_rbf", m.num_rbf},
        {"time_dim", m.time_dim},
        {"max_atoms", m.max_atoms},
        {"cutoff", m.cutoff},
        {"max_neighbors", m.max_neighbors},
        {"use_num_atoms_input", m.use_num_atoms_input},
        {"length_scale", m.length_scale}}},
      {"train",
       {{"epochs", t.epochs},
        {"batch_size", t.batch_size},
        {"learning_rate", t.learning_rate},
        {"grad_clip", t.grad_clip},
        {"save_every", c.save_every},
        {"type_weight", t.weights.type},
        {"kld_weight", t.weights.kld},
        {"lattice_weight", t.weights.lattice},
        {"comp_weight", t.weights.comp},
        {"num_atoms_weight", t.weights.num_atoms}}},
      {"matcher", {{"stol", c.matcher.stol}, {"angle_tol", c.matcher.angle_tol}, {"ltol", c.matcher.ltol}}},
      {"coverage",
       {{"composition", c.coverage.composition},
        {"structure", c.coverage.structure},
        {"rdf_cutoff", c.coverage.rdf_cutoff},
        {"rdf_bin", c.coverage.rdf_bin},
        {"rdf_smearing", c.coverage.rdf_smearing}}},
      {"sampler",
       {{"variant", detail::variant_name(c.sampler.sampler.variant)},
        {"initial_types",
         c.sampler.initial_types == InitialTypes::kArgmax ? "argmax" : "categorical"}}}};
}

inline RunConfig config_from_json(const json& j) {
  using detail::check_keys;
  using detail::read_opt;
  RunConfig c;
  check_keys(j, {"seed", "schedule", "model", "train", "matcher", "coverage", "sampler"}, "config");
  read_opt(j, "seed", c.seed);
  if (j.contains("schedule")) {
    const json& s = j["schedule"];
    check_keys(s, {"steps", "gamma_min", "gamma_max"}, "schedule");
    read_opt(s, "steps", c.schedule_steps);
    read_opt(s, "gamma_min", c.gamma_min);
    read_opt(s, "gamma_max", c.gamma_max);
  }
  if (j.contains("model")) {
    const json& s = j["model"];
    ModelConfig& m = c.model;
    check_keys(s, {"elements", "latent_dim", "hidden", "layers", "encoder_layers", "num_rbf",
                   "time_dim", "max_atoms", "cutoff", "max_neighbors", "use_num_atoms_input",
                   "length_scale"},
               "model");
    read_opt(s, "elements", m.elements);
    read_opt(s, "latent_dim", m.latent_dim);
    read_opt(s, "hidden", m.hidden);
    read_opt(s, "layers", m.layers);
    read_opt(s, "encoder_layers", m.encoder_layers);
    read_opt(s, "num_rbf", m.num_rbf);
    read_opt(s, "time_dim", m.time_dim);
    read_opt(s, "max_atoms", m.max_atoms);
    read_opt(s, "cutoff", m.cutoff);
    read_opt(s, "max_neighbors", m.max_neighbors);
    read_opt(s, "use_num_atoms_input", m.use_num_atoms_input);
    read_opt(s, "length_scale", m.length_scale);
  }
  if (j.contains("train")) {
    const json& s = j["train"];
    TrainConfig& t = c.train;
    check_keys(s, {"epochs", "batch_size", "learning_rate", "grad_clip", "save_every",
                   "type_weight", "kld_weight", "lattice_weight", "comp_weight",
                   "num_atoms_weight"},
               "train");
    read_opt(s, "epochs", t.epochs);
    read_opt(s, "batch_size", t.batch_size);
    read_opt(s, "learning_rate", t.learning_rate);
    read_opt(s, "grad_clip", t.grad_clip);
    read_opt(s, "save_every", c.save_every);
    read_opt(s, "type_weight", t.weights.type);
    read_opt(s, "kld_weight", t.weights.kld);
    read_opt(s, "lattice_weight", t.weights.lattice);
    read_opt(s, "comp_weight", t.weights.comp);
    read_opt(s, "num_atoms_weight", t.weights.num_atoms);
  }
  if (j.contains("matcher")) {
    const json& s = j["matcher"];
    check_keys(s, {"stol", "angle_tol", "ltol"}, "matcher");
    read_opt(s, "stol", c.matcher.stol);
    read_opt(s, "angle_tol", c.matcher.angle_tol);
    read_opt(s, "ltol", c.matcher.ltol);
  }
  if (j.contains("coverage")) {
    const json& s = j["coverage"];
    check_keys(s, {"composition", "structure", "rdf_cutoff", "rdf_bin", "rdf_smearing"},
               "coverage");
    read_opt(s, "composition", c.coverage.composition);
    read_opt(s, "structure", c.coverage.structure);
    read_opt(s, "rdf_cutoff", c.coverage.rdf_cutoff);
    read_opt(s, "rdf_bin", c.coverage.rdf_bin);
    read_opt(s, "rdf_smearing", c.coverage.rdf_smearing);
  }
  if (j.contains("sampler")) {
    const json& s = j["sampler"];
    check_keys(s, {"variant", "initial_types"}, "sampler");
    std::string v = detail::variant_name(c.sampler.sampler.variant);
    read_opt(s, "variant", v);
    c.sampler.sampler.variant = detail::parse_variant(v);
    std::string it = "categorical";
    read_opt(s, "initial_types", it);
    if (it == "argmax")
      c.sampler.initial_types = InitialTypes::kArgmax;
    else if (it == "categorical")
      c.sampler.initial_types = InitialTypes::kCategorical;
    else
      throw ParseError("initial_types must be 'categorical' or 'argmax'");
  }

  const LossWeights& w = c.train.weights;
  for (double x : {w.type, w.kld, w.lattice, w.comp, w.num_atoms})
    if (!(x >= 0))
      throw ParseError("loss weights must be >= 0");
  if (c.save_every < 0)
    throw ParseError("save_every must be >= 0");
  validate(c.matcher);
  return c;
}

inline RunConfig read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw ParseError("cannot open " + path);
  try {
    return config_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

// DPCV_SEED, when set, replaces the configured seed.
inline void apply_seed_override(RunConfig& c) {
  if (const char* s = std::getenv("DPCV_SEED")) {
    char* end = nullptr;
    unsigned long long v = std::strtoull(s, &end, 10);
    if (*s == '\0' || *end != '\0')
      throw ParseError(std::string("DPCV_SEED is not an unsigned integer: ") + s);
    c.seed = v;
  }
}

// Fills data-dependent model fields: the element vocabulary when empty and
// the lattice length scale when not positive (mean cell length).
inline void fit_model_config(ModelConfig& m, const std::vector<CrystalStructure>& data) {
  if (data.empty())
    throw InvalidInput("empty dataset");
  if (m.elements.empty()) {
    std::set<int> z;
    for (const auto& s : data)
      z.insert(s.atomic_numbers().begin(), s.atomic_numbers().end());
    m.elements.assign(z.begin(), z.end());
  }
  if (!(m.length_scale > 0)) {
    double sum = 0;
    for (const auto& s : data) {
      auto p = s.lattice().parameters();
      sum += (p.a + p.b + p.c) / 3.0;
    }
    m.length_scale = sum / static_cast<double>(data.size());
  }
}

// ---- checkpoints ----------------------------------------------------------------

inline constexpr char kCheckpointMagic[4] = {'D', 'P', 'C', 'V'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  json config;
  std::vector<nn::NamedTensor> tensors;
};

namespace detail {

template <class U>
void put_le(std::ostream& out, U v) {
  for (size_t i = 0; i < sizeof(U); ++i)
    out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

template <class U>
U get_le(std::istream& in) {
  U v = 0;
  for (size_t i = 0; i < sizeof(U); ++i) {
    int c = in.get();
    if (c == EOF)
      throw ParseError("checkpoint truncated");
    v |= static_cast<U>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return v;
}

inline std::string get_bytes(std::istream& in, std::uint64_t n) {
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (static_cast<std::uint64_t>(in.gcount()) != n)
    throw ParseError("checkpoint truncated");
  return s;
}

}  // namespace detail

// Canonical JSON: sorted keys (nlohmann objects are ordered maps), no spaces.
inline void write_checkpoint(std::ostream& out, const Checkpoint& ck) {
  out.write(kCheckpointMagic, 4);
  detail::put_le<std::uint32_t>(out, kCheckpointVersion);
  std::string cfg = ck.config.dump();
  detail::put_le<std::uint64_t>(out, cfg.size());
  out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ck.tensors.size()));
  for (const auto& t : ck.tensors) {
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    detail::put_le<std::uint32_t>(out, 2);
    detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(t.value.rows()));
    detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(t.value.cols()));
    for (Eigen::Index i = 0; i < t.value.size(); ++i)
      detail::put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(t.value.data()[i]));
  }
}

inline Checkpoint read_checkpoint(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::string(magic, 4) != std::string(kCheckpointMagic, 4))
    throw ParseError("not a checkpoint file (bad magic)");
  auto version = detail::get_le<std::uint32_t>(in);
  if (version != kCheckpointVersion)
    throw ParseError("unsupported checkpoint version " + std::to_string(version) +
                     " (expected " + std::to_string(kCheckpointVersion) + ")");
  Checkpoint ck;
  auto len = detail::get_le<std::uint64_t>(in);
  try {
    ck.config = json::parse(detail::get_bytes(in, len));
  } catch (const json::exception& e) {
    throw ParseError(std::string("checkpoint config: ") + e.what());
  }
  auto count = detail::get_le<std::uint32_t>(in);
  for (std::uint32_t k = 0; k < count; ++k) {
    nn::NamedTensor t;
    t.name = detail::get_bytes(in, detail::get_le<std::uint32_t>(in));
    auto rank = detail::get_le<std::uint32_t>(in);
    if (rank < 1 || rank > 2)
      throw ParseError("tensor '" + t.name + "' has unsupported rank " + std::to_string(rank));
    std::uint64_t rows = detail::get_le<std::uint64_t>(in);
    std::uint64_t cols = rank == 2 ? detail::get_le<std::uint64_t>(in) : 1;
    if (rows > (1u << 28) || cols > (1u << 28))
      throw ParseError("tensor '" + t.name + "' is implausibly large");
    t.value.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < t.value.size(); ++i)
      t.value.data()[i] = std::bit_cast<double>(detail::get_le<std::uint64_t>(in));
    ck.tensors.push_back(std::move(t));
  }
  if (in.peek() != EOF)
    throw ParseError("trailing bytes after checkpoint");
  return ck;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw ParseError("cannot write " + path);
  write_checkpoint(out, ck);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ParseError("cannot open " + path);
  return read_checkpoint(in);
}

inline Checkpoint make_checkpoint(const RunConfig& cfg, const Model& model) {
  return {config_to_json(cfg), model.params().tensors()};
}

// Rebuilds the model from a checkpoint's config snapshot and tensors.
inline std::pair<RunConfig, Model> restore(const Checkpoint& ck) {
  RunConfig cfg = config_from_json(ck.config);
  Model model(cfg.model, cfg.seed);
  model.params().assign(ck.tensors);
  return {std::move(cfg), std::move(model)};
}

// ---- reports --------------------------------------------------------------------

inline json report_to_json(const MetricsReport& r) {
  json j = json::object();
  auto put = [&](const char* k, const std::optional<double>& v) {
    if (v && std::isfinite(*v))
      j[k] = *v;
  };
  put("match_rate", r.match_rate);
  put("mean_delta_rms", r.mean_delta_rms);
  put("validity_struct", r.validity_struct);
  put("validity_comp", r.validity_comp);
  put("cov_r", r.cov_r);
  put("cov_p", r.cov_p);
  put("wasserstein_rho", r.wasserstein_rho);
  put("wasserstein_nelem", r.wasserstein_nelem);
  put("delta_v_rms", r.delta_v_rms);
  put("delta_e_rms", r.delta_e_rms);
  return j;
}

inline void write_loss_csv_header(std::ostream& out) {
  out << "epoch,L_total,L_simple,CE,KLD,latt,comp,N_a\n";
}

inline void write_loss_csv_row(std::ostream& out, const EpochRecord& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.epoch,
                r.mean.total, r.mean.simple, r.mean.ce, r.mean.kld, r.mean.lattice, r.mean.comp,
                r.mean.num_atoms);
  out << buf;
}

}  // namespace dpcdvae
#endif
