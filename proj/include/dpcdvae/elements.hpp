// Periodic-table data: symbols, standard atomic masses and common oxidation
// states (the latter used by the charge-neutrality validity check).

#ifndef DPCDVAE_ELEMENTS_HPP_
#define DPCDVAE_ELEMENTS_HPP_

#include <array>
#include <initializer_list>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace dpcdvae {

inline constexpr int kMaxAtomicNumber = 118;

namespace detail {

struct ElementRecord {
  std::string_view symbol;
  double mass;  // amu
  std::array<int, 5> oxidation_states;
  int n_states;
};

// clang-format off
inline constexpr std::array<ElementRecord, kMaxAtomicNumber> kElements{{
  {"H", 1.008, {-1, 1}, 2},          {"He", 4.0026, {}, 0},
  {"Li", 6.94, {1}, 1},              {"Be", 9.0122, {2}, 1},
  {"B", 10.81, {3}, 1},              {"C", 12.011, {-4, 4}, 2},
  {"N", 14.007, {-3, 3, 5}, 3},      {"O", 15.999, {-2}, 1},
  {"F", 18.998, {-1}, 1},            {"Ne", 20.180, {}, 0},
  {"Na", 22.990, {1}, 1},            {"Mg", 24.305, {2}, 1},
  {"Al", 26.982, {3}, 1},            {"Si", 28.085, {-4, 4}, 2},
  {"P", 30.974, {-3, 3, 5}, 3},      {"S", 32.06, {-2, 2, 4, 6}, 4},
  {"Cl", 35.45, {-1, 1, 3, 5, 7}, 5},{"Ar", 39.948, {}, 0},
  {"K", 39.098, {1}, 1},             {"Ca", 40.078, {2}, 1},
  {"Sc", 44.956, {3}, 1},            {"Ti", 47.867, {4}, 1},
  {"V", 50.942, {5}, 1},             {"Cr", 51.996, {3, 6}, 2},
  {"Mn", 54.938, {2, 4, 7}, 3},      {"Fe", 55.845, {2, 3}, 2},
  {"Co", 58.933, {2, 3}, 2},         {"Ni", 58.693, {2}, 1},
  {"Cu", 63.546, {2}, 1},            {"Zn", 65.38, {2}, 1},
  {"Ga", 69.723, {3}, 1},            {"Ge", 72.630, {-4, 2, 4}, 3},
  {"As", 74.922, {-3, 3, 5}, 3},     {"Se", 78.971, {-2, 2, 4, 6}, 4},
  {"Br", 79.904, {-1, 1, 3, 5}, 4},  {"Kr", 83.798, {2}, 1},
  {"Rb", 85.468, {1}, 1},            {"Sr", 87.62, {2}, 1},
  {"Y", 88.906, {3}, 1},             {"Zr", 91.224, {4}, 1},
  {"Nb", 92.906, {5}, 1},            {"Mo", 95.95, {4, 6}, 2},
  {"Tc", 98.0, {4, 7}, 2},           {"Ru", 101.07, {3, 4}, 2},
  {"Rh", 102.91, {3}, 1},            {"Pd", 106.42, {2, 4}, 2},
  {"Ag", 107.87, {1}, 1},            {"Cd", 112.41, {2}, 1},
  {"In", 114.82, {3}, 1},            {"Sn", 118.71, {-4, 2, 4}, 3},
  {"Sb", 121.76, {-3, 3, 5}, 3},     {"Te", 127.60, {-2, 2, 4, 6}, 4},
  {"I", 126.90, {-1, 1, 3, 5, 7}, 5},{"Xe", 131.29, {2, 4, 6}, 3},
  {"Cs", 132.91, {1}, 1},            {"Ba", 137.33, {2}, 1},
  {"La", 138.91, {3}, 1},            {"Ce", 140.12, {3, 4}, 2},
  {"Pr", 140.91, {3}, 1},            {"Nd", 144.24, {3}, 1},
  {"Pm", 145.0, {3}, 1},             {"Sm", 150.36, {3}, 1},
  {"Eu", 151.96, {2, 3}, 2},         {"Gd", 157.25, {3}, 1},
  {"Tb", 158.93, {3}, 1},            {"Dy", 162.50, {3}, 1},
  {"Ho", 164.93, {3}, 1},            {"Er", 167.26, {3}, 1},
  {"Tm", 168.93, {3}, 1},            {"Yb", 173.05, {3}, 1},
  {"Lu", 174.97, {3}, 1},            {"Hf", 178.49, {4}, 1},
  {"Ta", 180.95, {5}, 1},            {"W", 183.84, {4, 6}, 2},
  {"Re", 186.21, {4}, 1},            {"Os", 190.23, {4}, 1},
  {"Ir", 192.22, {3, 4}, 2},         {"Pt", 195.08, {2, 4}, 2},
  {"Au", 196.97, {3}, 1},            {"Hg", 200.59, {1, 2}, 2},
  {"Tl", 204.38, {1, 3}, 2},         {"Pb", 207.2, {2, 4}, 2},
  {"Bi", 208.98, {3}, 1},            {"Po", 209.0, {-2, 2, 4}, 3},
  {"At", 210.0, {-1, 1}, 2},         {"Rn", 222.0, {2}, 1},
  {"Fr", 223.0, {1}, 1},             {"Ra", 226.0, {2}, 1},
  {"Ac", 227.0, {3}, 1},             {"Th", 232.04, {4}, 1},
  {"Pa", 231.04, {5}, 1},            {"U", 238.03, {6}, 1},
  {"Np", 237.0, {5}, 1},             {"Pu", 244.0, {4}, 1},
  {"Am", 243.0, {3}, 1},             {"Cm", 247.0, {3}, 1},
  {"Bk", 247.0, {3}, 1},             {"Cf", 251.0, {3}, 1},
  {"Es", 252.0, {3}, 1},             {"Fm", 257.0, {3}, 1},
  {"Md", 258.0, {3}, 1},             {"No", 259.0, {2}, 1},
  {"Lr", 266.0, {3}, 1},             {"Rf", 267.0, {}, 0},
  {"Db", 268.0, {}, 0},              {"Sg", 269.0, {}, 0},
  {"Bh", 270.0, {}, 0},              {"Hs", 277.0, {}, 0},
  {"Mt", 278.0, {}, 0},              {"Ds", 281.0, {}, 0},
  {"Rg", 282.0, {}, 0},              {"Cn", 285.0, {}, 0},
  {"Nh", 286.0, {}, 0},              {"Fl", 289.0, {}, 0},
  {"Mc", 290.0, {}, 0},              {"Lv", 293.0, {}, 0},
  {"Ts", 294.0, {}, 0},              {"Og", 294.0, {}, 0},
}};
// clang-format on

}  // namespace detail

inline bool is_valid_atomic_number(int z) { return z >= 1 && z <= kMaxAtomicNumber; }

inline std::string_view element_symbol(int z) {
  return is_valid_atomic_number(z) ? detail::kElements[z - 1].symbol : std::string_view{};
}

inline double atomic_mass(int z) {
  return is_valid_atomic_number(z) ? detail::kElements[z - 1].mass : 0.0;
}

// Empty span means the element has no tabulated states.
inline std::span<const int> oxidation_states(int z) {
  if (!is_valid_atomic_number(z))
    return {};
  const auto& e = detail::kElements[z - 1];
  return {e.oxidation_states.data(), static_cast<size_t>(e.n_states)};
}

// Case-sensitive symbol lookup ("Na", not "NA").
inline std::optional<int> atomic_number_from_symbol(std::string_view symbol) {
  for (int z = 1; z <= kMaxAtomicNumber; ++z)
    if (detail::kElements[z - 1].symbol == symbol)
      return z;
  return std::nullopt;
}

}  // namespace dpcdvae
#endif
