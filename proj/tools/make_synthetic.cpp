// Writes the perturbed CsCl / rock-salt dataset as train and test JSONL files.

#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "dpcdvae/dpcdvae.hpp"

int main(int argc, char** argv) {
  dpcdvae::SyntheticConfig sc;
  std::string out = ".";
  size_t train_count = 400;
  std::uint64_t split_seed = 1;
  CLI::App app{"Generate the synthetic two-element cubic dataset"};
  app.add_option("--out", out, "Output directory (train.jsonl, test.jsonl)");
  app.add_option("--count", sc.count, "Total structures");
  app.add_option("--train", train_count, "Structures in the training split");
  app.add_option("--seed", sc.seed, "Generation seed");
  app.add_option("--split-seed", split_seed, "Shuffle seed for the split");
  app.add_option("--coord-jitter", sc.coord_jitter, "Fractional coordinate noise (sd)");
  CLI11_PARSE(app, argc, argv);
  try {
    auto [train, test] = dpcdvae::split_dataset(dpcdvae::make_synthetic_dataset(sc), train_count,
                                                split_seed);
    std::filesystem::create_directories(out);
    auto dump = [&](const std::vector<dpcdvae::CrystalStructure>& set, const char* name) {
      std::vector<dpcdvae::DatasetRecord> recs;
      for (size_t i = 0; i < set.size(); ++i)
        recs.push_back({set[i], std::nullopt, std::string(name) + "-" + std::to_string(i)});
      dpcdvae::write_jsonl((std::filesystem::path(out) / (std::string(name) + ".jsonl")).string(),
                           recs);
    };
    dump(train, "train");
    dump(test, "test");
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
