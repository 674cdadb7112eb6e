// Writes a planted-signal dataset (csv, schema, relations) for trying the
// pipeline end to end.
#include <iostream>

#include <CLI11.hpp>

#include "tabgnn/error.hpp"
#include "tabgnn/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate a planted-signal table"};
  tabgnn::PlantedOptions opt;
  std::string dir = ".", stem = "planted";
  app.add_option("--out", dir, "Output directory");
  app.add_option("--stem", stem, "File name stem");
  app.add_option("--rows", opt.n, "Number of rows");
  app.add_option("--groups", opt.groups_a, "Groups along the informative relation");
  app.add_option("--noise-groups", opt.groups_b, "Groups along the random relation");
  app.add_option("--seed", opt.seed, "Random seed");
  CLI11_PARSE(app, argc, argv);
  try {
    tabgnn::write_planted(dir, stem, tabgnn::make_planted(opt));
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return 1;
  }
  return 0;
}
