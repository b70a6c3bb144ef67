// Developer utility: writes a synthetic shape corpus in the dataset layout
// (images/, labels_real/, labels_coarse/) for demos and smoke runs.

#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "hysod/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"synthetic shape-corpus generator"};
  std::string out_dir;
  hysod::SyntheticOptions options;
  int real_labels = -1;
  app.add_option("--out", out_dir, "output dataset root")->required();
  app.add_option("--count", options.count, "number of samples");
  app.add_option("--size", options.size, "square image side");
  app.add_option("--seed", options.seed, "generator seed");
  app.add_option("--prefix", options.prefix, "id prefix");
  app.add_option("--real-labels", real_labels,
                 "how many ids get real labels (-1 = all, for validation sets)");
  CLI11_PARSE(app, argc, argv);

  try {
    hysod::generate_synthetic_dataset(out_dir, options, real_labels);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  std::cout << "wrote " << options.count << " samples to " << out_dir << "\n";
  return 0;
}
