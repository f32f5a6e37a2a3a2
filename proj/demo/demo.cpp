// Completes the three-rating demo file and prints every cell.

#include <fstream>
#include <iostream>

#include "uctc/uctc.hpp"

int main(int argc, char** argv) {
  const char* path = argc > 1 ? argv[1] : "ratings.csv";
  std::ifstream in(path);
  if (!in) {
    std::cerr << "cannot open " << path << '\n';
    return 2;
  }
  const auto data = uctc::parse_ratings(in, uctc::Schema{});
  const auto model = uctc::tca(data.tensor, 1);
  std::cout << "converged in " << model.report().sweeps << " sweeps\n";

  const auto& ext = data.tensor.extents();
  uctc::IndexVector idx(ext.size(), 1);
  do {
    const auto names = data.ids.names_of(idx);
    std::cout << names[0] << ',' << names[1] << ' ' << model.predict(idx)
              << (model.is_known(idx) ? " (known)" : "") << '\n';
  } while (uctc::advance_index(idx, ext));
}
