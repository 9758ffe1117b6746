// Writes the synthetic rename corpus (train/val/test splits, mock backend
// rules and a config) into a directory.
//
//   make_fixture <dir> [train val test seed]

#include <cstdlib>
#include <iostream>

#include "fixtures.hpp"

int main(int argc, char** argv) {
  if (argc != 2 && argc != 6) {
    std::cerr << "usage: make_fixture <dir> [train val test seed]\n";
    return 64;
  }
  std::size_t train = 40, val = 10, test = 20;
  std::uint64_t seed = 42;
  if (argc == 6) {
    train = std::strtoull(argv[2], nullptr, 10);
    val = std::strtoull(argv[3], nullptr, 10);
    test = std::strtoull(argv[4], nullptr, 10);
    seed = std::strtoull(argv[5], nullptr, 10);
  }
  try {
    std::filesystem::create_directories(argv[1]);
    const auto files = cup::fixtures::write_end_to_end(argv[1], train, val, test, seed);
    std::cout << "wrote " << files.dir.string() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
