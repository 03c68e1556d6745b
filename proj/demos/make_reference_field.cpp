// Writes a small reference-field dataset: a point-charge potential on a
// square grid (reference.csv) and perturbed copies of it (fields.csv).
//
//   make_reference_field <out_dir> [rows] [grid] [seed]

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "pgvae/rng.hpp"

namespace {

double potential(double x, double y) {
  const double charges[3][3] = {{0.25, 0.25, 1.0}, {0.5, 0.5, -1.0}, {0.75, 0.75, 1.0}};
  double v = 0.0;
  for (const auto& c : charges) v += c[2] / std::sqrt((x - c[0]) * (x - c[0]) + (y - c[1]) * (y - c[1]) + 0.05);
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: %s <out_dir> [rows] [grid] [seed]\n", argv[0]);
    return 2;
  }
  const std::filesystem::path out = argv[1];
  const int rows = argc > 2 ? std::atoi(argv[2]) : 800;
  const int grid = argc > 3 ? std::atoi(argv[3]) : 6;
  pgvae::Rng rng(argc > 4 ? std::strtoull(argv[4], nullptr, 10) : 3);
  std::filesystem::create_directories(out);

  std::vector<double> target(grid * grid);
  std::ofstream ref(out / "reference.csv");
  for (int i = 0; i < grid; ++i) {
    for (int j = 0; j < grid; ++j) {
      const double v = potential((i + 0.5) / grid, (j + 0.5) / grid);
      target[i * grid + j] = v;
      ref << (j ? "," : "") << v;
    }
    ref << "\n";
  }

  std::ofstream f(out / "fields.csv");
  for (int k = 0; k < grid * grid; ++k) f << "x" << k << ",";
  f << "property\n";
  for (int r = 0; r < rows; ++r) {
    // two random Gaussian bumps with a log-uniform amplitude
    const double amp = std::exp(rng.uniform(std::log(0.01), std::log(2.0)));
    double bx[2], by[2], bs[2], bw[2];
    for (int b = 0; b < 2; ++b) {
      bx[b] = rng.uniform();
      by[b] = rng.uniform();
      bs[b] = rng.uniform(0.1, 0.4);
      bw[b] = rng.normal();
    }
    double sq = 0.0;
    for (int i = 0; i < grid; ++i) {
      for (int j = 0; j < grid; ++j) {
        const double x = (i + 0.5) / grid, y = (j + 0.5) / grid;
        double d = 0.0;
        for (int b = 0; b < 2; ++b) {
          d += bw[b] * std::exp(-((x - bx[b]) * (x - bx[b]) + (y - by[b]) * (y - by[b])) / (2 * bs[b] * bs[b]));
        }
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6g", target[i * grid + j] + amp * d + 0.01 * rng.normal());
        const double u = std::strtod(buf, nullptr) - target[i * grid + j];
        sq += u * u;
        f << buf << ",";
      }
    }
    f << -std::log(sq / (grid * grid) + 1e-12) << "\n";
  }
  std::printf("wrote %s and %s\n", (out / "reference.csv").c_str(), (out / "fields.csv").c_str());
  return 0;
}
