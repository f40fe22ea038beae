#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "strata/geometry.hpp"

namespace strata {

struct CurveDesc {
  std::string kind = "flat";  // flat | sine | cosine | mixed
  std::optional<std::uint64_t> seed;
  int modes = 30;
  double amp = 1.0 / 60.0;
  double offset = 0.0;
  std::vector<double> sin_coeffs, cos_coeffs;  // explicit coefficients
};

struct Config {
  double period = 1.0;
  std::vector<double> omega;
  std::vector<CurveDesc> curves;
  std::vector<int> n_points;
  AuxParams aux;
  Tolerances tol;
  std::vector<double> sweep_angles;  // radians
  std::vector<int> converge_n;
  std::string out_dir = "out";
  std::uint64_t base_seed = 1;

  ProblemSpec to_spec() const;
  std::uint64_t effective_seed(int interface_index) const;
};

Config parse_config(const std::string& text);
Config load_config_file(const std::string& path);

std::shared_ptr<const Curve> make_curve(const CurveDesc& desc, double period,
                                        std::uint64_t effective_seed);

/// CLI entry point: solve | sweep | update | converge | field | verify.
/// Exit codes: 0 success, 2 config error, 3 numerical failure, 4 verification failure.
int run_cli(int argc, char** argv);

}  // namespace strata
