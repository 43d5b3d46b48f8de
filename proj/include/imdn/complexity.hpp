#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "imdn/model.hpp"

namespace imdn {

struct CostRow {
  std::string name;
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 0;
  int area_divisor = 1;  // m^2 / m_l^2
  std::int64_t params = 0;
  double macs_coeff = 0.0;  // coefficient of m^2
};

struct CostReport {
  std::vector<CostRow> rows;
  std::int64_t total_params = 0;
  double macs_per_hr_pixel = 0.0;
  int depth = 0;
  int branch_depth = 0;
};

// Sum over convs of in*out*k^2 + out.
std::int64_t count_params(const Model& model);
std::int64_t conv_params(int in_channels, int out_channels, int kernel);

// Sum over convs of in*out*k^2 * (m_l^2 / m^2): multiply-accumulates per HR pixel.
// Bias additions are not counted.
double count_macs(const Model& model);

// Longest chain of trunk convolutions from input to output.
int depth(const Model& model);
// Longest unbroken chain of attention-branch convolutions.
int branch_depth(const Model& model);

CostReport analyze(const Model& model);

// Half away from zero to the nearest thousand, in units of K.
std::int64_t round_to_k(double value);

void write_report_text(std::ostream& os, const CostReport& report);
void write_report_csv(std::ostream& os, const CostReport& report);

}  // namespace imdn
