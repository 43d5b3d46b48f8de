#include <sstream>

#include "doctest.h"
#include "imdn/complexity.hpp"

using namespace imdn;

TEST_SUITE("complexity") {

TEST_CASE("MAC coefficients of the full network") {
  // Independent tally for x4: trunk convs at LR resolution divided by 16.
  const double block = 64 * 64 * 9 + 2 * (48 * 64 * 9) + 48 * 16 * 9 +
                       64 * 4 + 4 * 64 + 64 * 64;
  const double trunk = 3 * 64 * 9 + 6 * block + 384 * 64 + 64 * 64 * 9;
  for (int s : {2, 3, 4}) {
    const Model m = build_imdn(config_for(Variant::imdn, s));
    const double want = (trunk + 64 * 3 * s * s * 9) / (s * s);
    CHECK(count_macs(m) == doctest::Approx(want).epsilon(1e-15));
  }
  CHECK(count_macs(build_imdn(config_for(Variant::imdn, 4))) == doctest::Approx(44556.0).epsilon(1e-15));
  CHECK(count_macs(build_imdn(config_for(Variant::imdn, 2))) == doctest::Approx(173040.0).epsilon(1e-15));
  CHECK(count_macs(build_imdn(config_for(Variant::imdn, 3))) ==
        doctest::Approx(700800.0 / 9.0).epsilon(1e-15));
  CHECK(round_to_k(count_macs(build_imdn(config_for(Variant::imdn, 3)))) == 78);
}

TEST_CASE("depth") {
  for (int s : {2, 3, 4}) CHECK(depth(build_imdn(config_for(Variant::imdn, s))) == 34);
  const Model m = build_imdn(ImdnConfig{});
  CHECK(branch_depth(m) == 2);
  CHECK(depth(build_ablation(Variant::plain3_b4, 4)) == 15);
  CHECK(depth(build_ablation(Variant::basic_b4, 4)) == 23);
  CHECK(depth(build_ablation(Variant::b4, 4)) == 24);
  CHECK(depth(build_imdn(ImdnConfig::narrow(8, 1, 2))) == 9);
}

TEST_CASE("parameter sums agree with the per-row report") {
  for (Variant v : all_variants()) {
    const Model m = build_variant(v, 4);
    const CostReport r = analyze(m);
    std::int64_t total = 0;
    double macs = 0.0;
    for (const CostRow& row : r.rows) {
      total += row.params;
      macs += row.macs_coeff;
      CHECK(row.params == conv_params(row.in_channels, row.out_channels, row.kernel));
    }
    CHECK(total == r.total_params);
    CHECK(total == count_params(m));
    CHECK(macs == count_macs(m));
  }
}

TEST_CASE("rounding") {
  CHECK(round_to_k(715176) == 715);
  CHECK(round_to_k(509552) == 510);
  CHECK(round_to_k(482496) == 482);
  CHECK(round_to_k(1500) == 2);
  CHECK(round_to_k(1499.999) == 1);
}

TEST_CASE("reports") {
  const CostReport r = analyze(build_imdn(ImdnConfig{}));
  std::ostringstream text;
  text.precision(6);
  write_report_text(text, r);
  CHECK(text.str().find("715176 (715K)") != std::string::npos);
  CHECK(text.str().find("(45K·m²)") != std::string::npos);
  CHECK(text.str().find("depth: 34") != std::string::npos);
  CHECK(text.precision() == 6);

  std::ostringstream csv;
  write_report_csv(csv, r);
  std::istringstream lines(csv.str());
  std::string line;
  std::getline(lines, line);
  CHECK(line == "layer,in,out,k,params,macs_coeff");
  int rows = 0;
  while (std::getline(lines, line)) ++rows;
  CHECK(rows == static_cast<int>(r.rows.size()));
  CHECK(csv.precision() == 6);
}

}
