#include "imdn/complexity.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <unordered_map>

namespace imdn {

std::int64_t conv_params(int in_channels, int out_channels, int kernel) {
  return static_cast<std::int64_t>(in_channels) * out_channels * kernel * kernel + out_channels;
}

std::int64_t count_params(const Model& model) {
  std::int64_t total = 0;
  for (const LayerSlot& l : model.layers())
    total += conv_params(l.in_channels(), l.out_channels(), l.kernel());
  return total;
}

namespace {

double layer_macs(const LayerSlot& l) {
  const double mults =
      static_cast<double>(l.in_channels()) * l.out_channels() * l.kernel() * l.kernel();
  return mults / static_cast<double>(l.area_divisor);
}

// Longest path where only layers matching `counts` add one. With `contiguous`,
// a non-matching layer breaks the chain. Layers are stored in topological
// order, so one forward sweep suffices.
template <typename Pred>
int longest_chain(const Model& model, Pred counts, bool contiguous = false) {
  std::unordered_map<std::string, int> chain;
  int best = 0;
  for (const LayerSlot& l : model.layers()) {
    int longest_input = 0;
    for (const std::string& s : l.sources) {
      auto it = chain.find(s);
      if (it == chain.end())
        fail(ErrorCode::invalid_argument, "layer '" + l.name + "' reads unknown layer '" + s + "'");
      longest_input = std::max(longest_input, it->second);
    }
    const int here = counts(l) ? longest_input + 1 : (contiguous ? 0 : longest_input);
    chain[l.name] = here;
    best = std::max(best, here);
  }
  return best;
}

}  // namespace

double count_macs(const Model& model) {
  double total = 0.0;
  for (const LayerSlot& l : model.layers()) total += layer_macs(l);
  return total;
}

int depth(const Model& model) {
  return longest_chain(model, [](const LayerSlot& l) { return !l.attention_branch; });
}

int branch_depth(const Model& model) {
  return longest_chain(model, [](const LayerSlot& l) { return l.attention_branch; }, true);
}

CostReport analyze(const Model& model) {
  CostReport report;
  for (const LayerSlot& l : model.layers()) {
    CostRow row;
    row.name = l.name;
    row.in_channels = l.in_channels();
    row.out_channels = l.out_channels();
    row.kernel = l.kernel();
    row.area_divisor = l.area_divisor;
    row.params = conv_params(row.in_channels, row.out_channels, row.kernel);
    row.macs_coeff = layer_macs(l);
    report.total_params += row.params;
    report.macs_per_hr_pixel += row.macs_coeff;
    report.rows.push_back(std::move(row));
  }
  report.depth = depth(model);
  report.branch_depth = branch_depth(model);
  return report;
}

std::int64_t round_to_k(double value) {
  return static_cast<std::int64_t>(std::round(value / 1000.0));
}

void write_report_text(std::ostream& os, const CostReport& report) {
  std::size_t width = 5;
  for (const CostRow& r : report.rows) width = std::max(width, r.name.size());
  const auto flags = os.flags();
  const auto precision = os.precision();
  os << std::left << std::setw(static_cast<int>(width)) << "layer" << std::right << std::setw(6)
     << "in" << std::setw(6) << "out" << std::setw(3) << "k" << std::setw(10) << "params"
     << std::setw(14) << "macs_coeff" << '\n';
  for (const CostRow& r : report.rows) {
    os << std::left << std::setw(static_cast<int>(width)) << r.name << std::right << std::setw(6)
       << r.in_channels << std::setw(6) << r.out_channels << std::setw(3) << r.kernel
       << std::setw(10) << r.params << std::setw(14) << std::fixed << std::setprecision(2)
       << r.macs_coeff << '\n';
  }
  os.flags(flags);
  os << "total params: " << report.total_params << " (" << round_to_k(report.total_params)
     << "K)\n";
  os << "macs per HR pixel: " << std::fixed << std::setprecision(2) << report.macs_per_hr_pixel
     << " (" << round_to_k(report.macs_per_hr_pixel) << "K·m²)\n";
  os.flags(flags);
  os.precision(precision);
  os << "depth: " << report.depth << " (attention branch: " << report.branch_depth << ")\n";
}

void write_report_csv(std::ostream& os, const CostReport& report) {
  os << "layer,in,out,k,params,macs_coeff\n";
  const auto precision = os.precision(17);
  for (const CostRow& r : report.rows)
    os << r.name << ',' << r.in_channels << ',' << r.out_channels << ',' << r.kernel << ','
       << r.params << ',' << r.macs_coeff << '\n';
  os.precision(precision);
}

}  // namespace imdn
