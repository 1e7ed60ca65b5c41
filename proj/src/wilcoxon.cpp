#include "branchnet/wilcoxon.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

#include "branchnet/errors.hpp"

namespace branchnet {

WilcoxonResult wilcoxon_exact(const std::vector<double>& diffs) {
  if (diffs.empty()) throw DataError("wilcoxon: empty difference list");
  std::vector<double> mag;
  std::vector<int> sign;
  for (const double d : diffs) {
    if (!std::isfinite(d)) throw DataError("wilcoxon: non-finite difference");
    if (d == 0.0) continue;
    mag.push_back(std::abs(d));
    sign.push_back(d > 0 ? 1 : -1);
  }
  WilcoxonResult res;
  res.n_nonzero = static_cast<int>(mag.size());
  if (mag.empty()) {
    res.degenerate = true;
    res.p_value = 1.0;
    return res;
  }
  const int n = res.n_nonzero;
  if (n > 25) throw DataError("wilcoxon: exact test limited to 25 nonzero differences");

  // Midranks. Doubling turns every (possibly .5-valued) midrank into an
  // integer, so the whole distribution lives on exact integer sums.
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return mag[static_cast<std::size_t>(a)] < mag[static_cast<std::size_t>(b)];
  });
  std::vector<long> rank2(static_cast<std::size_t>(n), 0);
  for (int i = 0; i < n;) {
    int j = i;
    while (j + 1 < n && mag[static_cast<std::size_t>(order[static_cast<std::size_t>(j + 1)])] ==
                            mag[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])])
      ++j;
    for (int k = i; k <= j; ++k)
      rank2[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = i + j + 2;
    i = j + 1;
  }

  long w2_plus = 0, w2_minus = 0;
  for (int i = 0; i < n; ++i)
    (sign[static_cast<std::size_t>(i)] > 0 ? w2_plus : w2_minus) +=
        rank2[static_cast<std::size_t>(i)];
  res.w_plus = static_cast<double>(w2_plus) / 2.0;
  res.w_minus = static_cast<double>(w2_minus) / 2.0;

  const long total2 = w2_plus + w2_minus;  // = n(n+1)
  std::vector<std::uint64_t> count(static_cast<std::size_t>(total2 + 1), 0);
  count[0] = 1;
  for (const long r : rank2)
    for (long s = total2; s >= r; --s)
      count[static_cast<std::size_t>(s)] += count[static_cast<std::size_t>(s - r)];

  std::uint64_t le = 0, ge = 0;
  for (long s = 0; s <= total2; ++s) {
    if (s <= w2_plus) le += count[static_cast<std::size_t>(s)];
    if (s >= w2_plus) ge += count[static_cast<std::size_t>(s)];
  }
  const double denom = std::ldexp(1.0, n);  // 2^n, exact
  const double p = 2.0 * static_cast<double>(std::min(le, ge)) / denom;
  res.p_value = std::min(1.0, p);
  return res;
}

}  // namespace branchnet
