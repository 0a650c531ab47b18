#include <sys/resource.h>

#include <cmath>

#include <gtest/gtest.h>

#include "fgp/timing.hpp"

namespace fgp {
namespace {

// Peak resident set size in bytes (Linux reports kilobytes).
double peak_rss_bytes() {
  rusage u{};
  getrusage(RUSAGE_SELF, &u);
  return static_cast<double>(u.ru_maxrss) * 1024.0;
}

// A dense n x n or M x M array at this size would need 80 GB; one likelihood
// evaluation must stay within a small multiple of the sparse structure.
TEST(Memory, LikelihoodAtOneHundredThousandCells) {
  TimingConfig cfg;
  const Index m = 100000;
  const TimingProblem prob = make_timing_problem(cfg, m);
  const double before = peak_rss_bytes();
  const FgpWorkspace ws(prob.structure, prob.params);
  const double nll = neg_log_likelihood(ws, prob.params.beta, prob.z);
  const double growth = peak_rss_bytes() - before;
  EXPECT_TRUE(std::isfinite(nll));
  EXPECT_LT(growth, 256.0 * 1024 * 1024) << "peak grew by " << growth / 1048576.0 << " MB";
  RecordProperty("peak_growth_mb", std::to_string(growth / 1048576.0));
}

} // namespace
} // namespace fgp
