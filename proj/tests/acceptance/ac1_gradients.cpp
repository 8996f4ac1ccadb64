// Gradient integrity in 64-bit mode, over the same cases as the unit suite.

#include <algorithm>

#include "../support/grad_cases.hpp"
#include "acceptance.hpp"

using namespace docmae;
using namespace docmae::acceptance;

static_assert(sizeof(Scalar) == 8, "gradient acceptance needs the 64-bit build");

int main() {
  Outcome o;
  const Stopwatch clock;
  double worst_single = 0, worst_block = 0;
  std::size_t cases = 0;
  for (const auto& c : testing::gradient_cases()) {
    const auto r = c.run();
    ++cases;
    double& worst = c.tolerance < 5e-4 ? worst_single : worst_block;
    worst = std::max(worst, r.rel_error);
    o.check(r.rel_error < c.tolerance && r.analytic_norm > 0,
            c.name + ": rel " + fmt("%.2e", r.rel_error) + " (limit " + fmt("%.0e", c.tolerance) + ", " +
                std::to_string(r.entries) + " entries)");
  }
  const double t = clock.seconds();
  o.check(t < 120, "suite time " + fmt("%.1f s", t) + " (limit 120 s)");
  o.summary = std::to_string(cases) + " ops, worst rel error " + fmt("%.2e", worst_single) + " (ops) / " +
              fmt("%.2e", worst_block) + " (blocks), " + fmt("%.1f s", t);
  return report("AC1", o);
}
