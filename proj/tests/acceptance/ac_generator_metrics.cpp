// AC4 generator certificate and AC5 metric oracles.

#include <cmath>

#include "../support/oracles.hpp"
#include "acceptance.hpp"
#include "docmae/errors.hpp"
#include "docmae/synth.hpp"

namespace docmae::acceptance {

Outcome ac4_generator() {
  Outcome o;
  const Stopwatch clock;
  constexpr std::size_t kSamples = 100, kSide = 96;
  std::size_t retried = 0, failed = 0;
  double worst_residual = 0, worst_mae = 0, worst_stored = 0;
  for (std::size_t i = 0; i < kSamples; ++i) {
    std::size_t attempts = 0;
    const SyntheticSample s = gen_indexed_sample(4004, i, kSide, kSide, &attempts);
    if (attempts != 1) ++retried;

    // Re-derive the residual from the map itself and from the stored flow.
    const Warp warp = gen_warp(s.warp, kSide, kSide);
    const InversionResult inv = invert_map(warp, kSide, kSide);
    double stored = 0;
    for (std::size_t u = 0; u < kSide; ++u)
      for (std::size_t v = 0; v < kSide; ++v) {
        const std::size_t p = u * kSide + v;
        const Point y = warp({u + double(s.gt_flow.disp[2 * p]), v + double(s.gt_flow.disp[2 * p + 1])});
        stored = std::max(stored, std::hypot(y[0] - double(u), y[1] - double(v)));
      }
    const Certificate c = check_roundtrip(s.clean, s.distorted, s.mask, s.gt_flow);
    worst_residual = std::max(worst_residual, inv.max_residual);
    worst_stored = std::max(worst_stored, stored);
    worst_mae = std::max(worst_mae, c.roundtrip_mae);
    if (inv.unconverged != 0 || inv.max_residual >= kResidualTolerance || stored >= kResidualTolerance ||
        c.roundtrip_mae >= kRoundtripTolerance || c.scored_pixels == 0)
      ++failed;
  }
  const double t = clock.seconds();
  o.check(failed == 0, std::to_string(kSamples - failed) + "/" + std::to_string(kSamples) +
                           " samples certified (residual < 0.01 px, round-trip MAE < 0.05)");
  o.check(retried == 0, "no sample needed a regeneration attempt (" + std::to_string(retried) + " did)");
  o.check(t <= 300, "generation and checks took " + fmt("%.1f s", t) + " (limit 300 s)");
  o.info("worst inversion residual " + fmt("%.2e px", worst_residual) + ", via stored float flow " +
         fmt("%.2e px", worst_stored));
  o.summary = "100 fresh 96x96 samples, worst residual " + fmt("%.2e px", worst_stored) + ", worst round-trip MAE " +
              fmt("%.4f", worst_mae) + ", " + fmt("%.1f s", t);
  return o;
}

Outcome ac5_metrics() {
  Outcome o;
  Rng rng(50);

  std::size_t disagreements = 0;
  for (int t = 0; t < 10000; ++t) {
    const int alphabet = 2 + int(rng.uniform_index(25));
    const std::string a = testing::random_string(rng, 12, alphabet), b = testing::random_string(rng, 12, alphabet);
    const EditResult r = edit_distance(a, b);
    if (r.ed != testing::levenshtein(a, b) || r.ed != r.deletions + r.insertions + r.substitutions ||
        testing::apply_script(a, b, r.script) != b)
      ++disagreements;
  }
  o.check(disagreements == 0, "edit distance and its script agree with the recursive oracle on 10000 pairs (" +
                                  std::to_string(disagreements) + " disagree)");

  std::size_t violations = 0;
  for (int t = 0; t < 3000; ++t) {
    const std::string a = testing::random_string(rng, 12), b = testing::random_string(rng, 12),
                      c = testing::random_string(rng, 12);
    const std::size_t ab = edit_distance(a, b).ed, bc = edit_distance(b, c).ed, ac = edit_distance(a, c).ed;
    if (ab != edit_distance(b, a).ed || (ab == 0) != (a == b) || ac > ab + bc || edit_distance(a, a).ed != 0)
      ++violations;
  }
  o.check(violations == 0, "identity, symmetry and triangle inequality on 3000 triples (" +
                               std::to_string(violations) + " violations)");

  double worst_self = 0;
  std::size_t not_decreasing = 0;
  const std::vector<double> sigmas{0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.3};
  for (std::size_t i = 0; i < 10; ++i) {
    const Tensor page = gen_indexed_sample(55, i, 96, 96).clean;
    worst_self = std::max(worst_self, std::abs(ms_ssim(page, page) - 1.0));
    double previous = 1.0;
    for (double sigma : sigmas) {
      const double s = ms_ssim(page, testing::noisy(page, sigma, 500 + i));
      if (!(s < previous)) ++not_decreasing;
      previous = s;
    }
  }
  o.check(worst_self <= 1e-6, "ms_ssim(x, x) within " + fmt("%.1e", worst_self) + " of 1 on 10 pages");
  o.check(not_decreasing == 0, "ms_ssim strictly decreasing along a 7-step noise sweep on 10 pages (" +
                                   std::to_string(not_decreasing) + " violations)");

  double oracle_gap = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const SyntheticSample s = gen_indexed_sample(56, i, 96, 96);
    const double lib = ms_ssim(s.clean, s.distorted), ref = testing::ms_ssim_oracle(s.clean, s.distorted);
    oracle_gap = std::max(oracle_gap, std::abs(lib - ref) / std::max(std::abs(ref), 1e-12));
  }
  o.check(oracle_gap < 1e-9, "ms_ssim matches a brute-force window oracle (rel gap " + fmt("%.1e", oracle_gap) + ")");

  EditResult parts;
  parts.deletions = 1;
  parts.insertions = 2;
  parts.substitutions = 4;
  bool exact = cer(parts, 7) == 1.0 && cer(parts, 14) == 0.5 && cer(edit_distance("abc", "abc"), 3) == 0.0 &&
               cer(edit_distance("", "abcd"), 4) == 1.0 && cer(edit_distance("kitten", "sitting"), 7) == 3.0 / 7.0;
  bool rejects_empty = false;
  try {
    cer(parts, 0);
  } catch (const ContractError&) {
    rejects_empty = true;
  }
  o.check(exact && rejects_empty, "cer = (D + I + S) / N examples exact; empty target rejected");
  o.summary = "edit distance vs oracle on 10000 pairs, metric axioms, ms_ssim self " + fmt("%.1e", worst_self) +
              ", noise sweep, cer examples";
  return o;
}

}  // namespace docmae::acceptance
