// Two reference lesions; the prediction finds one of them and adds a spurious
// blob. Prints legacy and lesion-wise Dice for the same pair.

#include <cstdio>

#include "toposeg/toposeg.hpp"

using namespace toposeg;

static void fill_box(Mask& m, std::size_t x0, std::size_t y0, std::size_t z0, std::size_t n) {
  for (std::size_t z = z0; z < z0 + n; ++z)
    for (std::size_t y = y0; y < y0 + n; ++y)
      for (std::size_t x = x0; x < x0 + n; ++x) m(x, y, z) = 1;
}

int main() {
  Mask ref(Extent{32, 32, 32});
  fill_box(ref, 2, 2, 2, 8);
  fill_box(ref, 20, 20, 20, 3);

  Mask pred = ref.like<std::uint8_t>();
  fill_box(pred, 3, 2, 2, 8);
  fill_box(pred, 20, 2, 20, 4);

  const auto match = match_lesions(pred, ref);
  std::printf("lesions: %zu  predicted components: %zu  false positives: %zu\n", match.ref.count(),
              match.pred.count(), match.false_positives.size());
  std::printf("legacy dice      %.3f\n", dice(pred, ref));
  std::printf("lesion-wise dice %.3f\n", lesionwise_score(match, LesionMetric::dice()));
  std::printf("legacy nsd@1.0   %.3f\n", nsd(pred, ref, ref.spacing(), 1.0));
  std::printf("lesion-wise hd95 %.3f\n", lesionwise_score(match, LesionMetric::hd95()));
  return 0;
}
