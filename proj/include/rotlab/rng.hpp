#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace rotlab {

// splitmix64; used to derive independent per-trial seeds from a master seed
// so that results are identical no matter how trials are scheduled.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  return splitmix64(master ^ splitmix64(stream + 1));
}

// mt19937_64 with hand-rolled conversions; std::uniform_*_distribution is
// implementation-defined and would break byte-level reproducibility.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t bits() { return eng_(); }

  // uniform in [0,1)
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [0, n)
  int uniform_int(int n) { return static_cast<int>(eng_() % static_cast<std::uint64_t>(n)); }

  std::vector<double> simplex_point(int n, double floor_weight = 0.0) {
    std::vector<double> w(n);
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      w[i] = floor_weight + uniform();
      s += w[i];
    }
    for (auto& x : w) x /= s;
    return w;
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace rotlab
