#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace solitonlab {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Bad or inconsistent input data (CLI exit code 2).
struct InvalidInput : Error {
  using Error::Error;
};

/// An iterative method failed to reach its tolerance (CLI exit code 3).
struct NonConvergence : Error {
  using Error::Error;
};

inline double frob(const Mat& a) { return a.norm(); }

inline double frob_inner(const Mat& a, const Mat& b) {
  return (a.array() * b.array()).sum();
}

inline Mat symmetrize(const Mat& a) { return 0.5 * (a + a.transpose()); }

inline double asym_gap(const Mat& a) { return (a - a.transpose()).norm(); }

inline bool is_symmetric(const Mat& a, double tol = 1e-14) {
  return asym_gap(a) <= tol * std::max(1.0, a.norm());
}

inline std::mt19937_64 seeded_rng(std::uint64_t seed) {
  return std::mt19937_64(seed);
}

inline Mat random_matrix(int n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g;
  Mat m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = scale * g(rng);
  return m;
}

inline Mat random_symmetric(int n, std::mt19937_64& rng, double scale = 1.0) {
  return symmetrize(random_matrix(n, rng, scale));
}

/// Random SPD matrix with moderate conditioning.
inline Mat random_spd(int n, std::mt19937_64& rng, double scale = 1.0) {
  Mat a = random_matrix(n, rng, scale);
  return Mat(a * a.transpose() + 0.3 * scale * scale * Mat::Identity(n, n));
}

// FNV-1a over a byte string; used for artifact chaining.
inline std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hash_hex(const std::string& bytes) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(bytes)));
  return std::string(buf);
}

inline int env_thread_count() {
  const char* s = std::getenv("SOLITONLAB_THREADS");
  if (!s) return 1;
  int n = std::atoi(s);
  return n > 0 ? n : 1;
}

}  // namespace solitonlab
