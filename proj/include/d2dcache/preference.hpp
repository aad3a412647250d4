#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "d2dcache/matrix.hpp"

namespace d2dcache {

/// Tolerance on the unit row sum of every probability vector.
inline constexpr double kStochasticTolerance = 1e-9;

/// Request probabilities a_m^k: one row per user, one column per file.
/// Every row is a probability distribution over the library.
class PreferenceMatrix {
 public:
  PreferenceMatrix() = default;
  /// Throws ParameterError unless every entry is in [0,1] and every row sums
  /// to one within kStochasticTolerance.
  explicit PreferenceMatrix(Matrix entries);

  std::size_t users() const noexcept { return entries_.rows(); }
  std::size_t files() const noexcept { return entries_.cols(); }
  double operator()(std::size_t user, std::size_t file) const { return entries_(user, file); }
  std::span<const double> row(std::size_t user) const { return entries_.row(user); }
  const Matrix& entries() const noexcept { return entries_; }

  /// New matrix made of the given rows (repetition allowed).
  PreferenceMatrix select_rows(std::span<const std::size_t> users) const;

  friend bool operator==(const PreferenceMatrix&, const PreferenceMatrix&) = default;

 private:
  Matrix entries_;
};

struct GlobalPopularity {
  std::vector<double> probs;
};

/// Synthetic individual-preference generator: each user's row mixes a shared
/// Zipf distribution with a Zipf distribution over a privately perturbed
/// file ranking.
struct GeneratorParams {
  double zipf_exponent = 0.8;
  double mixing_weight = 0.3;
  /// Standard deviation of the per-user rank noise, as a fraction of M.
  double rank_permutation_strength = 0.05;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Zipf probabilities over ranks 1..files, p_r proportional to r^-exponent.
std::vector<double> zipf_distribution(std::size_t files, double exponent);

PreferenceMatrix generate_preferences(std::size_t users, std::size_t files,
                                      const GeneratorParams& params);

GlobalPopularity global_popularity(const PreferenceMatrix& prefs);

PreferenceMatrix homogenize(const GlobalPopularity& pop, std::size_t users);

/// CSV with a header row of file ids (file_0, file_1, ...) and one row per user.
void write_preferences_csv(std::ostream& out, const PreferenceMatrix& prefs);
PreferenceMatrix read_preferences_csv(std::istream& in);

}  // namespace d2dcache
