#include "d2dcache/preference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

#include "d2dcache/csv.hpp"
#include "d2dcache/error.hpp"
#include "d2dcache/random.hpp"

namespace d2dcache {

namespace {

void check_distribution(std::span<const double> probs, const std::string& what) {
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0))
      throw ParameterError(what + " has an entry outside [0,1]");
    sum += p;
  }
  if (std::abs(sum - 1.0) > kStochasticTolerance)
    throw ParameterError(what + " sums to " + csv::format_double(sum) + ", expected 1");
}

}  // namespace

PreferenceMatrix::PreferenceMatrix(Matrix entries) : entries_(std::move(entries)) {
  for (std::size_t k = 0; k < entries_.rows(); ++k)
    check_distribution(entries_.row(k), "preference row " + std::to_string(k));
}

PreferenceMatrix PreferenceMatrix::select_rows(std::span<const std::size_t> users) const {
  Matrix out(users.size(), files());
  for (std::size_t i = 0; i < users.size(); ++i) {
    if (users[i] >= this->users()) throw ParameterError("row index out of range");
    std::ranges::copy(row(users[i]), out.row(i).begin());
  }
  PreferenceMatrix selected;
  selected.entries_ = std::move(out);
  return selected;
}

void GeneratorParams::validate() const {
  if (!(zipf_exponent > 0.0)) throw ParameterError("zipf_exponent must be > 0");
  if (!(mixing_weight >= 0.0 && mixing_weight <= 1.0))
    throw ParameterError("mixing_weight must be in [0,1]");
  if (!(rank_permutation_strength >= 0.0))
    throw ParameterError("rank_permutation_strength must be >= 0");
}

std::vector<double> zipf_distribution(std::size_t files, double exponent) {
  std::vector<double> p(files);
  for (std::size_t r = 0; r < files; ++r)
    p[r] = std::pow(static_cast<double>(r + 1), -exponent);
  double total = std::accumulate(p.begin(), p.end(), 0.0);
  for (double& v : p) v /= total;
  return p;
}

PreferenceMatrix generate_preferences(std::size_t users, std::size_t files,
                                      const GeneratorParams& params) {
  if (users < 1) throw ParameterError("need at least one user");
  if (files < 2) throw ParameterError("need at least two files");
  params.validate();

  const std::vector<double> base = zipf_distribution(files, params.zipf_exponent);
  const double w = params.mixing_weight;
  const double noise_sd = params.rank_permutation_strength * static_cast<double>(files);

  Matrix entries(users, files);
  std::vector<double> key(files);
  std::vector<std::size_t> order(files);
  for (std::size_t k = 0; k < users; ++k) {
    auto row = entries.row(k);
    if (w == 1.0) {
      std::ranges::copy(base, row.begin());
      continue;
    }
    // Each user ranks files by base rank plus Gaussian noise; the user's own
    // Zipf mass then follows that private ranking.
    Rng rng = make_rng(params.seed, {k});
    std::normal_distribution<double> noise(0.0, 1.0);
    for (std::size_t m = 0; m < files; ++m)
      key[m] = static_cast<double>(m) + noise_sd * noise(rng);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) { return key[a] < key[b]; });
    double sum = 0.0;
    for (std::size_t rank = 0; rank < files; ++rank) {
      std::size_t m = order[rank];
      row[m] = w * base[m] + (1.0 - w) * base[rank];
      sum += row[m];
    }
    for (double& v : row) v /= sum;
  }
  return PreferenceMatrix(std::move(entries));
}

GlobalPopularity global_popularity(const PreferenceMatrix& prefs) {
  GlobalPopularity pop;
  pop.probs.assign(prefs.files(), 0.0);
  for (std::size_t k = 0; k < prefs.users(); ++k) {
    auto row = prefs.row(k);
    for (std::size_t m = 0; m < prefs.files(); ++m) pop.probs[m] += row[m];
  }
  const double n = static_cast<double>(prefs.users());
  for (double& v : pop.probs) v /= n;
  return pop;
}

PreferenceMatrix homogenize(const GlobalPopularity& pop, std::size_t users) {
  Matrix entries(users, pop.probs.size());
  for (std::size_t k = 0; k < users; ++k) std::ranges::copy(pop.probs, entries.row(k).begin());
  return PreferenceMatrix(std::move(entries));
}

void write_preferences_csv(std::ostream& out, const PreferenceMatrix& prefs) {
  std::vector<std::string> header;
  header.reserve(prefs.files());
  for (std::size_t m = 0; m < prefs.files(); ++m) header.push_back("file_" + std::to_string(m));
  csv::write_matrix(out, header, prefs.entries());
}

PreferenceMatrix read_preferences_csv(std::istream& in) {
  return PreferenceMatrix(csv::read_matrix(in));
}

}  // namespace d2dcache
