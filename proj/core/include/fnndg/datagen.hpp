// SPDX-License-Identifier: Apache-2.0
//
// Seeded synthetic multi-domain classification scenarios.
//
// Every class has a prototype on a sphere of radius 3 shared by all domains.
// A sample of class c in domain D is
//
//   rotate(D.angle, D.scale * (prototype_c + N(0, D.noise_sigma^2 I))) + D.translation
//
// where the rotation acts on the first two coordinates.
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <set>
#include <vector>

#include "fnndg/tensor.hpp"

namespace fnndg {

inline constexpr double kPrototypeRadius = 3.0;

struct DomainSpec {
  double rotation_angle = 0.0;       // radians
  double scale = 1.0;
  std::vector<double> translation;   // length d; empty means zero
  double noise_sigma = 0.3;
  std::set<int> present_classes;     // empty means all classes

  bool operator==(const DomainSpec&) const = default;
};

struct Sample {
  std::vector<double> features;
  int label = 0;
  int domain = 0;

  bool operator==(const Sample&) const = default;
};

struct Scenario {
  int num_classes = 0;
  int input_dim = 0;
  std::uint64_t generation_seed = 0;
  std::vector<std::vector<double>> class_prototypes;
  std::vector<DomainSpec> domains;
  std::vector<Sample> samples;

  int num_domains() const { return static_cast<int>(domains.size()); }
  /// Indices into `samples` belonging to `domain`, in storage order.
  std::vector<std::size_t> domain_sample_indices(int domain) const;
  /// Sample count per class for one domain.
  std::vector<std::size_t> label_histogram(int domain) const;
  /// All samples of one domain stacked into an [n x d] matrix.
  Matrix domain_inputs(int domain) const;
  std::vector<int> domain_labels(int domain) const;

  bool operator==(const Scenario&) const = default;
};

struct Batch {
  Tensor inputs;                          // [b x d] constant
  std::vector<int> labels;
  std::vector<int> domain_indices;
  std::vector<std::size_t> sample_indices;  // positions in Scenario::samples

  std::size_t size() const { return labels.size(); }
};

/// Builds a scenario. Domains with an empty present_classes emit every class;
/// the returned scenario stores the resolved class sets.
/// Throws ConfigError for K < 2, d < 2, n_per_class < 1, a translation of the
/// wrong length, a non-positive scale, or a class index outside [0, K).
Scenario generate_scenario(int num_classes, int input_dim, int n_per_class_per_domain,
                           const std::vector<DomainSpec>& domains, std::uint64_t seed);

/// Removes the given classes from the given source domains. The target domain
/// must not appear in `removed`, and no domain may lose all of its classes.
Scenario apply_category_shift(const Scenario& scenario,
                              const std::map<int, std::set<int>>& removed, int target_domain);

/// One epoch of balanced batches: each batch holds batch_size / |sources|
/// samples from every source domain, shuffled within domain by `shuffle_seed`.
/// Trailing partial batches are dropped.
std::vector<Batch> make_batches(const Scenario& scenario, const std::vector<int>& sources,
                                std::size_t batch_size, std::uint64_t shuffle_seed);

/// Delimited text form. Doubles carry 17 significant digits, so
/// read_scenario(write_scenario(s)) == s.
void write_scenario(std::ostream& out, const Scenario& scenario);
Scenario read_scenario(std::istream& in);
void save_scenario(const std::filesystem::path& path, const Scenario& scenario);
Scenario load_scenario(const std::filesystem::path& path);

}  // namespace fnndg
