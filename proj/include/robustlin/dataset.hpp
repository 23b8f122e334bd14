#pragma once

// Deterministic linearly separable Gaussian datasets and their JSON
// serialization. Features are i.i.d. standard normal, labels come from a
// standard-normal ground-truth separator, so for a given (d, n, seed) the
// dataset is reproducible bit for bit.

#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "robustlin/errors.hpp"
#include "robustlin/numerics.hpp"
#include "robustlin/rng.hpp"

namespace robustlin {

struct Dataset {
  std::size_t d = 0;
  std::size_t n = 0;
  RealVec features;            // row-major n x d
  std::vector<int> labels;     // each +1 or -1
  std::uint64_t seed = 0;
  std::optional<RealVec> ground_truth;

  std::span<const double> sample(std::size_t i) const {
    return std::span<const double>(features).subspan(i * d, d);
  }
};

// Samples with |<w*, x>| below this are redrawn so the construction margin
// is bounded away from zero.
constexpr double kSeparationThreshold = 1e-6;

inline Dataset generate(std::size_t d, std::size_t n, std::uint64_t seed) {
  if (d < 1 || n < 1) throw invalid_input("generate: d and n must be positive");
  Xoshiro256pp rng(seed);
  Dataset ds;
  ds.d = d;
  ds.n = n;
  ds.seed = seed;
  RealVec w_star(d);
  for (double& w : w_star) w = rng.next_gaussian();
  ds.features.resize(n * d);
  ds.labels.resize(n);
  RealVec x(d);
  for (std::size_t i = 0; i < n; ++i) {
    double activation = 0.0;
    do {
      activation = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        x[j] = rng.next_gaussian();
        activation += w_star[j] * x[j];
      }
    } while (std::abs(activation) < kSeparationThreshold);
    std::copy(x.begin(), x.end(), ds.features.begin() + i * d);
    ds.labels[i] = activation > 0.0 ? +1 : -1;
  }
  ds.ground_truth = std::move(w_star);
  return ds;
}

inline bool is_separated_by(const Dataset& ds, std::span<const double> w) {
  if (w.size() != ds.d) throw invalid_input("is_separated_by: dimension mismatch");
  for (std::size_t i = 0; i < ds.n; ++i) {
    if (ds.labels[i] * dot(w, ds.sample(i)) <= 0.0) return false;
  }
  return true;
}

inline bool is_separated_by(const Dataset& ds, const RealVec& w) {
  return is_separated_by(ds, std::span<const double>(w));
}

// Appends a constant-1 feature, the augmented representation used to fold a
// bias term into the weight vector. Attacks never touch the extra coordinate.
inline Dataset augment(const Dataset& ds) {
  Dataset out;
  out.d = ds.d + 1;
  out.n = ds.n;
  out.seed = ds.seed;
  out.labels = ds.labels;
  out.features.resize(out.n * out.d);
  for (std::size_t i = 0; i < ds.n; ++i) {
    auto row = ds.sample(i);
    std::copy(row.begin(), row.end(), out.features.begin() + i * out.d);
    out.features[i * out.d + ds.d] = 1.0;
  }
  if (ds.ground_truth) {
    RealVec g = *ds.ground_truth;
    g.push_back(0.0);
    out.ground_truth = std::move(g);
  }
  return out;
}

inline nlohmann::json to_json(const Dataset& ds) {
  nlohmann::json j;
  j["d"] = ds.d;
  j["n"] = ds.n;
  j["seed"] = ds.seed;
  j["features"] = ds.features;
  j["labels"] = ds.labels;
  if (ds.ground_truth) j["ground_truth"] = *ds.ground_truth;
  return j;
}

inline Dataset dataset_from_json(const nlohmann::json& j) {
  Dataset ds;
  try {
    ds.d = j.at("d").get<std::size_t>();
    ds.n = j.at("n").get<std::size_t>();
    ds.seed = j.at("seed").get<std::uint64_t>();
    ds.features = j.at("features").get<RealVec>();
    ds.labels = j.at("labels").get<std::vector<int>>();
    if (j.contains("ground_truth")) ds.ground_truth = j["ground_truth"].get<RealVec>();
  } catch (const nlohmann::json::exception& e) {
    throw malformed_file(std::string("dataset: ") + e.what());
  }
  if (ds.d < 1 || ds.n < 1 || ds.features.size() != ds.n * ds.d || ds.labels.size() != ds.n)
    throw malformed_file("dataset: inconsistent shape");
  for (int y : ds.labels)
    if (y != 1 && y != -1) throw malformed_file("dataset: label not in {-1,+1}");
  if (!all_finite(ds.features)) throw malformed_file("dataset: non-finite feature");
  if (ds.ground_truth && ds.ground_truth->size() != ds.d)
    throw malformed_file("dataset: ground_truth length mismatch");
  return ds;
}

inline void save(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open for writing: " + path);
  out << to_json(ds).dump(2) << '\n';
  if (!out) throw io_error("write failed: " + path);
}

inline Dataset load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open for reading: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw malformed_file(path + ": " + e.what());
  }
  return dataset_from_json(j);
}

}  // namespace robustlin
