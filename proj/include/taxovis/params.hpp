#pragma once

#include <map>
#include <string>

#include "taxovis/common.hpp"
#include "taxovis/tape.hpp"

namespace taxovis {

enum class Init { kZeros, kOnes, kStdNormal, kXavier, kIdentity };

// Named parameter groups with Adam state. Initialization is keyed by
// (seed, name) only, so a parameter gets the same values no matter when or
// in which model variant it is first created.
class ParamStore {
 public:
  explicit ParamStore(uint64_t seed) : seed_(seed) {}

  Matrix& ensure(const std::string& name, int rows, int cols, Init init);
  bool has(const std::string& name) const { return entries_.count(name) > 0; }
  Matrix& value(const std::string& name);
  const Matrix& value(const std::string& name) const;

  uint64_t seed() const { return seed_; }
  const std::map<std::string, std::string>& inits() const { return init_names_; }

  struct AdamConfig {
    double step_size = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
  };

  // Applies one Adam update from the given per-parameter gradients;
  // parameters without a gradient entry are left untouched.
  void adam_step(const std::map<std::string, Matrix>& grads, const AdamConfig& cfg);
  int step_count() const { return step_count_; }

  // Serialization hooks (values + Adam state in name order).
  struct Entry {
    Matrix value;
    Matrix m;
    Matrix v;
  };
  std::map<std::string, Entry>& entries() { return entries_; }
  const std::map<std::string, Entry>& entries() const { return entries_; }
  void set_step_count(int n) { step_count_ = n; }

 private:
  uint64_t seed_;
  std::map<std::string, Entry> entries_;
  std::map<std::string, std::string> init_names_;
  int step_count_ = 0;
};

Matrix make_init(Init init, int rows, int cols, uint64_t seed, const std::string& name);

// Binds store parameters onto one tape, caching the Var per name so a
// parameter used twice in a graph is a single node (gradients accumulate).
class Binder {
 public:
  Binder(ad::Tape& tape, ParamStore& store) : tape_(tape), store_(store) {}

  ad::Var operator()(const std::string& name, int rows, int cols, Init init);

  ad::Tape& tape() { return tape_; }
  ParamStore& store() { return store_; }

  // Gradients of every bound parameter after backward().
  std::map<std::string, Matrix> grads() const;

 private:
  ad::Tape& tape_;
  ParamStore& store_;
  std::map<std::string, ad::Var> bound_;
};

}  // namespace taxovis
