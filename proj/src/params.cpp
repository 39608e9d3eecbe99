#include "taxovis/params.hpp"

#include <cmath>
#include <stdexcept>

namespace taxovis {

namespace {

const char* init_name(Init init) {
  switch (init) {
    case Init::kZeros: return "zeros";
    case Init::kOnes: return "ones";
    case Init::kStdNormal: return "std_normal";
    case Init::kXavier: return "xavier";
    case Init::kIdentity: return "identity";
  }
  throw std::invalid_argument("unknown init");
}

}  // namespace

Matrix make_init(Init init, int rows, int cols, uint64_t seed, const std::string& name) {
  switch (init) {
    case Init::kZeros:
      return Matrix::Zero(rows, cols);
    case Init::kOnes:
      return Matrix::Ones(rows, cols);
    case Init::kIdentity: {
      Matrix m = Matrix::Zero(rows, cols);
      for (int i = 0; i < std::min(rows, cols); ++i) m(i, i) = 1.0;
      return m;
    }
    case Init::kStdNormal:
    case Init::kXavier: {
      Rng rng = keyed_rng(seed, "param/" + name);
      const double s =
          init == Init::kXavier ? std::sqrt(2.0 / static_cast<double>(rows + cols)) : 1.0;
      Matrix m(rows, cols);
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = s * rng.normal();
      return m;
    }
  }
  throw std::invalid_argument("unknown init");
}

Matrix& ParamStore::ensure(const std::string& name, int rows, int cols, Init init) {
  auto it = entries_.find(name);
  if (it != entries_.end()) {
    Matrix& v = it->second.value;
    if (v.rows() != rows || v.cols() != cols) {
      throw std::invalid_argument("param '" + name + "': shape conflict");
    }
    return v;
  }
  Entry e;
  e.value = make_init(init, rows, cols, seed_, name);
  e.m = Matrix::Zero(rows, cols);
  e.v = Matrix::Zero(rows, cols);
  init_names_[name] = init_name(init);
  return entries_.emplace(name, std::move(e)).first->second.value;
}

Matrix& ParamStore::value(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::invalid_argument("unknown param '" + name + "'");
  return it->second.value;
}

const Matrix& ParamStore::value(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::invalid_argument("unknown param '" + name + "'");
  return it->second.value;
}

void ParamStore::adam_step(const std::map<std::string, Matrix>& grads, const AdamConfig& cfg) {
  ++step_count_;
  const double t = static_cast<double>(step_count_);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (const auto& [name, g] : grads) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw std::invalid_argument("gradient for unknown param " + name);
    Entry& e = it->second;
    if (g.rows() != e.value.rows() || g.cols() != e.value.cols()) {
      throw std::invalid_argument("gradient shape mismatch for " + name);
    }
    Matrix geff = g;
    if (cfg.weight_decay > 0.0) geff += cfg.weight_decay * e.value;
    e.m = cfg.beta1 * e.m + (1.0 - cfg.beta1) * geff;
    e.v = cfg.beta2 * e.v.array().matrix() +
          (1.0 - cfg.beta2) * geff.cwiseProduct(geff);
    const Matrix mhat = e.m / bc1;
    const Matrix vhat = e.v / bc2;
    e.value -=
        cfg.step_size * mhat.cwiseQuotient((vhat.cwiseSqrt().array() + cfg.eps).matrix());
  }
}

ad::Var Binder::operator()(const std::string& name, int rows, int cols, Init init) {
  auto it = bound_.find(name);
  if (it != bound_.end()) return it->second;
  Matrix& v = store_.ensure(name, rows, cols, init);
  ad::Var var = tape_.input(v, true);
  bound_.emplace(name, var);
  return var;
}

std::map<std::string, Matrix> Binder::grads() const {
  std::map<std::string, Matrix> out;
  for (const auto& [name, var] : bound_) out.emplace(name, tape_.grad(var));
  return out;
}

}  // namespace taxovis
