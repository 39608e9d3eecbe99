#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "reference.hpp"
#include "taxovis/params.hpp"

namespace testutil {

inline std::string temp_dir(const std::string& tag = "scratch") {
  const auto dir = std::filesystem::temp_directory_path() / ("taxovis_" + tag);
  std::filesystem::create_directories(dir);
  return dir.string();
}

inline taxovis::Matrix random_matrix(taxovis::Rng& rng, int rows, int cols) {
  taxovis::Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

inline std::vector<double> row_of(const taxovis::Matrix& m) {
  std::vector<double> v(static_cast<size_t>(m.cols()));
  for (Eigen::Index j = 0; j < m.cols(); ++j) v[static_cast<size_t>(j)] = m(0, j);
  return v;
}

// Mirrors of bound parameters for the scalar reference implementations.
inline ref::LinearP ref_linear(const taxovis::ParamStore& s, const std::string& prefix) {
  return {ref::from_eigen(s.value(prefix + ".W")), row_of(s.value(prefix + ".b"))};
}

inline ref::AttnP ref_attn(const taxovis::ParamStore& s, const std::string& prefix,
                           int heads) {
  ref::AttnP p;
  p.q = ref_linear(s, prefix + ".q");
  p.k = ref_linear(s, prefix + ".k");
  p.v = ref_linear(s, prefix + ".v");
  p.o = ref_linear(s, prefix + ".o");
  p.heads = heads;
  return p;
}

inline ref::BlockP ref_block(const taxovis::ParamStore& s, const std::string& prefix,
                             int heads) {
  ref::BlockP p;
  p.attn = ref_attn(s, prefix + ".attn", heads);
  p.gamma = row_of(s.value(prefix + ".ln.gamma"));
  p.beta = row_of(s.value(prefix + ".ln.beta"));
  return p;
}

inline ref::FfnP ref_ffn(const taxovis::ParamStore& s, const std::string& prefix,
                         taxovis::Activation act) {
  ref::FfnP p;
  p.fc1 = ref_linear(s, prefix + ".fc1");
  p.fc2 = ref_linear(s, prefix + ".fc2");
  p.gamma = row_of(s.value(prefix + ".ln.gamma"));
  p.beta = row_of(s.value(prefix + ".ln.beta"));
  p.act = act;
  return p;
}

inline ref::TcmP ref_tcm(const taxovis::ParamStore& s, const std::string& prefix, int heads,
                         taxovis::Activation act) {
  ref::TcmP p;
  p.xattn1 = ref_block(s, prefix + ".xattn1", heads);
  p.ffn1 = ref_ffn(s, prefix + ".ffn1", act);
  p.xattn2 = ref_block(s, prefix + ".xattn2", heads);
  p.ffn2 = ref_ffn(s, prefix + ".ffn2", act);
  p.score = ref_linear(s, prefix + ".score");
  return p;
}

inline double max_abs_diff(const taxovis::Matrix& a, const taxovis::Matrix& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace testutil
