#include "taxovis/embedding.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace taxovis {

TextEmbeddingTable embed_categories(const TaxonomySpace& space, int d, uint64_t seed,
                                    const std::optional<std::string>& external_path) {
  if (d < 8) throw std::invalid_argument("embed_categories: d must be >= 8");
  TextEmbeddingTable table;
  if (external_path) {
    table.matrix = load_embedding_csv(*external_path);
    table.provenance = TextEmbeddingTable::Provenance::kExternalFile;
    if (table.matrix.rows() != space.K()) {
      throw std::invalid_argument("embed_categories: external row count " +
                                  std::to_string(table.matrix.rows()) + " != K=" +
                                  std::to_string(space.K()));
    }
    if (!table.matrix.allFinite()) {
      throw std::invalid_argument("embed_categories: non-finite values in external file");
    }
  } else {
    table.matrix.resize(space.K(), d);
    for (int i = 0; i < space.K(); ++i) {
      Rng rng = keyed_rng(seed, "embed/" + space.at(i).name);
      for (int j = 0; j < d; ++j) table.matrix(i, j) = rng.normal();
    }
  }
  for (Eigen::Index i = 0; i < table.matrix.rows(); ++i) {
    const double n = table.matrix.row(i).norm();
    if (n == 0.0) throw std::invalid_argument("embed_categories: zero row cannot be normalized");
    table.matrix.row(i) /= n;
  }
  return table;
}

Matrix load_embedding_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open embedding file " + path);
  int K = 0, d = 0;
  if (!(in >> K >> d) || K <= 0 || d <= 0) {
    throw std::invalid_argument("embedding file must start with a 'K d' header line");
  }
  Matrix m(K, d);
  for (int i = 0; i < K; ++i) {
    for (int j = 0; j < d; ++j) {
      if (!(in >> m(i, j))) {
        throw std::invalid_argument("embedding file truncated at row " + std::to_string(i));
      }
    }
  }
  return m;
}

void save_embedding_csv(const std::string& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write embedding file " + path);
  out << m.rows() << " " << m.cols() << "\n";
  out.precision(17);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << " ";
      out << m(i, j);
    }
    out << "\n";
  }
}

AdapterVars bind_adapter(Binder& bind, const std::string& prefix, int d, int d_mid, int D,
                         Activation act) {
  if (d_mid >= d) throw std::invalid_argument("adapter: d_mid must be smaller than d");
  AdapterVars p;
  p.down = bind_linear(bind, prefix + ".down", d, d_mid);
  p.up = bind_linear(bind, prefix + ".up", d_mid, D);
  p.act = act;
  return p;
}

Var adapter_forward(Var table, const AdapterVars& p) {
  return linear(ad::activation(linear(table, p.down), p.act), p.up);
}

Matrix adapter_forward_value(const Matrix& table, const Matrix& W_down, const Matrix& b_down,
                             const Matrix& W_up, const Matrix& b_up, Activation act) {
  ad::Tape t;
  AdapterVars p;
  p.down = {t.input(W_down, false), t.input(b_down, false)};
  p.up = {t.input(W_up, false), t.input(b_up, false)};
  p.act = act;
  return val(adapter_forward(t.input(table, false), p));
}

}  // namespace taxovis
