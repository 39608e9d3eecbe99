#pragma once

#include <optional>
#include <string>

#include "taxovis/blocks.hpp"
#include "taxovis/taxonomy.hpp"

namespace taxovis {

struct TextEmbeddingTable {
  Matrix matrix;  // K x d, unit-norm rows
  enum class Provenance { kDeterministicSeeded, kExternalFile } provenance =
      Provenance::kDeterministicSeeded;
};

// Deterministic category embeddings: each row is a pure function of
// (seed, category name), L2-normalized. With an external path the rows are
// loaded from CSV instead (then normalized).
TextEmbeddingTable embed_categories(const TaxonomySpace& space, int d, uint64_t seed,
                                    const std::optional<std::string>& external_path = {});

// CSV matrix with a "K d" header line; rows in TaxonomySpace order.
Matrix load_embedding_csv(const std::string& path);
void save_embedding_csv(const std::string& path, const Matrix& m);

// Two FC layers with an activation in the middle, d -> d_mid -> D.
struct AdapterVars {
  LinearVars down, up;
  Activation act = Activation::kGelu;
};

AdapterVars bind_adapter(Binder& bind, const std::string& prefix, int d, int d_mid, int D,
                         Activation act);

Var adapter_forward(Var table, const AdapterVars& p);

// Value-level convenience (runs a throwaway tape).
Matrix adapter_forward_value(const Matrix& table, const Matrix& W_down, const Matrix& b_down,
                             const Matrix& W_up, const Matrix& b_up, Activation act);

}  // namespace taxovis
