#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

namespace taxovis {

struct CategoryDescriptor {
  int global_id = -1;
  std::string name;
  std::set<std::string> member_of;
};

// Unified label space over several datasets. Categories are ordered by the
// dataset order of the input map, then by position within each dataset's
// list, so ids are reproducible across runs.
struct TaxonomySpace {
  std::vector<CategoryDescriptor> categories;
  std::vector<std::string> dataset_ids;

  int K() const { return static_cast<int>(categories.size()); }
  int id_of(const std::string& name) const;       // -1 if absent
  const CategoryDescriptor& at(int global_id) const;
};

struct DatasetMask {
  std::string dataset_id;
  std::vector<bool> mask;  // length K

  int popcount() const;
};

using LabelLists = std::vector<std::pair<std::string, std::vector<std::string>>>;
using AliasMap = std::map<std::string, std::string>;

// Unions the per-dataset label lists into one space. Aliases are applied to
// every name before the union; alias-induced duplicates within one dataset
// collapse, raw duplicates are an error.
TaxonomySpace build_space(const LabelLists& dataset_label_lists,
                          const AliasMap& aliases = {});

DatasetMask dataset_mask(const TaxonomySpace& space, const std::string& dataset_id);

// Plaintext table of pairwise shared-category counts and the shared names.
std::string overlap_report(const TaxonomySpace& space);

// JSON round-trip of the space (categories with ids and memberships).
std::string space_to_json(const TaxonomySpace& space);
TaxonomySpace space_from_json(const std::string& json_text);

// Content hash used to pair checkpoints with corpora.
uint64_t space_hash(const TaxonomySpace& space);

// Label-list IO: {"dataset": ["name", ...], ...} preserving key order, and
// a flat {"name": "canonical"} alias map.
LabelLists label_lists_from_json(const std::string& json_text);
AliasMap aliases_from_json(const std::string& json_text);

}  // namespace taxovis
