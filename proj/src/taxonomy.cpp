#include "taxovis/taxonomy.hpp"

#include <nlohmann/json.hpp>
#include <sstream>
#include <stdexcept>

#include "taxovis/common.hpp"

namespace taxovis {

using ordered_json = nlohmann::ordered_json;

int TaxonomySpace::id_of(const std::string& name) const {
  for (const CategoryDescriptor& c : categories) {
    if (c.name == name) return c.global_id;
  }
  return -1;
}

const CategoryDescriptor& TaxonomySpace::at(int global_id) const {
  if (global_id < 0 || global_id >= K()) {
    throw std::out_of_range("TaxonomySpace: bad global id " + std::to_string(global_id));
  }
  return categories[static_cast<size_t>(global_id)];
}

int DatasetMask::popcount() const {
  int n = 0;
  for (bool b : mask) n += b ? 1 : 0;
  return n;
}

namespace {

std::string canonical(const std::string& name, const AliasMap& aliases) {
  auto it = aliases.find(name);
  return it == aliases.end() ? name : it->second;
}

}  // namespace

TaxonomySpace build_space(const LabelLists& dataset_label_lists, const AliasMap& aliases) {
  if (dataset_label_lists.empty()) {
    throw std::invalid_argument("build_space: empty input map");
  }
  TaxonomySpace space;
  std::map<std::string, int> index;
  for (const auto& [dataset, names] : dataset_label_lists) {
    if (names.empty()) {
      throw std::invalid_argument("build_space: empty label list for " + dataset);
    }
    space.dataset_ids.push_back(dataset);
    std::set<std::string> raw_seen;
    for (const std::string& raw : names) {
      if (!raw_seen.insert(raw).second) {
        throw std::invalid_argument("build_space: duplicate name '" + raw + "' in " + dataset);
      }
      const std::string name = canonical(raw, aliases);
      auto it = index.find(name);
      if (it == index.end()) {
        const int id = space.K();
        index.emplace(name, id);
        space.categories.push_back({id, name, {dataset}});
      } else {
        space.categories[static_cast<size_t>(it->second)].member_of.insert(dataset);
      }
    }
  }
  return space;
}

DatasetMask dataset_mask(const TaxonomySpace& space, const std::string& dataset_id) {
  bool known = false;
  for (const std::string& d : space.dataset_ids) known = known || (d == dataset_id);
  if (!known) {
    throw std::invalid_argument("dataset_mask: unknown dataset " + dataset_id);
  }
  DatasetMask m;
  m.dataset_id = dataset_id;
  m.mask.resize(static_cast<size_t>(space.K()));
  for (int i = 0; i < space.K(); ++i) {
    m.mask[static_cast<size_t>(i)] = space.at(i).member_of.count(dataset_id) > 0;
  }
  return m;
}

std::string overlap_report(const TaxonomySpace& space) {
  if (space.dataset_ids.size() < 2) {
    throw std::invalid_argument("overlap_report: need at least 2 datasets");
  }
  std::ostringstream out;
  out << "label space: K=" << space.K() << "\n";
  for (const std::string& d : space.dataset_ids) {
    out << "  " << d << ": " << dataset_mask(space, d).popcount() << " categories\n";
  }
  out << "pairwise overlaps:\n";
  for (size_t i = 0; i < space.dataset_ids.size(); ++i) {
    for (size_t j = i + 1; j < space.dataset_ids.size(); ++j) {
      const std::string& a = space.dataset_ids[i];
      const std::string& b = space.dataset_ids[j];
      std::vector<std::string> shared;
      for (const CategoryDescriptor& c : space.categories) {
        if (c.member_of.count(a) && c.member_of.count(b)) shared.push_back(c.name);
      }
      out << "  " << a << " & " << b << ": " << shared.size();
      if (!shared.empty()) {
        out << " (";
        for (size_t k = 0; k < shared.size(); ++k) {
          if (k) out << ", ";
          out << shared[k];
        }
        out << ")";
      }
      out << "\n";
    }
  }
  return out.str();
}

std::string space_to_json(const TaxonomySpace& space) {
  ordered_json j;
  j["datasets"] = space.dataset_ids;
  j["categories"] = ordered_json::array();
  for (const CategoryDescriptor& c : space.categories) {
    ordered_json cat;
    cat["id"] = c.global_id;
    cat["name"] = c.name;
    cat["member_of"] = std::vector<std::string>(c.member_of.begin(), c.member_of.end());
    j["categories"].push_back(cat);
  }
  return j.dump(2);
}

TaxonomySpace space_from_json(const std::string& json_text) {
  const ordered_json j = ordered_json::parse(json_text);
  TaxonomySpace space;
  for (const auto& d : j.at("datasets")) space.dataset_ids.push_back(d.get<std::string>());
  for (const auto& cat : j.at("categories")) {
    CategoryDescriptor c;
    c.global_id = cat.at("id").get<int>();
    c.name = cat.at("name").get<std::string>();
    for (const auto& m : cat.at("member_of")) c.member_of.insert(m.get<std::string>());
    space.categories.push_back(std::move(c));
  }
  for (int i = 0; i < space.K(); ++i) {
    if (space.at(i).global_id != i) {
      throw std::invalid_argument("space_from_json: ids must equal positions");
    }
  }
  return space;
}

uint64_t space_hash(const TaxonomySpace& space) {
  return fnv1a64(space_to_json(space));
}

LabelLists label_lists_from_json(const std::string& json_text) {
  const ordered_json j = ordered_json::parse(json_text);
  if (!j.is_object()) {
    throw std::invalid_argument("label lists: expected an object of dataset -> [names]");
  }
  LabelLists lists;
  for (const auto& [dataset, names] : j.items()) {
    std::vector<std::string> v;
    for (const auto& n : names) v.push_back(n.get<std::string>());
    lists.emplace_back(dataset, std::move(v));
  }
  return lists;
}

AliasMap aliases_from_json(const std::string& json_text) {
  const ordered_json j = ordered_json::parse(json_text);
  AliasMap m;
  for (const auto& [from, to] : j.items()) m[from] = to.get<std::string>();
  return m;
}

}  // namespace taxovis
