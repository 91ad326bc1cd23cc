// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hennion/contraction.hpp"
#include "hennion/superop.hpp"

namespace hennion {

using json = nlohmann::json;

// ---- algebra and elements ----

inline json algebra_to_json(const TracialAlgebra& A) { return json{{"dims", A.dims()}, {"weights", A.weights()}}; }

inline TracialAlgebra algebra_from_json(const json& j) {
  if (!j.is_object() || !j.contains("dims") || !j.contains("weights")) throw input_error("algebra needs dims and weights");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (it.key() != "dims" && it.key() != "weights") throw input_error("unknown algebra key: " + it.key());
  std::vector<int> dims;
  std::vector<double> weights;
  try {
    dims = j.at("dims").get<std::vector<int>>();
    weights = j.at("weights").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw input_error(std::string("malformed algebra: ") + e.what());
  }
  double total = 0.0;
  for (std::size_t i = 0; i < dims.size() && i < weights.size(); ++i) total += dims[i] * weights[i];
  if (dims.size() == weights.size() && std::abs(total - 1.0) <= 1e-12) return TracialAlgebra(dims, weights);
  return TracialAlgebra::make(dims, weights);
}

inline json matrix_to_json(const Mat& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(json::array({m(i, j).real(), m(i, j).imag()}));
    rows.push_back(row);
  }
  return rows;
}

inline Mat matrix_from_json(const json& rows) {
  if (!rows.is_array()) throw input_error("matrix must be an array of rows");
  int r = static_cast<int>(rows.size());
  int c = r > 0 ? static_cast<int>(rows[0].size()) : 0;
  Mat m(r, c);
  for (int i = 0; i < r; ++i) {
    if (!rows[i].is_array() || static_cast<int>(rows[i].size()) != c) throw input_error("ragged matrix rows");
    for (int j = 0; j < c; ++j) {
      const json& z = rows[i][j];
      if (z.is_number()) {
        m(i, j) = cplx(z.get<double>(), 0.0);
      } else if (z.is_array() && z.size() == 2 && z[0].is_number() && z[1].is_number()) {
        m(i, j) = cplx(z[0].get<double>(), z[1].get<double>());
      } else {
        throw input_error("matrix entries must be [re, im] pairs");
      }
    }
  }
  return m;
}

inline json blocks_to_json(const Element& x) {
  json b = json::array();
  for (const auto& m : x.blocks) b.push_back(matrix_to_json(m));
  return b;
}

inline Element blocks_from_json(const TracialAlgebra& A, const json& j) {
  if (!j.is_array()) throw input_error("blocks must be an array");
  Element x;
  for (const auto& b : j) x.blocks.push_back(matrix_from_json(b));
  A.check(x);
  return x;
}

inline json element_to_json(const TracialAlgebra& A, const Element& x) {
  A.check(x);
  return json{{"algebra", algebra_to_json(A)}, {"blocks", blocks_to_json(x)}};
}

struct LoadedElement {
  TracialAlgebra algebra;
  Element element;
};

inline LoadedElement element_from_json(const json& j) {
  if (!j.is_object() || !j.contains("algebra") || !j.contains("blocks")) throw input_error("matrix file needs algebra and blocks");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (it.key() != "algebra" && it.key() != "blocks") throw input_error("unknown matrix file key: " + it.key());
  LoadedElement out;
  out.algebra = algebra_from_json(j.at("algebra"));
  out.element = blocks_from_json(out.algebra, j.at("blocks"));
  return out;
}

// ---- files ----

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw input_error("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw input_error("invalid JSON in " + path + ": " + e.what());
  }
}

/// Writes through a temporary file and renames it into place.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw input_error("cannot write " + tmp.string());
    out << content;
    if (!out) throw internal_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline void write_json_file(const std::filesystem::path& path, const json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

// ---- maps ----

inline json provenance_to_json(const Provenance& p) {
  json j;
  switch (p.kind) {
    case Provenance::Kind::kraus: {
      j["kind"] = "kraus";
      json ops = json::array();
      for (const auto& K : p.kraus) ops.push_back(blocks_to_json(K));
      j["ops"] = ops;
      break;
    }
    case Provenance::Kind::strongly_summable: {
      j["kind"] = "strongly_summable";
      json pairs = json::array();
      for (const auto& [a, m] : p.pairs) pairs.push_back(json{{"a", blocks_to_json(a)}, {"m", blocks_to_json(m)}});
      j["pairs"] = pairs;
      break;
    }
    case Provenance::Kind::composition: {
      j["kind"] = "composition";
      json parts = json::array();
      for (const auto& q : p.parts) parts.push_back(provenance_to_json(q));
      j["parts"] = parts;
      break;
    }
    case Provenance::Kind::explicit_matrix:
      j["kind"] = "matrix";
      j["matrix"] = matrix_to_json(p.matrix);
      break;
  }
  if (!p.label.empty()) j["label"] = p.label;
  return j;
}

inline json map_to_json(const SuperOperator& S) {
  json j = provenance_to_json(S.provenance());
  if (S.provenance().kind == Provenance::Kind::explicit_matrix) j["matrix"] = matrix_to_json(S.matrix());
  j["algebra"] = algebra_to_json(S.algebra());
  return j;
}

namespace detail {
inline void allow_keys(const json& j, std::initializer_list<const char*> keys, const std::string& what) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : keys) ok = ok || it.key() == k;
    if (!ok) throw input_error("unknown key in " + what + ": " + it.key());
  }
}
}  // namespace detail

/// Builds a map from its descriptor. Besides the stored kinds (kraus,
/// matrix, strongly_summable, composition) a few named maps are accepted:
/// identity, transpose, depolarizing {eps}, replacement {target}.
inline SuperOperator map_from_json(const json& j, const TracialAlgebra* inherited = nullptr) {
  if (!j.is_object() || !j.contains("kind")) throw input_error("map descriptor needs a kind");
  TracialAlgebra A;
  if (j.contains("algebra"))
    A = algebra_from_json(j.at("algebra"));
  else if (inherited)
    A = *inherited;
  else
    throw input_error("map descriptor needs an algebra");
  std::string kind = j.at("kind").get<std::string>();
  std::string label = j.value("label", std::string());
  try {
    if (kind == "kraus") {
      detail::allow_keys(j, {"kind", "algebra", "label", "ops"}, "kraus map");
      std::vector<Element> ops;
      for (const auto& o : j.at("ops")) ops.push_back(blocks_from_json(A, o));
      return from_kraus(A, ops, label);
    }
    if (kind == "matrix") {
      detail::allow_keys(j, {"kind", "algebra", "label", "matrix"}, "matrix map");
      return from_matrix(A, matrix_from_json(j.at("matrix")), label);
    }
    if (kind == "strongly_summable") {
      detail::allow_keys(j, {"kind", "algebra", "label", "pairs"}, "strongly summable map");
      std::vector<std::pair<Element, Element>> pairs;
      for (const auto& p : j.at("pairs")) pairs.emplace_back(blocks_from_json(A, p.at("a")), blocks_from_json(A, p.at("m")));
      return from_strongly_summable(A, pairs, label);
    }
    if (kind == "composition") {
      detail::allow_keys(j, {"kind", "algebra", "label", "parts"}, "composition");
      const json& parts = j.at("parts");
      if (!parts.is_array() || parts.empty()) throw input_error("composition needs parts");
      SuperOperator S = map_from_json(parts.back(), &A);
      for (int i = static_cast<int>(parts.size()) - 2; i >= 0; --i) S = compose(map_from_json(parts[i], &A), S);
      return S;
    }
    if (kind == "identity") {
      detail::allow_keys(j, {"kind", "algebra", "label"}, "identity map");
      return identity_map(A);
    }
    if (kind == "transpose") {
      detail::allow_keys(j, {"kind", "algebra", "label"}, "transpose map");
      return transpose_map(A);
    }
    if (kind == "depolarizing") {
      detail::allow_keys(j, {"kind", "algebra", "label", "eps"}, "depolarizing map");
      return depolarizing(A, j.at("eps").get<double>());
    }
    if (kind == "replacement") {
      detail::allow_keys(j, {"kind", "algebra", "label", "target"}, "replacement map");
      return replacement(A, blocks_from_json(A, j.at("target")));
    }
  } catch (const json::exception& e) {
    throw input_error(std::string("malformed map descriptor: ") + e.what());
  }
  throw input_error("unknown map kind: " + kind);
}

inline json flags_to_json(const MapFlags& f) {
  json j{{"hermiticity_preserving", tri_name(f.hermiticity_preserving)},
         {"positive", tri_name(f.positive)},
         {"completely_positive", tri_name(f.completely_positive)},
         {"unital", tri_name(f.unital)},
         {"tracial", tri_name(f.tracial)},
         {"faithful", tri_name(f.faithful)}};
  if (f.positivity_probes > 0) j["positivity_probes"] = f.positivity_probes;
  return j;
}

}  // namespace hennion
