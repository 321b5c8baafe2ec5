#pragma once

#include "pbelab/common.hpp"
#include "pbelab/mdp.hpp"
#include "pbelab/projection.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace pbelab {

inline nlohmann::json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

namespace detail {

inline void check_schema(const nlohmann::json& j, const std::string& expected,
                         const std::string& context) {
  if (!j.is_object() || !j.contains("schema") || !j.at("schema").is_string()) {
    throw ValidationError(context + ": missing \"schema\" string");
  }
  const std::string got = j.at("schema").get<std::string>();
  if (got != expected) {
    throw ValidationError(context + ": schema \"" + got + "\" not supported (expected \"" +
                          expected + "\")");
  }
}

inline const nlohmann::json& field(const nlohmann::json& j, const char* name,
                                   const std::string& context) {
  if (!j.contains(name)) {
    throw ValidationError(context + ": missing field \"" + name + "\"");
  }
  return j.at(name);
}

inline double number(const nlohmann::json& j, const char* name,
                     const std::string& context) {
  const auto& f = field(j, name, context);
  if (!f.is_number()) {
    throw ValidationError(context + ": field \"" + name + "\" must be a number");
  }
  return f.get<double>();
}

inline int integer(const nlohmann::json& j, const char* name,
                   const std::string& context) {
  const auto& f = field(j, name, context);
  if (!f.is_number_integer()) {
    throw ValidationError(context + ": field \"" + name + "\" must be an integer");
  }
  return f.get<int>();
}

inline Vector number_array(const nlohmann::json& j, int expected_len,
                           const std::string& context) {
  if (!j.is_array() || (expected_len >= 0 && static_cast<int>(j.size()) != expected_len)) {
    throw ValidationError(context + ": expected an array of " +
                          std::to_string(expected_len) + " numbers");
  }
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) {
      throw ValidationError(context + ": entry " + std::to_string(i) +
                            " is not a number");
    }
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

// rows x cols matrix from either a nested array of rows or a flat row-major
// array of rows*cols numbers.
inline Matrix number_matrix(const nlohmann::json& j, int rows, int cols,
                            const std::string& context) {
  if (!j.is_array()) throw ValidationError(context + ": expected an array");
  Matrix m(rows, cols);
  if (!j.empty() && j[0].is_array()) {
    if (static_cast<int>(j.size()) != rows) {
      throw ValidationError(context + ": expected " + std::to_string(rows) + " rows, got " +
                            std::to_string(j.size()));
    }
    for (int r = 0; r < rows; ++r) {
      m.row(r) = number_array(j[static_cast<size_t>(r)], cols,
                              context + ", row " + std::to_string(r))
                     .transpose();
    }
    return m;
  }
  if (static_cast<int>(j.size()) != rows * cols) {
    throw ValidationError(context + ": flat array must have " +
                          std::to_string(rows * cols) + " entries, got " +
                          std::to_string(j.size()));
  }
  const Vector flat = number_array(j, rows * cols, context);
  for (int r = 0; r < rows; ++r) {
    m.row(r) = flat.segment(static_cast<Eigen::Index>(r) * cols, cols).transpose();
  }
  return m;
}

}  // namespace detail

// {"schema":"pbelab-mdp/1","n_states":N,"gamma":g,"lambda":l,
//  "transition":[[..],..],"reward":[..],"grid":{"cell_widths":[..]}?}
inline FiniteMdp parse_mdp(const nlohmann::json& j, const std::string& context) {
  detail::check_schema(j, "pbelab-mdp/1", context);
  FiniteMdp mdp;
  mdp.n_states = detail::integer(j, "n_states", context);
  if (mdp.n_states < 1) throw ValidationError(context + ": n_states must be >= 1");
  mdp.gamma = detail::number(j, "gamma", context);
  mdp.lambda = j.contains("lambda") ? detail::number(j, "lambda", context) : 0.0;
  mdp.transition = detail::number_matrix(detail::field(j, "transition", context),
                                         mdp.n_states, mdp.n_states,
                                         context + ": transition");
  mdp.reward = detail::number_array(detail::field(j, "reward", context), mdp.n_states,
                                    context + ": reward");
  if (j.contains("grid")) {
    const auto& grid = j.at("grid");
    mdp.cell_widths = detail::number_array(
        detail::field(grid, "cell_widths", context + ": grid"), mdp.n_states,
        context + ": grid.cell_widths");
    for (int s = 0; s < mdp.n_states; ++s) {
      if (!(mdp.cell_widths(s) > 0.0)) {
        throw ValidationError(context + ": grid.cell_widths[" + std::to_string(s) +
                              "] must be positive");
      }
    }
  }
  mdp.validate();
  return mdp;
}

inline FiniteMdp load_mdp(const std::filesystem::path& path) {
  return parse_mdp(load_json(path), path.string());
}

// {"schema":"pbelab-features/1","k":K,"n_states":N,"table":[[..],..]}
// Row i of the table is feature i evaluated across all states. The same
// format carries projection test functions.
inline Matrix parse_feature_table(const nlohmann::json& j, const std::string& context) {
  detail::check_schema(j, "pbelab-features/1", context);
  const int k = detail::integer(j, "k", context);
  const int n = detail::integer(j, "n_states", context);
  if (k < 1 || n < 1) throw ValidationError(context + ": k and n_states must be >= 1");
  return detail::number_matrix(detail::field(j, "table", context), k, n,
                               context + ": table");
}

inline FeatureSet load_features(const std::filesystem::path& path) {
  return FeatureSet(parse_feature_table(load_json(path), path.string()));
}

inline Matrix load_basis_table(const std::filesystem::path& path) {
  return parse_feature_table(load_json(path), path.string());
}

inline void write_text_file(const std::filesystem::path& path,
                            const std::string& content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create " + path.parent_path().string());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  if (!out) throw IoError("short write to " + path.string());
}

}  // namespace pbelab
