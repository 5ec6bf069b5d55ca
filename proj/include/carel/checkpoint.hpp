#pragma once

// JSON serialization of parameter stores. Doubles are written with enough
// digits to round-trip exactly, so a save/load cycle is lossless.

#include <fstream>
#include <string>

#include <json.hpp>

#include "carel/params.hpp"

namespace carel {

inline nlohmann::json to_json(const ParamStore& store) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [name, m] : store.all()) {
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(m.size()));
    for (Index r = 0; r < m.rows(); ++r)
      for (Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
    j[name] = {{"shape", {m.rows(), m.cols()}}, {"data", std::move(data)}};
  }
  return j;
}

inline ParamStore param_store_from_json(const nlohmann::json& j) {
  ParamStore store;
  try {
    for (const auto& [name, entry] : j.items()) {
      const auto shape = entry.at("shape").get<std::vector<Index>>();
      const auto data = entry.at("data").get<std::vector<double>>();
      if (shape.size() != 2 || shape[0] < 0 || shape[1] < 0 || static_cast<std::size_t>(shape[0] * shape[1]) != data.size())
        throw ParseError("checkpoint: bad shape for parameter " + name);
      Matrix m(shape[0], shape[1]);
      for (Index r = 0; r < shape[0]; ++r)
        for (Index c = 0; c < shape[1]; ++c) m(r, c) = data[static_cast<std::size_t>(r * shape[1] + c)];
      store.add(name, std::move(m));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
  return store;
}

inline void write_json_file(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write file: " + path);
  out << j.dump(1) << '\n';
  if (!out) throw ParseError("write failed: " + path);
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open file: " + path);
  try {
    nlohmann::json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

}  // namespace carel
