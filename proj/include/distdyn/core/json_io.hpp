#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "distdyn/core/types.hpp"

namespace distdyn {

using json = nlohmann::json;

// JSON schema:
// {dimension, K, components:[{mean:[...], cholesky:[[...]]}], grid:[...],
//  weights:[[...]], bandwidths:[...], ridge:[...], time_unit}
// Doubles are emitted in shortest round-trip form, so serialize/deserialize
// reproduces every field bit-exactly.
inline json model_to_json(const FittedModel& model) {
  model.validate();
  if (model.weightTable.rows.empty())
    throw InputError("serialize_model: at least one grid point required");
  json j;
  j["dimension"] = model.dictionary.dimension();
  j["K"] = model.dictionary.size();
  j["components"] = json::array();
  for (const auto& c : model.dictionary.components) {
    json jc;
    jc["mean"] = std::vector<double>(c.mean.data(), c.mean.data() + c.mean.size());
    std::vector<std::vector<double>> chol;
    for (Eigen::Index r = 0; r < c.cholesky.rows(); ++r) {
      std::vector<double> row(c.cholesky.cols());
      for (Eigen::Index q = 0; q < c.cholesky.cols(); ++q) row[q] = c.cholesky(r, q);
      chol.push_back(std::move(row));
    }
    jc["cholesky"] = chol;
    j["components"].push_back(std::move(jc));
  }
  j["grid"] = model.weightTable.grid.points;
  j["horizon"] = model.weightTable.grid.horizon;
  std::vector<std::vector<double>> w;
  for (const auto& row : model.weightTable.rows)
    w.emplace_back(row.weights.data(), row.weights.data() + row.weights.size());
  j["weights"] = w;
  j["bandwidths"] = model.kernelBandwidths;
  j["ridge"] = std::vector<double>(model.ridge.data(), model.ridge.data() + model.ridge.size());
  j["time_unit"] = model.timeUnit;
  return j;
}

inline FittedModel model_from_json(const json& j) {
  auto need = [&j](const char* key) -> const json& {
    auto it = j.find(key);
    if (it == j.end())
      throw ParseError(std::string("deserialize_model: missing field '") + key + "'");
    return *it;
  };
  FittedModel model;
  try {
    const Eigen::Index d = need("dimension").get<Eigen::Index>();
    const std::size_t K = need("K").get<std::size_t>();
    for (const auto& jc : need("components")) {
      GaussianComponent c;
      auto mean = jc.at("mean").get<std::vector<double>>();
      c.mean = Eigen::Map<Vector>(mean.data(), mean.size());
      auto chol = jc.at("cholesky").get<std::vector<std::vector<double>>>();
      c.cholesky = Matrix::Zero(d, d);
      for (Eigen::Index r = 0; r < d; ++r)
        for (Eigen::Index q = 0; q < d; ++q) c.cholesky(r, q) = chol.at(r).at(q);
      model.dictionary.components.push_back(std::move(c));
    }
    if (model.dictionary.size() != K)
      throw ParseError("deserialize_model: components.length != K");
    model.weightTable.grid.points = need("grid").get<std::vector<double>>();
    model.weightTable.grid.horizon = j.value("horizon", 1.0);
    for (const auto& row : need("weights")) {
      auto v = row.get<std::vector<double>>();
      SimplexVector sv;
      sv.weights = Eigen::Map<Vector>(v.data(), v.size());
      model.weightTable.rows.push_back(std::move(sv));
    }
    model.kernelBandwidths = need("bandwidths").get<std::vector<double>>();
    auto ridge = need("ridge").get<std::vector<double>>();
    model.ridge = Eigen::Map<Vector>(ridge.data(), ridge.size());
    model.timeUnit = j.value("time_unit", "normalized");
  } catch (const json::exception& e) {
    throw ParseError(std::string("deserialize_model: ") + e.what());
  }
  model.validate();
  return model;
}

inline std::string serialize_model(const FittedModel& model) {
  return model_to_json(model).dump(2);
}

inline FittedModel deserialize_model(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("deserialize_model: ") + e.what());
  }
  return model_from_json(j);
}

// Snapshot dataset schema:
// {dimension, grid:{points:[...], horizon}, snapshots:[[[row]...]...]}
inline json dataset_to_json(const SnapshotDataset& data) {
  data.validate();
  json j;
  j["dimension"] = data.dimension();
  j["grid"] = {{"points", data.grid.points}, {"horizon", data.grid.horizon}};
  json snaps = json::array();
  for (const Matrix& block : data.snapshots) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < block.rows(); ++i) {
      std::vector<double> row(block.cols());
      for (Eigen::Index q = 0; q < block.cols(); ++q) row[static_cast<std::size_t>(q)] = block(i, q);
      rows.push_back(std::move(row));
    }
    snaps.push_back(std::move(rows));
  }
  j["snapshots"] = std::move(snaps);
  return j;
}

inline SnapshotDataset dataset_from_json(const json& j) {
  SnapshotDataset data;
  try {
    const Eigen::Index d = j.at("dimension").get<Eigen::Index>();
    data.grid.points = j.at("grid").at("points").get<std::vector<double>>();
    data.grid.horizon = j.at("grid").value("horizon", 1.0);
    for (const auto& block : j.at("snapshots")) {
      Matrix m(static_cast<Eigen::Index>(block.size()), d);
      Eigen::Index i = 0;
      for (const auto& row : block) {
        auto vals = row.get<std::vector<double>>();
        if (static_cast<Eigen::Index>(vals.size()) != d)
          throw ParseError("dataset: row width != dimension");
        for (Eigen::Index q = 0; q < d; ++q)
          m(i, q) = vals[static_cast<std::size_t>(q)];
        ++i;
      }
      data.snapshots.push_back(std::move(m));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("dataset: ") + e.what());
  }
  data.validate();
  return data;
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open for writing: " + path);
  out << text;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open for reading: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace distdyn
