#include "pullback/datagen.hpp"
#include "pullback/error.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace pullback {

void save_dataset(const Dataset& data, const std::string& path) {
  {
    std::ofstream out(path, std::ios::binary);
    require(bool(out), ErrorKind::io, "cannot open '" + path + "' for writing");
    for (std::size_t c = 0; c < data.dim(); ++c) out << (c ? "," : "") << "x" << (c + 1);
    out << "\n";
    char buf[40];
    for (Eigen::Index r = 0; r < data.samples.rows(); ++r) {
      for (Eigen::Index c = 0; c < data.samples.cols(); ++c) {
        std::snprintf(buf, sizeof buf, "%.17g", data.samples(r, c));
        out << (c ? "," : "") << buf;
      }
      out << "\n";
    }
    require(bool(out), ErrorKind::io, "failed writing '" + path + "'");
  }
  nlohmann::json meta;
  meta["schema"] = kDatasetSchema;
  meta["generator"] = data.generator;
  meta["parameters"] = data.parameters;
  meta["seed"] = data.seed;
  meta["n"] = data.size();
  meta["d"] = data.dim();
  std::ofstream out(path + ".meta.json", std::ios::binary);
  require(bool(out), ErrorKind::io, "cannot write dataset metadata for '" + path + "'");
  out << meta.dump(2) << "\n";
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(bool(in), ErrorKind::io, "cannot open dataset '" + path + "'");
  std::string line;
  require(bool(std::getline(in, line)), ErrorKind::schema, "dataset '" + path + "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::size_t d = 0;
  {
    std::stringstream header(line);
    std::string cell;
    while (std::getline(header, cell, ',')) {
      require(cell == "x" + std::to_string(d + 1), ErrorKind::schema,
              "dataset header must be x1,...,xd (found '" + cell + "')");
      ++d;
    }
  }
  require(d > 0, ErrorKind::schema, "dataset header has no columns");

  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t count = 0;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      require(end != cell.c_str() && *end == '\0' && std::isfinite(v), ErrorKind::schema,
              "dataset row " + std::to_string(rows + 1) + ": bad value '" + cell + "'");
      values.push_back(v);
      ++count;
    }
    require(count == d, ErrorKind::schema,
            "dataset row " + std::to_string(rows + 1) + " has " + std::to_string(count) +
                " values, expected " + std::to_string(d));
    ++rows;
  }

  Dataset data;
  data.samples = Eigen::Map<RowMatrix>(values.data(), Eigen::Index(rows), Eigen::Index(d));
  const std::string meta_path = path + ".meta.json";
  if (std::filesystem::exists(meta_path)) {
    std::ifstream mf(meta_path);
    try {
      const auto meta = nlohmann::json::parse(mf);
      const std::string schema = meta.value("schema", std::string(kDatasetSchema));
      if (schema != kDatasetSchema) fail(ErrorKind::schema, "unsupported dataset schema '" + schema + "'");
      data.generator = meta.value("generator", std::string());
      data.seed = meta.value("seed", std::uint64_t{0});
      if (meta.contains("parameters"))
        data.parameters = meta.at("parameters").get<std::map<std::string, std::string>>();
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::schema, "bad dataset metadata '" + meta_path + "': " + e.what());
    }
  }
  return data;
}

}  // namespace pullback
