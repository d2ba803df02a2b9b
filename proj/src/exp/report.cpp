#include "exp/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <json.hpp>

namespace audioinv::exp {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.5g", v);
  return buf;
}

void render_table(std::ostringstream& os, const json& table) {
  const bool has_acc = table.value("kind", "") == "real";
  os << "  " << (has_acc ? "Real audio" : "Synthesized audio") << ":\n";
  for (const auto& row : table.at("rows")) {
    os << "    " << row.at("name").get<std::string>() << ": ";
    if (row.contains("inception_mean"))
      os << "IS " << num(row["inception_mean"].get<double>()) << " +- "
         << num(row["inception_std"].get<double>());
    if (row.contains("mse_raw")) os << ", MSE " << num(row["mse_raw"].get<double>());
    if (row.contains("ssim_spectrogram"))
      os << ", SSIM " << num(row["ssim_spectrogram"].get<double>());
    if (row.contains("accuracy"))
      os << ", accuracy " << num(row["accuracy"].get<double>());
    const int64_t failures = row.value("failures", 0);
    if (failures > 0) os << ", failures " << failures;
    os << "\n";
  }
}

}  // namespace

std::string render_report(const std::string& results_dir) {
  std::vector<fs::path> found;
  if (fs::is_regular_file(fs::path(results_dir) / "results.json"))
    found.push_back(fs::path(results_dir) / "results.json");
  if (fs::is_directory(results_dir))
    for (const auto& entry : fs::directory_iterator(results_dir))
      if (entry.is_directory() && fs::is_regular_file(entry.path() / "results.json"))
        found.push_back(entry.path() / "results.json");
  std::sort(found.begin(), found.end());
  if (found.empty())
    throw std::runtime_error("report: no results.json under " + results_dir);

  std::ostringstream os;
  // per-metric spread bookkeeping across runs
  std::map<std::string, std::vector<double>> spread;

  for (const auto& path : found) {
    std::ifstream is(path);
    json r = json::parse(is);
    os << "== run " << path.parent_path().filename().string() << " (seed "
       << r.value("seed", 0) << ", config " << r.value("config_hash", "?") << ")\n";
    render_table(os, r.at("fake_table"));
    render_table(os, r.at("real_table"));

    int64_t total_failures = 0;
    for (const char* tbl : {"fake_table", "real_table"})
      for (const auto& row : r.at(tbl).at("rows"))
        total_failures += row.value("failures", 0);
    os << "  failed targets: " << total_failures << "\n";

    const auto& diags = r.at("diagnostics");
    if (diags.empty()) {
      os << "  diagnostics: none\n";
    } else {
      os << "  diagnostics:\n";
      for (const auto& d : diags) os << "    ! " << d.get<std::string>() << "\n";
    }

    for (const char* tbl : {"fake_table", "real_table"})
      for (const auto& row : r.at(tbl).at("rows")) {
        const std::string key =
            std::string(tbl) + "/" + row.at("name").get<std::string>();
        if (row.contains("mse_raw")) spread[key + "/mse"].push_back(row["mse_raw"]);
        if (row.contains("ssim_spectrogram"))
          spread[key + "/ssim"].push_back(row["ssim_spectrogram"]);
        if (row.contains("accuracy"))
          spread[key + "/accuracy"].push_back(row["accuracy"]);
        if (row.contains("inception_mean"))
          spread[key + "/is"].push_back(row["inception_mean"]);
      }
  }

  if (found.size() > 1) {
    os << "== spread over " << found.size() << " runs (min .. max)\n";
    for (const auto& [key, vals] : spread) {
      const auto [mn, mx] = std::minmax_element(vals.begin(), vals.end());
      double mean = 0;
      for (double v : vals) mean += v;
      mean /= static_cast<double>(vals.size());
      os << "  " << key << ": " << num(*mn) << " .. " << num(*mx) << " (mean "
         << num(mean) << ")\n";
    }
  }
  return os.str();
}

}  // namespace audioinv::exp
