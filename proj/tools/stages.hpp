#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "run_config.hpp"

namespace bbmgap::cli {

struct StageOptions {
    std::filesystem::path out;
    bool overwrite = false;
    // compare only; empty selects <out>/<stage>
    std::filesystem::path front_dir, tail_dir, mc_dir;
};

inline constexpr const char* manifest_schema = "bbmgap-manifest/1";

nlohmann::json read_manifest(const std::filesystem::path& stage_dir);

void run_wave(const RunConfig& cfg, const StageOptions& opt);
void run_front(const RunConfig& cfg, const StageOptions& opt);
void run_tail(const RunConfig& cfg, const StageOptions& opt);
void run_mc(const RunConfig& cfg, const StageOptions& opt);
void run_compare(const RunConfig& cfg, const StageOptions& opt);
/// wave -> front -> tail -> mc -> compare, sharing the front solve in memory.
void run_all(const RunConfig& cfg, const StageOptions& opt);

/// Rows of a CSV written by the stages: '#' lines skipped, first other line is the header.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
    std::vector<double> column(const std::string& name) const;
};
CsvTable read_csv(const std::filesystem::path& path);

}  // namespace bbmgap::cli
