#pragma once
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "rtbp/chain.hpp"
#include "rtbp/flow.hpp"
#include "rtbp/manifold.hpp"
#include "rtbp/melnikov.hpp"

namespace rtbp {

/// Every tunable of the pipelines.  See README for the file format.
struct RunConfig {
    Params params;
    IntegratorConfig integrator;
    QuadConfig quad;
    EllipticConfig elliptic;
    ChartConfig chart;
    HomoclinicConfig homoclinic;
    LambdaConfig lambda;
    LambdaModel model{0.3, -0.2, 0.1, 0.4, {1.0, 0.5}};
    ShadowConfig shadow;
    OscillationConfig oscillation;

    /// ConfigError on any invalid value
    void validate() const;
    /// oscillation settings with the shadow and homoclinic sections folded in
    OscillationConfig oscillation_config() const;
    ChainConfig chain_config() const;
};

/// INI text: [section] headers and key = value lines, '#' or ';' comments.
/// Unknown sections or keys, duplicates and malformed values raise ConfigError.
RunConfig parse_config(std::istream& is);
RunConfig parse_config_string(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
/// every key, in a fixed order; parse_config(emit_config(c)) reproduces c
std::string emit_config(const RunConfig& c);

/// shortest locale-free text with 17 significant digits
std::string format_number(double v);

class CsvWriter {
public:
    using Cell = std::variant<double, long long, std::string>;
    CsvWriter(std::ostream& os, const std::vector<std::string>& header);
    void row(const std::vector<Cell>& cells);

private:
    std::ostream& os_;
    std::size_t width_;
};

nlohmann::json to_json(const PerihelionPoint& p);
nlohmann::json to_json(const HomoclinicIntersection& h);
nlohmann::json to_json(const TransitionChain& c);
nlohmann::json to_json(const ShadowRun& r);
nlohmann::json to_json(const OscillationReport& r);
nlohmann::json to_json(const LambdaTransition& t);

void write_excursions_csv(std::ostream& os, const ShadowRun& r);
void write_visits_csv(std::ostream& os, const ShadowRun& r);

std::uint32_t crc32_file(const std::filesystem::path& p);
std::string version_string();

/// Inventory of one command invocation; written as manifest.json in the output directory.
class RunManifest {
public:
    RunManifest(std::string command, const RunConfig& cfg, std::filesystem::path dir);
    /// registers a file written in the output directory
    void add_output(const std::string& name);
    void set_status(std::string s) { status_ = std::move(s); }
    /// checksums the outputs and writes manifest.json
    void finish();
    nlohmann::json document() const;
    const std::filesystem::path& dir() const { return dir_; }
    const std::vector<std::string>& outputs() const { return outputs_; }

private:
    std::string command_, config_, status_ = "ok";
    std::filesystem::path dir_;
    std::string started_, finished_;
    std::vector<std::string> outputs_;
    nlohmann::json inventory_ = nlohmann::json::array();
};

std::string utc_timestamp(std::chrono::system_clock::time_point t = std::chrono::system_clock::now());

}  // namespace rtbp
