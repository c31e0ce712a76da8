#include "rtbp/report.hpp"

#include <algorithm>
#include <charconv>
#include <ctime>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include <boost/crc.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#ifndef RTBP_VERSION
#define RTBP_VERSION "unversioned"
#endif

namespace rtbp {

using nlohmann::json;

std::string format_number(double v) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, r.ptr);
}

namespace {

double parse_double(const std::string& key, const std::string& v) {
    double out = 0;
    const char* b = v.data();
    const char* e = v.data() + v.size();
    if (!v.empty() && *b == '+') ++b;
    auto r = std::from_chars(b, e, out);
    if (r.ec != std::errc() || r.ptr != e) throw ConfigError("key '" + key + "': not a number: '" + v + "'");
    return out;
}

long long parse_int(const std::string& key, const std::string& v) {
    long long out = 0;
    auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size())
        throw ConfigError("key '" + key + "': not an integer: '" + v + "'");
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw ConfigError("key '" + key + "': expected true or false, got '" + v + "'");
}

std::vector<double> parse_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    if (v.empty()) return out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item.erase(0, item.find_first_not_of(" \t"));
        item.erase(item.find_last_not_of(" \t") + 1);
        out.push_back(parse_double(key, item));
    }
    return out;
}

std::string emit_list(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + format_number(v[i]);
    return s;
}

struct Field {
    std::string section, key;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
};

template <class M>
Field real(const char* sec, const char* key, M m) {
    return {sec, key, [m](const RunConfig& c) { return format_number(m(const_cast<RunConfig&>(c))); },
            [m, key](RunConfig& c, const std::string& v) { m(c) = parse_double(key, v); }};
}

template <class M>
Field integer(const char* sec, const char* key, M m) {
    return {sec, key, [m](const RunConfig& c) { return std::to_string(m(const_cast<RunConfig&>(c))); },
            [m, key](RunConfig& c, const std::string& v) {
                using T = std::remove_reference_t<decltype(m(c))>;
                long long x = parse_int(key, v);
                if (x < std::numeric_limits<T>::min() || x > std::numeric_limits<T>::max())
                    throw ConfigError(std::string("key '") + key + "' out of range");
                m(c) = T(x);
            }};
}

template <class M>
Field boolean(const char* sec, const char* key, M m) {
    return {sec, key, [m](const RunConfig& c) { return std::string(m(const_cast<RunConfig&>(c)) ? "true" : "false"); },
            [m, key](RunConfig& c, const std::string& v) { m(c) = parse_bool(key, v); }};
}

#define R(sec, key, expr) real(sec, key, [](RunConfig& c) -> auto& { return expr; })
#define I(sec, key, expr) integer(sec, key, [](RunConfig& c) -> auto& { return expr; })
#define B(sec, key, expr) boolean(sec, key, [](RunConfig& c) -> auto& { return expr; })

const std::vector<Field>& fields() {
    static const std::vector<Field> f = [] {
        std::vector<Field> v{
            R("params", "mu", c.params.mu),
            R("params", "e0", c.params.e0),
            R("params", "collision_floor", c.params.collision_floor),

            R("integrator", "rel_tol", c.integrator.rel_tol),
            R("integrator", "abs_tol", c.integrator.abs_tol),
            R("integrator", "max_step", c.integrator.max_step),
            R("integrator", "max_time", c.integrator.max_time),
            I("integrator", "max_steps", c.integrator.max_steps),
            R("integrator", "event_tol", c.integrator.event_tol),

            R("quadrature", "tol", c.quad.tol),
            R("quadrature", "G_min", c.quad.G_min),
            I("quadrature", "max_harmonics", c.quad.max_harmonics),
            I("quadrature", "max_depth", c.quad.max_depth),
            R("quadrature", "contour_c", c.quad.contour_c),

            R("elliptic", "e0_cap", c.elliptic.e0_cap),
            I("elliptic", "n_phase", c.elliptic.n_phase),
            R("elliptic", "solve_tol", c.elliptic.solve_tol),
            I("elliptic", "max_iter", c.elliptic.max_iter),

            I("chart", "order", c.chart.k),
            I("chart", "steps", c.chart.steps),
            R("chart", "handoff_tol", c.chart.handoff_tol),
            R("chart", "validity_tol", c.chart.validity_tol),

            I("homoclinic", "chart_order", c.homoclinic.chart.k),
            I("homoclinic", "chart_steps", c.homoclinic.chart.steps),
            R("homoclinic", "chart_handoff_tol", c.homoclinic.chart.handoff_tol),
            R("homoclinic", "chart_validity_tol", c.homoclinic.chart.validity_tol),
            R("homoclinic", "rel_tol", c.homoclinic.integrator.rel_tol),
            R("homoclinic", "abs_tol", c.homoclinic.integrator.abs_tol),
            R("homoclinic", "max_time", c.homoclinic.integrator.max_time),
            R("homoclinic", "match_tol", c.homoclinic.match_tol),
            R("homoclinic", "coincidence_tol", c.homoclinic.coincidence_tol),
            I("homoclinic", "coincidence_samples", c.homoclinic.coincidence_samples),
            R("homoclinic", "phase_step", c.homoclinic.phase_step),
            R("homoclinic", "noise_floor", c.homoclinic.noise_floor),
            R("homoclinic", "base_step", c.homoclinic.base_step),
            B("homoclinic", "measure_splitting", c.homoclinic.measure_splitting),
            I("homoclinic", "max_iter", c.homoclinic.max_iter),

            R("lambda", "eps_tilde", c.lambda.eps_tilde),
            R("lambda", "q_f", c.lambda.q_f),
            R("lambda", "delta", c.lambda.delta),
            R("lambda", "p0", c.lambda.p0),
            R("lambda", "z0_theta", c.lambda.z0[0]),
            R("lambda", "z0_G", c.lambda.z0[1]),
            I("lambda", "samples", c.lambda.samples),
            R("lambda", "rel_tol", c.lambda.integrator.rel_tol),
            R("lambda", "abs_tol", c.lambda.integrator.abs_tol),
            R("lambda", "aq", c.model.aq),
            R("lambda", "bq", c.model.bq),
            R("lambda", "ap", c.model.ap),
            R("lambda", "bp", c.model.bp),
            R("lambda", "o0_theta", c.model.o0[0]),
            R("lambda", "o0_G", c.model.o0[1]),

            R("shadow", "delta_scale", c.shadow.delta_scale),
            R("shadow", "delta_tilde", c.shadow.delta_tilde),
            R("shadow", "horizon", c.shadow.horizon),
            I("shadow", "subdivisions", c.shadow.subdivisions),
            R("shadow", "rel_tol", c.shadow.integrator.rel_tol),
            R("shadow", "abs_tol", c.shadow.integrator.abs_tol),
            B("shadow", "reverse_time", c.shadow.reverse_time),

            R("oscillation", "alpha0", c.oscillation.alpha0),
            R("oscillation", "band", c.oscillation.band),
            R("oscillation", "ratio_required", c.oscillation.ratio_required),
            I("oscillation", "excursions_required", c.oscillation.excursions_required),
        };
        v.push_back({"shadow", "delta", [](const RunConfig& c) { return emit_list(c.shadow.delta); },
                     [](RunConfig& c, const std::string& s) { c.shadow.delta = parse_list("delta", s); }});
        v.push_back({"oscillation", "policy",
                     [](const RunConfig& c) { return std::string(branch_policy_name(c.oscillation.policy)); },
                     [](RunConfig& c, const std::string& s) {
                         try {
                             c.oscillation.policy = branch_policy_from_name(s);
                         } catch (const DomainError& e) {
                             throw ConfigError(e.what());
                         }
                     }});
        std::stable_sort(v.begin(), v.end(), [](const Field& a, const Field& b) {
            static const std::vector<std::string> order{"params", "integrator", "quadrature", "elliptic", "chart",
                                                        "homoclinic", "lambda", "shadow", "oscillation"};
            auto ia = std::find(order.begin(), order.end(), a.section) - order.begin();
            auto ib = std::find(order.begin(), order.end(), b.section) - order.begin();
            return ia < ib;
        });
        return v;
    }();
    return f;
}

#undef R
#undef I
#undef B

}  // namespace

void RunConfig::validate() const {
    try {
        params.validate();
        integrator.validate();
        quad.validate();
        if (!(elliptic.e0_cap > 0 && elliptic.n_phase >= 4 && elliptic.solve_tol > 0 && elliptic.max_iter >= 1))
            throw DomainError("bad elliptic settings");
        if (chart.k < 4 || chart.steps < 1 || !(chart.handoff_tol > 0 && chart.validity_tol > 0))
            throw DomainError("bad chart settings");
        homoclinic.validate();
        lambda.validate();
        shadow.validate();
        if (!(oscillation.band > 0 && oscillation.ratio_required > 0 && oscillation.excursions_required >= 1))
            throw DomainError("bad oscillation settings");
    } catch (const DomainError& e) {
        throw ConfigError(e.what());
    }
}

OscillationConfig RunConfig::oscillation_config() const {
    OscillationConfig o = oscillation;
    o.shadow = shadow;
    o.homoclinic = homoclinic;
    return o;
}

ChainConfig RunConfig::chain_config() const {
    ChainConfig c;
    c.homoclinic = homoclinic;
    c.quad = quad;
    c.elliptic = elliptic;
    return c;
}

RunConfig parse_config(std::istream& is) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(is, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("malformed configuration: ") + e.what());
    }
    std::map<std::pair<std::string, std::string>, const Field*> index;
    for (const auto& f : fields()) index[{f.section, f.key}] = &f;
    RunConfig c;
    for (const auto& [sec, body] : tree) {
        if (!body.data().empty() && body.empty())
            throw ConfigError("key '" + sec + "' outside any section");
        for (const auto& [key, val] : body) {
            auto it = index.find({sec, key});
            if (it == index.end()) throw ConfigError("unknown key '" + key + "' in section [" + sec + "]");
            std::string v = val.data();
            v.erase(0, v.find_first_not_of(" \t"));
            v.erase(v.find_last_not_of(" \t") + 1);
            it->second->set(c, v);
        }
        bool known = std::any_of(fields().begin(), fields().end(), [&](const Field& f) { return f.section == sec; });
        if (!known) throw ConfigError("unknown section [" + sec + "]");
    }
    c.validate();
    return c;
}

RunConfig parse_config_string(const std::string& text) {
    std::istringstream is(text);
    return parse_config(is);
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open configuration '" + path.string() + "'");
    return parse_config(f);
}

std::string emit_config(const RunConfig& c) {
    std::ostringstream os;
    std::string sec;
    for (const auto& f : fields()) {
        if (f.section != sec) {
            if (!sec.empty()) os << '\n';
            sec = f.section;
            os << '[' << sec << "]\n";
        }
        os << f.key << " = " << f.get(c) << '\n';
    }
    return os.str();
}

// ---------------------------------------------------------------- CSV

CsvWriter::CsvWriter(std::ostream& os, const std::vector<std::string>& header) : os_(os), width_(header.size()) {
    std::vector<Cell> cells(header.begin(), header.end());
    row(cells);
}

void CsvWriter::row(const std::vector<Cell>& cells) {
    if (cells.size() != width_) throw DomainError("CSV row width does not match the header");
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) os_ << ',';
        std::visit(
            [&](const auto& v) {
                using T = std::decay_t<decltype(v)>;
                if constexpr (std::is_same_v<T, double>) {
                    os_ << format_number(v);
                } else if constexpr (std::is_same_v<T, long long>) {
                    os_ << v;
                } else if (v.find_first_of(",\"\n") == std::string::npos) {
                    os_ << v;
                } else {
                    os_ << '"';
                    for (char ch : v) os_ << (ch == '"' ? "\"\"" : std::string(1, ch));
                    os_ << '"';
                }
            },
            cells[i]);
    }
    os_ << '\n';
}

// ---------------------------------------------------------------- JSON

// booleans are written as 0/1 so that the reports stay numbers, strings, objects and arrays
namespace {
int flag(bool b) { return b ? 1 : 0; }
json mcgehee(const McGeheeState& m) { return {{"x", m.x}, {"alpha", m.alpha}, {"y", m.y}, {"G", m.G}, {"s", m.s}}; }
}  // namespace

json to_json(const PerihelionPoint& p) {
    return {{"lambda", p.lambda}, {"s", p.s}, {"x", p.x}, {"alpha", p.alpha}, {"G", p.G}};
}

json to_json(const HomoclinicIntersection& h) {
    return {{"branch", branch_name(h.branch)},
            {"alpha0", h.alpha0},
            {"G0", h.G0},
            {"s0", h.s0},
            {"alpha1", h.alpha1},
            {"G1", h.G1},
            {"point", to_json(h.point)},
            {"seed_phase", h.seed_phase},
            {"seed_distance", h.seed_distance},
            {"splitting", h.splitting},
            {"splitting_predicted", h.splitting_predicted},
            {"resolved", flag(h.resolved)},
            {"coincident", flag(h.coincident)},
            {"residual", h.residual}};
}

json to_json(const TransitionChain& c) {
    json nodes = json::array(), links = json::array();
    for (const auto& n : c.nodes) nodes.push_back({{"alpha", n.alpha}, {"G", n.G}, {"in_band", flag(n.in_band)}});
    for (const auto& l : c.links) {
        json j{{"branch", branch_name(l.branch)}};
        if (l.witness) {
            j["witness"] = to_json(*l.witness);
            j["witness_gap"] = l.witness_gap;
        }
        links.push_back(j);
    }
    return {{"nodes", nodes},           {"links", links},
            {"G_lo", c.G_lo},           {"G_hi", c.G_hi},
            {"bounded", flag(c.bounded)}, {"max_deviation", c.max_deviation},
            {"net_drift", c.net_drift}, {"elliptic", flag(c.elliptic)}};
}

json to_json(const ShadowRun& r) {
    json boxes = json::array(), visits = json::array(), ex = json::array();
    for (const auto& [a, b] : r.boxes) boxes.push_back(json::array({a, b}));
    for (const auto& v : r.visits)
        visits.push_back({{"kind", v.lambda ? "Lambda" : "p"},
                          {"index", v.link},
                          {"t", v.t},
                          {"period", v.period},
                          {"state", mcgehee(v.state)},
                          {"distance", v.distance},
                          {"radius", v.radius}});
    for (const auto& e : r.excursions)
        ex.push_back({{"t_start", e.t_start}, {"t_apo", e.t_apo}, {"t_end", e.t_end}, {"r_max", e.r_max},
                      {"r_min", e.r_min}});
    return {{"epsilon", r.epsilon},
            {"initial", mcgehee(r.initial)},
            {"boxes", boxes},
            {"visits", visits},
            {"excursions", ex},
            {"links_shadowed", r.links_shadowed},
            {"complete", flag(r.complete)},
            {"reversed", flag(r.reversed)},
            {"stop_reason", r.stop_reason}};
}

json to_json(const OscillationReport& r) {
    json j{{"verdict", r.verdict},
           {"pass", flag(r.pass)},
           {"reason", r.reason},
           {"r_in", r.r_in},
           {"r_out", r.r_out},
           {"chain", to_json(r.chain)},
           {"note", "finite excursion evidence only; limsup and liminf are not decided numerically"}};
    if (r.run) j["run"] = to_json(*r.run);
    return j;
}

json to_json(const LambdaTransition& t) {
    return {{"S", t.S},
            {"T", t.T},
            {"S_lo", t.S_lo},
            {"S_hi", t.S_hi},
            {"exit", {{"s", t.exit.s}, {"q", t.exit.q}, {"p", t.exit.p}, {"z", t.exit.z}}},
            {"p_bound", t.p_bound},
            {"z_drift", t.z_drift},
            {"z_bound", t.z_bound},
            {"samples", t.samples.size()},
            {"violations", t.violations}};
}

void write_excursions_csv(std::ostream& os, const ShadowRun& r) {
    CsvWriter w(os, {"index", "t_start", "t_apo", "t_end", "r_min", "r_max", "ratio"});
    long long i = 0;
    for (const auto& e : r.excursions) w.row({++i, e.t_start, e.t_apo, e.t_end, e.r_min, e.r_max, e.r_max / e.r_min});
}

void write_visits_csv(std::ostream& os, const ShadowRun& r) {
    CsvWriter w(os, {"kind", "index", "t", "period", "x", "alpha", "y", "G", "r", "distance", "radius"});
    for (const auto& v : r.visits)
        w.row({std::string(v.lambda ? "Lambda" : "p"), (long long)v.link, v.t, (long long)v.period, v.state.x,
               v.state.alpha, v.state.y, v.state.G, 2 / (v.state.x * v.state.x), v.distance, v.radius});
}

// ---------------------------------------------------------------- manifest

std::uint32_t crc32_file(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    if (!f) throw DomainError("cannot read '" + p.string() + "'");
    boost::crc_32_type crc;
    char buf[1 << 15];
    while (f) {
        f.read(buf, sizeof buf);
        crc.process_bytes(buf, std::size_t(f.gcount()));
    }
    return crc.checksum();
}

std::string version_string() { return RTBP_VERSION; }

std::string utc_timestamp(std::chrono::system_clock::time_point t) {
    std::time_t tt = std::chrono::system_clock::to_time_t(t);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

RunManifest::RunManifest(std::string command, const RunConfig& cfg, std::filesystem::path dir)
    : command_(std::move(command)), config_(emit_config(cfg)), dir_(std::move(dir)), started_(utc_timestamp()) {}

void RunManifest::add_output(const std::string& name) {
    if (name == "manifest.json") throw DomainError("manifest.json is reserved");
    if (std::find(outputs_.begin(), outputs_.end(), name) != outputs_.end())
        throw DomainError("output '" + name + "' registered twice");
    outputs_.push_back(name);
}

void RunManifest::finish() {
    finished_ = utc_timestamp();
    inventory_ = json::array();
    for (const auto& name : outputs_) {
        const auto path = dir_ / name;
        std::ostringstream crc;
        crc << std::hex << std::setw(8) << std::setfill('0') << crc32_file(path);
        inventory_.push_back({{"file", name}, {"bytes", std::filesystem::file_size(path)}, {"crc32", crc.str()}});
    }
    std::ofstream f(dir_ / "manifest.json");
    f << document().dump(2) << '\n';
    if (!f) throw DomainError("cannot write manifest in '" + dir_.string() + "'");
}

json RunManifest::document() const {
    return {{"command", command_}, {"version", version_string()}, {"started", started_}, {"finished", finished_},
            {"status", status_},   {"config", config_},            {"outputs", inventory_}};
}

}  // namespace rtbp
