// rtbp: command-line front end.  Exit codes: 0 ok, 2 configuration, 3 numerical, 4 acceptance.
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>

#include "CLI11.hpp"
#include "rtbp/acceptance.hpp"
#include "rtbp/report.hpp"

namespace fs = std::filesystem;
using namespace rtbp;

namespace {

constexpr int kConfigExit = 2, kNumericExit = 3, kAcceptanceExit = 4;

struct Outputs {
    fs::path dir;
    RunManifest manifest;
    std::ofstream open(const std::string& name) {
        manifest.add_output(name);
        std::ofstream f(dir / name);
        if (!f) throw DomainError("cannot write '" + (dir / name).string() + "'");
        return f;
    }
};

template <class F>
auto named(F f, const std::string& v) {
    try {
        return f(v);
    } catch (const DomainError& e) {
        throw ConfigError(e.what());
    }
}

std::vector<double> sweep(const std::vector<double>& v, const std::string& what) {
    if (v.empty()) throw ConfigError("empty " + what + " list");
    return v;
}

void cmd_integrate(const RunConfig& cfg, Outputs& out, const std::vector<double>& state, double t0, double t1,
                   int samples) {
    if (state.size() != 4) throw ConfigError("--state needs r,alpha,y,G");
    if (samples < 2) throw ConfigError("--samples must be at least 2");
    PolarState s0{state[0], state[1], state[2], state[3], t0};
    auto tr = integrate(to_vec(polar_to_cartesian(s0)), t0, t1, Chart::Cartesian, cfg.params, cfg.integrator);
    auto f = out.open("trajectory.csv");
    CsvWriter w(f, {"t", "q1", "q2", "p1", "p2", "r", "alpha", "y", "G", "H", "J"});
    for (int i = 0; i < samples; ++i) {
        double t = t0 + (t1 - t0) * i / (samples - 1);
        Vec4 y = i == samples - 1 ? tr.back() : tr.at(t);
        PolarState ps = cartesian_to_polar(cartesian_from_vec(y, t));
        w.row({t, y[0], y[1], y[2], y[3], ps.r, ps.alpha, ps.y, ps.G, polar_hamiltonian(ps, cfg.params),
               cfg.params.e0 == 0 ? jacobi_integral(ps, cfg.params) : std::nan("")});
    }
}

void cmd_melnikov(const RunConfig& cfg, Outputs& out, const std::vector<double>& Gs, int samples) {
    if (samples < 2) throw ConfigError("--samples must be at least 2");
    auto f = out.open("melnikov.csv");
    auto g = out.open("critical.csv");
    CsvWriter w(f, {"G0", "sigma", "L", "dL_dsigma"});
    CsvWriter c(g, {"G0", "sigma_minus", "sigma_plus", "residual_minus", "residual_plus", "d2L_minus", "d2L_plus"});
    for (double G : sweep(Gs, "G")) {
        Harmonics h = harmonics(G, cfg.params, cfg.quad);
        for (int i = 0; i < samples; ++i) {
            double sigma = 2 * std::numbers::pi * i / samples;
            w.row({G, sigma, h.value(sigma), h.dtheta(sigma).value()});
        }
        auto cp = critical_points(0.0, G, 0.0, cfg.params, cfg.quad);
        c.row({G, cp.sigma_minus, cp.sigma_plus, cp.residual_minus, cp.residual_plus, cp.d2_minus.value(),
               cp.d2_plus.value()});
    }
}

void cmd_scattering(const RunConfig& cfg, Outputs& out, const std::vector<double>& Gs, const std::string& branch) {
    Branch b = named(branch_from_name, branch);
    ScatteringModel m(b, cfg.params, cfg.quad);
    auto f = out.open("scattering.csv");
    CsvWriter w(f, {"G", "f_numeric", "f_asymptotic", "ratio", "loglog_slope"});
    for (double G : sweep(Gs, "G")) {
        double fn = m.f(G), fa = ScatteringModel::f_asymptotic(G, cfg.params.mu);
        w.row({G, fn, fa, fn / fa, G * m.df(G) / fn});
    }
}

void cmd_manifold(const RunConfig& cfg, Outputs& out, double theta, double G, int order, const std::string& branch) {
    ChartConfig cc = cfg.chart;
    if (order > 0) cc.k = order;
    ManifoldBranch b = named(manifold_branch_from_name, branch);
    auto ch = compute_chart(b, cfg.params, theta, G, 0.0, cc);
    {
        auto f = out.open("chart.txt");
        write_chart(f, ch);
    }
    auto f = out.open("defect.csv");
    CsvWriter w(f, {"t", "defect"});
    for (const auto& s : ch.defect_profile) w.row({s.t, s.defect});
}

bool cmd_shadow(const RunConfig& cfg, Outputs& out, double G0, int links) {
    auto rep = oscillation_demo(cfg.params, G0, links, cfg.oscillation_config());
    {
        auto f = out.open("report.json");
        f << to_json(rep).dump(2) << '\n';
    }
    auto f = out.open("excursions.csv");
    if (rep.run) {
        write_excursions_csv(f, *rep.run);
        auto v = out.open("visits.csv");
        write_visits_csv(v, *rep.run);
    } else {
        ShadowRun empty;
        write_excursions_csv(f, empty);
    }
    std::cout << rep.verdict << ": " << rep.reason << '\n';
    return rep.pass;
}

bool cmd_verify(const RunConfig& cfg, Outputs& out, bool slow, const std::vector<int>& only) {
    auto f = out.open("acceptance.csv");
    CsvWriter w(f, {"criterion", "title", "status", "seconds", "detail"});
    bool ok = true;
    run_acceptance(cfg, only, slow, [&](const CriterionResult& r) {
        std::cout << format_result(r) << std::endl;
        ok = ok && (r.pass || r.skipped);
        w.row({(long long)r.id, r.title, std::string(r.skipped ? "SKIP" : r.pass ? "PASS" : "FAIL"), r.seconds,
               r.detail});
    });
    return ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Restricted three-body oscillatory-motion toolkit"};
    app.require_subcommand(1);
    std::string config_path;
    std::string out_dir = ".";
    app.add_option("-c,--config", config_path, "INI configuration file")->check(CLI::ExistingFile);
    app.add_option("-o,--out", out_dir, "output directory");

    auto* integ = app.add_subcommand("integrate", "integrate one orbit; trajectory.csv");
    std::vector<double> state;
    double t0 = 0, t1 = 2 * std::numbers::pi;
    int isamples = 201;
    integ->add_option("--state", state, "initial polar state r,alpha,y,G")->delimiter(',')->required();
    integ->add_option("--t0", t0);
    integ->add_option("--t1", t1);
    integ->add_option("--samples", isamples);

    auto* mel = app.add_subcommand("melnikov", "Poincare function samples and critical points");
    std::vector<double> mGs{5, 8, 12};
    int msamples = 64;
    mel->add_option("--G", mGs, "G0 values")->delimiter(',');
    mel->add_option("--samples", msamples, "sigma samples per G0");

    auto* sc = app.add_subcommand("scattering", "numerical vs asymptotic twist");
    std::vector<double> sGs{8, 16, 32};
    std::string sbranch = "minus";
    sc->add_option("--G", sGs)->delimiter(',');
    sc->add_option("--branch", sbranch);

    auto* man = app.add_subcommand("manifold", "parameterized manifold chart and defect profile");
    double mtheta = 0, mG = 10;
    int morder = 0;
    std::string mbranch = "unstable";
    man->add_option("--theta", mtheta);
    man->add_option("--G", mG);
    man->add_option("--order", morder, "polynomial order (0: from the configuration)");
    man->add_option("--branch", mbranch);

    auto* sh = app.add_subcommand("shadow", "transition chain, shadowing and excursion report");
    double shG = 5;
    int links = 2;
    sh->add_option("--G0", shG);
    sh->add_option("--links", links);

    auto* ver = app.add_subcommand("verify", "acceptance criteria");
    bool slow = false;
    std::vector<int> only;
    ver->add_flag("--slow", slow, "include the slow criteria");
    ver->add_option("--only", only, "criterion numbers")->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : kConfigExit;
    }

    RunConfig cfg;
    try {
        if (!config_path.empty()) cfg = load_config(config_path);
        thread_count();
    } catch (const Error& e) {
        std::cerr << e.what() << '\n';
        return kConfigExit;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) {
        std::cerr << "cannot create output directory '" << out_dir << "': " << ec.message() << '\n';
        return kConfigExit;
    }
    Outputs out{out_dir, RunManifest(command, cfg, out_dir)};
    int rc = 0;
    try {
        if (command == "integrate") cmd_integrate(cfg, out, state, t0, t1, isamples);
        else if (command == "melnikov") cmd_melnikov(cfg, out, mGs, msamples);
        else if (command == "scattering") cmd_scattering(cfg, out, sGs, sbranch);
        else if (command == "manifold") cmd_manifold(cfg, out, mtheta, mG, morder, mbranch);
        else if (command == "shadow") rc = cmd_shadow(cfg, out, shG, links) ? 0 : kAcceptanceExit;
        else if (command == "verify") rc = cmd_verify(cfg, out, slow, only) ? 0 : kAcceptanceExit;
        if (rc) out.manifest.set_status("acceptance failure");
    } catch (const ConfigError& e) {
        // bad arguments leave nothing behind
        std::cerr << e.what() << '\n';
        for (const auto& name : out.manifest.outputs()) fs::remove(out.dir / name, ec);
        return kConfigExit;
    } catch (const std::exception& e) {
        std::cerr << e.what() << '\n';
        out.manifest.set_status(std::string("numerical failure: ") + e.what());
        rc = kNumericExit;
    }
    try {
        out.manifest.finish();
    } catch (const std::exception& e) {
        std::cerr << e.what() << '\n';
        return kNumericExit;
    }
    return rc;
}
