// Command-line front end: sequence generation, decoherence reports, sequence
// optimization, figure-ready CSV sweeps, scaling fits, and Monte-Carlo
// cross-validation.  Thin stateless delegation to the dd library; identical
// inputs produce byte-identical outputs.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dd/decoherence.hpp"
#include "dd/errors.hpp"
#include "dd/noise.hpp"
#include "dd/optimize.hpp"
#include "dd/sequences.hpp"
#include "dd/verify.hpp"

namespace {

std::string fmt16(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.16e", v);
    return buf;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw dd::validation_error("cannot read file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_output(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text << "\n";
        return;
    }
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw dd::validation_error("cannot open output path: " + out_path);
    out << text;
    if (!out) throw dd::validation_error("failed writing output path: " + out_path);
}

dd::PulseSequence sequence_from_family(const std::string& family, int n) {
    if (family == "udd") return dd::make_udd(n);
    if (family == "cpmg") return dd::make_cpmg(n);
    if (family == "pdd") return dd::make_pdd(n);
    throw dd::validation_error("unknown sequence family: " + family);
}

dd::PulseSequence load_sequence(const std::string& seq_path, const std::string& family, int n) {
    if (!seq_path.empty()) return dd::parse_sequence(read_file(seq_path));
    if (family.empty())
        throw dd::validation_error("provide either --seq FILE or --family NAME with --n");
    return sequence_from_family(family, n);
}

// ODD sequence used by the figure sweeps: minimize the leading odd
// decoherence function of order 3 under the two lowest order conditions.
// With fewer pulses than constraints the column falls back to UDD(N), which
// is the constrained-family limit.
dd::PulseSequence fig_odd_sequence(int n) {
    if (n < 2) return dd::make_udd(n);
    dd::OddProblem p;
    p.n = n;
    p.m = 2;
    dd::OddResult r = dd::solve_odd(p);
    if (!r.converged)
        throw dd::numerical_error("figure sweep: optimizer did not converge at n = " +
                                  std::to_string(n));
    return r.sequence;
}

int cmd_seq(const std::string& family, int n, const std::string& out) {
    dd::PulseSequence seq = sequence_from_family(family, n);
    write_output(dd::serialize(seq), out);
    return 0;
}

int cmd_report(const std::string& seq_path, const std::string& family, int n,
               const std::string& noise_path, double T, int m_max, int k_max,
               const std::string& method, const std::string& out) {
    dd::PulseSequence seq = load_sequence(seq_path, family, n);
    dd::NoiseModel noise = dd::parse_noise(read_file(noise_path));
    dd::DecoherenceReport rep = dd::make_report(seq, noise, T, m_max, k_max, method);
    write_output(dd::serialize(rep), out);
    return 0;
}

int cmd_optimize(const dd::OddProblem& problem, const std::string& out) {
    dd::OddResult r = dd::solve_odd(problem);
    write_output(dd::serialize(r), out);
    return 0;
}

int cmd_fig2(const std::vector<int>& n_list, const std::string& out) {
    std::string csv = "N,j,udd,cpmg,odd\n";
    for (int n : n_list) {
        if (n < 1) throw dd::validation_error("fig2: N values must be >= 1");
        const auto udd = dd::make_udd(n).times();
        const auto cpmg = dd::make_cpmg(n).times();
        const auto odd = fig_odd_sequence(n).times();
        for (int j = 1; j <= n; ++j) {
            csv += std::to_string(n) + "," + std::to_string(j) + "," +
                   fmt16(udd[static_cast<std::size_t>(j - 1)]) + "," +
                   fmt16(cpmg[static_cast<std::size_t>(j - 1)]) + "," +
                   fmt16(odd[static_cast<std::size_t>(j - 1)]) + "\n";
        }
    }
    write_output(csv, out);
    return 0;
}

int cmd_fig3(const std::string& out) {
    // S(w) = 1e5/(1 + w^4), T = 0.5; panel a without cutoff, panel b with a
    // hard cutoff at 40.  The optimized column reuses one solve per N.
    const dd::NoiseModel soft = dd::make_soft_power_law(1e5, 2, 1.0);
    const dd::NoiseModel cut = dd::with_hard_cutoff(soft, 40.0);
    const double T = 0.5;
    std::string csv = "panel,N,chi_udd,chi_cpmg,chi_odd\n";
    std::vector<dd::PulseSequence> odd_seqs;
    for (int n = 1; n <= 28; ++n) odd_seqs.push_back(fig_odd_sequence(n));
    for (const char* panel : {"a", "b"}) {
        const dd::NoiseModel& noise = (panel[0] == 'a') ? soft : cut;
        for (int n = 1; n <= 28; ++n) {
            double cu = dd::chi_spectral(dd::modulation_of(dd::make_udd(n)), noise, T).value;
            double cc = dd::chi_spectral(dd::modulation_of(dd::make_cpmg(n)), noise, T).value;
            double co =
                dd::chi_spectral(dd::modulation_of(odd_seqs[static_cast<std::size_t>(n - 1)]),
                                 noise, T)
                    .value;
            csv += std::string(panel) + "," + std::to_string(n) + "," + fmt16(cu) + "," +
                   fmt16(cc) + "," + fmt16(co) + "\n";
        }
    }
    write_output(csv, out);
    return 0;
}

int cmd_scaling(const std::string& noise_path, const std::string& family, int n, double t_min,
                double t_max, int points, const std::string& out) {
    if (!(t_min > 0) || !(t_max > t_min))
        throw dd::validation_error("scaling: need 0 < t-min < t-max");
    if (points < 3) throw dd::validation_error("scaling: need at least 3 points");
    dd::NoiseModel noise = dd::parse_noise(read_file(noise_path));
    std::vector<double> grid;
    for (int i = 0; i < points; ++i)
        grid.push_back(t_min * std::pow(t_max / t_min, static_cast<double>(i) / (points - 1)));
    auto fam = [&](int nn) { return sequence_from_family(family, nn); };
    dd::SlopeFit fit = dd::decoupling_order(noise, fam, n, grid);
    nlohmann::json j;
    j["slope"] = fit.slope;
    j["stderr"] = fit.std_error;
    j["points"] = fit.points;
    write_output(j.dump(), out);
    return 0;
}

int cmd_mc(const std::string& noise_path, const std::string& seq_path, const std::string& family,
           int n, double T, const dd::McConfig& cfg, const std::string& out) {
    dd::NoiseModel noise = dd::parse_noise(read_file(noise_path));
    dd::PulseSequence seq = load_sequence(seq_path, family, n);
    dd::McReport rep = dd::run_mc(noise, seq, T, cfg);
    write_output(dd::serialize(rep), out);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pulse-sequence decoherence toolkit"};
    app.require_subcommand(1);

    // seq
    std::string seq_family;
    int seq_n = 1;
    std::string seq_out;
    auto* seq = app.add_subcommand("seq", "emit a named sequence as JSON");
    seq->add_option("--family", seq_family, "udd | cpmg | pdd")->required();
    seq->add_option("--n", seq_n, "pulse count")->required();
    seq->add_option("--out", seq_out, "output file (default stdout)");

    // report
    std::string rep_seq, rep_family, rep_noise, rep_method = "spectral", rep_out;
    int rep_n = 1, rep_mmax = 5, rep_kmax = 7;
    double rep_T = 1.0;
    auto* rep = app.add_subcommand("report", "decoherence report for a sequence and noise model");
    rep->add_option("--seq", rep_seq, "sequence JSON file");
    rep->add_option("--family", rep_family, "udd | cpmg | pdd (alternative to --seq)");
    rep->add_option("--n", rep_n, "pulse count for --family");
    rep->add_option("--noise", rep_noise, "noise JSON file")->required();
    rep->add_option("--T", rep_T, "total duration")->required();
    rep->add_option("--m-max", rep_mmax, "highest moment reported");
    rep->add_option("--k-max", rep_kmax, "highest decoherence-function order reported");
    rep->add_option("--method", rep_method, "spectral | series");
    rep->add_option("--out", rep_out, "output file (default stdout)");

    // optimize
    dd::OddProblem prob;
    std::string opt_out;
    auto* opt = app.add_subcommand("optimize", "optimized sequence for the leading odd order");
    opt->add_option("--n", prob.n, "pulse count")->required();
    opt->add_option("--m", prob.m, "number of order conditions")->required();
    opt->add_option("--eps-c", prob.eps_c, "constraint tolerance");
    opt->add_option("--eps-g", prob.eps_g, "stationarity tolerance");
    opt->add_option("--multistarts", prob.multistarts, "number of starts");
    opt->add_option("--seed", prob.seed, "jitter seed");
    opt->add_option("--out", opt_out, "output file (default stdout)");

    // fig2
    std::vector<int> fig2_n;
    std::string fig2_out;
    auto* f2 = app.add_subcommand("fig2", "sequence-comparison sweep CSV");
    f2->add_option("--n-list", fig2_n, "N values (default 1..20)")->delimiter(',');
    f2->add_option("--out", fig2_out, "output file (default stdout)");

    // fig3
    std::string fig3_out;
    auto* f3 = app.add_subcommand("fig3", "decoherence-vs-N sweep CSV, both panels");
    f3->add_option("--out", fig3_out, "output file (default stdout)");

    // scaling
    std::string sc_noise, sc_family = "udd", sc_out;
    int sc_n = 4, sc_points = 9;
    double sc_tmin = 0, sc_tmax = 0;
    auto* sc = app.add_subcommand("scaling", "log-log slope of chi vs T");
    sc->add_option("--noise", sc_noise, "noise JSON file")->required();
    sc->add_option("--family", sc_family, "udd | cpmg | pdd");
    sc->add_option("--n", sc_n, "pulse count");
    sc->add_option("--t-min", sc_tmin, "smallest T")->required();
    sc->add_option("--t-max", sc_tmax, "largest T")->required();
    sc->add_option("--points", sc_points, "grid points (geometric)");
    sc->add_option("--out", sc_out, "output file (default stdout)");

    // mc
    std::string mc_noise, mc_seq, mc_family, mc_out;
    int mc_n = 1;
    double mc_T = 1.0;
    dd::McConfig mc_cfg;
    auto* mc = app.add_subcommand("mc", "Monte-Carlo cross-validation report");
    mc->add_option("--noise", mc_noise, "noise JSON file")->required();
    mc->add_option("--seq", mc_seq, "sequence JSON file");
    mc->add_option("--family", mc_family, "udd | cpmg | pdd (alternative to --seq)");
    mc->add_option("--n", mc_n, "pulse count for --family");
    mc->add_option("--T", mc_T, "total duration")->required();
    mc->add_option("--realizations", mc_cfg.n_realizations, "number of noise realizations");
    mc->add_option("--modes", mc_cfg.n_spectral_modes, "spectral synthesis modes");
    mc->add_option("--omega-max", mc_cfg.omega_max, "frequency window (0 = auto)");
    mc->add_option("--dt", mc_cfg.dt, "time step in units of T (0 = auto)");
    mc->add_option("--seed", mc_cfg.seed, "RNG seed");
    mc->add_option("--out", mc_out, "output file (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 2;
    }

    try {
        if (seq->parsed()) return cmd_seq(seq_family, seq_n, seq_out);
        if (rep->parsed())
            return cmd_report(rep_seq, rep_family, rep_n, rep_noise, rep_T, rep_mmax, rep_kmax,
                              rep_method, rep_out);
        if (opt->parsed()) return cmd_optimize(prob, opt_out);
        if (f2->parsed()) {
            if (fig2_n.empty())
                for (int n = 1; n <= 20; ++n) fig2_n.push_back(n);
            return cmd_fig2(fig2_n, fig2_out);
        }
        if (f3->parsed()) return cmd_fig3(fig3_out);
        if (sc->parsed())
            return cmd_scaling(sc_noise, sc_family, sc_n, sc_tmin, sc_tmax, sc_points, sc_out);
        if (mc->parsed()) return cmd_mc(mc_noise, mc_seq, mc_family, mc_n, mc_T, mc_cfg, mc_out);
    } catch (const dd::validation_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const dd::infeasible_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const dd::numerical_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
