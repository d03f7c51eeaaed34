// lhskit command line: load a JSON structure config, run the verification
// pipelines, and emit JSON reports / CSV tables.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "lhskit/pipeline.hpp"

namespace {

int write_artifact(const std::string& data, const std::string& out_path) {
    if (out_path.empty()) {
        std::fputs(data.c_str(), stdout);
        return 0;
    }
    std::ofstream out(out_path, std::ios::binary);
    if (!out) {
        std::fprintf(stderr, "error: cannot write '%s'\n", out_path.c_str());
        return 2;
    }
    out << data;
    return 0;
}

void print_summary(const lhskit::VerificationReport& rep) {
    for (const auto& c : rep.checks)
        std::fprintf(stderr, "  [%s] %-34s residual=%.3e  (%.1f ms)\n",
                     c.pass ? "PASS" : "FAIL", c.id.c_str(), c.worst_residual, c.wall_ms);
}

int finish(const lhskit::VerificationReport& rep, const std::string& out_path,
           bool timings) {
    print_summary(rep);
    int rc = write_artifact(rep.to_json(timings).dump(), out_path);
    if (rc != 0) return rc;
    return rep.overall_pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"lhskit: verification toolkit for Liouville-Hamiltonian structures"};
    app.require_subcommand(1);

    std::string config_path, out_path, format = "json", surface;
    bool timings = false, table = false, mod4 = false;
    int kmax_override = -1;

    app.add_option("--config", config_path, "JSON structure config")->configurable(false);
    app.add_option("--out", out_path, "output path (default: stdout)");
    app.add_option("--format", format, "json|csv")->check(CLI::IsMember({"json", "csv"}));
    app.add_flag("--timings", timings, "include wall times in the report (non-reproducible)");

    auto* sub_verify = app.add_subcommand("verify", "axioms, canonical fields, deformation type");
    auto* sub_suspend = app.add_subcommand("suspend", "suspension domain and normal form");
    auto* sub_flow = app.add_subcommand("flow", "Liouville flow expansion law");
    auto* sub_orbits = app.add_subcommand("orbits", "periodic orbit census");
    sub_orbits->add_option("--kmax", kmax_override, "maximum deck traversal count");
    auto* sub_lagrangian = app.add_subcommand("lagrangian", "exact Lagrangian cylinder");
    auto* sub_integral = app.add_subcommand("integral", "closed-manifold obstruction scan");
    auto* sub_obstruct = app.add_subcommand("obstruct", "Lagrangian surface admissibility");
    sub_obstruct->add_option("--surface", surface,
                             "sphere|torus|genus-N|klein|rp2|crosscaps-N");
    sub_obstruct->add_flag("--table", table, "print the standard seven-surface table");
    sub_obstruct->add_flag("--mod4", mod4, "apply the mod-4 Euler characteristic filter");
    auto* sub_all = app.add_subcommand("all", "every applicable pipeline");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sub_obstruct->parsed()) {
            if (table || surface.empty()) return write_artifact(lhskit::obstruct_table_csv(mod4), out_path);
            lhskit::SurfaceDescriptor d = lhskit::surface_by_name(surface);
            lhskit::AdmissibilityVerdict v = lhskit::admissible_surface(d, mod4);
            int rc = write_artifact(lhskit::obstruct_json(surface, d, mod4).dump(), out_path);
            if (rc != 0) return rc;
            return v.admissible ? 0 : 1;
        }

        if (config_path.empty()) {
            std::fprintf(stderr, "error: --config is required for this subcommand\n");
            return 2;
        }
        lhskit::RunConfig cfg = lhskit::load_config(config_path);
        if (kmax_override > 0) cfg.kmax = kmax_override;

        if (sub_verify->parsed()) return finish(lhskit::run_verify(cfg), out_path, timings);
        if (sub_flow->parsed()) return finish(lhskit::run_flow(cfg), out_path, timings);
        if (sub_lagrangian->parsed()) return finish(lhskit::run_lagrangian(cfg), out_path, timings);
        if (sub_integral->parsed()) return finish(lhskit::run_integral(cfg), out_path, timings);
        if (sub_suspend->parsed()) {
            lhskit::SuspendArtifacts art = lhskit::run_suspend(cfg);
            if (format == "csv") {
                print_summary(art.report);
                int rc = write_artifact(art.csv, out_path);
                if (rc != 0) return rc;
                return art.report.overall_pass() ? 0 : 1;
            }
            return finish(art.report, out_path, timings);
        }
        if (sub_orbits->parsed()) {
            lhskit::OrbitArtifacts art = lhskit::run_orbits(cfg);
            if (format == "csv") {
                print_summary(art.report);
                int rc = write_artifact(art.csv, out_path);
                if (rc != 0) return rc;
                return art.report.overall_pass() ? 0 : 1;
            }
            return finish(art.report, out_path, timings);
        }
        if (sub_all->parsed()) return finish(lhskit::run_all(cfg), out_path, timings);
    } catch (const lhskit::ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const lhskit::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
