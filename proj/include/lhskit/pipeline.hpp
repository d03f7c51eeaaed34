#pragma once

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "lhskit/config.hpp"
#include "lhskit/obstructions.hpp"

namespace lhskit {

// ---------------------------------------------------------------------------
// Check runner: times each check and folds thrown module errors into a
// failing record instead of aborting the whole report.
// ---------------------------------------------------------------------------

namespace pipedetail {

inline void run_check(VerificationReport& rep, const std::string& id,
                      const std::function<void(CheckRecord&)>& body) {
    CheckRecord rec;
    rec.id = id;
    auto start = std::chrono::steady_clock::now();
    try {
        body(rec);
    } catch (const Error& e) {
        rec.pass = false;
        rec.detail = e.what();
    }
    rec.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
            .count();
    rep.checks.push_back(std::move(rec));
}

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

}  // namespace pipedetail

// Canonical probe point for flow checks, inside every built-in's domain.
inline Point flow_start_point(const BuiltStructure& built) {
    if (built.name == "mcduff") return {0.0, 1.0, 0.0};
    if (built.name == "contactisation") return {0.0, 0.5, 0.0};
    Point p(static_cast<std::size_t>(built.structure.chart.dim()), 0.0);
    for (int i = 0; i < built.structure.chart.dim(); ++i)
        if (!built.structure.chart.periodic(i)) p[static_cast<std::size_t>(i)] =
            built.structure.chart.bounds(i)[0];
    return p;
}

// ---------------------------------------------------------------------------
// verify: axioms, canonical-field residuals, deformation type through both
// criteria, built-in expected values, bi-contact signs, and (for the McDuff
// model) the structure-relation audit.
// ---------------------------------------------------------------------------

inline VerificationReport run_verify(const RunConfig& cfg) {
    using pipedetail::fmt;
    using pipedetail::run_check;
    VerificationReport rep;
    rep.config_echo = config_echo(cfg);
    BuiltStructure built = build_structure(cfg.structure);
    const LHStructure& S = built.structure;

    run_check(rep, "axioms", [&](CheckRecord& rec) {
        AxiomsResult ax = check_axioms(S, cfg.grid, cfg.tol("axioms", 1e-9));
        rec.pass = ax.pass;
        rec.worst_residual = std::max({ax.eta_kernel.value, ax.deck_eta.value, ax.deck_beta.value});
        rec.worst_point = ax.eta_kernel.point;
        rec.detail = "rank_gap=" + fmt(ax.rank_gap.value) +
                     " beta_margin=" + fmt(ax.beta_margin.value) +
                     " deck=" + fmt(std::max(ax.deck_eta.value, ax.deck_beta.value));
    });

    run_check(rep, "canonical_fields", [&](CheckRecord& rec) {
        auto pts = S.grid_points(cfg.grid);
        std::vector<double> worst(pts.size());
        parallel_for(pts.size(), [&](std::size_t i) {
            PointSample s = sample_structure(S, pts[i]);
            VectorXd zeta = liouville_at(S, s);
            VectorXd C = characteristic_at(S, s);
            double r1 = (s.deta_m.transpose() * zeta - s.eta_v).norm();
            double r2 = std::abs(s.beta_v.dot(zeta));
            double r3 = (s.deta_m.transpose() * C).norm();
            double r4 = std::abs(s.beta_v.dot(C) - 1.0);
            double r5 = std::abs(s.eta_v.dot(C));
            worst[i] = std::max({r1, r2, r3, r4, r5});
        });
        WorstCase wc;
        for (std::size_t i = 0; i < pts.size(); ++i) wc.take_max(worst[i], pts[i]);
        rec.worst_residual = wc.value;
        rec.worst_point = wc.point;
        rec.pass = wc.value <= cfg.tol("canonical_fields", 1e-10);
    });

    run_check(rep, "deformation_type", [&](CheckRecord& rec) {
        DeformationVerdict v = deformation_type(S, cfg.grid);
        rec.pass = v.agreement;
        rec.worst_residual = static_cast<double>(v.disagreements);
        rec.worst_point = v.worst_point_cond3;
        rec.detail = std::string("linear=") + (v.is_linear_type ? "yes" : "no") +
                     " strong=" + (v.is_strong_type ? "yes" : "no") +
                     " value=[" + fmt(v.value_min) + "," + fmt(v.value_max) + "]" +
                     " margins=(" + fmt(v.margin_cond2) + "," + fmt(v.margin_cond3) + ")";
    });

    // the built-in structures have pinned deformation values
    double expected = built.name == "contactisation" ? 0.0 : 1.0;
    if (built.name == "torus_bundle" || built.name == "mcduff" ||
        built.name == "contactisation") {
        run_check(rep, "deformation_value", [&](CheckRecord& rec) {
            DeformationVerdict v = deformation_type(S, cfg.grid);
            double err = std::max(std::abs(v.value_min - expected),
                                  std::abs(v.value_max - expected));
            rec.worst_residual = err;
            rec.worst_point = v.worst_point_cond3;
            rec.pass = err <= cfg.tol("deformation_value", 1e-9);
            rec.detail = "expected " + fmt(expected);
        });
    }

    run_check(rep, "contact_signs", [&](CheckRecord& rec) {
        double t = cfg.tol("contact_sign_t", 0.01);
        ContactSignReport plus = contact_sign(S, t, cfg.grid);
        ContactSignReport minus = contact_sign(S, -t, cfg.grid);
        ContactSignReport zero = contact_sign(S, 0.0, cfg.grid);
        rec.pass = plus.uniform_sign == 1 && minus.uniform_sign == -1 &&
                   zero.max_abs_ratio <= cfg.tol("contact_zero", 1e-12);
        rec.worst_residual = zero.max_abs_ratio;
        rec.detail = "sign(+t)=" + std::to_string(plus.uniform_sign) +
                     " sign(-t)=" + std::to_string(minus.uniform_sign) +
                     " zero_max=" + fmt(zero.max_abs_ratio);
    });

    if (built.mcduff) {
        run_check(rep, "mcduff_relations", [&](CheckRecord& rec) {
            McDuffRelationReport r = mcduff_relations(*built.mcduff, cfg.grid);
            rec.worst_residual = r.worst;
            rec.pass = r.pass(cfg.tol("mcduff_relations", 1e-9));
            for (const auto& e : r.entries)
                if (e.worst == r.worst) rec.worst_point = e.worst_point;
        });
        run_check(rep, "mcduff_liouville_is_h", [&](CheckRecord& rec) {
            auto pts = make_grid(built.mcduff->chart, cfg.grid);
            std::vector<double> worst(pts.size());
            parallel_for(pts.size(), [&](std::size_t i) {
                VectorXd zeta = liouville_at(S, pts[i]);
                VectorXd hv = built.mcduff->h.eval(built.mcduff->chart, pts[i]);
                worst[i] = (zeta - hv).norm();
            });
            WorstCase wc;
            for (std::size_t i = 0; i < pts.size(); ++i) wc.take_max(worst[i], pts[i]);
            rec.worst_residual = wc.value;
            rec.worst_point = wc.point;
            rec.pass = wc.value <= cfg.tol("mcduff_liouville", 1e-9);
        });
    }
    return rep;
}

// ---------------------------------------------------------------------------
// suspend: build the Liouville domain, run the normal-form cross-check, and
// audit the boundary contact forms.
// ---------------------------------------------------------------------------

struct SuspendArtifacts {
    VerificationReport report;
    std::string csv;  // (point, F, det dlambda) rows
};

inline SuspendArtifacts run_suspend(const RunConfig& cfg) {
    using pipedetail::fmt;
    using pipedetail::run_check;
    SuspendArtifacts art;
    VerificationReport& rep = art.report;
    rep.config_echo = config_echo(cfg);
    BuiltStructure built = build_structure(cfg.structure);
    const LHStructure& S = built.structure;

    // smaller lattice in 4d, same random budget
    GridSpec grid4 = cfg.grid;
    if (grid4.samples.size() == 1)
        grid4.samples = {std::max(2, cfg.grid.samples[0] / 2)};

    std::optional<SuspensionDomain> D;
    run_check(rep, "suspension_symplectic", [&](CheckRecord& rec) {
        if (cfg.epsilon_auto)
            D = build_suspension_auto(S, grid4);
        else
            D = build_suspension(S, cfg.epsilon, grid4);
        rec.pass = true;
        rec.detail = "epsilon=" + fmt(D->epsilon);
    });
    if (!D) return art;

    std::optional<ClassificationResult> cls;
    run_check(rep, "classification_F_slope", [&](CheckRecord& rec) {
        cls = classification_check(*D, cfg.grid);
        rec.worst_residual = cls->worst_rel_error;
        rec.pass = cls->worst_rel_error <= cfg.tol("classification", 1e-4);
        rec.detail = "F=[" + fmt(cls->F_min) + "," + fmt(cls->F_max) + "]";
    });
    run_check(rep, "classification_restriction", [&](CheckRecord& rec) {
        if (!cls) throw Error("classification did not run");
        rec.worst_residual = cls->worst_restriction;
        rec.pass = cls->worst_restriction <= cfg.tol("restriction", 1e-10);
    });
    run_check(rep, "repelling_matches_deformation", [&](CheckRecord& rec) {
        if (!cls) throw Error("classification did not run");
        DeformationVerdict v = deformation_type(S, cfg.grid);
        rec.pass = cls->repelling_formula == v.is_linear_type &&
                   cls->repelling_measured == v.is_linear_type;
        rec.detail = std::string("repelling=") + (cls->repelling_formula ? "yes" : "no") +
                     " linear=" + (v.is_linear_type ? "yes" : "no");
    });
    run_check(rep, "boundary_contact_signs", [&](CheckRecord& rec) {
        ContactSignReport plus = contact_sign(S, D->epsilon, cfg.grid);
        ContactSignReport minus = contact_sign(S, -D->epsilon, cfg.grid);
        rec.pass = plus.uniform_sign == 1 && minus.uniform_sign == -1;
        rec.detail = "signs=(" + std::to_string(plus.uniform_sign) + "," +
                     std::to_string(minus.uniform_sign) + ")";
    });

    if (cls) {
        std::string& csv = art.csv;
        for (int i = 0; i < S.chart.dim(); ++i)
            csv += S.chart.coord_names()[static_cast<std::size_t>(i)] + ",";
        csv += "F_formula,F_measured,det_dlambda\n";
        for (const auto& chk : cls->checks) {
            char buf[64];
            for (double c : chk.base_point) {
                std::snprintf(buf, sizeof buf, "%.17g,", c);
                csv += buf;
            }
            Point p4 = chk.base_point;
            p4.push_back(0.0);
            double pf = pfaffian4(D->dlambda_at(p4));
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", chk.F_formula,
                          chk.F_measured, pf * pf);
            csv += buf;
        }
    }
    return art;
}

// ---------------------------------------------------------------------------
// flow: exact expansion law plus the integrator-order ratio.
// ---------------------------------------------------------------------------

inline VerificationReport run_flow(const RunConfig& cfg) {
    using pipedetail::fmt;
    using pipedetail::run_check;
    VerificationReport rep;
    rep.config_echo = config_echo(cfg);
    BuiltStructure built = build_structure(cfg.structure);
    const LHStructure& S = built.structure;
    Point x0 = flow_start_point(built);

    run_check(rep, "expansion_eta", [&](CheckRecord& rec) {
        ExpansionReport e = expansion_check(S, x0, cfg.flow.tau, cfg.flow.step);
        rec.worst_residual = e.residual_eta;
        rec.worst_point = x0;
        rec.pass = e.residual_eta <= cfg.tol("expansion", 1e-6);
        rec.detail = "wraps=" + std::to_string(e.wraps);
    });
    run_check(rep, "expansion_deta", [&](CheckRecord& rec) {
        ExpansionReport e = expansion_check(S, x0, cfg.flow.tau, cfg.flow.step);
        rec.worst_residual = e.residual_deta;
        rec.worst_point = x0;
        rec.pass = e.residual_deta <= cfg.tol("expansion", 1e-6);
    });
    run_check(rep, "integrator_order", [&](CheckRecord& rec) {
        // classical 4th order: residual drops ~16x per step halving at steps
        // where truncation still dominates rounding
        double h = 0.2;
        double r1 = expansion_check(S, x0, cfg.flow.tau, h).residual_eta;
        double r2 = expansion_check(S, x0, cfg.flow.tau, h / 2).residual_eta;
        double ratio = r1 / std::max(r2, 1e-300);
        rec.worst_residual = ratio;
        rec.pass = ratio >= 12.0 && ratio <= 20.0;
        rec.detail = "ratio=" + fmt(ratio);
    });
    return rep;
}

// ---------------------------------------------------------------------------
// orbits: exact census vs Newton-refined return-map fixed points.
// ---------------------------------------------------------------------------

struct OrbitArtifacts {
    VerificationReport report;
    std::string csv;
};

inline OrbitArtifacts run_orbits(const RunConfig& cfg) {
    using pipedetail::run_check;
    OrbitArtifacts art;
    VerificationReport& rep = art.report;
    rep.config_echo = config_echo(cfg);
    if (cfg.structure.kind != StructureSpec::Kind::TorusBundle)
        throw ConfigError("$.structure", "orbit census needs a torus_bundle structure");

    run_check(rep, "orbit_census", [&](CheckRecord& rec) {
        CensusResult census = orbit_census(cfg.structure.matrix, cfg.kmax);
        bool ok = true;
        double worst = 0.0;
        std::string counts;
        std::string& csv = art.csv;
        csv = "k,th1,th2,period,residual,p1,q1,p2,q2\n";
        for (const auto& entry : census.entries) {
            ok = ok && entry.counts_match;
            counts += (counts.empty() ? "" : ",") + std::to_string(entry.algebraic_count);
            for (const auto& orb : entry.orbits) {
                ok = ok && orb.residual <= cfg.tol("newton", 1e-10);
                worst = std::max(worst, orb.residual);
                char buf[256];
                std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%lld,%lld,%lld,%lld\n",
                              entry.k, orb.section_point[0], orb.section_point[1], orb.period,
                              orb.residual, orb.rational[0], orb.rational[1], orb.rational[2],
                              orb.rational[3]);
                csv += buf;
            }
        }
        rec.pass = ok;
        rec.worst_residual = worst;
        rec.detail = "counts=" + counts;
    });
    return art;
}

// ---------------------------------------------------------------------------
// lagrangian: exact cylinder over the k = 1 orbit.
// ---------------------------------------------------------------------------

inline VerificationReport run_lagrangian(const RunConfig& cfg) {
    using pipedetail::fmt;
    using pipedetail::run_check;
    VerificationReport rep;
    rep.config_echo = config_echo(cfg);
    if (cfg.structure.kind != StructureSpec::Kind::TorusBundle)
        throw ConfigError("$.structure", "cylinder construction needs a torus_bundle structure");
    BuiltStructure built = build_structure(cfg.structure);
    const LHStructure& S = built.structure;

    run_check(rep, "lagrangian_cylinder", [&](CheckRecord& rec) {
        GridSpec grid4 = cfg.grid;
        if (grid4.samples.size() == 1)
            grid4.samples = {std::max(2, cfg.grid.samples[0] / 2)};
        SuspensionDomain D = cfg.epsilon_auto ? build_suspension_auto(S, grid4)
                                              : build_suspension(S, cfg.epsilon, grid4);
        CensusResult census = orbit_census(cfg.structure.matrix, 1);
        if (census.entries.empty() || census.entries[0].orbits.empty())
            throw Error("no k=1 orbit found");
        double eps_cyl = D.epsilon / 2.0;
        LagrangianCylinder cyl = build_cylinder(D, census.entries[0].orbits[0], eps_cyl);
        rec.worst_residual = std::max(cyl.max_lambda_tangent, cyl.max_lambda_normal);
        rec.worst_point = cyl.worst_point;
        bool exact = rec.worst_residual <= cfg.tol("cylinder", 1e-8);
        bool legendrian = cyl.max_boundary_residual <= cfg.tol("cylinder", 1e-8);
        rec.pass = exact && legendrian;
        rec.detail = "boundary=" + fmt(cyl.max_boundary_residual) +
                     " eps=" + fmt(eps_cyl);
    });
    return rep;
}

// ---------------------------------------------------------------------------
// integral: closed-manifold obstruction scan.
// ---------------------------------------------------------------------------

inline VerificationReport run_integral(const RunConfig& cfg) {
    using pipedetail::fmt;
    using pipedetail::run_check;
    VerificationReport rep;
    rep.config_echo = config_echo(cfg);
    BuiltStructure built = build_structure(cfg.structure);
    const LHStructure& S = built.structure;

    run_check(rep, "stabham_integral", [&](CheckRecord& rec) {
        StabHamReport r = stabham_scan(S, cfg.grid);
        rec.worst_residual = std::abs(r.integral);
        rec.pass = std::abs(r.integral) <= cfg.tol("integral", 1e-6);
        rec.detail = "integrand_sup=" + fmt(r.integrand_sup) + " at nodes=" +
                     std::to_string(r.node_count);
        rec.worst_point = r.sup_point;
    });
    run_check(rep, "stabham_range_contains_zero", [&](CheckRecord& rec) {
        StabHamReport r = stabham_scan(S, cfg.grid);
        double slack = cfg.tol("range_slack", 1e-9);
        rec.pass = r.c_min <= slack && r.c_max >= -slack;
        rec.worst_residual = std::max(std::abs(r.c_min), std::abs(r.c_max));
        rec.detail = "range=[" + fmt(r.c_min) + "," + fmt(r.c_max) + "]";
    });
    return rep;
}

// ---------------------------------------------------------------------------
// obstruct: surface admissibility verdicts.
// ---------------------------------------------------------------------------

inline SurfaceDescriptor surface_by_name(const std::string& name) {
    if (name == "sphere") return {true, 0};
    if (name == "torus") return {true, 1};
    if (name == "klein") return {false, 2};
    if (name == "rp2") return {false, 1};
    if (name.rfind("genus-", 0) == 0) return {true, std::atoi(name.c_str() + 6)};
    if (name.rfind("crosscaps-", 0) == 0) return {false, std::atoi(name.c_str() + 10)};
    throw ConfigError("$.surface", "unknown surface '" + name +
                                       "' (use sphere, torus, genus-N, klein, rp2, crosscaps-N)");
}

inline Json obstruct_json(const std::string& name, const SurfaceDescriptor& d, bool mod4) {
    AdmissibilityVerdict v = admissible_surface(d, mod4);
    Json row = Json::object();
    row.add("surface", name);
    row.add("orientable", d.orientable);
    row.add("genus_or_crosscaps", d.genus_or_crosscaps);
    row.add("euler_characteristic", v.euler_characteristic);
    row.add("admissible", v.admissible);
    row.add("candidate", v.candidate);
    Json reasons = Json::array();
    for (const auto& r : v.reasons) reasons.push(r);
    row.add("reasons", std::move(reasons));
    return row;
}

inline std::string obstruct_table_csv(bool mod4) {
    const std::pair<const char*, SurfaceDescriptor> rows[] = {
        {"sphere", {true, 0}},      {"torus", {true, 1}},        {"genus-2", {true, 2}},
        {"klein", {false, 2}},      {"crosscaps-3", {false, 3}}, {"crosscaps-4", {false, 4}},
        {"crosscaps-5", {false, 5}},
    };
    std::string csv = "surface,orientable,genus_or_crosscaps,chi,admissible,reasons\n";
    for (const auto& [name, d] : rows) {
        AdmissibilityVerdict v = admissible_surface(d, mod4);
        csv += std::string(name) + "," + (d.orientable ? "yes" : "no") + "," +
               std::to_string(d.genus_or_crosscaps) + "," +
               std::to_string(v.euler_characteristic) + "," + (v.admissible ? "yes" : "no") + ",";
        for (std::size_t i = 0; i < v.reasons.size(); ++i)
            csv += (i ? ";" : "") + v.reasons[i];
        csv += "\n";
    }
    return csv;
}

// ---------------------------------------------------------------------------
// all: every pipeline applicable to the configured structure.
// ---------------------------------------------------------------------------

inline VerificationReport run_all(const RunConfig& cfg) {
    VerificationReport rep;
    rep.config_echo = config_echo(cfg);
    auto merge = [&](const VerificationReport& part, const std::string& prefix) {
        for (CheckRecord rec : part.checks) {
            rec.id = prefix + "." + rec.id;
            rep.checks.push_back(std::move(rec));
        }
    };
    merge(run_verify(cfg), "verify");
    merge(run_suspend(cfg).report, "suspend");
    merge(run_flow(cfg), "flow");
    if (cfg.structure.kind == StructureSpec::Kind::TorusBundle) {
        merge(run_orbits(cfg).report, "orbits");
        merge(run_lagrangian(cfg), "lagrangian");
    }
    BuiltStructure built = build_structure(cfg.structure);
    if (built.structure.quotient) merge(run_integral(cfg), "integral");
    return rep;
}

}  // namespace lhskit
