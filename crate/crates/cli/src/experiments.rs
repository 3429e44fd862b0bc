//! The subcommands. Each returns its files in memory; the caller writes them
//! once at the end so a run either produces a complete set of outputs or none.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use anyhow::Context;
use bergman_core::basis::BasisTable;
use bergman_core::berezin::{berezin_field, bmo1_seminorm, fmt_f64, tail_decay_profile, z_grid};
use bergman_core::cache::{encode_operator_matrix, OperatorSidecar, FORMAT_VERSION};
use bergman_core::diagnostics::{
    boundary_decay, decay_curves_csv, essential_norm_proxy, fourfold_report, singular_value_profile,
    sufficiently_localized_functional, FourfoldConfig, SvProfile, Verdict,
};
use bergman_core::quadrature::cached_rule;
use bergman_core::toeplitz::assembly_rule;
use bergman_core::{
    adjoint_symbol, assemble, Complex64, DVector, NormKind, Point, ScalarFn, SpaceParams, Symbol,
    TruncatedOperator,
};
use serde::Serialize;
use statrs::function::beta::beta_reg;

use crate::identities::{run_battery, IdentityConfig, Status};
use crate::manifest::{Command, Manifest};

/// How a run ended, mapped onto exit codes by the binary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    Inconclusive,
    IdentityFailure,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Pass => 0,
            Outcome::IdentityFailure => 2,
            Outcome::Inconclusive => 3,
        }
    }
}

pub struct RunOutput {
    /// (file name, contents), written in this order.
    pub files: Vec<(String, Vec<u8>)>,
    pub outcome: Outcome,
    pub summary: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub manifest_sha256: String,
    pub cache_format_version: u32,
    pub tolerances: BTreeMap<String, f64>,
    pub manifest: Manifest,
}

fn provenance(cmd: Command, m: &Manifest, tolerances: &[(&str, f64)]) -> Provenance {
    let mut manifest = m.clone();
    manifest.threads = None;
    manifest.out = None;
    Provenance {
        tool: "bergman".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: cmd.name().into(),
        manifest_sha256: m.hash(),
        cache_format_version: FORMAT_VERSION,
        tolerances: tolerances.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        manifest,
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    provenance: &'a Provenance,
    result: T,
}

fn json<T: Serialize>(prov: &Provenance, result: T) -> anyhow::Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(&Envelope {
        provenance: prov,
        result,
    })?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn grid_of(m: &Manifest) -> Vec<Point> {
    if let Some(points) = &m.points {
        return points.clone();
    }
    let g = m.grid.as_ref().unwrap();
    z_grid(m.n.unwrap(), &g.radii, g.angles)
}

fn fourfold_config(m: &Manifest) -> FourfoldConfig {
    let g = m.grid.clone().unwrap();
    FourfoldConfig {
        max_degree: m.max_degree.unwrap(),
        grid_radii: g.radii,
        grid_angles: g.angles,
        boundary_radii: m.boundary_radii.clone().unwrap(),
        thresholds: m.thresholds.unwrap(),
        policy: m.policy.unwrap(),
        search: m.search.unwrap(),
        ..FourfoldConfig::default()
    }
}

fn symbol_of(m: &Manifest) -> anyhow::Result<Symbol> {
    let sym = m.symbol.clone().unwrap();
    let d = m.channels.unwrap();
    Ok(if sym.channels() == d { sym } else { sym.with_channels(d)? })
}

fn assemble_with_manifest(m: &Manifest, b: &Symbol, table: &Arc<BasisTable>) -> anyhow::Result<TruncatedOperator> {
    let rule = match m.rule {
        Some(o) => cached_rule(&table.params, o.radial_points, o.angular_points, &b.radial_breaks())?,
        None => assembly_rule(b, table, &m.policy.unwrap())?,
    };
    Ok(assemble(b, table, &rule)?)
}

/// Eigenvalue of T_{χ_r} on monomials of degree k: the regularized incomplete
/// beta function I_{r²}(k + n, α + 1).
fn indicator_eigenvalue(p: &SpaceParams, k: u32, r: f64) -> f64 {
    if r == 0.0 {
        return 0.0;
    }
    beta_reg(k as f64 + p.n as f64, p.alpha + 1.0, r * r)
}

fn indicator_spectrum(p: &SpaceParams, dmax: u32, r: f64, weights: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    for k in 0..=dmax {
        let mult = if p.n == 1 { 1 } else { k as usize + 1 };
        let ev = indicator_eigenvalue(p, k, r);
        for &w in weights {
            out.extend(std::iter::repeat(w * ev).take(mult));
        }
    }
    out.sort_by(|a, b| b.total_cmp(a));
    out
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn spread(v: &[f64]) -> f64 {
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    if v.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

fn gnuplot_decay(csv: &str, title: &str) -> Vec<u8> {
    format!(
        "set datafile separator ','\n\
         set key autotitle columnhead\n\
         set logscale y\n\
         set xlabel 'radius'\n\
         set ylabel 'norm'\n\
         set title '{title}'\n\
         plot '{csv}' using 2:3 with linespoints title 'kernel image', \\\n     \
         '{csv}' using 2:5 with linespoints title 'berezin'\n"
    )
    .into_bytes()
}

pub fn identity_suite(m: &Manifest) -> anyhow::Result<RunOutput> {
    let mut cfg = IdentityConfig::new(m.params());
    cfg.max_degree = m.max_degree.unwrap();
    cfg.channels = m.channels.unwrap();
    cfg.samples = m.samples.unwrap();
    cfg.matrix_samples = m.matrix_samples.unwrap();
    cfg.seed = m.seed.unwrap();
    cfg.rule = m.rule;
    cfg.policy = m.policy.unwrap();
    let report = run_battery(&cfg)?;
    let tolerances: Vec<(&str, f64)> = report.checks.iter().map(|c| (c.name.as_str(), c.tolerance)).collect();
    let prov = provenance(Command::IdentitySuite, m, &tolerances);
    let outcome = if report.count(Status::Fail) > 0 {
        Outcome::IdentityFailure
    } else if report.count(Status::Inconclusive) > 0 {
        Outcome::Inconclusive
    } else {
        Outcome::Pass
    };
    let text = report.to_text();
    Ok(RunOutput {
        files: vec![
            ("identities.json".into(), json(&prov, &report)?),
            ("identities.txt".into(), text.clone().into_bytes()),
        ],
        outcome,
        summary: text,
    })
}

#[derive(Serialize)]
struct SvCheck {
    max_degree: u32,
    channels: usize,
    oracle_error: f64,
}

fn verdict_outcome(v: &[Verdict]) -> Outcome {
    if v.contains(&Verdict::Inconclusive) {
        Outcome::Inconclusive
    } else {
        Outcome::Pass
    }
}

pub fn e1_diagonal(m: &Manifest) -> anyhow::Result<RunOutput> {
    let p = m.params();
    let r = m.radius.unwrap();
    let d = m.channels.unwrap();
    let dmax = m.max_degree.unwrap();
    let policy = m.policy.unwrap();
    let sym = Symbol::DiagonalGeometric {
        tau: ScalarFn::indicator(r),
        d,
    };
    let report = fourfold_report(&sym, &p, &fourfold_config(m))?;
    let profile = singular_value_profile(&sym, &p, m.degree_sweep.as_ref().unwrap(), m.channel_sweep.as_ref().unwrap(), &policy)?;
    let tol = 1e-8;
    let checks: Vec<SvCheck> = profile
        .entries
        .iter()
        .map(|e| {
            let weights: Vec<f64> = (1..=e.channels).map(|j| 0.5f64.powi(j as i32)).collect();
            SvCheck {
                max_degree: e.max_degree,
                channels: e.channels,
                oracle_error: max_gap(&e.singular_values, &indicator_spectrum(&p, e.max_degree, r, &weights)),
            }
        })
        .collect();
    let table = Arc::new(BasisTable::build(&p, dmax, d)?);
    let op = assemble_with_manifest(m, &sym, &table)?;
    let cfg = fourfold_config(m);
    let mut e_first = vec![Complex64::new(0.0, 0.0); d];
    e_first[0] = Complex64::new(1.0, 0.0);
    let curves = boundary_decay(
        &sym,
        &op,
        &cfg.boundary_radii,
        &cfg.ray_directions(p.n),
        &[e_first, vec![Complex64::new(1.0, 0.0); d]],
        &policy,
        cfg.thresholds.resolution_tol,
    )?;
    let worst = checks.iter().map(|c| c.oracle_error).fold(0.0, f64::max);
    let prov = provenance(Command::E1Diagonal, m, &[("singular value oracle", tol)]);
    let mut outcome = verdict_outcome(&report.verdicts.iter().map(|v| v.verdict).collect::<Vec<_>>());
    if !(worst <= tol) {
        outcome = Outcome::IdentityFailure;
    }
    #[derive(Serialize)]
    struct E1<'a> {
        fourfold: &'a bergman_core::CompactnessReport,
        singular_value_checks: &'a [SvCheck],
        decay_curves: &'a [bergman_core::diagnostics::DecayCurve],
    }
    let text = format!(
        "{}\nsingular values vs 2^-j I(r^2) table: max error {:.3e} (tol {tol:.0e})\n",
        report.to_text(),
        worst
    );
    Ok(RunOutput {
        files: vec![
            (
                "e1_report.json".into(),
                json(
                    &prov,
                    E1 {
                        fourfold: &report,
                        singular_value_checks: &checks,
                        decay_curves: &curves,
                    },
                )?,
            ),
            ("e1_report.txt".into(), text.clone().into_bytes()),
            ("singular_values.csv".into(), profile.to_csv().into_bytes()),
            ("decay.csv".into(), decay_curves_csv(&curves).into_bytes()),
            ("decay.gp".into(), gnuplot_decay("decay.csv", "diagonal example")),
        ],
        outcome,
        summary: text,
    })
}

pub fn e2_taui(m: &Manifest) -> anyhow::Result<RunOutput> {
    let p = m.params();
    let r = m.radius.unwrap();
    let dmax = m.max_degree.unwrap();
    let policy = m.policy.unwrap();
    let sweep = m.channel_sweep.clone().unwrap();
    let base = Symbol::ScalarTimesIdentity {
        tau: ScalarFn::indicator(r),
        d: 1,
    };
    let profile: SvProfile = singular_value_profile(&base, &p, &[dmax], &sweep, &policy)?;
    let scalar = singular_value_profile(&base, &p, &[dmax], &[1], &policy)?;
    let scalar_sv = &scalar.entries[0].singular_values;

    let mut multiplicity_error: f64 = 0.0;
    let mut dth = Vec::new();
    for e in &profile.entries {
        let mut expected: Vec<f64> = scalar_sv.iter().flat_map(|s| std::iter::repeat(*s).take(e.channels)).collect();
        expected.sort_by(|a, b| b.total_cmp(a));
        multiplicity_error = multiplicity_error.max(max_gap(&e.singular_values, &expected));
        dth.push(e.singular_values.get(e.channels - 1).copied().unwrap_or(0.0));
    }
    let dth_spread = spread(&dth);

    let grid = grid_of(m);
    let mut tail_rows = String::from("channels,d0,profile\n");
    let mut tail_variation: f64 = 0.0;
    let mut proxies = Vec::new();
    let ring = z_grid(p.n, m.ring_radii.as_ref().unwrap(), 4);
    let scalar_table = BasisTable::build(&p, dmax, 1)?;
    for &d in &sweep {
        let sym = base.with_channels(d)?;
        let d0s: Vec<usize> = (0..d).collect();
        let prof = tail_decay_profile(&sym, &p, &grid, &d0s, &policy)?;
        for (d0, v) in prof.iter().enumerate() {
            let _ = writeln!(tail_rows, "{d},{d0},{}", fmt_f64(*v));
        }
        tail_variation = tail_variation.max(spread(&prof));
        let table = Arc::new(scalar_table.with_channels(d));
        let op = assemble_with_manifest(m, &sym, &table)?;
        let mut f = DVector::zeros(table.len());
        f[0] = Complex64::new(1.0, 0.0);
        let proxy = essential_norm_proxy(&op, &[f], &ring, &policy)?;
        proxies.push(proxy);
    }
    let proxy_values: Vec<f64> = proxies.iter().map(|p| p.value).collect();
    let zero = r == 0.0;
    let signature = if zero {
        "compact (zero symbol)"
    } else if dth_spread <= 1e-8 {
        "non-compact signature"
    } else {
        "no non-compact signature"
    };
    let outcome = if multiplicity_error > 1e-10 {
        Outcome::IdentityFailure
    } else {
        Outcome::Pass
    };
    #[derive(Serialize)]
    struct E2<'a> {
        channel_sweep: &'a [usize],
        multiplicity_error: f64,
        dth_singular_values: &'a [f64],
        dth_spread: f64,
        tail_profile_variation: f64,
        essential_norm_proxy: &'a [bergman_core::diagnostics::EssentialProxy],
        proxy_spread: f64,
        signature: &'a str,
    }
    let prov = provenance(
        Command::E2TauI,
        m,
        &[("multiplicity law", 1e-10), ("dth singular value spread", 1e-8), ("tail flatness", 1e-10)],
    );
    let mut text = String::new();
    let _ = writeln!(text, "channels swept       {sweep:?}");
    let _ = writeln!(text, "multiplicity error   {multiplicity_error:.3e} (tol 1e-10)");
    let _ = writeln!(text, "d-th singular values {}", dth.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(" "));
    let _ = writeln!(text, "d-th spread          {dth_spread:.3e} (tol 1e-8)");
    let _ = writeln!(text, "tail variation       {tail_variation:.3e} (flat below 1e-10)");
    let _ = writeln!(text, "proxy per d          {}", proxy_values.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(" "));
    let _ = writeln!(text, "verdict              {signature}");
    Ok(RunOutput {
        files: vec![
            (
                "e2_report.json".into(),
                json(
                    &prov,
                    E2 {
                        channel_sweep: &sweep,
                        multiplicity_error,
                        dth_singular_values: &dth,
                        dth_spread,
                        tail_profile_variation: tail_variation,
                        essential_norm_proxy: &proxies,
                        proxy_spread: spread(&proxy_values),
                        signature,
                    },
                )?,
            ),
            ("e2_report.txt".into(), text.clone().into_bytes()),
            ("singular_values.csv".into(), profile.to_csv().into_bytes()),
            ("tail_profile.csv".into(), tail_rows.into_bytes()),
        ],
        outcome,
        summary: text,
    })
}

pub fn e3_localized(m: &Manifest) -> anyhow::Result<RunOutput> {
    let p = m.params();
    let r = m.radius.unwrap();
    let d = m.channels.unwrap();
    let dmax = m.max_degree.unwrap();
    let policy = m.policy.unwrap();
    let search = m.search.unwrap();
    let pp = m.p.unwrap();
    let grid = grid_of(m);
    let tau = ScalarFn::indicator(r);
    let diag = Symbol::DiagonalGeometric { tau: tau.clone(), d };
    let taui = Symbol::ScalarTimesIdentity { tau: tau.clone(), d };
    let table = BasisTable::build(&p, dmax, d)?;
    let scalar_table = table.with_channels(1);
    let channels: Vec<usize> = (1..=d).collect();

    let scalar = sufficiently_localized_functional(&Symbol::Scalar { tau: tau.clone() }, pp, &grid, &[1], &scalar_table, &policy)?;
    let diag_32 = sufficiently_localized_functional(&diag, pp, &grid, &channels, &table, &policy)?;
    let diag_31 = sufficiently_localized_functional(&adjoint_symbol(&diag), pp, &grid, &channels, &table, &policy)?;
    let taui_32 = sufficiently_localized_functional(&taui, pp, &grid, &channels, &table, &policy)?;
    let taui_31 = sufficiently_localized_functional(&adjoint_symbol(&taui), pp, &grid, &channels, &table, &policy)?;
    let scaling_error = diag_32
        .per_channel
        .iter()
        .enumerate()
        .map(|(i, v)| (v - 0.5f64.powi(i as i32 + 1) * scalar.value).abs())
        .fold(0.0, f64::max);

    #[derive(Serialize)]
    struct BmoRow {
        symbol: &'static str,
        channels: usize,
        norm: &'static str,
        value: f64,
        exact: bool,
    }
    let mut rows = Vec::new();
    for &dd in m.channel_sweep.as_ref().unwrap() {
        for (name, sym) in [
            ("diagonal", Symbol::DiagonalGeometric { tau: tau.clone(), d: dd }),
            ("tau_identity", Symbol::ScalarTimesIdentity { tau: tau.clone(), d: dd }),
        ] {
            for kind in [NormKind::TwoToOne, NormKind::Intersection] {
                let est = bmo1_seminorm(&sym, &p, &grid, kind, &policy, &search)?;
                rows.push(BmoRow {
                    symbol: name,
                    channels: dd,
                    norm: kind.label(),
                    value: est.value,
                    exact: est.norms_exact,
                });
            }
        }
    }
    let series = |sym: &str, norm: &str| -> Vec<f64> {
        rows.iter().filter(|r| r.symbol == sym && r.norm == norm).map(|r| r.value).collect()
    };
    let taui_21 = series("tau_identity", "2to1");
    let diag_21 = series("diagonal", "2to1");
    let taui_grows = taui_21.windows(2).all(|w| w[1] > w[0]);
    let diag_uniform = diag_21.iter().copied().fold(0.0, f64::max) <= diag_21.first().copied().unwrap_or(0.0) * 2.0 + 1e-12;

    let tol = 1e-6;
    let outcome = if scaling_error > tol {
        Outcome::IdentityFailure
    } else {
        Outcome::Pass
    };
    let mut csv = String::from("symbol,channels,norm,bmo\n");
    for r in &rows {
        let _ = writeln!(csv, "{},{},{},{}", r.symbol, r.channels, r.norm, fmt_f64(r.value));
    }
    let mut text = String::new();
    let _ = writeln!(text, "p = {pp} (threshold {})", p.localization_threshold());
    let _ = writeln!(text, "scalar functional         {}", fmt_f64(scalar.value));
    let _ = writeln!(text, "diagonal functional per j {}", diag_32.per_channel.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(" "));
    let _ = writeln!(text, "2^-j scaling error        {scaling_error:.3e} (tol {tol:.0e})");
    let _ = writeln!(text, "tau*I functional per j    {}", taui_32.per_channel.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(" "));
    let _ = writeln!(text, "tau*I 2to1 BMO by d       {}", taui_21.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(" "));
    let _ = writeln!(text, "diagonal 2to1 BMO by d    {}", diag_21.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(" "));
    let _ = writeln!(text, "tau*I 2to1 grows with d   {taui_grows}");
    let _ = writeln!(text, "diagonal 2to1 d-uniform   {diag_uniform}");
    #[derive(Serialize)]
    struct E3<'a> {
        p: f64,
        threshold: f64,
        scalar: &'a bergman_core::diagnostics::LocalizedFunctional,
        diagonal_kernel_functional: &'a bergman_core::diagnostics::LocalizedFunctional,
        diagonal_adjoint_functional: &'a bergman_core::diagnostics::LocalizedFunctional,
        tau_identity_kernel_functional: &'a bergman_core::diagnostics::LocalizedFunctional,
        tau_identity_adjoint_functional: &'a bergman_core::diagnostics::LocalizedFunctional,
        scaling_error: f64,
        bmo: &'a [BmoRow],
        tau_identity_2to1_grows: bool,
        diagonal_2to1_uniform: bool,
    }
    let prov = provenance(Command::E3Localized, m, &[("diagonal 2^-j scaling", tol)]);
    Ok(RunOutput {
        files: vec![
            (
                "e3_report.json".into(),
                json(
                    &prov,
                    E3 {
                        p: pp,
                        threshold: p.localization_threshold(),
                        scalar: &scalar,
                        diagonal_kernel_functional: &diag_32,
                        diagonal_adjoint_functional: &diag_31,
                        tau_identity_kernel_functional: &taui_32,
                        tau_identity_adjoint_functional: &taui_31,
                        scaling_error,
                        bmo: &rows,
                        tau_identity_2to1_grows: taui_grows,
                        diagonal_2to1_uniform: diag_uniform,
                    },
                )?,
            ),
            ("e3_report.txt".into(), text.clone().into_bytes()),
            ("bmo.csv".into(), csv.into_bytes()),
        ],
        outcome,
        summary: text,
    })
}

pub fn berezin(m: &Manifest) -> anyhow::Result<RunOutput> {
    let p = m.params();
    let sym = symbol_of(m)?;
    let field = berezin_field(&sym, &grid_of(m), &p, &m.policy.unwrap())?;
    let prov = provenance(Command::Berezin, m, &[]);
    let sup = field.sup_norm();
    let outcome = if field.flagged.is_empty() {
        Outcome::Pass
    } else {
        Outcome::Inconclusive
    };
    let summary = format!(
        "{} points, grid lower bound of sup |b~| = {}, {} flagged\n",
        field.grid.len(),
        fmt_f64(sup),
        field.flagged.len()
    );
    Ok(RunOutput {
        files: vec![
            ("berezin.csv".into(), field.to_csv().into_bytes()),
            ("berezin.json".into(), json(&prov, &field)?),
        ],
        outcome,
        summary,
    })
}

pub fn bmo(m: &Manifest) -> anyhow::Result<RunOutput> {
    let p = m.params();
    let sym = symbol_of(m)?;
    let grid = grid_of(m);
    let kind = m.norm_kind.unwrap();
    let est = bmo1_seminorm(&sym, &p, &grid, kind, &m.policy.unwrap(), &m.search.unwrap())?;
    let mut csv = String::new();
    for i in 1..=p.n {
        let _ = write!(csv, "z{i}_re,z{i}_im,");
    }
    csv.push_str("bmo\n");
    for (z, v) in grid.iter().zip(&est.per_point) {
        for c in z.coords() {
            let _ = write!(csv, "{},{},", fmt_f64(c.re), fmt_f64(c.im));
        }
        let _ = writeln!(csv, "{}", fmt_f64(*v));
    }
    let outcome = if est.flagged.is_empty() && est.norms_exact {
        Outcome::Pass
    } else {
        Outcome::Inconclusive
    };
    let summary = format!(
        "BMO ({}) grid lower bound {} at |z| = {:.3}; {} flagged points{}\n",
        kind.label(),
        fmt_f64(est.value),
        est.argmax.norm(),
        est.flagged.len(),
        if est.norms_exact { "" } else { "; some norms are search lower bounds" }
    );
    let prov = provenance(Command::Bmo, m, &[]);
    Ok(RunOutput {
        files: vec![("bmo.json".into(), json(&prov, &est)?), ("bmo_points.csv".into(), csv.into_bytes())],
        outcome,
        summary,
    })
}

pub fn assemble_cmd(m: &Manifest) -> anyhow::Result<RunOutput> {
    let p = m.params();
    let sym = symbol_of(m)?;
    let table = Arc::new(BasisTable::build(&p, m.max_degree.unwrap(), sym.channels())?);
    let op = assemble_with_manifest(m, &sym, &table)?;
    let sidecar = OperatorSidecar {
        format_version: FORMAT_VERSION,
        meta: op.meta(),
        tolerances: vec![("basis norm oracle".into(), 1e-10)],
    };
    let prov = provenance(Command::Assemble, m, &[("basis norm oracle", 1e-10)]);
    let mut side = serde_json::to_string_pretty(&sidecar)?;
    side.push('\n');
    let outcome = if op.flags.is_empty() {
        Outcome::Pass
    } else {
        Outcome::Inconclusive
    };
    let summary = format!(
        "{}x{} matrix, operator norm {}, {} flags\n",
        op.size(),
        op.size(),
        fmt_f64(op.opnorm()),
        op.flags.len()
    );
    Ok(RunOutput {
        files: vec![
            ("operator.bgo".into(), encode_operator_matrix(&op.matrix)),
            ("operator.json".into(), side.into_bytes()),
            ("provenance.json".into(), json(&prov, &op.meta())?),
        ],
        outcome,
        summary,
    })
}

pub fn svd(m: &Manifest) -> anyhow::Result<RunOutput> {
    let p = m.params();
    let sym = symbol_of(m)?;
    let profile = singular_value_profile(
        &sym,
        &p,
        m.degree_sweep.as_ref().unwrap(),
        m.channel_sweep.as_ref().unwrap(),
        &m.policy.unwrap(),
    )
    .context("singular value sweep")?;
    let flagged = profile.entries.iter().any(|e| !e.flags.is_empty());
    let prov = provenance(Command::Svd, m, &[]);
    let mut summary = String::new();
    for e in &profile.entries {
        let _ = writeln!(
            summary,
            "D={:<3} d={:<3} largest {}  smallest {}",
            e.max_degree,
            e.channels,
            fmt_f64(e.singular_values.first().copied().unwrap_or(0.0)),
            fmt_f64(e.singular_values.last().copied().unwrap_or(0.0))
        );
    }
    Ok(RunOutput {
        files: vec![
            ("singular_values.csv".into(), profile.to_csv().into_bytes()),
            ("svd.json".into(), json(&prov, &profile)?),
        ],
        outcome: if flagged { Outcome::Inconclusive } else { Outcome::Pass },
        summary,
    })
}

pub fn run(cmd: Command, m: &Manifest) -> anyhow::Result<RunOutput> {
    match cmd {
        Command::IdentitySuite => identity_suite(m),
        Command::E1Diagonal => e1_diagonal(m),
        Command::E2TauI => e2_taui(m),
        Command::E3Localized => e3_localized(m),
        Command::Berezin => berezin(m),
        Command::Bmo => bmo(m),
        Command::Assemble => assemble_cmd(m),
        Command::Svd => svd(m),
    }
}
