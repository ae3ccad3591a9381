//! The four subcommands.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use diffid_core::certify::{check_global, check_local, compute_certificate, Certificate};
use diffid_core::discretize::ScalarField;
use diffid_core::mms::{convergence_study, recovery_error, uniqueness_probe, Scenario, StudySetup};
use diffid_core::parabolic::{overdetermination_residual, solve_forward};
use diffid_core::picard::{run_inversion, synthesize_field};
use diffid_core::problem::InverseData;
use diffid_core::spectral::OmegaData;
use log::warn;
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::config::{Config, Source};
use crate::fields::{self, fmt};

/// Non-error terminations that still map to a dedicated exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    CertificateFailed,
    NotConverged,
}

impl Outcome {
    pub fn code(self) -> u8 {
        match self {
            Outcome::Success => 0,
            Outcome::CertificateFailed => 2,
            Outcome::NotConverged => 3,
        }
    }
}

/// Pretty JSON with every float in `{:.15e}` form.
struct SciFormatter(PrettyFormatter<'static>);

impl Formatter for SciFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        write!(w, "{v:.15e}")
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SciFormatter(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf)?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, to_json(value)?).with_context(|| format!("cannot write {}", path.display()))
}

fn out_dir(cfg: &Config) -> Result<std::path::PathBuf> {
    let dir = cfg.output_dir();
    fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    Ok(dir)
}

/// Problem data plus the scenario it came from, if any.
struct Loaded {
    data: InverseData,
    scenario: Option<Scenario>,
    known_a: Option<ScalarField>,
}

fn load(cfg: &Config) -> Result<Loaded> {
    let grid = cfg.grid()?;
    let params = cfg.params()?;
    match cfg.source() {
        Source::Scenario(kind, scale) => {
            let s = Scenario::build(kind, &grid, params, scale)?;
            Ok(Loaded {
                data: s.data.clone(),
                known_a: s.truth_a.clone(),
                scenario: Some(s),
            })
        }
        Source::Data(d) => {
            let ny = params.ny;
            let (w, dd) = fields::read_omega(&cfg.resolve(&d.omega_file), ny)?;
            let omega = match dd {
                Some(dd) => OmegaData::from_samples(w, dd, params.modes)?,
                None => OmegaData::from_omega_samples(w, params.modes)?,
            };
            let psi = fields::read_field(&cfg.resolve(&d.psi_file), &grid)?;
            let f = fields::read_source_modes(&cfg.resolve(&d.f_file), &grid, ny, params.modes)?;
            let phi = fields::read_initial_modes(&cfg.resolve(&d.phi_file), &grid, ny, params.modes)?;
            let known_a = d
                .a_file
                .as_ref()
                .map(|p| fields::read_field(&cfg.resolve(p), &grid))
                .transpose()?;
            let data = InverseData::new(params, omega, psi, f, phi)?;
            let compat = data.compatibility_residual();
            if compat > 1e-6 {
                warn!("compatibility residual at t = 0 is {compat:.3e}");
            }
            Ok(Loaded {
                data,
                scenario: None,
                known_a,
            })
        }
    }
}

fn print_certificate(cert: &Certificate) {
    println!(
        "epsilon {}  A_eps {:.6e}  C_S {}  C_P {:.6e}  B {:.6e}  Psi_M {:.6e}  R {:.6e}  R1 {:.6e}  T {}",
        cert.epsilon, cert.a_eps, cert.c_s, cert.c_p, cert.b, cert.psi_m, cert.r, cert.r1, cert.t_final
    );
    println!(
        "{:<7} {:<22} {:<32} {:>14} {:>14} {:>14}  {}",
        "set", "condition", "relation", "lhs", "rhs", "margin", "verdict"
    );
    for (set, v) in [("local", check_local(cert)), ("global", check_global(cert))] {
        for c in &v.conditions {
            println!(
                "{:<7} {:<22} {:<32} {:>14.6e} {:>14.6e} {:>14.6e}  {}",
                set,
                c.name,
                c.relation,
                c.lhs,
                c.rhs,
                c.margin(),
                if c.holds() { "holds" } else { "FAILS" }
            );
        }
    }
    println!(
        "local: {}  global: {}  (conditional on supplied C_S = {})",
        if cert.local_pass { "PASS" } else { "FAIL" },
        if cert.global_pass { "PASS" } else { "FAIL" },
        cert.c_s
    );
}

fn failing_conditions(cert: &Certificate) -> String {
    check_local(cert)
        .failing()
        .into_iter()
        .chain(check_global(cert).failing())
        .collect::<Vec<_>>()
        .join(", ")
}

pub fn certify(cfg: &Config) -> Result<Outcome> {
    let loaded = load(cfg)?;
    let cert = compute_certificate(&loaded.data, &cfg.settings(false))?;
    let dir = out_dir(cfg)?;
    write_json(&dir.join("certificate.json"), &cert)?;
    print_certificate(&cert);
    if cert.passes() {
        Ok(Outcome::Success)
    } else {
        println!("failing conditions: {}", failing_conditions(&cert));
        Ok(Outcome::CertificateFailed)
    }
}

pub fn forward(cfg: &Config) -> Result<Outcome> {
    let loaded = load(cfg)?;
    let Some(a) = loaded.known_a.as_ref() else {
        bail!("forward needs a known potential: a scenario with data_scale = 1 or data.a_file");
    };
    let d = &loaded.data;
    let settings = cfg.settings(false);
    let u = solve_forward(Some(a), &d.f_modes, &d.phi_modes, &d.grid, d.params, settings.theta, settings.strategy)?;
    let (res_field, res) = overdetermination_residual(&u, &d.omega, &d.psi);
    let dir = out_dir(cfg)?;
    if cfg.wants("csv") {
        fields::write_modes(&dir.join("u_modes.csv"), &u)?;
        fields::write_synthesis(&dir.join("u_synth.csv"), &d.grid, &synthesize_field(&u, cfg.output.synth_ny))?;
        fields::write_field(&dir.join("residual.csv"), &res_field)?;
    }
    println!("overdetermination residual ||(u, omega) - psi||_L2(G_T) = {res:.6e}");
    Ok(Outcome::Success)
}

#[derive(Serialize)]
struct Summary {
    scenario: Option<String>,
    data_scale: Option<f64>,
    converged: bool,
    iterations: usize,
    final_f_diff: Option<f64>,
    residual: f64,
    recovery_error_a: Option<f64>,
    recovery_error_u: Option<f64>,
    certificate_local_pass: bool,
    certificate_global_pass: bool,
    forced: bool,
    extrapolated_nodes: usize,
    norm_energy: f64,
    norm_sup_l2: f64,
    norm_grad_x: f64,
    norm_grad_y: f64,
    norm_a_l2: f64,
}

pub fn invert(cfg: &Config, force_flag: bool) -> Result<Outcome> {
    let loaded = load(cfg)?;
    let settings = cfg.settings(force_flag);
    let d = &loaded.data;
    let dir = out_dir(cfg)?;
    let cert = compute_certificate(d, &settings)?;
    write_json(&dir.join("certificate.json"), &cert)?;
    if !cert.passes() {
        if !settings.force {
            print_certificate(&cert);
            println!(
                "certificate fails ({}); rerun with --force to invert anyway",
                failing_conditions(&cert)
            );
            return Ok(Outcome::CertificateFailed);
        }
        println!("certificate fails ({}); continuing under --force", failing_conditions(&cert));
    }

    let r = run_inversion(d, &settings)?;
    let h = &r.history;
    if cfg.wants("csv") {
        let rows = h.f_diff_history.iter().enumerate().map(|(i, f)| {
            let q = if i == 0 { String::new() } else { fmt(h.ratio_history[i - 1]) };
            vec![(i + 1).to_string(), fmt(*f), q]
        });
        fields::write_rows(&dir.join("history.csv"), &["iter", "F_diff", "q_hat"], rows)?;
        fields::write_field(&dir.join("a.csv"), &r.a)?;
        fields::write_synthesis(&dir.join("u_synth.csv"), &d.grid, &synthesize_field(&r.u_modes, cfg.output.synth_ny))?;
    }

    let err = loaded
        .scenario
        .as_ref()
        .and_then(|s| recovery_error(&r, s, settings.boundary_margin));
    let summary = Summary {
        scenario: loaded.scenario.as_ref().map(|s| s.kind.to_string()),
        data_scale: loaded.scenario.as_ref().map(|s| s.data_scale),
        converged: r.converged,
        iterations: r.iterations,
        final_f_diff: h.last_f_diff(),
        residual: r.residual,
        recovery_error_a: err.map(|e| e.a),
        recovery_error_u: err.map(|e| e.u),
        certificate_local_pass: cert.local_pass,
        certificate_global_pass: cert.global_pass,
        forced: settings.force,
        extrapolated_nodes: r.extrapolated.iter().filter(|e| **e).count(),
        norm_energy: r.norms.energy,
        norm_sup_l2: r.norms.sup_l2,
        norm_grad_x: r.norms.grad_x,
        norm_grad_y: r.norms.grad_y,
        norm_a_l2: r.norms.a_l2,
    };
    if cfg.wants("json") {
        write_json(&dir.join("summary.json"), &summary)?;
    }
    println!(
        "{} after {} sweeps; residual {:.6e}{}",
        if r.converged { "converged" } else { "NOT converged" },
        r.iterations,
        r.residual,
        err.map(|e| format!("; rel-L2 error of a {:.6e}", e.a)).unwrap_or_default()
    );
    Ok(if r.converged { Outcome::Success } else { Outcome::NotConverged })
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

pub fn mms(cfg: &Config) -> Result<Outcome> {
    let Source::Scenario(kind, data_scale) = cfg.source() else {
        bail!("mms needs a 'scenario' section");
    };
    let setup = StudySetup {
        kind,
        domain: cfg.domain()?,
        params: cfg.params()?,
        data_scale,
    };
    // verification runs proceed whatever the certificate says
    let settings = cfg.settings(true);
    let res = cfg.resolutions();
    let table = convergence_study(&setup, &res, &settings)?;
    let dir = out_dir(cfg)?;

    let rows = table.rows.iter().enumerate().map(|(i, r)| {
        let order = if i > 0 && !table.orders_a.is_empty() { fmt(table.orders_a[i - 1]) } else { String::new() };
        vec![
            r.n.to_string(),
            opt(r.error_a),
            opt(r.error_u),
            fmt(r.residual),
            r.iterations.to_string(),
            r.converged.to_string(),
            order,
        ]
    });
    fields::write_rows(
        &dir.join("convergence.csv"),
        &["n", "error_a", "error_u", "residual", "iterations", "converged", "order_a"],
        rows,
    )?;

    let finest = *res.last().expect("at least three resolutions");
    let probe = uniqueness_probe(&setup.scenario(finest)?, &settings)?;
    fields::write_rows(
        &dir.join("uniqueness.csv"),
        &["scenario", "n", "distance", "certificate_passes", "iterations_zero_start", "iterations_scaled_start"],
        [vec![
            kind.to_string(),
            finest.to_string(),
            fmt(probe.distance),
            probe.certificate_passes.to_string(),
            probe.iterations[0].to_string(),
            probe.iterations[1].to_string(),
        ]],
    )?;

    let rows = table.rows.iter().map(|r| {
        let mut v = vec![r.n.to_string(), fmt(setup.params.epsilon)];
        v.extend(r.strong.as_array().iter().map(|x| fmt(*x)));
        v
    });
    fields::write_rows(
        &dir.join("strong_diagnostics.csv"),
        &["n", "epsilon", "u", "lap_u", "u_t", "u_yy", "a"],
        rows,
    )?;

    println!("{:>6} {:>14} {:>14} {:>14} {:>6} {:>8}", "n", "error_a", "error_u", "residual", "iters", "order_a");
    for (i, r) in table.rows.iter().enumerate() {
        let order = if i > 0 && !table.orders_a.is_empty() { format!("{:.3}", table.orders_a[i - 1]) } else { "-".into() };
        println!(
            "{:>6} {:>14} {:>14} {:>14.6e} {:>6} {:>8}",
            r.n,
            r.error_a.map(|e| format!("{e:.6e}")).unwrap_or_else(|| "-".into()),
            r.error_u.map(|e| format!("{e:.6e}")).unwrap_or_else(|| "-".into()),
            r.residual,
            r.iterations,
            order
        );
    }
    println!("uniqueness distance at n = {finest}: {:.6e}", probe.distance);
    Ok(Outcome::Success)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_floats_use_fixed_scientific_form() {
        #[derive(Serialize)]
        struct S {
            x: f64,
            y: Vec<f64>,
            z: f64,
        }
        let s = to_json(&S { x: 0.1, y: vec![-2.5e-7], z: f64::NAN }).unwrap();
        assert!(s.contains("\"x\": 1.000000000000000e-1"), "{s}");
        assert!(s.contains("-2.500000000000000e-7"), "{s}");
        assert!(s.contains("\"z\": null"), "{s}");
        let back: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["x"].as_f64(), Some(0.1));
    }

    #[test]
    fn exit_codes_are_disjoint() {
        let codes = [Outcome::Success, Outcome::CertificateFailed, Outcome::NotConverged].map(Outcome::code);
        assert_eq!(codes, [0, 2, 3]);
    }
}
