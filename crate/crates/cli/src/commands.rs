use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use pjmp::certificates::{
    admissible_lambda, default_function_suite, lambda0_product, measured_lyapunov_d1,
    path_method_c0, semigroup_poincare_report, t1, talagrand_verdict, ConcentrationCertificate,
    SemigroupOptions, SumFunctionC3,
};
use pjmp::simulator::{estimate_jump_count, estimate_semigroup, estimate_weight_f, simulate_path};
use pjmp::spectral::{poincare_constant, stationary, variance_and_energy, StationaryDistribution};
use pjmp::stats::replica_rng;
use pjmp::{
    assemble_generator, enumerate_states, EnumeratedSpace, LyapunovCertificate, PotentialState,
    SparseGenerator, SynapticNetwork,
};
use rand::Rng;
use serde_json::{json, Value};

use crate::manifest::RunManifest;
use crate::{ChainArgs, CliError, Outcome};

pub struct Chain {
    pub space: EnumeratedSpace,
    pub gen: SparseGenerator,
}

/// Resolves the truncation box: the drift level `m` unless overridden.
pub fn resolve_box(net: &SynapticNetwork, args: &ChainArgs, factor: f64) -> Result<f64, CliError> {
    match args.m_box {
        Some(m) if m > 0.0 && m.is_finite() => Ok(m),
        Some(m) => Err(CliError::usage(format!(
            "--m-box must be positive, got {m}"
        ))),
        None => Ok(factor * LyapunovCertificate::new(net, args.alpha)?.m),
    }
}

pub fn build_chain(net: &SynapticNetwork, args: &ChainArgs, m_box: f64) -> Result<Chain, CliError> {
    let space = enumerate_states(net, &net.zero_state(), m_box, args.max_states)?;
    let gen = assemble_generator(net, &space)?;
    if let Some(path) = &args.export_generator {
        let mut buf = Vec::new();
        gen.write_matrix_market(&mut buf)?;
        fs::write(path, buf)?;
    }
    Ok(Chain { space, gen })
}

fn record_chain(manifest: &mut RunManifest, args: &ChainArgs, m_box: f64) {
    manifest.param("m_box", m_box);
    manifest.param("alpha", args.alpha);
    manifest.param("max_states", args.max_states);
    manifest.param("export_generator", args.export_generator.is_some());
}

fn dims(chain: &Chain, mu: &StationaryDistribution) -> Value {
    json!({
        "states": chain.space.len(),
        "support": mu.support.len(),
        "nonzeros": chain.gen.nnz_off_diagonal(),
    })
}

fn state_columns(out: &mut String, n: usize) {
    for i in 1..=n {
        let _ = write!(out, ",x{i}_num");
    }
    out.push_str(",denominator");
}

fn state_values(out: &mut String, x: &PotentialState) {
    for v in &x.numerators {
        let _ = write!(out, ",{v}");
    }
    let _ = write!(out, ",{}", x.denominator);
}

fn csv_header(manifest_hash: &str) -> String {
    format!("# manifest {manifest_hash}\n")
}

pub fn simulate(
    net: &SynapticNetwork,
    manifest: &mut RunManifest,
    t: f64,
    replicas: usize,
    seed: u64,
    x0: &[f64],
) -> Result<Outcome, CliError> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(CliError::usage(format!(
            "--t must be finite and >= 0, got {t}"
        )));
    }
    let start = if x0.is_empty() {
        net.zero_state()
    } else {
        net.state_from_values(x0)?
    };
    manifest.param("t", t);
    manifest.param("replicas", replicas);
    manifest.param("seed", seed);
    manifest.param("x0", start.values());
    let hash = manifest.hash();

    let path = simulate_path(net, &start, t, seed)?;
    let mut csv = csv_header(&hash);
    csv.push_str("time,neuron");
    for i in 1..=net.n_neurons() {
        let _ = write!(csv, ",x{i}");
    }
    csv.push('\n');
    let mut row = |time: f64, neuron: Option<usize>, x: &PotentialState| {
        let _ = write!(
            csv,
            "{time},{}",
            neuron.map(|n| n.to_string()).unwrap_or_default()
        );
        for v in x.values() {
            let _ = write!(csv, ",{v}");
        }
        csv.push('\n');
    };
    row(0.0, None, &start);
    for e in &path.events {
        row(
            e.time,
            Some(e.neuron),
            &net.jump_map(&e.pre_state, e.neuron)?,
        );
    }

    let replicas_needed = replicas.max(2);
    let jumps = estimate_jump_count(net, &start, t, replicas_needed, seed)?;
    let weight = estimate_weight_f(net, &start, t, replicas_needed, seed)?;
    let sum = estimate_semigroup(net, |x| x.total(), &start, t, replicas_needed, seed)?;
    let report = json!({
        "command": "simulate",
        "trajectory_events": path.events.len(),
        "final_state": path.final_state.values(),
        "estimators": {
            "jump_count": jumps,
            "weight_f": weight,
            "sum_potential": sum.mean,
            "sum_potential_variance": sum.variance,
        },
    });
    Ok(Outcome::new(report).with_csv("trajectory.csv", csv))
}

pub fn stationary_cmd(
    net: &SynapticNetwork,
    manifest: &mut RunManifest,
    args: &ChainArgs,
) -> Result<Outcome, CliError> {
    let m_box = resolve_box(net, args, 1.0)?;
    record_chain(manifest, args, m_box);
    let chain = build_chain(net, args, m_box)?;
    let mu = stationary(&chain.gen)?;
    let hash = manifest.hash();
    let sum = chain.space.tabulate(|x| x.total());
    let mut csv = csv_header(&hash);
    csv.push_str("index");
    state_columns(&mut csv, net.n_neurons());
    csv.push_str(",probability\n");
    for (k, x) in chain.space.states().iter().enumerate() {
        let _ = write!(csv, "{k}");
        state_values(&mut csv, x);
        let _ = writeln!(csv, ",{}", mu.probabilities[k]);
    }
    let mut states = csv_header(&hash).into_bytes();
    chain.space.write_csv(&mut states)?;
    let report = json!({
        "command": "stationary",
        "m_box": m_box,
        "dims": dims(&chain, &mu),
        "method": mu.method,
        "residual": mu.residual,
        "cross_check_tv": mu.cross_check_tv,
        "power_iterations": mu.power_iterations,
        "mean_sum_potential": mu.expectation(&sum),
        "transient_states": chain.space.len() - mu.support.len(),
    });
    Ok(Outcome::new(report)
        .with_csv("stationary.csv", csv)
        .with_csv("states.csv", String::from_utf8_lossy(&states).into_owned()))
}

pub fn gap_cmd(
    net: &SynapticNetwork,
    manifest: &mut RunManifest,
    args: &ChainArgs,
) -> Result<Outcome, CliError> {
    let m_box = resolve_box(net, args, 1.0)?;
    record_chain(manifest, args, m_box);
    let chain = build_chain(net, args, m_box)?;
    let mu = stationary(&chain.gen)?;
    let gap = poincare_constant(&chain.gen, &mu)?;
    let mut csv = csv_header(&manifest.hash());
    csv.push_str("index,value\n");
    for (k, v) in gap.eigenfunction.iter().enumerate() {
        let _ = writeln!(csv, "{k},{v}");
    }
    let report = json!({
        "command": "gap",
        "m_box": m_box,
        "C_opt": gap.poincare_constant,
        "gap": gap.gap,
        "method": gap.method,
        "eigenfunction_quotient": gap.eigenfunction_quotient,
        "residuals": { "stationary": mu.residual, "eigen": gap.eigen_residual },
        "dims": dims(&chain, &mu),
    });
    Ok(Outcome::new(report).with_csv("eigenfunction.csv", csv))
}

pub fn verify_lyapunov(
    net: &SynapticNetwork,
    manifest: &mut RunManifest,
    args: &ChainArgs,
) -> Result<Outcome, CliError> {
    let cert = LyapunovCertificate::new(net, args.alpha)?;
    let m_box = resolve_box(net, args, 2.0)?;
    record_chain(manifest, args, m_box);
    let chain = build_chain(net, args, m_box)?;
    let mut min_stated = f64::INFINITY;
    let mut min_proof = f64::INFINITY;
    let mut worst_state = Vec::new();
    let mut failures = 0usize;
    for x in chain.space.states() {
        let s = cert.slack(net, x);
        if s < min_stated {
            min_stated = s;
            worst_state = x.values();
        }
        if s < -1e-12 {
            failures += 1;
        }
        min_proof = min_proof.min(cert.proof_form_slack(net, x));
    }
    let pass = failures == 0;
    let report = json!({
        "command": "verify-lyapunov",
        "alpha": cert.alpha,
        "theta": cert.theta_drift,
        "b": cert.b,
        "m": cert.m,
        "drift_rate": cert.drift_rate,
        "m_box": m_box,
        "states_checked": chain.space.len(),
        "min_slack": min_stated,
        "min_slack_state": worst_state,
        "failing_states": failures,
        "min_slack_with_b_plus_theta": min_proof,
        "verdict": if pass { "PASS" } else { "FAIL" },
    });
    Ok(Outcome::new(report).verdict(pass))
}

pub fn verify_poincare(
    net: &SynapticNetwork,
    manifest: &mut RunManifest,
    args: &ChainArgs,
    samples: usize,
    seed: u64,
) -> Result<Outcome, CliError> {
    let m_box = resolve_box(net, args, 1.0)?;
    record_chain(manifest, args, m_box);
    manifest.param("samples", samples);
    manifest.param("seed", seed);
    let chain = build_chain(net, args, m_box)?;
    let mu = stationary(&chain.gen)?;
    let gap = poincare_constant(&chain.gen, &mu)?;
    let c = gap.poincare_constant;
    let mut rng = replica_rng(seed, 0);
    let mut best = 0.0f64;
    let mut violations = 0usize;
    for _ in 0..samples {
        let f: Vec<f64> = (0..chain.space.len())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let (var, energy) = variance_and_energy(&chain.gen, &mu.probabilities, &f);
        if var > c * energy + 1e-12 {
            violations += 1;
        }
        if energy > 0.0 {
            best = best.max(var / energy);
        }
    }
    let path = path_method_c0(net, &chain.gen, &mu.probabilities);
    let inner = m_box / 2.0;
    let suite: Vec<Vec<f64>> =
        default_function_suite(net, &chain.space, inner + net.max_weight(), seed)
            .into_iter()
            .map(|f| f.values)
            .collect();
    let d1 = measured_lyapunov_d1(&chain.space, &chain.gen, &mu.probabilities, &suite, inner)?;
    let path_ok = path.c0_path.is_none_or(|p| p >= c);
    let pass = violations == 0 && best <= c * (1.0 + 1e-12) && path_ok;
    let report = json!({
        "command": "verify-poincare",
        "m_box": m_box,
        "C_opt": c,
        "eigenfunction_quotient": gap.eigenfunction_quotient,
        "samples": samples,
        "max_sampled_quotient": best,
        "violations": violations,
        "path_method": path,
        "measured_d1_outside_inner_box": d1,
        "dims": dims(&chain, &mu),
        "verdict": if pass { "PASS" } else { "FAIL" },
    });
    Ok(Outcome::new(report).verdict(pass))
}

pub struct ConcentrationArgs {
    pub margin: f64,
    pub r_grid: Vec<f64>,
    pub use_path_c0: bool,
    pub tol: f64,
}

pub fn concentration(
    net: &SynapticNetwork,
    manifest: &mut RunManifest,
    args: &ChainArgs,
    opts: &ConcentrationArgs,
) -> Result<Outcome, CliError> {
    if !(opts.margin > 0.0 && opts.margin < 1.0) {
        return Err(CliError::usage(format!(
            "--lambda-margin must lie in (0,1), got {}",
            opts.margin
        )));
    }
    let m_box = resolve_box(net, args, 1.0)?;
    record_chain(manifest, args, m_box);
    manifest.param("lambda_margin", opts.margin);
    manifest.param("r_grid", &opts.r_grid);
    manifest.param(
        "c0_source",
        if opts.use_path_c0 { "path" } else { "optimal" },
    );
    manifest.param("tol", opts.tol);
    let chain = build_chain(net, args, m_box)?;
    let mu = stationary(&chain.gen)?;
    let c_opt = poincare_constant(&chain.gen, &mu)?.poincare_constant;
    let path = path_method_c0(net, &chain.gen, &mu.probabilities);
    let c0 = if opts.use_path_c0 {
        path.c0_path.unwrap_or(c_opt)
    } else {
        c_opt
    };
    let c3 = SumFunctionC3::new(net, &chain.space, &mu.probabilities);
    let adm = admissible_lambda(c0, |l| c3.at(l), opts.margin, opts.tol)?;
    let refined = lambda0_product(c0, adm.c3, adm.lambda, opts.tol / 100.0)?;
    let cert = ConcentrationCertificate {
        c0,
        c3: adm.c3,
        n0: c3.n0,
        lambda: adm.lambda,
        lambda0: adm.lambda0,
    };
    let f = chain.space.tabulate(|x| x.total());
    let verdict = talagrand_verdict(&cert, &mu.probabilities, &f, &opts.r_grid);
    let mut csv = csv_header(&manifest.hash());
    csv.push_str("r,exact,bound,bound_mean,centered_exact,centered_bound,pass\n");
    for row in &verdict.rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            row.r,
            row.exact,
            row.bound,
            row.bound_mean,
            row.centered_exact,
            row.centered_bound,
            row.pass
        );
    }
    let report = json!({
        "command": "concentration",
        "m_box": m_box,
        "C_opt": c_opt,
        "C0": c0,
        "C0_path": path.c0_path,
        "C3": c3.report(adm.lambda),
        "lambda": adm.lambda,
        "q": adm.q,
        "bisection_width": adm.bisection_width,
        "lambda0": adm.lambda0,
        "lambda0_refined": refined,
        "mean_sum_potential": verdict.mean,
        "rows": verdict.rows,
        "centered_pass": verdict.centered_pass,
        "verdict": if verdict.pass { "PASS" } else { "FAIL" },
    });
    Ok(Outcome::new(report)
        .with_csv("tail.csv", csv)
        .verdict(verdict.pass))
}

pub fn semigroup_report(
    net: &SynapticNetwork,
    manifest: &mut RunManifest,
    args: &ChainArgs,
    t_grid: &[f64],
    inner_box: Option<f64>,
    eps: f64,
    seed: u64,
) -> Result<Outcome, CliError> {
    let m_box = resolve_box(net, args, 1.0)?;
    record_chain(manifest, args, m_box);
    let inner = inner_box.unwrap_or(m_box / 2.0);
    manifest.param("inner_box", inner);
    manifest.param("eps", eps);
    manifest.param("seed", seed);
    let chain = build_chain(net, args, m_box)?;
    let mu = stationary(&chain.gen)?;
    let t1v = t1(net, &chain.space, &mu.probabilities)?;
    let grid: Vec<f64> = if t_grid.is_empty() {
        vec![t1v, 2.0 * t1v, 4.0 * t1v, 8.0 * t1v]
    } else {
        t_grid.to_vec()
    };
    manifest.param("t_grid", &grid);
    let suite = default_function_suite(net, &chain.space, inner + net.max_weight(), seed);
    let opts = SemigroupOptions {
        inner_bound: inner,
        eps,
    };
    let report = semigroup_poincare_report(
        net,
        &chain.space,
        &chain.gen,
        &mu.probabilities,
        &suite,
        &grid,
        opts,
    )?;
    let mut csv = csv_header(&manifest.hash());
    csv.push_str("t,d1,d2,d1_alone,d2_alone\n");
    for r in &report.rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            r.t, r.d1, r.d2, r.d1_alone, r.d2_alone
        );
    }
    let pass = report.pass;
    let value = json!({
        "command": "semigroup-report",
        "m_box": m_box,
        "report": report,
        "verdict": if pass { "PASS" } else { "FAIL" },
    });
    Ok(Outcome::new(value)
        .with_csv("semigroup.csv", csv)
        .verdict(pass))
}

pub fn read_model(path: &Path) -> Result<(String, SynapticNetwork), CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read model {}: {e}", path.display())))?;
    let net = SynapticNetwork::from_json_str(&text)?;
    Ok((text, net))
}
