//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints its verdict line even when it passes.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use num_rational::Ratio;
use pjmp::certificates::{
    admissible_lambda, default_function_suite, lambda0_product, path_method_c0,
    semigroup_poincare_report, t1, talagrand_verdict, ConcentrationCertificate, SemigroupOptions,
    SumFunctionC3, DEFAULT_MARGIN,
};
use pjmp::simulator::{ergodic_average, estimate_jump_window};
use pjmp::spectral::{
    poincare_constant, stationary, stationary_with, total_variation, variance_and_energy,
    StationaryDistribution, StationaryOptions,
};
use pjmp::{
    assemble_generator, enumerate_states, EnumeratedSpace, IntensityFunction, JumpWindow,
    LyapunovCertificate, SparseGenerator, SynapticNetwork,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const RING2: &str = r#"{"n":2,"weights":[[0,1],[1,0]],"intensity":{"delta":1.5,"slope":1.5}}"#;

fn ring2() -> SynapticNetwork {
    SynapticNetwork::from_json_str(RING2).unwrap()
}

fn random_model(seed: u64) -> SynapticNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = vec![vec![Ratio::from_integer(0); 3]; 3];
    for (i, row) in w.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            if i != j {
                *v = Ratio::new(rng.random_range(0..4i64), 2);
            }
        }
    }
    let phi =
        IntensityFunction::new(rng.random_range(0.5..2.0), rng.random_range(0.5..2.0)).unwrap();
    SynapticNetwork::new(w, phi).unwrap()
}

struct Chain {
    space: EnumeratedSpace,
    gen: SparseGenerator,
    mu: StationaryDistribution,
}

fn chain(net: &SynapticNetwork, m_box: f64) -> Chain {
    let space = enumerate_states(net, &net.zero_state(), m_box, 2_000_000).unwrap();
    let gen = assemble_generator(net, &space).unwrap();
    let mu = stationary(&gen).unwrap();
    Chain { space, gen, mu }
}

fn table(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
}

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, u64);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Double-double value `hi + lo`, enough to evaluate `𝓛f² − 2f𝓛f` without
/// the cancellation that plain f64 suffers where Γ is small.
#[derive(Clone, Copy)]
struct Dd(f64, f64);

impl Dd {
    fn two_sum(a: f64, b: f64) -> Dd {
        let s = a + b;
        let bb = s - a;
        Dd(s, (a - (s - bb)) + (b - bb))
    }

    fn add(self, o: Dd) -> Dd {
        let Dd(s, e) = Dd::two_sum(self.0, o.0);
        let e = e + self.1 + o.1;
        Dd::two_sum(s, e)
    }

    fn mul(self, o: Dd) -> Dd {
        let p = self.0 * o.0;
        let e = self.0.mul_add(o.0, -p) + self.0 * o.1 + self.1 * o.0;
        Dd::two_sum(p, e)
    }

    fn neg(self) -> Dd {
        Dd(-self.0, -self.1)
    }
}

fn carre_du_champ_identity() -> Outcome {
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let models = [
        (ring2(), 20.0),
        (random_model(1), 4.0),
        (random_model(2), 4.0),
        (random_model(3), 4.0),
    ];
    for (net, m_box) in &models {
        let space = enumerate_states(net, &net.zero_state(), *m_box, 2_000_000)
            .map_err(|e| e.to_string())?;
        let gen = assemble_generator(net, &space).map_err(|e| e.to_string())?;
        for _ in 0..100 {
            let f = table(&mut rng, space.len());
            for (k, g) in gen.carre_du_champ(&f).iter().enumerate() {
                let fk = Dd(f[k], 0.0);
                let mut lf = Dd(0.0, 0.0);
                let mut lf2 = Dd(0.0, 0.0);
                for (j, r) in gen.row(k) {
                    let r = Dd(r, 0.0);
                    let fj = Dd(f[j], 0.0);
                    lf = lf.add(r.mul(fj.add(fk.neg())));
                    lf2 = lf2.add(r.mul(fj.mul(fj).add(fk.mul(fk).neg())));
                }
                let formula = lf2.add(Dd(2.0, 0.0).mul(fk).mul(lf).neg());
                let formula = 0.5 * (formula.0 + formula.1);
                worst = worst.max((g - formula).abs() / g.abs());
            }
        }
    }
    check(worst <= 1e-12, format!("max relative error {worst:.2e}"))
}

fn jump_window_oracles() -> Outcome {
    let net = ring2();
    let points = [
        ([0.0, 0.0], 0, 0.5),
        ([0.0, 0.0], 1, 1.0),
        ([1.0, 0.0], 0, 0.25),
        ([1.0, 0.0], 1, 0.6),
        ([2.0, 1.0], 0, 0.3),
    ];
    let grid: Vec<f64> = (1..=100).map(|k| 0.02 * k as f64).collect();
    let mut worst_z = 0.0f64;
    let mut worst_step = 0.0f64;
    for (seed, (x, i, s)) in points.iter().enumerate() {
        let x = net.state_from_values(x).map_err(|e| e.to_string())?;
        let w = JumpWindow::compute(&net, &x, *i, *s).map_err(|e| e.to_string())?;
        let at_s = estimate_jump_window(&net, &x, *i, &[*s], 1_000_000, seed as u64)
            .map_err(|e| e.to_string())?;
        worst_z = worst_z
            .max(at_s.p_none[0].z_score(w.p_none).abs())
            .max(at_s.p_single[0].z_score(w.p_single).abs());
        let curve = estimate_jump_window(&net, &x, *i, &grid, 1_000_000, 100 + seed as u64)
            .map_err(|e| e.to_string())?;
        let best = (0..grid.len())
            .max_by(|&a, &b| curve.p_single[a].mean.total_cmp(&curve.p_single[b].mean))
            .unwrap();
        worst_step = worst_step.max((grid[best] - w.t0).abs() / 0.02);
    }
    check(
        worst_z <= 4.0 && worst_step <= 1.0 + 1e-9,
        format!("max |z| {worst_z:.2}, argmax offset {worst_step:.2} grid steps"),
    )
}

fn stationarity() -> Outcome {
    let net = ring2();
    let c = chain(&net, 10.0);
    let power = stationary_with(
        &c.gen,
        &StationaryOptions {
            dense_cutoff: 0,
            ..Default::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let tv = total_variation(&power.probabilities, &c.mu.probabilities);
    let residual = c.mu.residual.max(power.residual);
    let big = chain(&net, 34.0);
    let exact = big.mu.expectation(&big.space.tabulate(|x| x.total()));
    let est = ergodic_average(&net, |x| x.total(), &net.zero_state(), 50.0, 100_050.0, 3)
        .map_err(|e| e.to_string())?;
    let z = est.z_score(exact);
    check(
        tv <= 1e-10 && residual <= 1e-10 && z.abs() <= 4.0,
        format!("TV {tv:.1e}, residual {residual:.1e}, ergodic z {z:.2}"),
    )
}

fn lyapunov() -> Outcome {
    let net = ring2();
    let cert = LyapunovCertificate::new(&net, 0.8).map_err(|e| e.to_string())?;
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b;
    let constants = close(cert.theta_drift, 1.2) && close(cert.b, 9.0) && close(cert.m, 34.0);
    let space = enumerate_states(&net, &net.zero_state(), 2.0 * cert.m, 2_000_000)
        .map_err(|e| e.to_string())?;
    let min = space
        .states()
        .iter()
        .map(|x| cert.slack(&net, x))
        .fold(f64::INFINITY, f64::min);
    check(
        constants && min >= -1e-12,
        format!(
            "(theta, b, m) = ({}, {}, {}), min slack {min} over {} states",
            cert.theta_drift,
            cert.b,
            cert.m,
            space.len()
        ),
    )
}

fn poincare() -> Outcome {
    let net = ring2();
    let c = chain(&net, 34.0);
    let mu = &c.mu.probabilities;
    let gap = poincare_constant(&c.gen, &c.mu).map_err(|e| e.to_string())?;
    let copt = gap.poincare_constant;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut best = 0.0f64;
    let mut violations = 0;
    for _ in 0..1000 {
        let f = table(&mut rng, c.space.len());
        let (var, energy) = variance_and_energy(&c.gen, mu, &f);
        if var > copt * energy + 1e-12 {
            violations += 1;
        }
        best = best.max(var / energy);
    }
    let achieved = (gap.eigenfunction_quotient / copt - 1.0).abs();
    let mut two_state = 0.0f64;
    for &(a, b) in &[(1.0, 1.0), (0.3, 4.0), (7.5, 0.01)] {
        let gen =
            SparseGenerator::from_triplets(2, [(0, 1, a), (1, 0, b)]).map_err(|e| e.to_string())?;
        let mu = stationary(&gen).map_err(|e| e.to_string())?;
        let g = poincare_constant(&gen, &mu).map_err(|e| e.to_string())?;
        two_state = two_state.max((g.poincare_constant - 1.0 / (a + b)).abs());
    }
    let mut path_ok = true;
    for (net, m_box) in [
        (ring2(), 34.0),
        (random_model(1), 4.0),
        (random_model(2), 4.0),
        (random_model(3), 4.0),
    ] {
        let c = chain(&net, m_box);
        let copt = poincare_constant(&c.gen, &c.mu)
            .map_err(|e| e.to_string())?
            .poincare_constant;
        let path = path_method_c0(&net, &c.gen, &c.mu.probabilities);
        path_ok &= path.c0_path.is_some_and(|p| p >= copt);
    }
    check(
        violations == 0 && best <= copt && achieved <= 1e-6 && two_state <= 1e-10 && path_ok,
        format!(
            "C_opt {copt:.10}, sup quotient {best:.10}, eigenfunction rel. error {achieved:.1e}, two-state error {two_state:.1e}, path bound ok {path_ok}"
        ),
    )
}

fn concentration() -> Outcome {
    let net = ring2();
    let c = chain(&net, 34.0);
    let mu = &c.mu.probabilities;
    let c0 = poincare_constant(&c.gen, &c.mu)
        .map_err(|e| e.to_string())?
        .poincare_constant;
    let c3 = SumFunctionC3::new(&net, &c.space, mu);
    let adm =
        admissible_lambda(c0, |l| c3.at(l), DEFAULT_MARGIN, 1e-12).map_err(|e| e.to_string())?;
    let fine = lambda0_product(c0, adm.c3, adm.lambda, 1e-14).map_err(|e| e.to_string())?;
    let drift = (adm.lambda0 / fine - 1.0).abs();
    let cert = ConcentrationCertificate {
        c0,
        c3: adm.c3,
        n0: c3.n0,
        lambda: adm.lambda,
        lambda0: adm.lambda0,
    };
    let f = c.space.tabulate(|x| x.total());
    let grid: Vec<f64> = (1..=12).map(f64::from).collect();
    let verdict = talagrand_verdict(&cert, mu, &f, &grid);
    check(
        (0.85..=0.95).contains(&adm.q) && drift <= 1e-10 && verdict.pass,
        format!(
            "q {:.6}, lambda {:.6e}, lambda0 {:.6}, refinement drift {drift:.1e}, tail PASS {}",
            adm.q, adm.lambda, adm.lambda0, verdict.pass
        ),
    )
}

fn semigroup() -> Outcome {
    let net = ring2();
    let c = chain(&net, 34.0);
    let mu = &c.mu.probabilities;
    let t1 = t1(&net, &c.space, mu).map_err(|e| e.to_string())?;
    let inner = 17.0;
    let suite = default_function_suite(&net, &c.space, inner + net.max_weight(), 0);
    let grid = [t1, 2.0 * t1, 4.0 * t1, 8.0 * t1];
    let opts = SemigroupOptions {
        inner_bound: inner,
        eps: 1e-12,
    };
    let r = semigroup_poincare_report(&net, &c.space, &c.gen, mu, &suite, &grid, opts)
        .map_err(|e| e.to_string())?;
    check(
        r.exponents_pass && r.outside_support.pass && suite.len() == 50,
        format!(
            "d1 slope {:?}, d2 slope {:?}, outside-support functions {} with max ratio {:.3}",
            r.d1_exponent, r.d2_exponent, r.outside_support.functions, r.outside_support.max_ratio
        ),
    )
}

fn truncation() -> Outcome {
    let net = ring2();
    let m = LyapunovCertificate::new(&net, 0.8)
        .map_err(|e| e.to_string())?
        .m;
    let stats = |m_box: f64| -> Result<(f64, f64), String> {
        let c = chain(&net, m_box);
        let mean = c.mu.expectation(&c.space.tabulate(|x| x.total()));
        let copt = poincare_constant(&c.gen, &c.mu)
            .map_err(|e| e.to_string())?
            .poincare_constant;
        Ok((mean, copt))
    };
    let (a_mean, a_c) = stats(m)?;
    let (b_mean, b_c) = stats(2.0 * m)?;
    let dm = (a_mean / b_mean - 1.0).abs();
    let dc = (a_c / b_c - 1.0).abs();
    check(
        dm < 0.01 && dc < 0.01,
        format!("mean change {dm:.1e}, C_opt change {dc:.1e}"),
    )
}

fn run_cli(args: &[&str], threads: usize, out: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_pjmp"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("PJMP_THREADS", threads.to_string())
        .status()
        .map_err(|e| e.to_string())?;
    if !status.success() {
        return Err(format!("{args:?} exited with {status}"));
    }
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(out)
        .map_err(|e| e.to_string())?
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    Ok(files)
}

fn determinism() -> Outcome {
    let model = concat!(env!("CARGO_MANIFEST_DIR"), "/models/ring2.json");
    let commands: [&[&str]; 7] = [
        &[
            "simulate",
            model,
            "--t",
            "5",
            "--replicas",
            "2000",
            "--seed",
            "7",
        ],
        &["stationary", model],
        &["gap", model],
        &["verify-lyapunov", model],
        &["verify-poincare", model, "--seed", "3"],
        &["concentration", model],
        &["semigroup-report", model, "--seed", "2"],
    ];
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut compared = 0;
    for (k, args) in commands.iter().enumerate() {
        let runs = [(1, "a"), (1, "b"), (4, "c")]
            .iter()
            .map(|(threads, tag)| run_cli(args, *threads, &dir.path().join(format!("{k}{tag}"))))
            .collect::<Result<Vec<_>, _>>()?;
        if runs[0] != runs[1] || runs[0] != runs[2] {
            return Err(format!("{} output differs between runs", args[0]));
        }
        compared += runs[0].len();
    }
    Ok(format!(
        "{} commands, {compared} files byte-identical across 2 runs and threads 1/4",
        commands.len()
    ))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("carre du champ identity", carre_du_champ_identity, 5),
        (
            "jump window closed form vs simulation",
            jump_window_oracles,
            60,
        ),
        ("stationarity", stationarity, 60),
        ("lyapunov drift", lyapunov, 5),
        ("poincare constant", poincare, 120),
        ("concentration pipeline", concentration, 60),
        ("semigroup growth orders", semigroup, 300),
        ("truncation robustness", truncation, 120),
        ("cli determinism", determinism, 600),
    ];
    let mut failures = 0;
    for (k, (name, run, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(*budget);
        let (pass, detail) = match outcome {
            Ok(d) => (in_time, d),
            Err(d) => (false, d),
        };
        failures += usize::from(!pass);
        println!(
            "criterion {}: {} {name}: {detail} [{:.2}s of {budget}s]",
            k + 1,
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    if failures > 0 {
        eprintln!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
