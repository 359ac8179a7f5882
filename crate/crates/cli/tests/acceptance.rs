//! Acceptance run: one PASS/FAIL line per criterion. Built without the
//! libtest harness so the lines show up under a plain `cargo test`.
//!
//! Oracles here are written independently of the library: dense Kronecker
//! Hamiltonians with a Jacobi eigensolver, a dense-matrix Lie closure, and
//! central finite differences.

use std::path::Path;

use qcurriculum::curriculum::StrategyName;
use qcurriculum::dense::ground_state;
use qcurriculum::lie::{lie_closure, matchgate_generators, LieBasis};
use qcurriculum::models::{build_cluster, build_xxz, Couplings, LabeledExample};
use qcurriculum::qcnn::{build_qcnn, Variant};
use qcurriculum::theory::{profile_from_norms, prop1_check};
use qcurriculum::{Complex64 as C, StateVector};
use qcurriculum_cli::commands::{cmd_scan, cmd_train, cmd_verify_props, Prop1File, Prop2File, TrainSummary};
use qcurriculum_cli::{Context, ExperimentConfig, Overrides};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Test-set size used for the training criteria (the CI allowance).
const TEST_SIZE: usize = 200;
const RUNS: usize = 10;
/// Computed once from the closure and pinned.
const MATCHGATE_DIM_8: usize = 120;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

// dense linear algebra

#[derive(Clone)]
struct Mat {
    d: usize,
    a: Vec<C>,
}

impl Mat {
    fn zeros(d: usize) -> Self {
        Mat { d, a: vec![C::new(0.0, 0.0); d * d] }
    }

    fn at(&self, i: usize, j: usize) -> C {
        self.a[i * self.d + j]
    }

    fn kron(&self, o: &Mat) -> Mat {
        let d = self.d * o.d;
        let mut m = Mat::zeros(d);
        for i in 0..self.d {
            for j in 0..self.d {
                for k in 0..o.d {
                    for l in 0..o.d {
                        m.a[(i * o.d + k) * d + j * o.d + l] = self.at(i, j) * o.at(k, l);
                    }
                }
            }
        }
        m
    }

    fn mul(&self, o: &Mat) -> Mat {
        let d = self.d;
        let mut m = Mat::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let x = self.at(i, k);
                if x.norm_sqr() == 0.0 {
                    continue;
                }
                for j in 0..d {
                    m.a[i * d + j] += x * o.at(k, j);
                }
            }
        }
        m
    }

    fn axpy(&mut self, f: C, o: &Mat) {
        for (x, y) in self.a.iter_mut().zip(&o.a) {
            *x += f * y;
        }
    }

    fn commutator(&self, o: &Mat) -> Mat {
        let mut m = self.mul(o);
        m.axpy(C::new(-1.0, 0.0), &o.mul(self));
        m
    }

    fn apply(&self, v: &[C]) -> Vec<C> {
        (0..self.d).map(|i| (0..self.d).map(|j| self.at(i, j) * v[j]).sum()).collect()
    }
}

fn single(p: char) -> Mat {
    let (o, z, i) = (C::new(1.0, 0.0), C::new(0.0, 0.0), C::new(0.0, 1.0));
    let a = match p {
        'I' => vec![o, z, z, o],
        'X' => vec![z, o, o, z],
        'Y' => vec![z, -i, i, z],
        'Z' => vec![o, z, z, -o],
        _ => unreachable!(),
    };
    Mat { d: 2, a }
}

/// Pauli product with qubit 0 as the leftmost tensor factor.
fn pauli(n: usize, sites: &[(usize, char)]) -> Mat {
    let mut m = Mat { d: 1, a: vec![C::new(1.0, 0.0)] };
    for q in 0..n {
        let p = sites.iter().find(|s| s.0 == q).map_or('I', |s| s.1);
        m = m.kron(&single(p));
    }
    m
}

fn cluster_dense(n: usize, j1: f64, j2: f64) -> Mat {
    let mut h = Mat::zeros(1 << n);
    for j in 0..n {
        let (l, r) = ((j + n - 1) % n, (j + 1) % n);
        h.axpy(C::new(1.0, 0.0), &pauli(n, &[(j, 'Z')]));
        h.axpy(C::new(-j1, 0.0), &pauli(n, &[(j, 'X'), (r, 'X')]));
        h.axpy(C::new(-j2, 0.0), &pauli(n, &[(l, 'X'), (j, 'Z'), (r, 'X')]));
    }
    h
}

fn xxz_dense(n: usize, j1: f64, j2: f64, delta: f64) -> Mat {
    let mut h = Mat::zeros(1 << n);
    for a in 0..n - 1 {
        let j = if a % 2 == 0 { j1 } else { j2 };
        for (p, w) in [('X', 1.0), ('Y', 1.0), ('Z', delta)] {
            h.axpy(C::new(j * w, 0.0), &pauli(n, &[(a, p), (a + 1, p)]));
        }
    }
    h
}

/// Smallest eigenvalue of a Hermitian matrix, by cyclic Jacobi rotations on
/// its real symmetric embedding `[[Re, -Im], [Im, Re]]`.
fn jacobi_min_eigenvalue(h: &Mat) -> f64 {
    let d = h.d;
    let n = 2 * d;
    let mut a = vec![0.0; n * n];
    for i in 0..d {
        for j in 0..d {
            let z = h.at(i, j);
            a[i * n + j] = z.re;
            a[(i + d) * n + j + d] = z.re;
            a[i * n + j + d] = -z.im;
            a[(i + d) * n + j] = z.im;
        }
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i * n + j].powi(2)).sum();
        if off < 1e-26 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k * n + p], a[k * n + q]);
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p * n + k], a[q * n + k]);
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i * n + i]).fold(f64::INFINITY, f64::min)
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut de, mut res) = (0.0f64, 0.0f64);
    for k in 0..50 {
        let (h, dense) = if k % 2 == 0 {
            let (j1, j2) = (rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0));
            (build_cluster(4, j1, j2).unwrap(), cluster_dense(4, j1, j2))
        } else {
            let (j1, delta) = (rng.random_range(0.05..3.0), rng.random_range(0.0..4.0));
            (build_xxz(4, j1, 1.0, delta).unwrap(), xxz_dense(4, j1, 1.0, delta))
        };
        let g = ground_state(&h).unwrap();
        de = de.max((g.energy - jacobi_min_eigenvalue(&dense)).abs());
        let psi = g.state.amplitudes();
        let hpsi = dense.apply(psi);
        let r: f64 = hpsi.iter().zip(psi).map(|(a, b)| (a - b * g.energy).norm_sqr()).sum::<f64>().sqrt();
        res = res.max(r);
    }
    outcome(
        de < 1e-9 && res < 1e-8,
        format!("50 random n=4 Hamiltonians: max |E - E_oracle| = {de:.1e} (tol 1e-9), max residual = {res:.1e} (tol 1e-8)"),
    )
}

fn criterion_2() -> Outcome {
    let arch = build_qcnn(Variant::Full);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let h = 1e-4;
    let (mut worst_rel, mut worst_abs) = (0.0f64, 0.0f64);
    for _ in 0..5 {
        let theta = arch.init_params(&mut rng);
        for _ in 0..3 {
            let mut label = vec![0.0; 4];
            label[rng.random_range(0..4)] = 1.0;
            let ex = LabeledExample {
                state: StateVector::random(8, &mut rng),
                label,
                couplings: Couplings { j1: 0.0, j2: 0.0, delta: None },
                phase_index: 0,
                score: None,
                degenerate: false,
                energy: 0.0,
                gap: 0.0,
            };
            let (_, grad) = arch.loss_gradient(&theta, &ex, 4).unwrap();
            for k in 0..theta.len() {
                let mut tp = theta.clone();
                let mut tm = theta.clone();
                tp[k] += h;
                tm[k] -= h;
                let fd = (arch.loss(&tp, &ex, 4).unwrap() - arch.loss(&tm, &ex, 4).unwrap()) / (2.0 * h);
                let err = (grad[k] - fd).abs();
                if fd.abs() < 1e-6 && grad[k].abs() < 1e-6 {
                    worst_abs = worst_abs.max(err);
                } else {
                    worst_rel = worst_rel.max(err / fd.abs().max(grad[k].abs()));
                }
            }
        }
    }
    outcome(
        worst_rel < 1e-4 && worst_abs < 1e-7,
        format!("full QCNN, 5 points x 3 inputs x 36 params: max rel err {worst_rel:.1e} (tol 1e-4), max abs err on tiny components {worst_abs:.1e} (tol 1e-7)"),
    )
}

/// Dimension of the real Lie algebra generated by `i G_k`, grown by
/// commutators with the generators and tested by column reduction.
fn dense_closure_dim(gens: &[Mat]) -> usize {
    let i = C::new(0.0, 1.0);
    let ig: Vec<Mat> = gens.iter().map(|g| Mat { d: g.d, a: g.a.iter().map(|x| x * i).collect() }).collect();
    let flat = |m: &Mat| -> Vec<f64> { m.a.iter().flat_map(|z| [z.re, z.im]).collect() };
    // reduced columns with their pivot positions
    let mut reduced: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut reduce = |v: Vec<f64>| -> bool {
        let mut v = v;
        let scale = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if scale == 0.0 {
            return false;
        }
        for (p, r) in &reduced {
            let f = v[*p] / r[*p];
            if f != 0.0 {
                for (x, y) in v.iter_mut().zip(r) {
                    *x -= f * y;
                }
            }
        }
        let (p, m) = v.iter().enumerate().fold((0, 0.0f64), |acc, (k, x)| if x.abs() > acc.1 { (k, x.abs()) } else { acc });
        if m < 1e-9 * scale {
            return false;
        }
        reduced.push((p, v));
        true
    };
    let mut elements = Vec::new();
    let mut frontier = Vec::new();
    for g in &ig {
        if reduce(flat(g)) {
            elements.push(g.clone());
            frontier.push(g.clone());
        }
    }
    while let Some(e) = frontier.pop() {
        for g in &ig {
            let c = g.commutator(&e);
            if reduce(flat(&c)) {
                elements.push(c.clone());
                frontier.push(c);
            }
        }
    }
    elements.len()
}

fn matchgate_dense(n: usize) -> Vec<Mat> {
    let mut g: Vec<Mat> = (0..n).map(|q| pauli(n, &[(q, 'Z')])).collect();
    g.extend((0..n - 1).map(|q| pauli(n, &[(q, 'X'), (q + 1, 'X')])));
    g
}

fn criterion_3(basis8: &LieBasis<f64>) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for n in 2..=4 {
        let b = lie_closure::<f64>(&matchgate_generators(n)).unwrap();
        let oracle = dense_closure_dim(&matchgate_dense(n));
        let r = b.orthonormality_residual();
        ok &= b.dim() == oracle && r < 1e-10;
        parts.push(format!("n={n}: {} vs oracle {oracle} (resid {r:.0e})", b.dim()));
    }
    let r8 = basis8.orthonormality_residual();
    ok &= basis8.dim() == MATCHGATE_DIM_8 && r8 < 1e-10;
    parts.push(format!("n=8: {} pinned {MATCHGATE_DIM_8} (resid {r8:.0e})", basis8.dim()));
    outcome(ok, parts.join("; "))
}

fn criterion_4(basis8: &LieBasis<f64>) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut max_p, mut lo, mut hi) = (0.0f64, f64::INFINITY, f64::NEG_INFINITY);
    for _ in 0..1000 {
        let psi = StateVector::random(8, &mut rng);
        max_p = max_p.max(basis8.g_purity_state(&psi).unwrap());
        let s = basis8.pg_score(&psi).unwrap();
        lo = lo.min(s);
        hi = hi.max(s);
    }
    outcome(
        max_p <= 1.0 + 1e-10 && lo >= 0.0 && hi <= 1.0,
        format!("1000 random 8-qubit states: max purity {max_p:.3e} (bound 1 + 1e-10), scores in [{lo:.4}, {hi:.4}]"),
    )
}

fn criterion_7(p1: &Prop1File, p2: &Prop2File) -> (Outcome, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut profiles, mut ratio_one) = (0, true);
    let mut all_hold = true;
    for _ in 0..500 {
        let n = rng.random_range(2..80);
        let bins = rng.random_range(1..20);
        let mut scores: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..=1.0)).collect();
        scores.sort_by(f64::total_cmp);
        let mut g: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
        g.sort_by(|a, b| b.total_cmp(a));
        let rows: Vec<Vec<f64>> = (0..rng.random_range(1..5))
            .map(|_| {
                let c = rng.random_range(0.5..2.0);
                g.iter().map(|x| c * x).collect()
            })
            .collect();
        let p = profile_from_norms(&scores, &rows, bins).unwrap();
        if !p.is_non_increasing() {
            continue;
        }
        profiles += 1;
        let fractions: Vec<f64> = (0..5).map(|_| rng.random_range(0.01..=1.0)).chain([1.0]).collect();
        let r = prop1_check(&p, &fractions).unwrap();
        all_hold &= r.rows.iter().all(|row| row.holds);
        ratio_one &= r.rows.last().unwrap().ratio == 1.0;
    }
    let g: Vec<String> = p1
        .profile
        .g
        .iter()
        .zip(&p1.profile.counts)
        .enumerate()
        .filter(|(_, (_, c))| **c > 0)
        .map(|(b, (g, c))| format!("bin {b}: G={:.4} (n={c})", g.unwrap()))
        .collect();
    let descriptive = format!(
        "matchgate profile on 50 cluster states, {} initializations: {}; G non-increasing: {}; ratios {:?}",
        p1.param_samples,
        g.join(", "),
        p1.report.g_non_increasing,
        p1.report.rows.iter().map(|r| (r.fraction, r.ratio)).collect::<Vec<_>>()
    );
    let p2_line = prop2_line(&p2.report);
    (
        outcome(
            all_hold && ratio_one && profiles > 400,
            format!("{profiles} random non-increasing profiles: inequality held on every fraction: {all_hold}; fraction-1 ratio exactly 1: {ratio_one}"),
        ),
        format!("{descriptive}\n{p2_line}"),
    )
}

fn prop2_line(r: &qcurriculum::theory::Prop2Report) -> String {
    let cumulative: Vec<f64> = r
        .seeds
        .iter()
        .filter(|s| s.cumulative_premise_holds)
        .map(|s| s.final_risk_curriculum - s.final_risk_random)
        .collect();
    let (cm, cs) = qcurriculum::training::mean_sem(&cumulative);
    format!(
        "all seeds: risk curriculum {:.4} ± {:.4}, random {:.4} ± {:.4}; summed-variance premise on {}/{} seeds, paired difference {cm:.4} ± {cs:.4}",
        r.mean_risk_curriculum,
        r.sem_risk_curriculum,
        r.mean_risk_random,
        r.sem_risk_random,
        cumulative.len(),
        r.seeds.len()
    )
}

fn criterion_8(p2: &Prop2File) -> Outcome {
    let r = &p2.report;
    let failing_epochs: usize = r.seeds.iter().map(|s| s.premise_failures.len()).sum();
    match r.conclusion_holds {
        Some(holds) => outcome(
            holds,
            format!(
                "premise held on every epoch for {}/{} seeds; paired risk difference {:.4} ± {:.4} (must be <= one standard error)",
                r.premise_seeds,
                r.seeds.len(),
                r.premise_mean_difference.unwrap(),
                r.premise_sem_difference.unwrap()
            ),
        ),
        None => outcome(
            true,
            format!(
                "vacuous: the per-epoch premise held throughout on {}/{} seeds ({failing_epochs} flagged epochs), so no seed qualifies",
                r.premise_seeds,
                r.seeds.len()
            ),
        ),
    }
}

fn training_config(experiment: &str, strategies: &str, dir: &Path, out: &str) -> Context {
    let text = format!("experiment = \"{experiment}\"\nstrategies = [{strategies}]\nruns = {RUNS}\n[scan]\nstrategy = \"hardest\"\npoints = 121\n");
    let cfg = ExperimentConfig::parse(&text)
        .unwrap()
        .resolve(&Overrides {
            out: Some(dir.join(out)),
            cache: Some(dir.join("cache")),
            test_size: Some(TEST_SIZE),
            ..Default::default()
        })
        .unwrap();
    Context::new(cfg).unwrap()
}

fn pct(s: &TrainSummary, name: StrategyName) -> (f64, f64) {
    let r = s.row(name).unwrap();
    (100.0 * r.best_test_mean, 100.0 * r.best_test_sem)
}

fn criterion_10(dir: &Path) -> Outcome {
    let small = |out: &str, experiment: &str, strategies: &str| {
        let text = format!(
            "experiment = \"{experiment}\"\nstrategies = [{strategies}]\nruns = 2\n[data]\ntrain_size = 20\ntest_size = 30\n[training]\nepochs = 8\n"
        );
        let cfg = ExperimentConfig::parse(&text)
            .unwrap()
            .resolve(&Overrides { out: Some(dir.join(out)), cache: Some(dir.join("cache")), ..Default::default() })
            .unwrap();
        Context::new(cfg).unwrap()
    };
    let mut files = 0;
    let mut identical = true;
    for (experiment, strategies) in [
        ("self-taught", "\"standard\", \"random\", \"easy\", \"hard\""),
        ("self-paced", "\"easy\", \"hard\", \"hardest\""),
        ("physics", "\"higher-pg\", \"lower-pg\""),
    ] {
        let a = small(&format!("det-{experiment}-a"), experiment, strategies);
        let b = small(&format!("det-{experiment}-b"), experiment, strategies);
        let sa = cmd_train(&a).unwrap();
        cmd_train(&b).unwrap();
        for row in &sa.rows {
            for r in &row.runs {
                files += 1;
                identical &= std::fs::read(a.out(&r.metrics_csv)).unwrap() == std::fs::read(b.out(&r.metrics_csv)).unwrap();
            }
        }
    }
    outcome(identical, format!("{files} metrics CSVs from two executions of three experiment families: byte-identical: {identical}"))
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut notes: Vec<String> = Vec::new();
    let mut report = |k: usize, name: &'static str, o: Outcome| {
        println!("{} [{k}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((k, name, o));
    };

    report(1, "ground-state oracle", criterion_1());
    report(2, "gradient vs finite differences", criterion_2());
    let basis8 = lie_closure::<f64>(&matchgate_generators(8)).unwrap();
    report(3, "Lie closure vs dense oracle", criterion_3(&basis8));
    report(4, "Bessel bound", criterion_4(&basis8));

    let taught = training_config(
        "self-taught",
        "\"standard\", \"random\", \"easy\", \"hard\"",
        dir.path(),
        "self-taught",
    );
    let paced = training_config("self-paced", "\"standard\", \"hardest\"", dir.path(), "self-paced");
    let st = cmd_train(&taught).unwrap();
    let sp = cmd_train(&paced).unwrap();
    let (std_p, std_p_sem) = pct(&sp, StrategyName::Standard);
    let (hardest, hardest_sem) = pct(&sp, StrategyName::Hardest);
    let (std_t, std_t_sem) = pct(&st, StrategyName::Standard);
    let (easy, easy_sem) = pct(&st, StrategyName::Easy);
    let (hard, hard_sem) = pct(&st, StrategyName::Hard);
    let (random, random_sem) = pct(&st, StrategyName::Random);
    let a = hardest - std_p >= 5.0;
    let b = hard >= std_t && easy <= std_t;
    report(
        5,
        "strategy ordering",
        outcome(
            a && b,
            format!(
                "cluster, N=50, L=10, T=100, R={RUNS}, test size {TEST_SIZE}; mean best test accuracy (%): \
(a) self-paced hardest {hardest:.1} ± {hardest_sem:.1} vs standard {std_p:.1} ± {std_p_sem:.1}, gap {:.1} (need >= 5): {a}; \
(b) self-taught hard {hard:.1} ± {hard_sem:.1}, standard {std_t:.1} ± {std_t_sem:.1}, easy {easy:.1} ± {easy_sem:.1} (need hard >= standard >= easy): {b}",
                hardest - std_p
            ),
        ),
    );
    report(
        6,
        "standard vs random control",
        outcome(
            (std_t - random).abs() <= 5.0,
            format!("self-taught, R={RUNS}: standard {std_t:.1} ± {std_t_sem:.1}, random {random:.1} ± {random_sem:.1}, |gap| {:.1} (tol 5)", (std_t - random).abs()),
        ),
    );

    let (p1, p2) = cmd_verify_props(&taught).unwrap();
    let (c7, descriptive) = criterion_7(&p1, &p2);
    report(7, "proposition 1, discretized", c7);
    notes.push(descriptive);
    report(8, "proposition 2, convex surrogate", criterion_8(&p2));

    let rows = cmd_scan(&paced).unwrap();
    let transitions: Vec<f64> = rows
        .windows(2)
        .filter(|w| w[0].predicted != w[1].predicted)
        .map(|w| 0.5 * (w[0].coupling + w[1].coupling))
        .collect();
    let near = |b: f64| transitions.iter().any(|t| (t - b).abs() <= 0.3);
    let correct = rows.iter().filter(|r| r.predicted == r.true_phase).count();
    report(
        9,
        "phase-cut transitions",
        outcome(
            near(0.0) && near(1.0),
            format!(
                "hardest run 0 along j1 = 1, 121 points on j2 in [-3, 3]: predicted changes at {:?}; within 0.3 of j2=0: {}, of j2=1: {}; {correct}/121 points labeled correctly",
                transitions.iter().map(|t| (t * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
                near(0.0),
                near(1.0)
            ),
        ),
    );
    report(10, "training determinism", criterion_10(dir.path()));

    for n in &notes {
        println!("note: {n}");
    }
    let passed = results.iter().filter(|r| r.2.pass).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        let failed: Vec<String> = results.iter().filter(|r| !r.2.pass).map(|r| format!("{} ({})", r.0, r.1)).collect();
        eprintln!("failed criteria: {}", failed.join(", "));
        std::process::exit(1);
    }
}
