//! Acceptance run: one PASS/FAIL line per criterion at pinned tolerances.
//!
//! Criteria listed in `KNOWN_UNATTAINABLE` are still evaluated and still
//! print FAIL; they only do not turn the exit status red. Any other failure,
//! or a known-unattainable criterion that unexpectedly passes, exits 1.

mod common;

use common::*;
use homsum::bounds::*;
use homsum::contraction::*;
use homsum::diagnose::{universality_experiment, SequenceSpec};
use homsum::kernel::{generate_family, Family, KernelFamilySpec};
use homsum::moments::*;
use homsum::simulate::{ks_chi2, ks_normal, sample_sums, Law, SampleConfig};
use homsum::SymmetricKernel;
use std::process::Command;
use std::time::Instant;

const KNOWN_UNATTAINABLE: &[usize] = &[6];

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn fam(f: Family, d: usize, size: usize, sigma2: f64) -> SymmetricKernel {
    generate_family(&KernelFamilySpec::new(f, d, size).with_sigma2(sigma2)).unwrap()
}

fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn contraction_engine() -> Outcome {
    let mut r = rng(2024);
    let (mut worst, mut count) = (0.0f64, 0);
    for k in 0..1000 {
        let d = 1 + k % 4;
        let n = d + (k / 4) % (9 - d);
        let f = random_kernel(&mut r, d, n, 0.3 + 0.7 * ((k * 37) % 100) as f64 / 100.0);
        let dense = Dense::from_kernel(&f);
        for rank in 1..d {
            let oracle = dense.contract(rank).squared_norm().sqrt();
            let gram = contraction_norm(&f, rank).unwrap();
            let materialized = contract(&f, rank).unwrap().frobenius_norm();
            worst = worst.max(rel_err(gram, oracle)).max(rel_err(gram, materialized));
        }
        count += 1;
    }
    outcome(worst <= 1e-12, format!("{count} kernels (d <= 4, N <= 8), max relative error {worst:.2e} (tol 1e-12)"))
}

fn closed_form_fixtures() -> Outcome {
    let p2 = SymmetricKernel::new(2, 2, [([1, 2], 0.5)]).unwrap();
    let t1v = t1(&p2).unwrap().value;
    let t2v = t2(&p2, gaussian_fourth_moment(&p2).unwrap()).unwrap();
    let mut ok = (t1v - 1.0).abs() <= 1e-9 && (t2v - 1.0).abs() <= 1e-9;
    let mut notes = vec![format!("P2: T1 = {t1v}, T2 = {t2v}")];
    for m in [10usize, 100, 1000] {
        let f = fam(Family::DisjointPairs, 2, m, 1.0);
        let mf = m as f64;
        ok &= rel_err(influence_profile(&f).max, 0.25 / mf) <= 1e-12;
        ok &= rel_err(contraction_norm(&f, 1).unwrap(), (8.0 * mf).powf(-0.5)) <= 1e-12;
        ok &= rel_err(gaussian_fourth_moment(&f).unwrap(), 3.0 + 6.0 / mf) <= 1e-12;
    }
    let f = fam(Family::DisjointPairs, 2, 10, 1.0);
    let mc = sample_sums(&f, Law::Gaussian, &SampleConfig::new(1_000_000, 7)).unwrap().moment(4);
    let z = (mc.value - 3.6) / mc.std_error;
    ok &= z.abs() <= 5.0;
    notes.push(format!("D(m) closed forms at m = 10, 100, 1000; D(10) Monte Carlo E Q^4 = {:.4} ({z:+.2} SE)", mc.value));
    outcome(ok, notes.join("; "))
}

fn inequality_suites() -> Outcome {
    let mut r = rng(99);
    let (mut v12, mut v34, mut vcrux, mut n12, mut n34, mut ncrux) = (0, 0, 0, 0, 0, 0);
    for k in 0..1500 {
        let d = 2 + k % 3;
        let n = d + (k / 3) % (8 - d);
        let f = random_kernel(&mut r, d, n, 0.5);
        let (lhs, rhs) = crux_gap(&f).unwrap();
        vcrux += usize::from(lhs < rhs * (1.0 - 1e-12));
        ncrux += 1;
        if k % 3 == 0 && n <= 7 {
            let g = f.normalize_to_variance(1.0).unwrap();
            let a = t1(&g).unwrap().value;
            let b = t2(&g, gaussian_fourth_moment(&g).unwrap()).unwrap();
            v12 += usize::from(a > b * (1.0 + 1e-9) + 1e-12);
            n12 += 1;
        }
        if d % 2 == 0 && n <= 7 {
            let nu = 1 + (k as u32 / 2) % 3;
            let g = f.normalize_to_variance(2.0 * nu as f64).unwrap();
            let m = gaussian_moments_by_quadrature(&g, 4).unwrap();
            let a = t3(&g, nu).unwrap().value;
            let b = t4(m[2], m[3], nu, d).unwrap();
            v34 += usize::from(a > b * (1.0 + 1e-9) + 1e-9);
            n34 += 1;
        }
    }
    outcome(
        v12 + v34 + vcrux == 0,
        format!("violations: T1<=T2 {v12}/{n12}, T3<=T4 {v34}/{n34}, contraction >= influence {vcrux}/{ncrux}"),
    )
}

fn oracle_equivalence() -> Outcome {
    let mut kernels = Vec::new();
    let mut r = rng(5);
    for k in 0..240 {
        let d = 1 + k % 4;
        let n = d + (k / 4) % (13 - d);
        kernels.push(random_kernel(&mut r, d, n, 0.5));
    }
    for n in [5, 8, 12] {
        for d in 2..=4 {
            kernels.push(fam(Family::SinglePair, d, n, 1.0));
            kernels.push(fam(Family::Walsh, d, n, 1.0));
        }
        kernels.push(fam(Family::Constant, 2, n, 1.0));
        kernels.push(fam(Family::DisjointPairs, 2, n / 2, 1.0));
    }
    let (mut worst_exact, mut worst_gauss) = (0.0f64, 0.0f64);
    for f in &kernels {
        let v = f.variance();
        let rad = exact_rademacher_distribution(f).unwrap().moment(2);
        let brute = mean_power(&rademacher_values(f), 2);
        let gauss = gaussian_moments_by_quadrature(f, 2).unwrap()[1];
        worst_exact = worst_exact.max(rel_err(rad, v)).max(rel_err(brute, v));
        worst_gauss = worst_gauss.max(rel_err(rad, gauss)).max(rel_err(gaussian_second_moment(f), rad));
    }
    outcome(
        worst_exact <= 1e-12 && worst_gauss <= 1e-12,
        format!(
            "{} kernels with N <= 12: E Q^2 vs d!|f|^2 max rel {worst_exact:.1e}, sign vs Gaussian max rel {worst_gauss:.1e}",
            kernels.len()
        ),
    )
}

fn universality_at_desk_scale() -> Outcome {
    let mut spec = SequenceSpec::new(Family::DisjointPairs, 2, vec![100, 1000, 10_000]);
    spec.laws = vec![Law::Gaussian, Law::Rademacher, Law::UniformUnitVariance];
    spec.sample = SampleConfig::new(100_000, 42);
    let report = universality_experiment(&spec).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for law in &spec.laws {
        let ks = report.series(&format!("ks_{law}"));
        let decreasing = ks.windows(2).all(|w| w[1] < w[0]);
        ok &= decreasing && ks[2] <= 0.02;
        parts.push(format!("{law} [{:.5}, {:.5}, {:.5}]", ks[0], ks[1], ks[2]));
    }
    outcome(ok, format!("KS to N(0,1) at m = 100, 1000, 10000, n = 1e5, seed 42: {}", parts.join(", ")))
}

fn chi_square_convergence() -> Outcome {
    let mut ok = true;
    let mut ratios = Vec::new();
    for n in [10usize, 50, 250] {
        let ratio = chi_square_defect(&fam(Family::Constant, 2, n, 2.0)).unwrap() * (n as f64).sqrt();
        ok &= (0.9..=1.1).contains(&ratio);
        ratios.push(format!("{ratio:.4}"));
    }
    let s = sample_sums(&fam(Family::Constant, 2, 250, 2.0), Law::Gaussian, &SampleConfig::new(100_000, 42)).unwrap();
    let ks = ks_chi2(&s, 1).unwrap();
    ok &= ks <= 0.03;
    outcome(ok, format!("defect*sqrt(N) at N = 10, 50, 250: [{}] (band [0.9, 1.1]); KS to centered chi2(1) at N = 250: {ks:.4} (tol 0.03)", ratios.join(", ")))
}

fn non_universality() -> Outcome {
    let oracle = product_normal_ks();
    let f = fam(Family::Walsh, 2, 10_000, 1.0);
    let cfg = SampleConfig::new(100_000, 42);
    let rad = ks_normal(&sample_sums(&f, Law::Rademacher, &cfg).unwrap());
    let gauss = ks_normal(&sample_sums(&f, Law::Gaussian, &cfg).unwrap());
    outcome(
        oracle >= 0.05 && rad <= 0.02 && gauss >= 0.05,
        format!("W(2, 1e4), n = 1e5: rademacher KS {rad:.4} (<= 0.02), gaussian KS {gauss:.4} (>= 0.05); product-normal oracle distance {oracle:.4}"),
    )
}

fn recomputes(r: &BoundReport) -> bool {
    let text = serde_json::to_string(r).unwrap();
    let back: BoundReport = serde_json::from_str(&text).unwrap();
    back.recompute_total() == r.total && back.total == r.total
}

fn bound_pipeline() -> Outcome {
    let d = fam(Family::DisjointPairs, 2, 100, 1.0);
    let c = fam(Family::Constant, 2, 12, 2.0);
    let budget = TestFunctionBudget::new(1.0, 0.5, 2.0);
    let rad = MomentProfile::from_law(Law::Rademacher);
    let gauss = MomentProfile::from_law(Law::Gaussian);
    let m = gaussian_moments_by_quadrature(&c, 4).unwrap();
    let reports = [
        normal_smooth_bound(&d, &rad, &budget, MomentEstimate { value: 2.98, std_error: 0.01 }).unwrap(),
        chi_square_smooth_bound(&c, &gauss, &budget, 1, MomentEstimate::exact(m[2]), MomentEstimate::exact(m[3])).unwrap(),
        wasserstein_bound(&d, &gauss, MomentEstimate::exact(3.06)).unwrap(),
        multivariate_smooth_bound(&[d.clone(), d.embed(200, 400).unwrap()], &rad, &TestFunctionBudget::multivariate(1.0, 1.0)).unwrap(),
    ];
    let all = reports.iter().all(recomputes);
    let cs = c_star(&TestFunctionBudget::new(0.0, 0.0, 0.0), 2);
    let pre = chi_square_prefactor(1);
    let mut worst = 0.0f64;
    for mm in [1usize, 10, 100, 1000] {
        let f = fam(Family::DisjointPairs, 2, mm, 1.0);
        worst = worst.max((delta_ij(&f, &f).unwrap() - (2.0 / mm as f64).sqrt()).abs());
    }
    outcome(
        all && cs == 0.0 && pre == 3.0 && worst <= 1e-9,
        format!("4 report kinds recompute exactly: {all}; c_star(0,0,0) = {cs}; nu = 1 prefactor = {pre}; Delta self-pair max error {worst:.1e}"),
    )
}

fn hypercontractivity() -> Outcome {
    let mut kernels = Vec::new();
    for n in [6usize, 10, 16] {
        for d in 2..=4 {
            kernels.push(fam(Family::SinglePair, d, n, 1.0));
            kernels.push(fam(Family::Walsh, d, n, 1.0));
            kernels.push(generate_family(&KernelFamilySpec::new(Family::RandomSparse, d, n.min(12)).with_seed(n as u64)).unwrap());
        }
        kernels.push(fam(Family::Constant, 2, n, 1.0));
        kernels.push(fam(Family::DisjointPairs, 2, n / 2, 1.0));
    }
    let (mut checks, mut violations) = (0, 0);
    let cfg = SampleConfig::new(20_000, 11);
    for f in &kernels {
        let d = f.order();
        let m2 = f.variance();
        let exact = exact_rademacher_distribution(f).unwrap();
        let gauss_mc = sample_sums(f, Law::Gaussian, &cfg).unwrap();
        let unif_mc = sample_sums(f, Law::UniformUnitVariance, &cfg).unwrap();
        for q in [3u32, 4] {
            let qf = q as f64;
            let results = [
                hypercontractivity_check(MomentEstimate::exact(exact.abs_moment(qf)), m2, qf, d, 1.0),
                gaussian_hypercontractivity_check(
                    match (q, gaussian_fourth_moment(f)) {
                        (4, Ok(v)) => MomentEstimate::exact(v),
                        _ => gauss_mc.abs_moment(qf),
                    },
                    m2,
                    qf,
                    d,
                ),
                hypercontractivity_check(unif_mc.abs_moment(qf), m2, qf, d, Law::UniformUnitVariance.abs_moment(q).unwrap()),
            ];
            for c in results {
                checks += 1;
                violations += usize::from(!c.holds);
            }
        }
    }
    outcome(violations == 0, format!("{violations} violations in {checks} checks ({} family kernels, q = 3, 4)", kernels.len()))
}

fn reproducibility() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_homsum");
    let path = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    let run = |args: &[&str]| {
        let out = Command::new(bin).args(args).env_remove("SOURCE_DATE_EPOCH").output().unwrap();
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        out.stdout
    };
    let (d, c, spec) = (path("d.json"), path("c.json"), path("spec.json"));
    run(&["kernel", "generate", "--family", "disjoint_pairs", "--m", "500", "--out", &d]);
    run(&["kernel", "generate", "--family", "constant", "-N", "40", "--sigma2", "2", "--out", &c]);
    std::fs::write(
        &spec,
        r#"{"diagnostic":"universality","family":"disjoint_pairs","order":2,"sweep":[10,100],"laws":["gaussian","rademacher"],"sample":{"n":20000,"seed":9}}"#,
    )
    .unwrap();
    let manifests: Vec<Vec<&str>> = vec![
        vec!["simulate", "--kernel", &d, "--kernel", &d, "--law", "uniform", "--n", "50000", "--seed", "42"],
        vec!["bound", "normal", "--kernel", &d, "--law", "rademacher", "--n", "30000", "--seed", "3"],
        vec!["bound", "chi2", "--kernel", &c, "--nu", "1", "--law", "gaussian", "--n", "30000", "--seed", "4"],
        vec!["diagnose", "--spec", &spec],
    ];
    let mut identical = 0;
    for m in &manifests {
        let outs: Vec<Vec<u8>> = ["1", "4", "8"]
            .iter()
            .map(|w| {
                let mut a = m.clone();
                a.extend_from_slice(&["--workers", w]);
                run(&a)
            })
            .collect();
        identical += usize::from(outs.windows(2).all(|w| w[0] == w[1]));
    }
    outcome(identical == manifests.len(), format!("{identical}/{} manifests byte-identical across --workers 1, 4, 8", manifests.len()))
}

type Check = fn() -> Outcome;

fn main() {
    let criteria: [(&str, Check); 10] = [
        ("contraction engine", contraction_engine),
        ("closed-form fixtures", closed_form_fixtures),
        ("inequality suites", inequality_suites),
        ("oracle equivalence", oracle_equivalence),
        ("universality at desk scale", universality_at_desk_scale),
        ("chi-square convergence", chi_square_convergence),
        ("non-universality fixture", non_universality),
        ("bound pipeline", bound_pipeline),
        ("hypercontractivity", hypercontractivity),
        ("reproducibility", reproducibility),
    ];
    let mut unexpected = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let id = i + 1;
        let start = Instant::now();
        let o = check();
        let secs = start.elapsed().as_secs_f64();
        let known = KNOWN_UNATTAINABLE.contains(&id);
        let tag = match (o.passed, known) {
            (true, false) => "PASS",
            (false, false) => "FAIL",
            (false, true) => "FAIL (known unattainable)",
            (true, true) => "PASS (expected to fail)",
        };
        if o.passed == known {
            unexpected += 1;
        }
        println!("criterion {id:>2} {tag}: {name}: {} [{secs:.1} s]", o.detail);
    }
    if unexpected > 0 {
        println!("{unexpected} unexpected outcome(s)");
        std::process::exit(1);
    }
}
