//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.
//!
//! Criteria 1-6 are exact or statistical property checks and take seconds.
//! Criteria 7-10 train models on the gamma and 3D Gaussian tasks (1e4
//! epochs, three seeds each) and take several minutes on one core.

use std::process::ExitCode;
use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use styleqgan::cli::{compare, generate, train_run, ComparisonReport, GenerateBackend, RunConfig};
use styleqgan::data::sample_gamma;
use styleqgan::discriminator::{generator_loss_and_grad, loss_generator, DiscriminatorParams};
use styleqgan::generator::{
    embed_standard_in_style, expectations_and_jacobian, output_state, Architecture, CircuitLayout, Generator,
    LatentVector,
};
use styleqgan::metrics::{data_augmentation_check, kl_1d, kl_divergence, AugmentationConfig, BinScale, Histogram, KL_EPSILON};
use styleqgan::noise::{noisy_final_state, relaxation_channel, GateCalibration, NoiseModel, QubitCalibration};
use styleqgan::rng::{stream, Stream};
use styleqgan::simulator::{
    estimate_expectations_shots, evolve_density, DensityMatrix, GateKind, GateOp, StateVector,
};

const SEEDS: [u64; 3] = [1, 2, 3];
const TRAINING_EPOCHS: usize = 10_000;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn rng(seed: u64) -> ChaCha8Rng {
    stream(seed, Stream::Evaluation)
}

fn angle(r: &mut ChaCha8Rng) -> f64 {
    r.random_range(-std::f64::consts::PI..std::f64::consts::PI)
}

fn random_gate(n: usize, r: &mut ChaCha8Rng) -> GateOp {
    let target = r.random_range(0..n);
    match (n > 1, r.random_range(0..3)) {
        (true, 2) => {
            let control = (target + r.random_range(1..n)) % n;
            GateOp::cry(control, target, angle(r))
        }
        (_, 0) => GateOp::rz(target, angle(r)),
        _ => GateOp::ry(target, angle(r)),
    }
}

fn random_noise(n: usize, r: &mut ChaCha8Rng) -> NoiseModel {
    let qubits = (0..n)
        .map(|_| {
            let t1 = r.random_range(20e-6..200e-6);
            QubitCalibration {
                p10: r.random_range(0.0..0.1),
                p01: r.random_range(0.0..0.1),
                t1_s: t1,
                t2_s: r.random_range(0.2 * t1..2.0 * t1),
            }
        })
        .collect();
    let gates = [GateKind::Ry, GateKind::Rz, GateKind::Cry]
        .into_iter()
        .map(|kind| GateCalibration {
            kind,
            qubits: None,
            error_prob: r.random_range(0.0..0.1),
            duration_s: r.random_range(0.0..5e-6),
        })
        .collect();
    NoiseModel {
        qubits,
        gates,
        idle_relaxation: r.random_bool(0.5),
    }
}

fn max_abs_diff(a: &StateVector, b: &StateVector) -> f64 {
    a.amplitudes()
        .iter()
        .zip(b.amplitudes())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

fn criterion_1() -> Outcome {
    let style: Vec<usize> = [CircuitLayout::gamma_1d(), CircuitLayout::gaussian_3d(), CircuitLayout::lhc()]
        .iter()
        .map(|l| l.n_params(Architecture::Style))
        .collect();
    let standard = CircuitLayout::lhc().n_params(Architecture::Standard);
    outcome(
        style == [10, 34, 62] && standard == 36,
        format!("style {style:?}, standard {standard} (expected [10, 34, 62], 36)"),
    )
}

fn criterion_2() -> Outcome {
    let layouts = [CircuitLayout::gamma_1d(), CircuitLayout::gaussian_3d(), CircuitLayout::lhc()];
    let mut r = rng(2);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let layout = &layouts[i % layouts.len()];
        let params: Vec<f64> = (0..layout.n_params(Architecture::Standard)).map(|_| angle(&mut r)).collect();
        let (style_layout, style_params) = embed_standard_in_style(layout, &params).unwrap();
        for _ in 0..20 {
            let z = LatentVector::sample(layout.d_latent, &mut r).0;
            let a = output_state(layout, Architecture::Standard, &params, &z).unwrap();
            let b = output_state(&style_layout, Architecture::Style, style_params.as_slice(), &z).unwrap();
            worst = worst.max(max_abs_diff(&a, &b));
        }
    }
    outcome(worst <= 1e-12, format!("max amplitude deviation {worst:.2e} over 2000 states (tol 1e-12)"))
}

fn criterion_3() -> Outcome {
    let layouts = [CircuitLayout::gamma_1d(), CircuitLayout::gaussian_3d(), CircuitLayout::lhc()];
    let mut r = rng(3);
    let h = 1e-6;
    let (mut worst_jac, mut worst_loss) = (0.0f64, 0.0f64);
    let n_configs = 60;
    for i in 0..n_configs {
        let layout = layouts[i % layouts.len()].clone();
        let architecture = if i % 2 == 0 { Architecture::Style } else { Architecture::Standard };
        let params: Vec<f64> = (0..layout.n_params(architecture)).map(|_| angle(&mut r)).collect();
        let z = LatentVector::sample(layout.d_latent, &mut r).0;
        let jac = expectations_and_jacobian(&layout, architecture, &params, &z).unwrap();
        for p in 0..params.len() {
            let mut plus = params.clone();
            let mut minus = params.clone();
            plus[p] += h;
            minus[p] -= h;
            let ep = styleqgan::generator::expectations(&layout, architecture, &plus, &z).unwrap();
            let em = styleqgan::generator::expectations(&layout, architecture, &minus, &z).unwrap();
            for q in 0..layout.n_qubits {
                let fd = (ep[q] - em[q]) / (2.0 * h);
                worst_jac = worst_jac.max((fd - jac.rows[q][p]).abs());
            }
        }

        let d = DiscriminatorParams::new_default(layout.n_qubits, &mut r).unwrap();
        let latents: Vec<Vec<f64>> = (0..8).map(|_| LatentVector::sample(layout.d_latent, &mut r).0).collect();
        let generator = Generator::new(architecture, layout.clone(), params.clone()).unwrap();
        let (_, grad) = generator_loss_and_grad(&d, &generator, &latents).unwrap();
        let loss_at = |ps: &[f64]| {
            let g = Generator::new(architecture, layout.clone(), ps.to_vec()).unwrap();
            let fakes: Vec<Vec<f64>> = latents.iter().map(|z| g.sample_exact(z).unwrap()).collect();
            loss_generator(&d, &fakes).unwrap()
        };
        for p in 0..params.len() {
            let mut plus = params.clone();
            let mut minus = params.clone();
            plus[p] += h;
            minus[p] -= h;
            let fd = (loss_at(&plus) - loss_at(&minus)) / (2.0 * h);
            worst_loss = worst_loss.max((fd - grad[p]).abs());
        }
    }
    outcome(
        worst_jac <= 1e-5 && worst_loss <= 1e-4,
        format!(
            "{n_configs} configurations: Jacobian max error {worst_jac:.2e} (tol 1e-5), L_G gradient max error {worst_loss:.2e} (tol 1e-4)"
        ),
    )
}

fn criterion_4() -> Outcome {
    let mut r = rng(4);
    let (mut norm_err, mut trace_err, mut herm_err, mut min_eig) = (0.0f64, 0.0f64, 0.0f64, f64::INFINITY);
    for i in 0..1000 {
        let n = 1 + i % 3;
        let gates: Vec<GateOp> = (0..r.random_range(1..=50)).map(|_| random_gate(n, &mut r)).collect();
        let mut state = StateVector::zero(n).unwrap();
        for g in &gates {
            state = state.apply(g).unwrap();
            norm_err = norm_err.max((state.norm_sqr() - 1.0).abs());
        }
        let model = random_noise(n, &mut r);
        let mut dm = DensityMatrix::from_pure(&StateVector::zero(n).unwrap());
        for g in gates.iter().take(12) {
            dm = evolve_density(&dm, g, Some(&model)).unwrap();
            trace_err = trace_err.max((dm.trace().re - 1.0).abs().max(dm.trace().im.abs()));
            herm_err = herm_err.max(dm.hermiticity_error());
            min_eig = min_eig.min(dm.min_eigenvalue());
        }
    }
    let passed = norm_err <= 1e-10 && trace_err <= 1e-12 && herm_err <= 1e-12 && min_eig >= -1e-9;
    outcome(
        passed,
        format!(
            "1000 circuits: norm error {norm_err:.1e}, trace error {trace_err:.1e}, hermiticity {herm_err:.1e}, min eigenvalue {min_eig:.1e}"
        ),
    )
}

fn criterion_5() -> Outcome {
    let mut r = rng(5);
    let mut ideal_err = 0.0f64;
    for i in 0..200 {
        let n = 1 + i % 3;
        let gates: Vec<GateOp> = (0..30).map(|_| random_gate(n, &mut r)).collect();
        let mut state = StateVector::zero(n).unwrap();
        for g in &gates {
            state = state.apply(g).unwrap();
        }
        let noisy = noisy_final_state(&gates, n, &NoiseModel::ideal(n)).unwrap();
        let pure = DensityMatrix::from_pure(&state);
        let diff = (noisy.entries() - pure.entries()).iter().map(|c| c.norm()).fold(0.0, f64::max);
        ideal_err = ideal_err.max(diff);
    }

    let mut fixed_err = 0.0f64;
    for _ in 0..100 {
        let gates: Vec<GateOp> = (0..20).map(|_| random_gate(3, &mut r)).collect();
        let mut state = StateVector::zero(3).unwrap();
        for g in &gates {
            state = state.apply(g).unwrap();
        }
        let (t1, t2) = (50e-6, 70e-6);
        let mut dm = DensityMatrix::from_pure(&state);
        for q in 0..3 {
            dm = relaxation_channel(&dm, q, t1, t2, 100.0 * t1).unwrap();
        }
        let mut ground = DensityMatrix::from_pure(&StateVector::zero(3).unwrap()).entries().clone();
        ground -= dm.entries();
        fixed_err = fixed_err.max(ground.iter().map(|c| c.norm()).fold(0.0, f64::max));
    }

    let mut state = StateVector::zero(3).unwrap();
    for g in [GateOp::ry(0, 1.1), GateOp::ry(1, 2.3), GateOp::cry(1, 2, 0.9), GateOp::rz(2, 0.4)] {
        state = state.apply(&g).unwrap();
    }
    let dist = state.probabilities();
    let shots = 1000u64;
    let estimates: Vec<Vec<f64>> = (0..200)
        .map(|seed| estimate_expectations_shots(&dist, shots, &mut stream(seed, Stream::Shots)).unwrap())
        .collect();
    let mut worst_rel = 0.0f64;
    for q in 0..3 {
        let exact = state.expectation_z(q).unwrap();
        let predicted = (1.0 - exact * exact) / shots as f64;
        let mean = estimates.iter().map(|e| e[q]).sum::<f64>() / estimates.len() as f64;
        let var = estimates.iter().map(|e| (e[q] - mean).powi(2)).sum::<f64>() / (estimates.len() - 1) as f64;
        worst_rel = worst_rel.max((var / predicted - 1.0).abs());
    }
    outcome(
        ideal_err <= 1e-10 && fixed_err <= 1e-9 && worst_rel <= 0.2,
        format!(
            "zero-noise deviation {ideal_err:.1e} (tol 1e-10), relaxation fixed point {fixed_err:.1e} (tol 1e-9), shot variance off by {:.1}% (tol 20%)",
            100.0 * worst_rel
        ),
    )
}

fn criterion_6() -> Outcome {
    let edges: Vec<f64> = vec![0.0, 1.0, 2.0];
    let mut p = Histogram::with_edges(edges.clone(), BinScale::Linear).unwrap();
    p.counts = vec![1, 0];
    let mut q = Histogram::with_edges(edges, BinScale::Linear).unwrap();
    q.counts = vec![1, 1];
    let self_kl = kl_divergence(&q, &q, KL_EPSILON).unwrap();
    let two_bin = kl_divergence(&p, &q, KL_EPSILON).unwrap();
    let mut r = rng(6);
    let a = sample_gamma(10_000, 1.0, 1.0, &mut r).unwrap().column(0);
    let b = sample_gamma(10_000, 1.0, 1.0, &mut r).unwrap().column(0);
    let ref_ref = kl_1d(&a, &b, 100, BinScale::Linear).unwrap();
    outcome(
        self_kl == 0.0 && (two_bin - 2f64.ln()).abs() <= 1e-12 && (0.01..=0.25).contains(&ref_ref),
        format!(
            "KL(H,H) = {self_kl}, two-bin {two_bin:.15} vs ln 2, Exponential(1) reference-vs-reference {ref_ref:.4} (band [0.01, 0.25])"
        ),
    )
}

struct GammaRun {
    seed: u64,
    kl_small: f64,
    kl_large_proportional: f64,
}

fn gamma_run(seed: u64) -> GammaRun {
    let config = RunConfig::from_json(&format!(
        r#"{{"dataset": "gamma", "n_samples": 10000, "epochs": {TRAINING_EPOCHS}, "seed": {seed}}}"#
    ))
    .unwrap();
    let (model, _) = train_run(&config, |_| Ok(())).unwrap();
    let generated = generate(&model, 100_000, &GenerateBackend::Exact, seed).unwrap();
    let mut reference_rng = rng(seed);
    let report = data_augmentation_check(
        |n| sample_gamma(n, 1.0, 1.0, &mut reference_rng),
        &generated,
        0,
        BinScale::Linear,
        &AugmentationConfig::default(),
    )
    .unwrap();
    GammaRun {
        seed,
        kl_small: report.kl_small,
        kl_large_proportional: report.kl_large_proportional,
    }
}

fn gaussian_compare(seed: u64) -> ComparisonReport {
    let config = RunConfig::from_json(&format!(
        r#"{{"dataset": "gaussian3d", "n_samples": 10000, "epochs": {TRAINING_EPOCHS}, "seed": {seed},
             "eval_samples": 10000, "eval_bins": 100}}"#
    ))
    .unwrap();
    compare(&config).unwrap()
}

fn criterion_7(runs: &[GammaRun]) -> Outcome {
    let passing = runs.iter().filter(|r| r.kl_small <= 0.30).count();
    let per_seed: Vec<String> = runs.iter().map(|r| format!("seed {}: {:.4}", r.seed, r.kl_small)).collect();
    outcome(
        passing >= 2,
        format!("gamma KL (1e4 vs 1e4, 100 bins) {} (need <= 0.30 for 2 of 3)", per_seed.join(", ")),
    )
}

fn criterion_8(runs: &[GammaRun]) -> Outcome {
    let qualified: Vec<&GammaRun> = runs.iter().filter(|r| r.kl_small <= 0.30).collect();
    let holds = qualified
        .iter()
        .filter(|r| r.kl_large_proportional <= r.kl_small + 0.05)
        .count();
    let per_seed: Vec<String> = runs
        .iter()
        .map(|r| format!("seed {}: {:.4} -> {:.4}", r.seed, r.kl_small, r.kl_large_proportional))
        .collect();
    outcome(
        qualified.len() >= 2 && holds == qualified.len(),
        format!(
            "KL (1e4, 100 bins) -> (1e5, 1000 bins) {} (need no increase beyond +0.05 for every criterion-7 model)",
            per_seed.join(", ")
        ),
    )
}

fn criterion_9(reports: &[ComparisonReport]) -> Outcome {
    let values: Vec<f64> = reports.iter().map(|r| r.rows[0].eigenvalue_agreement.unwrap()).collect();
    let passing = values.iter().filter(|&&v| v <= 0.15).count();
    let per_seed: Vec<String> = reports
        .iter()
        .zip(&values)
        .map(|(r, v)| format!("seed {}: {:.2}%", r.seed, 100.0 * v))
        .collect();
    outcome(
        passing >= 2,
        format!("style summed-eigenvalue agreement {} (need <= 15% for 2 of 3)", per_seed.join(", ")),
    )
}

fn criterion_10(reports: &[ComparisonReport]) -> Outcome {
    let mut passing = 0;
    let mut per_seed = Vec::new();
    for r in reports {
        let (style, standard) = (&r.rows[0], &r.rows[1]);
        let dims = style
            .kl_per_dimension
            .iter()
            .zip(&standard.kl_per_dimension)
            .filter(|(s, b)| **s <= **b + 0.05)
            .count();
        if dims >= 2 {
            passing += 1;
        }
        per_seed.push(format!(
            "seed {}: style {:.3?} vs standard {:.3?}",
            r.seed, style.kl_per_dimension, standard.kl_per_dimension
        ));
    }
    outcome(
        passing >= 2,
        format!("{} (need style <= standard + 0.05 in 2 of 3 dims for 2 of 3 seeds)", per_seed.join("; ")),
    )
}

fn print_line(id: usize, name: &str, o: &Outcome, seconds: f64) {
    let status = if o.passed { "PASS" } else { "FAIL" };
    println!("[{status}] criterion {id:>2} {name}: {} ({seconds:.1}s)", o.detail);
}

fn main() -> ExitCode {
    let quick: [(&str, fn() -> Outcome); 6] = [
        ("parameter counts", criterion_1),
        ("standard-in-style embedding", criterion_2),
        ("gradient correctness", criterion_3),
        ("simulator invariants", criterion_4),
        ("noise limits", criterion_5),
        ("KL metric", criterion_6),
    ];
    let mut all_passed = true;
    for (i, (name, check)) in quick.iter().enumerate() {
        let t = Instant::now();
        let o = check();
        all_passed &= o.passed;
        print_line(i + 1, name, &o, t.elapsed().as_secs_f64());
    }

    let t = Instant::now();
    let gamma: Vec<GammaRun> = SEEDS.iter().map(|&s| gamma_run(s)).collect();
    let gamma_time = t.elapsed().as_secs_f64();
    let o7 = criterion_7(&gamma);
    let o8 = criterion_8(&gamma);
    print_line(7, "1D gamma KL", &o7, gamma_time);
    print_line(8, "data augmentation", &o8, 0.0);

    let t = Instant::now();
    let reports: Vec<ComparisonReport> = SEEDS.iter().map(|&s| gaussian_compare(s)).collect();
    let gaussian_time = t.elapsed().as_secs_f64();
    let o9 = criterion_9(&reports);
    let o10 = criterion_10(&reports);
    print_line(9, "3D Gaussian eigenvalue agreement", &o9, gaussian_time);
    print_line(10, "style vs standard ordering", &o10, 0.0);

    all_passed &= o7.passed && o8.passed && o9.passed && o10.passed;
    if all_passed {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: some criteria failed");
        ExitCode::FAILURE
    }
}
