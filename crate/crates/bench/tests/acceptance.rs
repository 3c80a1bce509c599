//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line
//! and then asserts the same condition.

use std::io::Write as _;
use std::process::Command;
use std::time::Instant;

use densebf::beamforming::{
    feasibility_solve, gamma_max_default, max_min_bisection, sinr, zf_baseline, ChannelRealization,
    Feasibility, NetworkConfig, QosTarget, ZfOutcome,
};
use densebf::cones::{project_factor, project_product};
use densebf::hsd::{apply_q, IterateState};
use densebf::{
    build_from_scratch, build_template, compute_dims, stuff, ConeFactor, ConeProduct, ConicProblem,
    FieldMode, HsdSolver, SolverSettings, Status, StuffParams,
};
use densebf_bench::channel::fading;
use densebf_bench::{bench_stuffing, run_rate_vs_density, run_rate_vs_snr, Scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Writes to the stdout handle rather than `println!`, which the test
/// harness captures, so the verdict lines show in a plain `cargo test`.
fn report(criterion: u32, name: &str, ok: bool, detail: String) {
    let verdict = if ok { "PASS" } else { "FAIL" };
    let line = format!("{verdict} [{criterion}] {name}: {detail}\n");
    let _ = std::io::stdout().lock().write_all(line.as_bytes());
    assert!(ok, "criterion {criterion} ({name}) failed: {detail}");
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn quiet(eps: f64) -> SolverSettings {
    SolverSettings {
        eps,
        verify_iterates: false,
        ..SolverSettings::default()
    }
}

/// Random complex network with unit noise and CN(0, I) channels.
fn random_network(
    r: &mut ChaCha8Rng,
    l: usize,
    k: usize,
    max_antennas: usize,
) -> (NetworkConfig, ChannelRealization) {
    let antennas: Vec<usize> = (0..l).map(|_| r.random_range(1..=max_antennas)).collect();
    let config = NetworkConfig {
        l,
        k,
        antennas: antennas.clone(),
        powers: (0..l).map(|_| r.random_range(0.5..4.0)).collect(),
        noise_powers: vec![1.0; k],
        weights: vec![1.0; k],
        field: FieldMode::Complex,
    };
    let h = (0..k)
        .map(|_| {
            antennas
                .iter()
                .map(|&n| (0..n).map(|_| fading(r, FieldMode::Complex)).collect())
                .collect()
        })
        .collect();
    (config, ChannelRealization::new(h))
}

fn stuffed(config: &NetworkConfig, h: &ChannelRealization, gamma: f64) -> ConicProblem {
    let dims = compute_dims(config.l, config.k, &config.antennas, config.field).unwrap();
    let (template, mut problem) = build_template(&dims).unwrap();
    let channels: Vec<_> = (0..config.k).map(|k| h.stacked(k)).collect();
    let noise: Vec<f64> = (0..config.k).map(|k| config.noise_std(k)).collect();
    let params = StuffParams {
        channels: &channels,
        powers: &config.powers,
        noise_std: &noise,
        weights: &config.weights,
        gamma,
    };
    stuff(&template, &mut problem, &params).unwrap();
    problem
}

/// Largest relative shortfall of any SINR and largest relative excess of
/// any per-AP power.
fn violations(
    config: &NetworkConfig,
    f: &Feasibility,
    h: &ChannelRealization,
    gamma: f64,
) -> (f64, f64) {
    let Feasibility::Feasible { beamformers, .. } = f else {
        return (f64::INFINITY, f64::INFINITY);
    };
    let target = QosTarget::new(gamma, &config.weights).unwrap();
    let sinr_short = (0..config.k)
        .map(|k| 1.0 - sinr(beamformers, h, k, config) / target.theta[k])
        .fold(f64::MIN, f64::max);
    let power_excess = (0..config.l)
        .map(|l| beamformers.ap_power(l) / config.powers[l] - 1.0)
        .fold(f64::MIN, f64::max);
    (sinr_short, power_excess)
}

#[test]
fn criterion_1_unit_instance() {
    let config = NetworkConfig::uniform(1, 1, 1, 4.0, 1.0, FieldMode::Real);
    let h = ChannelRealization::from_real(vec![vec![vec![2.0]]]);
    let start = Instant::now();
    let out = feasibility_solve(1.0, &h, &config, &SolverSettings::default()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let Feasibility::Feasible { beamformers, .. } = out else {
        panic!("unit instance reported {out:?}")
    };
    let v = beamformers.total_power().sqrt();
    report(
        1,
        "unit instance",
        (v - 0.5).abs() <= 1e-3 && secs < 1.0,
        format!("|v| = {v:.6}, {secs:.3} s"),
    );
}

#[test]
fn criterion_2_single_user_closed_form() {
    let mut r = rng(2);
    let settings = SolverSettings {
        normalize: true,
        alpha: 1.6,
        ..quiet(1e-3)
    };
    let start = Instant::now();
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let l = r.random_range(1..=5);
        let (config, h) = random_network(&mut r, l, 1, 3);
        let gain: f64 = (0..l)
            .map(|ap| config.powers[ap].sqrt() * norm_c(h.block(0, ap)))
            .sum();
        let closed = config.weights[0] * (1.0 + gain * gain / config.noise_powers[0]).log2();
        let out = max_min_bisection(&h, &config, &settings, 0.01).unwrap();
        worst = worst.max((out.gamma - closed).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        2,
        "single-user closed form",
        worst <= 0.01 && secs < 30.0,
        format!("max |γ − closed form| = {worst:.2e}, {secs:.2} s"),
    );
}

fn norm_c(x: &[num_complex::Complex64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Closest point of the boundary ray {s·(1, u) : s ≥ 0} to `w`.
fn ray_point(w: &[f64], u: &[f64]) -> Vec<f64> {
    let s = ((w[0] + dot(&w[1..], u)) / 2.0).max(0.0);
    std::iter::once(s).chain(u.iter().map(|x| s * x)).collect()
}

fn random_unit(r: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..d).map(|_| r.sample(StandardNormal)).collect();
    let n = norm(&v);
    v.into_iter().map(|x| x / n).collect()
}

/// Minimizes ‖x − w‖ over the SOC by search over boundary directions,
/// independent of the closed-form projection.
fn brute_force_soc(w: &[f64], r: &mut ChaCha8Rng) -> Vec<f64> {
    let d = w.len();
    if norm(&w[1..]) <= w[0] {
        return w.to_vec();
    }
    if d == 1 {
        return vec![0.0];
    }
    let cost = |u: &[f64]| dist(&ray_point(w, u), w);
    let mut u = random_unit(r, d - 1);
    let mut best = cost(&u);
    for _ in 0..4000 {
        let cand = random_unit(r, d - 1);
        let c = cost(&cand);
        if c < best {
            (u, best) = (cand, c);
        }
    }
    let mut step = 0.1;
    while step > 1e-13 {
        let mut improved = false;
        for i in 0..d - 1 {
            for sign in [-1.0, 1.0] {
                let mut cand = u.clone();
                cand[i] += sign * step;
                let n = norm(&cand);
                cand.iter_mut().for_each(|x| *x /= n);
                let c = cost(&cand);
                if c < best {
                    (u, best, improved) = (cand, c, true);
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    ray_point(w, &u)
}

fn random_factor(r: &mut ChaCha8Rng) -> ConeFactor {
    let dim = r.random_range(1..7);
    match r.random_range(0..4) {
        0 => ConeFactor::free(dim),
        1 => ConeFactor::zero(dim),
        2 => ConeFactor::nonneg(dim),
        _ => ConeFactor::soc(dim),
    }
}

#[test]
fn criterion_3_projection_oracle_and_properties() {
    let mut r = rng(3);
    let mut oracle_err = 0.0f64;
    for _ in 0..100 {
        let d = r.random_range(1..=5);
        let scale = 10f64.powf(r.random_range(-1.0..1.0));
        let w: Vec<f64> = (0..d)
            .map(|_| scale * r.sample::<f64, _>(StandardNormal))
            .collect();
        let fast = project_factor(&ConeFactor::soc(d), &w).unwrap();
        oracle_err = oracle_err.max(dist(&fast, &brute_force_soc(&w, &mut r)) / (1.0 + norm(&w)));
    }

    let (mut idem, mut expand, mut moreau) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..5000 {
        let f = random_factor(&mut r);
        let a: Vec<f64> = (0..f.dim())
            .map(|_| r.random_range(-100.0..100.0))
            .collect();
        let b: Vec<f64> = (0..f.dim())
            .map(|_| r.random_range(-100.0..100.0))
            .collect();
        let scale = 1.0 + norm(&a);
        let pa = project_factor(&f, &a).unwrap();
        let pb = project_factor(&f, &b).unwrap();
        idem = idem.max(dist(&project_factor(&f, &pa).unwrap(), &pa) / scale);
        expand = expand.max((dist(&pa, &pb) - dist(&a, &b)) / (1.0 + dist(&a, &b)));
        let neg: Vec<f64> = a.iter().map(|x| -x).collect();
        let q = project_factor(&f.dual(), &neg).unwrap();
        let recon: Vec<f64> = pa.iter().zip(&q).map(|(x, y)| x - y).collect();
        moreau = moreau
            .max(dist(&recon, &a) / scale)
            .max(dot(&pa, &q).abs() / (scale * scale));
        assert!(f.contains(&pa, 1e-12 * scale));
    }
    let mut blockwise = true;
    for _ in 0..500 {
        let cone = ConeProduct::new(
            (0..r.random_range(1..6))
                .map(|_| random_factor(&mut r))
                .collect(),
        );
        let w: Vec<f64> = (0..cone.total_dim())
            .map(|_| r.random_range(-50.0..50.0))
            .collect();
        let p = project_product(&cone, &w).unwrap();
        blockwise &= cone.blocks().all(|(off, f)| {
            p[off..off + f.dim()] == project_factor(f, &w[off..off + f.dim()]).unwrap()[..]
        });
    }
    let ok = oracle_err <= 1e-6 && idem <= 1e-12 && expand <= 1e-12 && moreau <= 1e-12 && blockwise;
    report(
        3,
        "projection oracle and properties",
        ok,
        format!(
            "oracle {oracle_err:.1e}, idempotence {idem:.1e}, expansion {expand:.1e}, Moreau {moreau:.1e}, blockwise {blockwise}"
        ),
    );
}

#[test]
fn criterion_4_solver_self_certification() {
    let mut r = rng(4);
    let eps = 1e-4;
    let settings = SolverSettings {
        max_iter: 100_000,
        normalize: true,
        ..quiet(eps)
    };
    let (mut optimal, mut worst_res, mut worst_sinr, mut worst_power, mut worst_alpha) =
        (0, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..20 {
        let (l, k) = (r.random_range(1..=4), r.random_range(1..=3));
        let (config, h) = random_network(&mut r, l, k, 2);
        let gamma = match zf_baseline(&h, &config).unwrap() {
            ZfOutcome::Applied { min_rate, .. } if min_rate > 0.0 => {
                r.random_range(0.3..0.9) * min_rate
            }
            _ => 0.1 * gamma_max_default(&h, &config),
        };
        let problem = stuffed(&config, &h, gamma);
        let plain = HsdSolver::new().solve(&problem, &settings).unwrap();
        if plain.status != Status::Optimal {
            continue;
        }
        optimal += 1;
        let res = plain.residuals;
        worst_res = worst_res.max(res.primal).max(res.dual).max(res.gap);

        let relaxed = HsdSolver::new()
            .solve(
                &problem,
                &SolverSettings {
                    alpha: 1.5,
                    ..settings.clone()
                },
            )
            .unwrap();
        let (a, b) = (
            plain.objective.unwrap(),
            relaxed.objective.unwrap_or(f64::NAN),
        );
        worst_alpha = worst_alpha.max((a - b).abs() / a.abs().max(b.abs()));

        let f = feasibility_solve(gamma, &h, &config, &settings).unwrap();
        let (s, p) = violations(&config, &f, &h, gamma);
        (worst_sinr, worst_power) = (worst_sinr.max(s), worst_power.max(p));
    }
    let ok = optimal > 0
        && worst_res <= eps
        && worst_sinr <= 1e-3
        && worst_power <= 1e-3
        && worst_alpha <= 1e-3;
    report(
        4,
        "solver self-certification",
        ok,
        format!(
            "{optimal}/20 optimal, max residual {worst_res:.1e}, SINR shortfall {worst_sinr:.1e}, power excess {worst_power:.1e}, α 1.0 vs 1.5 {worst_alpha:.1e}"
        ),
    );
}

#[test]
fn criterion_5_infeasibility_certificates() {
    let mut r = rng(5);
    let eps = SolverSettings::default().eps;
    let settings = SolverSettings {
        max_iter: 10_000,
        ..quiet(eps)
    };
    let mut failures = Vec::new();
    let mut max_iters = 0;
    for i in 0..10 {
        let (config, h) = random_network(&mut r, 1, 1, 3);
        let bound = config.powers[0] * norm_c(h.block(0, 0)).powi(2) / config.noise_powers[0];
        let gamma = (1.0 + r.random_range(1.1..3.0) * bound).log2();
        let problem = stuffed(&config, &h, gamma);
        let out = HsdSolver::new().solve(&problem, &settings).unwrap();
        max_iters = max_iters.max(out.iterations);
        let certified = out.status == Status::PrimalInfeasible
            && out.certificate.as_ref().is_some_and(|eta| {
                let mut aty = vec![0.0; problem.n()];
                problem.a().gemv_t(1.0, eta, &mut aty);
                dot(problem.b(), eta) < 0.0 && norm(&aty) <= eps * norm(eta)
            });
        if !certified {
            failures.push(format!("instance {i}: {:?}", out.status));
        }
    }
    report(
        5,
        "infeasibility certificates",
        failures.is_empty() && max_iters <= 10_000,
        format!("10 instances, max {max_iters} iterations, failures {failures:?}"),
    );
}

#[test]
fn criterion_6_stuffing_equivalence_and_speedup() {
    let mut r = rng(6);
    let mut equal = 0;
    for _ in 0..50 {
        let field = if r.random_bool(0.5) {
            FieldMode::Complex
        } else {
            FieldMode::Real
        };
        let (l, k) = (r.random_range(1..=5), r.random_range(1..=4));
        let antennas: Vec<usize> = (0..l).map(|_| r.random_range(1..=3)).collect();
        let dims = compute_dims(l, k, &antennas, field).unwrap();
        let channels: Vec<Vec<_>> = (0..k)
            .map(|_| {
                (0..dims.total_antennas)
                    .map(|_| fading(&mut r, field))
                    .collect()
            })
            .collect();
        let powers: Vec<f64> = (0..l).map(|_| r.random_range(0.1..10.0)).collect();
        let noise: Vec<f64> = (0..k).map(|_| r.random_range(0.1..2.0)).collect();
        let weights: Vec<f64> = (0..k).map(|_| r.random_range(0.5..2.0)).collect();
        let params = StuffParams {
            channels: &channels,
            powers: &powers,
            noise_std: &noise,
            weights: &weights,
            gamma: r.random_range(0.05..8.0),
        };
        let (template, mut problem) = build_template(&dims).unwrap();
        stuff(&template, &mut problem, &params).unwrap();
        equal += usize::from(problem.same_data(&build_from_scratch(&dims, &params).unwrap()));
    }
    let sc = Scenario {
        bench_aps: 20,
        bench_users: 10,
        antennas: vec![2],
        ..Scenario::default()
    };
    let perf = bench_stuffing(&sc).unwrap();
    report(
        6,
        "stuffing equivalence and speedup",
        equal == 50 && perf.speedup >= 5.0,
        format!(
            "{equal}/50 identical, median stuff {:.2e} s vs rebuild {:.2e} s, speedup {:.1}x",
            perf.median_stuff_secs, perf.median_rebuild_secs, perf.speedup
        ),
    );
}

#[test]
fn criterion_7_baseline_dominance_and_trends() {
    let start = Instant::now();
    let snr = run_rate_vs_snr(&Scenario {
        trials: 200,
        ..Scenario::default()
    })
    .unwrap();
    let density = run_rate_vs_density(&Scenario {
        trials: 100,
        ..Scenario::default()
    })
    .unwrap();
    let secs = start.elapsed().as_secs_f64();

    let records = snr.records.iter().chain(&density.records).flatten();
    let violations = records
        .filter(|t| t.ok() && t.zf_rate.is_some_and(|z| t.opt_rate < z))
        .count();
    let snr_gaps: Vec<String> = snr
        .rows
        .iter()
        .map(|row| format!("{}dB {:.3}", row.snr_db, row.mean_opt - row.mean_zf))
        .collect();
    let snr_ok = snr.rows.len() == 3 && snr.rows.iter().all(|row| row.mean_opt - row.mean_zf > 0.0);
    let density_ok = density.rows.windows(2).all(|w| {
        let se = w[0].stderr_gap.hypot(w[1].stderr_gap);
        w[1].mean_gap >= w[0].mean_gap - se
    });
    let density_gaps: Vec<String> = density
        .rows
        .iter()
        .map(|row| format!("{:.3}±{:.3}", row.mean_gap, row.stderr_gap))
        .collect();
    report(
        7,
        "baseline dominance and trends",
        violations == 0 && snr_ok && density_ok && density.rows.len() >= 2 && secs < 900.0,
        format!(
            "{violations} dominance violations, SNR gaps [{}], density gaps [{}], {secs:.0} s",
            snr_gaps.join(", "),
            density_gaps.join(", ")
        ),
    );
}

#[test]
fn criterion_8_iterate_invariants() {
    let mut r = rng(8);
    let mut cases = Vec::new();
    let unit = NetworkConfig::uniform(1, 1, 1, 4.0, 1.0, FieldMode::Real);
    let unit_h = ChannelRealization::from_real(vec![vec![vec![2.0]]]);
    cases.push(stuffed(&unit, &unit_h, 1.0));
    cases.push(stuffed(&unit, &unit_h, 18f64.log2()));
    for _ in 0..3 {
        let (config, h) = random_network(&mut r, 3, 3, 2);
        cases.push(stuffed(&config, &h, r.random_range(0.1..1.5)));
    }
    let (mut worst_comp, mut worst_quad, mut membership, mut iterations) =
        (0.0f64, 0.0f64, true, 0);
    for p in &cases {
        let (n, m) = (p.n(), p.m());
        let one = ConeProduct::new(vec![ConeFactor::nonneg(1)]);
        let cone_x = ConeProduct::new(vec![ConeFactor::free(n)])
            .concat(&p.cone().dual())
            .concat(&one);
        let cone_y = ConeProduct::new(vec![ConeFactor::zero(n)])
            .concat(p.cone())
            .concat(&one);
        for alpha in [1.0, 1.6] {
            let s = SolverSettings {
                alpha,
                verify_iterates: true,
                ..quiet(1e-12)
            };
            let mut solver = HsdSolver::new();
            let mut state = IterateState::initial(n, m);
            for _ in 0..2_000 {
                solver.iterate(p, &mut state, &s).unwrap();
                let (x, y) = (&state.x, &state.y);
                let (nx, ny) = (norm(x), norm(y));
                membership &= cone_x.contains(x, 1e-12 * (1.0 + nx))
                    && cone_y.contains(y, 1e-12 * (1.0 + ny));
                worst_comp = worst_comp.max(dot(x, y).abs() / (1.0 + nx * ny));
                worst_quad = worst_quad.max(dot(x, &apply_q(p, x).unwrap()).abs() / (nx * nx));
                iterations += 1;
            }
        }
    }
    report(
        8,
        "iterate invariants",
        membership && worst_comp <= 1e-8 && worst_quad <= 1e-10,
        format!(
            "{iterations} iterates, cone membership {membership}, max |xᵀy|/(1+‖x‖‖y‖) {worst_comp:.1e}, max |uᵀQu|/‖u‖² {worst_quad:.1e}"
        ),
    );
}

#[test]
fn criterion_9_deterministic_sweep() {
    let run = |threads: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_densebf"))
            .args([
                "sweep-snr",
                "--deterministic",
                "--seed",
                "9",
                "--trials",
                "6",
                "--threads",
                threads,
            ])
            .output()
            .expect("run densebf");
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        out.stdout
    };
    let (a, b, c) = (run("1"), run("1"), run("4"));
    report(
        9,
        "deterministic sweep",
        !a.is_empty() && a == b && a == c,
        format!(
            "{} bytes, repeat identical {}, thread count independent {}",
            a.len(),
            a == b,
            a == c
        ),
    );
}
