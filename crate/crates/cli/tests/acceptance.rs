//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Tolerances and margins are pinned below.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use syncos_cli::{execute, RunConfig, SamplerKind};
use syncos_core::chunking::{contribution_counts, fuse, make_layout, take_chunks, ChunkLayout};
use syncos_core::conditioning::{null_condition, StructuredCondition};
use syncos_core::denoiser::{analytic_epsilon, analytic_velocity};
use syncos_core::diffusion::{ddim_step, effective_noise, flow_step, TimestepGrid};
use syncos_core::distill::{csd_gradients, flow_sds_gradient, sds_gradient, KernelParams};
use syncos_core::samplers::*;
use syncos_core::*;

const FUSION_TOL: f64 = 1e-12;
const ORACLE_FINAL_TOL: f64 = 1e-6;
const ORACLE_TWEEDIE_TOL: f64 = 1e-9;
const SCORE_REL_TOL: f64 = 1e-4;
const CSD_LOOP_TOL: f64 = 1e-10;
const UNCOUPLED_TOL: f64 = 1e-9;
const EULER_RATIO: (f64, f64) = (1.7, 2.3);
/// Frozen after pilot runs over the same ten seeds.
const SPREAD_MARGIN_CSD: f64 = 0.05;
const SPREAD_MARGIN_GLV: f64 = 0.0;
const FIDELITY_MARGIN: f64 = 0.05;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(label: &str, start: Instant, bound: Duration) -> Result<(), String> {
    let took = start.elapsed();
    ensure(took < bound, || format!("{label} took {took:?}, bound {bound:?}"))
}

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn default_config() -> RunConfig {
    RunConfig::load(&repo_root().join("configs/default.json")).expect("default config")
}

fn fusion_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let f = rng.random_range(1..=16);
        let s = rng.random_range(1..=f);
        let total = rng.random_range(f..=64);
        let dim = rng.random_range(1..=4);
        let layout = make_layout(total, f, s).map_err(|e| e.to_string())?;
        let chunks: Vec<_> = (0..layout.num_chunks())
            .map(|_| FrameSequence::standard_normal(f, dim, &mut rng))
            .collect();
        let got = fuse(&chunks, &layout).map_err(|e| e.to_string())?;
        // Brute force: for every frame, average every chunk value that
        // lands on it.
        for j in 0..total {
            for c in 0..dim {
                let mut sum = 0.0;
                let mut n = 0usize;
                for (i, &st) in layout.starts().iter().enumerate() {
                    if st <= j && j < st + f {
                        sum += chunks[i].get(j - st, c);
                        n += 1;
                    }
                }
                ensure(n == contribution_counts(&layout)[j], || "count mismatch".into())?;
                worst = worst.max((got.get(j, c) - sum / n as f64).abs());
            }
        }
    }
    ensure(worst <= FUSION_TOL, || format!("max error {worst:e}"))?;
    within("fusion oracle", start, Duration::from_secs(5))?;
    Ok(format!("200 layouts, max error {worst:.2e} in {:?}", start.elapsed()))
}

fn oracle_exactness() -> Outcome {
    let start = Instant::now();
    let schedule = NoiseSchedule::reference();
    let mut rng = ChaCha8Rng::seed_from_u64(2002);
    let mut layouts = vec![(16, 8, 4), (8, 8, 8), (17, 5, 3), (30, 7, 7)];
    for _ in 0..4 {
        let f = rng.random_range(1..=12);
        layouts.push((rng.random_range(f..=40), f, rng.random_range(1..=f)));
    }
    let (mut worst_final, mut worst_tweedie) = (0.0f64, 0.0f64);
    for (k, &(frames, f, s)) in layouts.iter().enumerate() {
        let layout = make_layout(frames, f, s).map_err(|e| e.to_string())?;
        let truth = FrameSequence::standard_normal(frames, 6, &mut rng);
        let oracle = OracleDenoiser::new(&truth, &layout, schedule.clone(), Objective::Epsilon)
            .map_err(|e| e.to_string())?;
        let conditions: Vec<_> = (0..layout.num_chunks())
            .map(|i| StructuredCondition::for_id(i, vec![], vec![]))
            .collect();
        let config = SamplerConfig { seed: k as u64, ..Default::default() };
        let setup = SamplingSetup {
            denoiser: &oracle,
            schedule: &schedule,
            layout: &layout,
            conditions: &conditions,
            dim: 6,
            config: &config,
        };
        let (x, trace) = syncos_sample(&setup).map_err(|e| e.to_string())?;
        let glv = sample_gen_l_video(&setup).map_err(|e| e.to_string())?.0;
        let per = sample_per_chunk_ddim(&setup).map_err(|e| e.to_string())?;
        for out in [&x, &glv, &per] {
            worst_final = worst_final.max(out.max_abs_diff(&truth));
        }
        let true_chunks = take_chunks(&truth, &layout).map_err(|e| e.to_string())?;
        for e in trace.stage_events(Stage::Predict) {
            for (c, t) in e.chunks.iter().zip(&true_chunks) {
                worst_tweedie = worst_tweedie.max(c.max_abs_diff(t));
            }
        }
    }
    ensure(worst_final <= ORACLE_FINAL_TOL, || format!("final error {worst_final:e}"))?;
    ensure(worst_tweedie <= ORACLE_TWEEDIE_TOL, || format!("tweedie error {worst_tweedie:e}"))?;
    within("oracle exactness", start, Duration::from_secs(5))?;
    Ok(format!(
        "{} layouts x 3 samplers, final {worst_final:.2e}, tweedie {worst_tweedie:.2e}",
        layouts.len()
    ))
}

/// Log density of the noised mixture, written out independently of the
/// library's own helper.
fn log_marginal(x: &[f64], means: &[Vec<f64>], cond: Option<usize>, ab: f64, sigma0: f64) -> f64 {
    let var = ab * sigma0 * sigma0 + 1.0 - ab;
    let comp = |mu: &[f64]| -> f64 {
        let sq: f64 = x.iter().zip(mu).map(|(a, m)| (a - ab.sqrt() * m).powi(2)).sum();
        -0.5 * x.len() as f64 * (2.0 * std::f64::consts::PI * var).ln() - sq / (2.0 * var)
    };
    match cond {
        Some(c) => comp(&means[c]),
        None => {
            let w = 1.0 / means.len() as f64;
            means.iter().map(|m| w * comp(m).exp()).sum::<f64>().ln()
        }
    }
}

fn analytic_score() -> Outcome {
    let schedule = NoiseSchedule::reference();
    let mut rng = ChaCha8Rng::seed_from_u64(3003);
    let sigma0 = 0.3;
    let means: Vec<Vec<f64>> = (0..3)
        .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let world = GaussianMixtureWorld::uniform(means.clone(), sigma0).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for k in 0..100 {
        let t = rng.random_range(1..=1000);
        let ab = schedule.alpha_bar(t).unwrap();
        let cond = if k % 4 == 3 { None } else { Some(rng.random_range(0..3)) };
        let condition = match cond {
            Some(c) => StructuredCondition::for_id(c, vec![], vec![]),
            None => null_condition(),
        };
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
        let xt = FrameSequence::from_vec(1, 4, x.clone()).unwrap();
        let eps = analytic_epsilon(&world, &xt, &condition, t, &schedule).map_err(|e| e.to_string())?;
        let h = 1e-5;
        let fd: Vec<f64> = (0..4)
            .map(|c| {
                let (mut p, mut m) = (x.clone(), x.clone());
                p[c] += h;
                m[c] -= h;
                let grad = (log_marginal(&p, &means, cond, ab, sigma0) - log_marginal(&m, &means, cond, ab, sigma0))
                    / (2.0 * h);
                -(1.0 - ab).sqrt() * grad
            })
            .collect();
        let num: f64 = eps.value.as_slice().iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let den: f64 = fd.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        worst = worst.max(num / den);
    }
    ensure(worst < SCORE_REL_TOL, || format!("relative error {worst:e}"))?;
    Ok(format!("100 points, max relative error {worst:.2e}"))
}

fn csd_reduction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4004);
    for _ in 0..100 {
        let (f, d) = (rng.random_range(1..6), rng.random_range(1..6));
        let x = FrameSequence::standard_normal(f, d, &mut rng);
        let p = Prediction::epsilon(FrameSequence::standard_normal(f, d, &mut rng));
        let e = FrameSequence::standard_normal(f, d, &mut rng);
        let w = rng.random_range(0.1..3.0);
        let csd = csd_gradients(&[x], &[p.clone()], &[e.clone()], w, KernelParams::MedianHeuristic)
            .map_err(|e| e.to_string())?;
        let sds = sds_gradient(&p, &e, w).map_err(|e| e.to_string())?;
        let bitwise = csd[0].as_slice().iter().zip(sds.as_slice()).all(|(a, b)| a.to_bits() == b.to_bits());
        ensure(bitwise, || "N=1 not bitwise equal to SDS".into())?;
    }
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let n = 3;
        let xs: Vec<_> = (0..n).map(|_| FrameSequence::standard_normal(4, 3, &mut rng)).collect();
        let ps: Vec<_> = (0..n).map(|_| Prediction::epsilon(FrameSequence::standard_normal(4, 3, &mut rng))).collect();
        let es: Vec<_> = (0..n).map(|_| FrameSequence::standard_normal(4, 3, &mut rng)).collect();
        let h = rng.random_range(0.5..4.0);
        let w = 0.7;
        let got = csd_gradients(&xs, &ps, &es, w, KernelParams::Fixed(h)).map_err(|e| e.to_string())?;
        for i in 0..n {
            for k in 0..12 {
                let mut expect = 0.0;
                for j in 0..n {
                    let (a, b) = (xs[j].as_slice(), xs[i].as_slice());
                    let sq: f64 = a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum();
                    let kern = (-sq / (2.0 * h * h)).exp();
                    let dk = -(a[k] - b[k]) / (h * h) * kern;
                    expect += kern * (ps[i].value.as_slice()[k] - es[i].as_slice()[k]) + dk;
                }
                expect *= w / n as f64;
                worst = worst.max((got[i].as_slice()[k] - expect).abs());
            }
        }
    }
    ensure(worst <= CSD_LOOP_TOL, || format!("N=3 loop error {worst:e}"))?;
    Ok(format!("N=1 bitwise over 100 instances; N=3 max error {worst:.2e}"))
}

struct Toy {
    schedule: NoiseSchedule,
    layout: ChunkLayout,
    conditions: Vec<StructuredCondition>,
    denoiser: AnalyticDenoiser,
}

fn toy(frames: usize, f: usize, s: usize, objective: Objective) -> Toy {
    let schedule = NoiseSchedule::reference();
    let layout = make_layout(frames, f, s).unwrap();
    let sc = syncos_core::conditioning::build_scenario(layout.num_chunks(), 8, 0.5, 5).unwrap();
    Toy {
        denoiser: AnalyticDenoiser::new(sc.world(0.25).unwrap(), schedule.clone(), objective),
        conditions: syncos_core::conditioning::chunk_conditions(&sc),
        schedule,
        layout,
    }
}

impl Toy {
    fn setup<'a>(&'a self, config: &'a SamplerConfig) -> SamplingSetup<'a> {
        SamplingSetup {
            denoiser: &self.denoiser,
            schedule: &self.schedule,
            layout: &self.layout,
            conditions: &self.conditions,
            dim: 8,
            config,
        }
    }
}

fn degeneration() -> Outcome {
    let disjoint = toy(16, 4, 4, Objective::Epsilon);
    let cfg = SamplerConfig { iters: 0, t_min: 1000, seed: 11, ..Default::default() };
    let sync = syncos_sample(&disjoint.setup(&cfg)).map_err(|e| e.to_string())?.0;
    let per = sample_per_chunk_ddim(&disjoint.setup(&cfg)).map_err(|e| e.to_string())?;
    let gap = sync.max_abs_diff(&per);
    ensure(gap <= UNCOUPLED_TOL, || format!("uncoupled SynCoS vs per-chunk {gap:e}"))?;

    let overlap = toy(16, 8, 4, Objective::Epsilon);
    let cfg = SamplerConfig { iters: 0, seed: 12, ..Default::default() };
    let sync = syncos_sample(&overlap.setup(&cfg)).map_err(|e| e.to_string())?.0;
    let setup = overlap.setup(&cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut x = FrameSequence::standard_normal(16, 8, &mut rng);
    for (t, t_prev) in TimestepGrid::uniform(&overlap.schedule, 50).unwrap().transitions() {
        let x0 = syncos_stage1(&setup, &x, t).map_err(|e| e.to_string())?.x0_fused;
        let noise = if t > cfg.t_min {
            FrameSequence::standard_normal(16, 8, &mut rng)
        } else {
            effective_noise(&x, &x0, t, &overlap.schedule).unwrap()
        };
        x = ddim_step(&x0, &noise, t, t_prev, 0.0, None, &overlap.schedule).unwrap();
    }
    ensure(sync == x, || "iters=0 differs from the stage-1+3 pipeline".into())?;

    let single = toy(8, 8, 4, Objective::Epsilon);
    let cfg = SamplerConfig { seed: 13, ..Default::default() };
    let glv = sample_gen_l_video(&single.setup(&cfg)).map_err(|e| e.to_string())?.0;
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let x_t = FrameSequence::standard_normal(8, 8, &mut rng);
    let plain = sample_ddim(&single.denoiser, &x_t, &single.conditions[0], &cfg, &single.schedule, &mut rng)
        .map_err(|e| e.to_string())?;
    ensure(glv == plain, || "Gen-L-Video with one chunk differs from DDIM".into())?;
    Ok(format!("uncoupled gap {gap:.2e}; pipeline and single-chunk cases bitwise"))
}

fn check_sync(trace: &SamplerRunTrace, t_min: usize, iters: usize) -> Result<usize, String> {
    let mut last = None;
    for e in &trace.events {
        let key = (e.step_index, e.stage, e.iteration);
        ensure(last.is_none_or(|prev| key > prev), || format!("events out of order at {key:?}"))?;
        last = Some(key);
    }
    let mut refine = 0;
    let mut seen = std::collections::BTreeSet::new();
    for &t in &trace.grid {
        let events: Vec<_> = trace.stage_events(Stage::Refine).filter(|e| e.timestep == t).collect();
        for e in &events {
            ensure(e.prediction_timestep == Some(t), || format!("ungrounded prediction at t={t}"))?;
        }
        if t <= t_min {
            ensure(events.is_empty(), || format!("refinement at t={t} <= t_min"))?;
            continue;
        }
        ensure(events.len() == iters, || format!("{} refinement events at t={t}", events.len()))?;
        let fp = events[0].noise_fingerprint;
        ensure(events.iter().all(|e| e.noise_fingerprint == fp), || format!("baseline noise changed within t={t}"))?;
        ensure(seen.insert(fp), || format!("baseline noise reused at t={t}"))?;
        refine += events.len();
    }
    ensure(refine == trace.stage_events(Stage::Refine).count(), || "refinement off the grid".into())?;
    Ok(refine)
}

fn synchronization_invariants() -> Outcome {
    let config = default_config().resolve();
    let out = execute(&config, &mut None).map_err(|e| e.to_string())?;
    let n = check_sync(&out.trace, config.sampling.t_min, config.sampling.iters)?;
    Ok(format!("{n} refinement events checked on the default config"))
}

fn ordering_experiment() -> Outcome {
    let start = Instant::now();
    let base = default_config();
    let seeds = 0..10u64;
    let mut spread = [0.0f64; 3];
    let mut fidelity = [0.0f64; 3];
    let kinds = [SamplerKind::CsdOnly, SamplerKind::Syncos, SamplerKind::GenLVideo];
    for seed in seeds.clone() {
        for (k, &kind) in kinds.iter().enumerate() {
            let cfg = RunConfig { sampler: kind, seed, ..base.clone() }.resolve();
            let out = execute(&cfg, &mut None).map_err(|e| e.to_string())?;
            spread[k] += out.metrics.terminal_spread_shared / 10.0;
            fidelity[k] += out.metrics.mean_local_fidelity_error / 10.0;
        }
    }
    let [s_csd, s_sync, s_glv] = spread;
    let [f_csd, f_sync, _] = fidelity;
    let summary = format!(
        "shared spread csd {s_csd:.5} < syncos {s_sync:.5} < glv {s_glv:.5}; fidelity error syncos {f_sync:.5} < csd {f_csd:.5}"
    );
    ensure(s_sync - s_csd >= SPREAD_MARGIN_CSD, || format!("{summary} (csd margin)"))?;
    ensure(s_glv - s_sync > SPREAD_MARGIN_GLV, || format!("{summary} (glv margin)"))?;
    ensure(f_csd - f_sync >= FIDELITY_MARGIN, || format!("{summary} (fidelity margin)"))?;
    within("ordering experiment", start, Duration::from_secs(60))?;
    Ok(format!("{summary} in {:?}", start.elapsed()))
}

fn flow_variant() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8008);
    for _ in 0..50 {
        let x = FrameSequence::standard_normal(3, 4, &mut rng);
        let e = FrameSequence::standard_normal(3, 4, &mut rng);
        let v = Prediction::velocity(e.zip_map(&x, |a, b| a - b).unwrap());
        let g = flow_sds_gradient(&v, &e, &x, 1.3).map_err(|e| e.to_string())?;
        ensure(g.as_slice().iter().all(|&v| v == 0.0), || "flow SDS nonzero at target".into())?;
    }

    let sigma0 = 0.5;
    let mu = vec![0.8, -0.4, 0.3];
    let world = GaussianMixtureWorld::uniform(vec![mu.clone()], sigma0).unwrap();
    let cond = StructuredCondition::for_id(0, vec![], vec![]);
    let x1 = FrameSequence::standard_normal(4, 3, &mut rng);
    let exact = x1.zip_map(&FrameSequence::repeat_frame(4, &mu), |z, m| m + sigma0 * z).unwrap();
    let mut errors = Vec::new();
    for n in [16usize, 32, 64, 128] {
        let mut x = x1.clone();
        for k in (1..=n).rev() {
            let (t, t_prev) = (k as f64 / n as f64, (k - 1) as f64 / n as f64);
            let v = analytic_velocity(&world, &x, &cond, t).map_err(|e| e.to_string())?;
            x = flow_step(&x, &v.value, t, t_prev).map_err(|e| e.to_string())?;
        }
        errors.push(x.max_abs_diff(&exact));
    }
    let ratios: Vec<f64> = errors.windows(2).map(|w| w[0] / w[1]).collect();
    ensure(
        ratios.iter().all(|r| (EULER_RATIO.0..=EULER_RATIO.1).contains(r)),
        || format!("error ratios {ratios:?}"),
    )?;

    let flow = toy(16, 8, 4, Objective::Flow);
    let cfg = SamplerConfig { objective: Objective::Flow, seed: 3, ..Default::default() };
    let (x, trace) = syncos_sample(&flow.setup(&cfg)).map_err(|e| e.to_string())?;
    ensure(x.is_finite(), || "flow sample not finite".into())?;
    let n = check_sync(&trace, cfg.t_min, cfg.iters)?;
    Ok(format!(
        "flow SDS zero at target; Euler error ratios {:.3}/{:.3}/{:.3}; {n} flow refinement events checked",
        ratios[0], ratios[1], ratios[2]
    ))
}

fn read_tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != "timing.json" {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = repo_root().join("configs/default.json");
    let mut trees = Vec::new();
    for threads in ["1", "8"] {
        let out = tmp.path().join(format!("threads_{threads}"));
        let status = Command::new(env!("CARGO_BIN_EXE_syncos"))
            .args(["compare", "--config"])
            .arg(&config)
            .args(["--samplers", "gen_l_video,csd_only,syncos,per_chunk_ddim", "--out"])
            .arg(&out)
            .env("SYNCOS_THREADS", threads)
            .output()
            .map_err(|e| e.to_string())?;
        ensure(status.status.success(), || String::from_utf8_lossy(&status.stdout).into_owned())?;
        trees.push(read_tree(&out));
    }
    let files = trees[0].len();
    ensure(files > 0 && trees[0] == trees[1], || "artifacts differ between thread counts".into())?;
    Ok(format!("{files} artifact files byte-identical with 1 and 8 threads"))
}

fn defaults_conformance() -> Outcome {
    let c = default_config();
    let s = &c.sampling;
    ensure(s.num_steps == 50, || format!("num_steps {}", s.num_steps))?;
    ensure(s.eta == 0.0, || format!("eta {}", s.eta))?;
    ensure(s.t_min == 850 && (800..=900).contains(&s.t_min), || format!("t_min {}", s.t_min))?;
    ensure(s.lr == 0.75 && (0.5..=1.0).contains(&s.lr), || format!("lr {}", s.lr))?;
    ensure(s.iters == 20 && (20..=50).contains(&s.iters), || format!("iters {}", s.iters))?;
    ensure(s.gamma == 6.0, || format!("gamma {}", s.gamma))?;
    ensure(s.stride == 4, || format!("stride {}", s.stride))?;
    c.validate().map_err(|e| e.to_string())?;
    let d = SamplerConfig::default();
    ensure(
        (d.num_steps, d.eta, d.t_min, d.lr, d.iters, d.gamma, d.stride) == (50, 0.0, 850, 0.75, 20, 6.0, 4),
        || "library defaults drifted".into(),
    )?;
    Ok("configs/default.json: 50 steps, eta 0, t_min 850, lr 0.75, iters 20, gamma 6, stride 4".into())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("fusion oracle equivalence", fusion_oracle),
        ("exactness under the oracle denoiser", oracle_exactness),
        ("analytic score correctness", analytic_score),
        ("CSD to SDS reduction", csd_reduction),
        ("degeneration lattice", degeneration),
        ("synchronization invariants", synchronization_invariants),
        ("divergence ordering experiment", ordering_experiment),
        ("flow variant checks", flow_variant),
        ("determinism across runs and thread counts", determinism),
        ("defaults conformance", defaults_conformance),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("[PASS] {:>2} {name}: {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {:>2} {name}: {detail}", k + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
