//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Failures are reported, not raised, so the rest of the workspace tests still
//! run; set `ACCEPTANCE_STRICT=1` to exit non-zero when any criterion fails.

use std::collections::HashSet;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng as _;
use statrs::distribution::{ContinuousCDF, StudentsT};

use sculpt_core::llm::{ChatTransport, ScriptedTransport};
use sculpt_core::metrics::{chamfer, emd, hausdorff, krippendorff_alpha, welch_t, Level, RatingMatrix};
use sculpt_core::model::{
    action_sample, pretrain_sample, ActionHeadParams, EncoderDims, EncoderParams, HeadDims, Params, PretrainHead,
};
use sculpt_core::pipeline::*;
use sculpt_core::planner::{
    alternation_holds, plan, template_backend, template_names, template_shapes, Assistant, Cell, CellProposer,
    OccupancyGrid, PlannerConfig, ProposerSuite, Reply, Role, Terminator,
};
use sculpt_core::pointcloud::{Cluster, Point3, PointCloud};
use sculpt_core::seed;
use sculpt_core::subgoal::{flatten, lengthen, shorten, thin, Gains};
use sculpt_core::Error;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_s: u64) -> Result<(), String> {
    check(elapsed.as_secs_f64() < limit_s as f64, || format!("took {elapsed:.1?}, limit {limit_s} s"))
}

fn random_cloud(n: usize, rng: &mut seed::Rng) -> PointCloud {
    (0..n).map(|_| Point3::new(rng.random(), rng.random(), rng.random())).collect()
}

// ---------------------------------------------------------------- 1. metrics

fn brute_chamfer(a: &[Point3], b: &[Point3]) -> f64 {
    let dir = |x: &[Point3], y: &[Point3]| {
        x.iter().map(|p| y.iter().map(|q| p.dist_sq(*q)).fold(f64::INFINITY, f64::min)).sum::<f64>() / x.len() as f64
    };
    dir(a, b) + dir(b, a)
}

fn brute_hausdorff(a: &[Point3], b: &[Point3]) -> f64 {
    let dir = |x: &[Point3], y: &[Point3]| {
        x.iter().map(|p| y.iter().map(|q| p.dist(*q)).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max)
    };
    dir(a, b).max(dir(b, a))
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for at in 0..n {
            let mut q = p.clone();
            q.insert(at, n - 1);
            out.push(q);
        }
    }
    out
}

fn brute_emd(a: &[Point3], b: &[Point3]) -> f64 {
    permutations(a.len())
        .iter()
        .map(|p| p.iter().enumerate().map(|(i, &j)| a[i].dist(b[j])).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
        / a.len() as f64
}

fn metric_oracles() -> Outcome {
    let t = Instant::now();
    let mut rng = seed::rng(1);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (a, b) = (random_cloud(64, &mut rng), random_cloud(64, &mut rng));
        let cd = (chamfer(&a, &b).unwrap() - brute_chamfer(a.points(), b.points())).abs();
        let hd = (hausdorff(&a, &b).unwrap() - brute_hausdorff(a.points(), b.points())).abs();
        worst = worst.max(cd).max(hd);
    }
    check(worst <= 1e-12, || format!("chamfer/hausdorff off by {worst:e}"))?;
    let mut worst_emd: f64 = 0.0;
    for case in 0..50 {
        let n = 1 + case % 7;
        let (a, b) = (random_cloud(n, &mut rng), random_cloud(n, &mut rng));
        worst_emd = worst_emd.max((emd(&a, &b).unwrap() - brute_emd(a.points(), b.points())).abs());
    }
    check(worst_emd <= 1e-12, || format!("EMD off by {worst_emd:e}"))?;
    within(t.elapsed(), 10)?;
    Ok(format!("max |Δ| chamfer/hausdorff {worst:.1e}, EMD {worst_emd:.1e}"))
}

// ------------------------------------------------------------ 2. sub-goals

fn extent(c: &Cluster, d: Point3) -> f64 {
    let proj: Vec<f64> = c.points().points().iter().map(|p| p.dot(d)).collect();
    proj.iter().copied().fold(f64::NEG_INFINITY, f64::max) - proj.iter().copied().fold(f64::INFINITY, f64::min)
}

fn subgoal_algebra() -> Outcome {
    let t = Instant::now();
    let mut rng = seed::rng(2);
    let g = Gains::default();
    let ws = [0.0, 0.25, 0.5, 0.75, 1.0];
    let mut worst_inv: f64 = 0.0;
    let cases = 500;
    for case in 0..cases {
        let pts: PointCloud = (0..rng.random_range(2..40))
            .map(|_| {
                Point3::new(rng.random_range(0.0..0.075), rng.random_range(0.0..0.075), rng.random_range(0.0..0.05))
            })
            .collect();
        let c = Cluster::new(case % 10, pts).unwrap();
        let raw = Point3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let d = raw / raw.norm();
        let a = rng.random_range(0.0..std::f64::consts::TAU);
        let h = Point3::new(a.cos(), a.sin(), 0.0);

        for m in [lengthen(&c, d, 0.0), shorten(&c, d, 0.0), flatten(&c, 0.0), thin(&c, h, 0.0)] {
            check(m.unwrap() == c, || format!("case {case}: w = 0 is not the identity"))?;
        }

        let z_min = c.points().points().iter().map(|p| p.z).fold(f64::INFINITY, f64::min);
        let w: f64 = rng.random_range(0.0..=1.0);
        let f = flatten(&c, w).unwrap();
        let floor_ok =
            f.points().points().iter().zip(c.points().points()).all(|(p, q)| p.z >= z_min && (p.x, p.y) == (q.x, q.y));
        check(floor_ok, || format!("case {case}: flatten left the floor or moved x/y"))?;

        let w_inv = w * g.stretch / ((1.0 + w * g.stretch) * g.compress);
        let back = shorten(&lengthen(&c, d, w).unwrap(), d, w_inv).unwrap();
        for (p, q) in back.points().points().iter().zip(c.points().points()) {
            worst_inv = worst_inv.max(p.dist(*q));
        }

        let n = Point3::new(-h.y, h.x, 0.0);
        let z = Point3::new(0.0, 0.0, 1.0);
        let up: Vec<f64> = ws.iter().map(|&w| extent(&lengthen(&c, d, w).unwrap(), d)).collect();
        let down: Vec<f64> = ws.iter().map(|&w| extent(&shorten(&c, d, w).unwrap(), d)).collect();
        let flat: Vec<f64> = ws.iter().map(|&w| extent(&flatten(&c, w).unwrap(), z)).collect();
        let narrow: Vec<f64> = ws.iter().map(|&w| extent(&thin(&c, h, w).unwrap(), n)).collect();
        let tol = 1e-12;
        let monotone = (1..ws.len()).all(|k| {
            up[k] >= up[k - 1] - tol
                && down[k] <= down[k - 1] + tol
                && flat[k] <= flat[k - 1] + tol
                && narrow[k] <= narrow[k - 1] + tol
        });
        check(monotone, || format!("case {case}: extent not monotone in w"))?;
    }
    check(worst_inv < 1e-9, || format!("lengthen/shorten inverse off by {worst_inv:e}"))?;
    within(t.elapsed(), 5)?;
    Ok(format!("{cases} clusters, inverse error {worst_inv:.1e}"))
}

// -------------------------------------------------------------- 3. planner

fn supported_prefixes(order: &[Cell]) -> bool {
    let mut placed: HashSet<Cell> = HashSet::new();
    for &c in order {
        if c.k > 0 && !placed.contains(&Cell::new(c.i, c.j, c.k - 1)) {
            return false;
        }
        placed.insert(c);
    }
    true
}

struct FloatingAdd;
impl CellProposer for FloatingAdd {
    fn propose(&self, _: &str, _: &OccupancyGrid) -> sculpt_core::Result<Reply<Vec<[i64; 3]>>> {
        Ok(Reply::direct(vec![[1, 1, 2]]))
    }
}
struct NoRemove;
impl CellProposer for NoRemove {
    fn propose(&self, _: &str, _: &OccupancyGrid) -> sculpt_core::Result<Reply<Vec<[i64; 3]>>> {
        Ok(Reply::direct(vec![]))
    }
}
struct Never;
impl Terminator for Never {
    fn done(&self, _: &str, _: &OccupancyGrid) -> sculpt_core::Result<Reply<bool>> {
        Ok(Reply::direct(false))
    }
}
struct Confident;
impl Assistant for Confident {
    fn confident(&self, _: &str) -> sculpt_core::Result<Reply<bool>> {
        Ok(Reply::direct(true))
    }
}

fn planner_invariants() -> Outcome {
    let t = Instant::now();
    let cfg = PlannerConfig::default();
    let names = template_names();
    for name in &names {
        let out = plan(name, &template_backend(name, cfg.batch).unwrap(), &cfg).map_err(|e| format!("{name}: {e}"))?;
        let cells = out.plan.cells();
        check(supported_prefixes(&cells), || format!("{name}: unsupported prefix"))?;
        let planned: HashSet<Cell> = cells.iter().copied().collect();
        let occupied: HashSet<Cell> = out.grid.cells().into_iter().collect();
        check(planned.len() == cells.len() && planned == occupied, || format!("{name}: plan ≠ occupied cells"))?;
        let roles: Vec<Role> =
            out.audit.iter().map(|r| r.role).filter(|r| matches!(r, Role::Sigma | Role::Phi)).collect();
        let strict = roles.iter().enumerate().all(|(n, r)| *r == if n % 2 == 0 { Role::Sigma } else { Role::Phi });
        check(strict && alternation_holds(&out.audit), || format!("{name}: σ/φ do not alternate"))?;
    }
    let floating = ProposerSuite {
        add: Box::new(FloatingAdd),
        remove: Box::new(NoRemove),
        terminate: Box::new(Never),
        assist: Box::new(Confident),
        shape_gen: template_shapes(),
    };
    let res = plan("floating", &floating, &PlannerConfig { max_iters: 3, ..cfg });
    check(matches!(res, Err(Error::PlanningFailure { .. })), || format!("floating cell gave {res:?}"))?;
    within(t.elapsed(), 5)?;
    Ok(format!("{} templates planned; floating cell rejected", names.len()))
}

// -------------------------------------------------------------- 4. encoder

fn worst_rel_error<P: Params>(params: &mut P, analytic: &P, mut loss: impl FnMut(&P) -> f64) -> f64 {
    let h = 1e-5;
    let grads: Vec<Vec<f64>> = analytic.tensors().iter().map(|t| t.to_vec()).collect();
    let mut worst: f64 = 0.0;
    for (ti, g) in grads.iter().enumerate() {
        for (j, &a) in g.iter().enumerate() {
            let orig = params.tensors()[ti][j];
            params.tensors_mut()[ti][j] = orig + h;
            let up = loss(params);
            params.tensors_mut()[ti][j] = orig - h;
            let down = loss(params);
            params.tensors_mut()[ti][j] = orig;
            let n = (up - down) / (2.0 * h);
            worst = worst.max((a - n).abs() / (a.abs() + n.abs()).max(1e-6));
        }
    }
    worst
}

/// Offsets every parameter so no unit is dead on all points; a fully dead
/// max-pooled unit ties and has no derivative.
fn jitter<P: Params>(p: &mut P, seed_: u64) {
    let mut rng = seed::rng(seed_);
    for t in p.tensors_mut() {
        t.iter_mut().for_each(|v| *v += rng.random_range(-0.3..0.3));
    }
}

fn encoder_correctness() -> Outcome {
    let t = Instant::now();
    let mut rng = seed::rng(4);
    let enc = EncoderParams::init(EncoderDims::default(), 40);
    let cloud: PointCloud = (0..256)
        .map(|_| Point3::new(rng.random_range(0.0..0.075), rng.random_range(0.0..0.075), rng.random_range(0.0..0.03)))
        .collect();
    let global = enc.encode(&cloud).global;
    for _ in 0..20 {
        let mut idx: Vec<usize> = (0..cloud.len()).collect();
        idx.shuffle(&mut rng);
        check(enc.encode(&cloud.select(&idx)).global == global, || "global feature changed under permutation".into())?;
    }

    let enc_dims = EncoderDims { point: 4, global_hidden: 5, global: 6, ..Default::default() };
    let head_dims = HeadDims { attn: 3, latent: 4, mlp: 3 };
    let toy = |rng: &mut seed::Rng| -> PointCloud {
        (0..4)
            .map(|_| {
                Point3::new(rng.random_range(0.0..0.075), rng.random_range(0.0..0.075), rng.random_range(0.0..0.03))
            })
            .collect()
    };
    let mut worst: f64 = 0.0;
    for draw in 0..10u64 {
        let (state, next) = (toy(&mut rng), toy(&mut rng));
        let mut enc = EncoderParams::init(enc_dims, 100 + draw);
        jitter(&mut enc, 200 + draw);

        let target: [f64; 5] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let mut head = ActionHeadParams::init(head_dims, enc_dims.point, enc_dims.global, 300 + draw);
        jitter(&mut head, 400 + draw);
        let (mut ge, mut gh) = (enc.zeros_like(), head.zeros_like());
        action_sample(&enc, &head, &state, &next, &target, Some((&mut ge, &mut gh)));
        let fixed_enc = enc.clone();
        worst =
            worst.max(worst_rel_error(&mut head, &gh, |h| action_sample(&fixed_enc, h, &state, &next, &target, None)));
        let fixed_head = head.clone();
        worst =
            worst.max(worst_rel_error(&mut enc, &ge, |e| action_sample(e, &fixed_head, &state, &next, &target, None)));

        let y: f64 = rng.random_range(0.0..1.0);
        let mut ph = PretrainHead::init(enc_dims.global, 5, 500 + draw);
        jitter(&mut ph, 600 + draw);
        let (mut ge, mut gp) = (enc.zeros_like(), ph.zeros_like());
        pretrain_sample(&enc, &ph, &state, &next, y, Some((&mut ge, &mut gp)));
        let fixed_enc = enc.clone();
        worst = worst.max(worst_rel_error(&mut ph, &gp, |p| pretrain_sample(&fixed_enc, p, &state, &next, y, None)));
        let fixed_ph = ph.clone();
        worst = worst.max(worst_rel_error(&mut enc, &ge, |e| pretrain_sample(e, &fixed_ph, &state, &next, y, None)));
    }
    check(worst < 1e-4, || format!("gradient relative error {worst:e}"))?;
    within(t.elapsed(), 60)?;
    Ok(format!("20 permutations exact; worst gradient rel. error {worst:.1e}"))
}

// ------------------------------------------------------------- 5. training

fn training_order() -> Outcome {
    let t = Instant::now();
    let data = build_datasets(&DatasetJob::default()).map_err(|e| e.to_string())?;
    let pre = run_pretrain(&data.pairs, &PretrainJob::default()).map_err(|e| e.to_string())?;
    let table = evaluate(&data.train, &data.test, &pre.encoder, &EvalJob::default()).map_err(|e| e.to_string())?;
    let mse = |m: &str| table.row(m).map(|r| r.test_mse).unwrap_or(f64::NAN);
    let (frozen, nn, random) = (mse("DM frozen"), mse("NN-greedy"), mse("Random"));
    let summary = format!("test MSE: DM frozen {frozen:.4}, NN-greedy {nn:.4}, Random {random:.4}");
    check(frozen < nn && frozen < random, || summary.clone())?;
    within(t.elapsed(), 15 * 60)?;
    Ok(format!("{summary} ({:.0?})", t.elapsed()))
}

// ---------------------------------------------------------- 6. improvement

fn end_to_end_improvement() -> Outcome {
    let t = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let mut counts = Vec::new();
    for prompt in ["line", "column", "X"] {
        let mut improved = 0;
        for s in 0..10u64 {
            let cfg = RunConfig {
                prompt: prompt.into(),
                seed: s,
                output_dir: tmp.path().join(format!("{prompt}_{s}")),
                ..Default::default()
            };
            let r = run_episode(&cfg).map_err(|e| format!("{prompt} seed {s}: {e}"))?;
            if r.improved() == Some(true) {
                improved += 1;
            }
        }
        counts.push((prompt, improved));
    }
    let summary = counts.iter().map(|(p, n)| format!("{p} {n}/10")).collect::<Vec<_>>().join(", ");
    check(counts.iter().all(|&(_, n)| n >= 7), || format!("improved: {summary}"))?;
    within(t.elapsed(), 10 * 60)?;
    Ok(format!("improved: {summary}"))
}

// ------------------------------------------------------------- 7. statistics

fn statistics() -> Outcome {
    let t = Instant::now();
    let perfect = RatingMatrix::new(vec![vec![Some(1), Some(3), Some(2), None]; 3], 4).unwrap();
    for level in [Level::Nominal, Level::Ordinal, Level::Interval] {
        check(krippendorff_alpha(&perfect, level).unwrap() == 1.0, || format!("{level:?} α ≠ 1 on perfect agreement"))?;
    }

    // Four coders, twelve units, values 1–5 with gaps.
    let row = |v: [u32; 12]| v.iter().map(|&x| (x > 0).then_some(x)).collect::<Vec<_>>();
    let textbook = RatingMatrix::new(
        vec![
            row([1, 2, 3, 3, 2, 1, 4, 1, 2, 0, 0, 0]),
            row([1, 2, 3, 3, 2, 2, 4, 1, 2, 5, 0, 3]),
            row([0, 3, 3, 3, 2, 3, 4, 2, 2, 5, 1, 0]),
            row([1, 2, 3, 3, 2, 4, 4, 1, 2, 5, 1, 0]),
        ],
        5,
    )
    .unwrap();
    for (level, want) in [(Level::Nominal, 0.743), (Level::Ordinal, 0.815), (Level::Interval, 0.849)] {
        let got = krippendorff_alpha(&textbook, level).unwrap();
        check((got - want).abs() < 1e-3, || format!("{level:?} α = {got}, expected {want}"))?;
    }

    let mut rng = seed::rng(7);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let na = rng.random_range(3..30);
        let nb = rng.random_range(3..30);
        let a: Vec<f64> = (0..na).map(|_| rng.random_range(0.0..2.0)).collect();
        let b: Vec<f64> = (0..nb).map(|_| rng.random_range(0.5..3.5)).collect();
        let stats = |x: &[f64]| {
            let n = x.len() as f64;
            let m = x.iter().sum::<f64>() / n;
            (m, x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0), n)
        };
        let ((ma, va, na), (mb, vb, nb)) = (stats(&a), stats(&b));
        let t_ref = (ma - mb) / (va / na + vb / nb).sqrt();
        let dof_ref = (va / na + vb / nb).powi(2) / ((va / na).powi(2) / (na - 1.0) + (vb / nb).powi(2) / (nb - 1.0));
        let p_ref = 2.0 * (1.0 - StudentsT::new(0.0, 1.0, dof_ref).unwrap().cdf(t_ref.abs()));
        let w = welch_t(&a, &b).unwrap();
        worst = worst.max((w.t - t_ref).abs()).max((w.dof - dof_ref).abs()).max((w.p - p_ref).abs());
        check(welch_t(&b, &a).unwrap().t == -w.t, || "Welch t is not antisymmetric".into())?;
    }
    check(worst < 1e-9, || format!("Welch differs from reference by {worst:e}"))?;
    within(t.elapsed(), 60)?;
    Ok(format!("textbook α matches; Welch max |Δ| {worst:.1e}"))
}

// ------------------------------------------------------------ 8. determinism

fn strip_runtime(path: &Path) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("runtime_ms");
    v
}

fn files_under(root: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn suite_determinism() -> Outcome {
    let t = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let prompts: Vec<String> = ["line", "column", "X", "pyramid"].map(String::from).to_vec();
    let base = RunConfig { seed: 2024, max_rounds: 3, ..Default::default() };
    let opts = SuiteOptions { repeats: 2, share_seed: false };
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_suite(&prompts, opts, &base, &a).map_err(|e| e.to_string())?;
    run_suite(&prompts, opts, &base, &b).map_err(|e| e.to_string())?;
    let files = files_under(&a);
    check(files == files_under(&b), || "the two runs wrote different file sets".into())?;
    for f in &files {
        let same = if f.file_name().is_some_and(|n| n == REPORT_FILE) {
            strip_runtime(&a.join(f)) == strip_runtime(&b.join(f))
        } else {
            std::fs::read(a.join(f)).unwrap() == std::fs::read(b.join(f)).unwrap()
        };
        check(same, || format!("{} differs", f.display()))?;
    }
    Ok(format!("{} files identical across two runs ({:.0?})", files.len(), t.elapsed()))
}

// ------------------------------------------------------------------ 9. LLM

fn llm_robustness() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = |dir: &str, rounds: usize| RunConfig {
        prompt: "line".into(),
        seed: 9,
        max_rounds: rounds,
        output_dir: tmp.path().join(dir),
        backends: Backends { subgoal: SubgoalBackendKind::Llm, ..Default::default() },
        ..Default::default()
    };
    let valid = r#"{"kind":"thin","cluster":1,"direction":[0,1,0],"weight":0.4}"#;

    let once = Arc::new(ScriptedTransport::ok(["I would lengthen cluster 1.", valid]));
    let r =
        run_episode_with(&cfg("retry", 1), Some(once.clone() as Arc<dyn ChatTransport>)).map_err(|e| e.to_string())?;
    check(once.calls().len() == 2, || format!("{} calls for malformed-then-valid", once.calls().len()))?;
    check(r.rounds.len() == 1 && r.rounds[0].subgoal.is_some(), || "valid reply was not used".into())?;

    let retries = RunConfig::default().llm.retries;
    let mut replies = vec!["{\"kind\": \"stretch\"}".to_string(); retries + 1];
    replies.push(valid.into());
    let exhausted = Arc::new(ScriptedTransport::ok(replies));
    let r = run_episode_with(&cfg("exhausted", 2), Some(exhausted.clone() as Arc<dyn ChatTransport>))
        .map_err(|e| format!("episode aborted: {e}"))?;
    check(r.rounds.len() == 2, || format!("{} rounds recorded", r.rounds.len()))?;
    check(r.rounds[0].subgoal.is_none() && r.rounds[0].skipped.is_some(), || "exhausted round not skipped".into())?;
    check(r.rounds[1].subgoal.is_some(), || "episode did not continue after the skip".into())?;
    check(exhausted.calls().len() == retries + 2, || format!("{} calls", exhausted.calls().len()))?;
    Ok(format!("one retry consumed; {} failed attempts skipped one round", retries + 1))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("metric oracle equivalence", metric_oracles),
        ("sub-goal API algebra", subgoal_algebra),
        ("planner invariants", planner_invariants),
        ("encoder correctness", encoder_correctness),
        ("training-order reproduction", training_order),
        ("end-to-end improvement", end_to_end_improvement),
        ("statistics", statistics),
        ("determinism", suite_determinism),
        ("LLM-backend robustness", llm_robustness),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (n, (name, run)) in criteria.iter().enumerate() {
        let n = n + 1;
        if only.is_some_and(|o| o != n) {
            continue;
        }
        let t = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {n}. {name} [{secs:.1} s]: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {n}. {name} [{secs:.1} s]: {why}");
            }
        }
    }
    println!("acceptance: {failed} failing");
    if failed > 0 && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
