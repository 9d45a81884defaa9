//! The acceptance criteria, one function each. A criterion returns a short
//! detail line on success and the first violation on failure.

use std::fs;
use std::path::{Path, PathBuf};

use narrowops::narrowness::Optimality;
use narrowops::operators::{identity_like, integration, s_coordinate_partition, Subspace};
use narrowops::{
    bounded_sign_with_m, build_small_tree, build_tree, check_lower_bound, classical_tree, counterexample_operator,
    epsilon_schedule, factorize, haar_slicing, haar_system, hpp_defect, is_sign, op_norm, random_operator,
    random_rank_one_series, rank1_series, sign_defect, telescope, AtomSet, DyadicSpace, Error, FiniteOperator,
    MultiIndex, NormedTarget, PartitionSampler, SearchBudget, SeriesRep, SignOptions, SplitStrategy, SubsetTree,
    TargetBasis,
};
use narrowops_cli::{run, Experiment, Manifest, RunOptions};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Outcome = Result<String, String>;

pub struct Criterion {
    pub number: usize,
    pub title: &'static str,
    /// Runtime limit in seconds.
    pub limit: f64,
    pub check: fn() -> Outcome,
}

pub const CRITERIA: [Criterion; 12] = [
    Criterion { number: 1, title: "Burkholder table", limit: 1.0, check: burkholder_table },
    Criterion { number: 2, title: "Haar norm identity", limit: 5.0, check: haar_norm_identity },
    Criterion { number: 3, title: "telescoping identity", limit: 5.0, check: telescoping_identity },
    Criterion { number: 4, title: "sign optimizer soundness", limit: 60.0, check: sign_optimizer_soundness },
    Criterion { number: 5, title: "small-tree construction", limit: 5.0, check: small_tree_construction },
    Criterion { number: 6, title: "non-HPP counterexample", limit: 10.0, check: non_hpp_counterexample },
    Criterion { number: 7, title: "factorization certificates", limit: 120.0, check: factorization_certificates },
    Criterion { number: 8, title: "bounded-sign residuals", limit: 10.0, check: bounded_sign_residuals },
    Criterion { number: 9, title: "sign pipeline end to end", limit: 300.0, check: sign_pipeline_end_to_end },
    Criterion { number: 10, title: "unconditional-constant sanity", limit: 120.0, check: uncond_sanity },
    Criterion { number: 11, title: "lower-bound chain", limit: 120.0, check: lower_bound_chain },
    Criterion { number: 12, title: "determinism", limit: 60.0, check: determinism },
];

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

pub fn manifest_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../cli/manifests")
}

fn run_cli(exp: Experiment, m: &Manifest, out: &Path) -> Result<narrowops_cli::RunOutcome, String> {
    let opts = RunOptions {
        out: out.to_path_buf(),
        ..RunOptions::default()
    };
    run(exp, m, &opts).map_err(|e| format!("{}: {e}", exp.name()))
}

fn read_csv(path: &Path) -> Result<Vec<csv::StringRecord>, String> {
    let mut r = csv::Reader::from_path(path).map_err(err)?;
    let header = r.headers().map_err(err)?.clone();
    let mut rows = vec![header];
    for rec in r.records() {
        rows.push(rec.map_err(err)?);
    }
    Ok(rows)
}

fn field<'a>(rows: &'a [csv::StringRecord], row: usize, name: &str) -> Result<&'a str, String> {
    let k = rows[0].iter().position(|h| h == name).ok_or_else(|| format!("no column {name}"))?;
    Ok(&rows[row][k])
}

fn parse(s: &str) -> Result<f64, String> {
    s.parse().map_err(|_| format!("not a number: {s:?}"))
}

/// A tree on `base` whose every split is a uniformly random equal half.
fn random_tree(base: &AtomSet<f64>, levels: usize, r: &mut ChaCha8Rng) -> SubsetTree<f64> {
    let space = *base.space();
    let mut nodes = vec![base.clone()];
    let mut splits = Vec::new();
    for rank in 0..(1usize << levels) - 1 {
        let mut atoms = nodes[rank].atoms().to_vec();
        atoms.shuffle(r);
        let half = atoms.len() / 2;
        let plus = AtomSet::from_unsorted(space, atoms[..half].to_vec()).unwrap();
        let minus = AtomSet::from_unsorted(space, atoms[half..].to_vec()).unwrap();
        nodes.push(minus);
        nodes.push(plus.clone());
        splits.push(plus);
    }
    build_tree(base, levels, SplitStrategy::Explicit(splits)).unwrap()
}

/// A random base of `2^levels · k` atoms inside a random space of depth ≤ 6.
fn random_base(p: f64, r: &mut ChaCha8Rng) -> (AtomSet<f64>, usize) {
    let depth = r.gen_range(1..=6u32);
    let levels = r.gen_range(1..=depth as usize);
    let space = DyadicSpace::new(depth, p).unwrap();
    let blocks = space.atom_count() >> levels;
    let k = r.gen_range(1..=blocks);
    let mut atoms: Vec<usize> = (0..space.atom_count()).collect();
    atoms.shuffle(r);
    atoms.truncate(k << levels);
    (AtomSet::from_unsorted(space, atoms).unwrap(), levels)
}

pub fn burkholder_table() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let m = Manifest {
        name: "burkholder".into(),
        p: vec![1.5, 2.0, 3.0, 4.0],
        ..Manifest::default()
    };
    let out = run_cli(Experiment::Burkholder, &m, dir.path())?;
    let rows = read_csv(&out.table_path("burkholder.csv"))?;
    let expected = [(1.5, 2.0), (2.0, 1.0), (3.0, 2.0), (4.0, 3.0)];
    ensure!(rows.len() == expected.len() + 1, "expected {} rows, got {}", expected.len(), rows.len() - 1);
    for (i, &(p, beta)) in expected.iter().enumerate() {
        let (got_p, got) = (parse(field(&rows, i + 1, "p")?)?, parse(field(&rows, i + 1, "beta")?)?);
        ensure!(got_p == p && got == beta, "p = {got_p}: beta = {got}, expected {beta}");
        ensure!(field(&rows, i + 1, "beta_method")? == "exact", "p = {p} not tagged exact");
    }
    Ok("β = 2, 1, 2, 3 for p = 3/2, 2, 3, 4".into())
}

pub fn haar_norm_identity() -> Outcome {
    let mut r = rng(0x4a11);
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let p = [1.0, 1.5, 2.0, 4.0][r.gen_range(0..4)];
        let (base, levels) = random_base(p, &mut r);
        let sys = haar_system(random_tree(&base, levels, &mut r));
        for (rank, h) in sys.functions().iter().enumerate() {
            let n = MultiIndex::from_rank(rank).level();
            let expected = ((0.5f64).powi(n as i32) * base.measure()).powf(1.0 / p);
            let rel = (h.norm() - expected).abs() / expected;
            worst = worst.max(rel);
            ensure!(rel <= 1e-12, "p = {p}, node {}: ‖h‖ = {}, expected {expected}", MultiIndex::from_rank(rank), h.norm());
            checked += 1;
        }
    }
    Ok(format!("{checked} functions in 100 trees, worst relative error {worst:.1e}"))
}

pub fn telescoping_identity() -> Outcome {
    let mut r = rng(0x7e1e);
    let mut branches = 0;
    for tree in 0..50 {
        let depth = 1 + tree as u32 % 6;
        let space = DyadicSpace::new(depth, 1.0).unwrap();
        let levels = r.gen_range(1..=depth as usize);
        let sys = haar_system(random_tree(&space.full(), levels, &mut r));
        let base = space.indicator(&space.full());
        for leaf in 0..1usize << levels {
            let alpha = MultiIndex::new((0..levels).map(|k| if leaf >> k & 1 == 1 { 1 } else { -1 }).collect()).map_err(err)?;
            let mut sum = space.zero();
            for k in 1..=levels {
                let h = sys.function(&alpha.prefix(k - 1)).expect("node in tree");
                sum = sum.axpy((1u64 << (k - 1)) as f64 * f64::from(alpha.entries()[k - 1]), h);
            }
            let node = sys.tree().node(&alpha).expect("leaf in tree");
            let expected = space.indicator(node).scaled((1u64 << levels) as f64).axpy(-1.0, &base);
            ensure!(sum.values() == expected.values(), "branch {alpha}: telescoped sum differs atomwise");
            let lib = telescope(&alpha, &sys).map_err(err)?;
            ensure!(lib.values() == expected.values(), "branch {alpha}: library telescope differs");
            let l1 = sum.norm_p(1.0);
            ensure!(l1 <= 2.0, "branch {alpha}: L1 norm {l1} > 2");
            branches += 1;
        }
    }
    Ok(format!("{branches} branches exact, L1 norms ≤ 2"))
}

/// Minimum of `‖T s‖` over balanced signs on `set` by plain enumeration.
fn brute_force_defect(t: &FiniteOperator<f64>, set: &AtomSet<f64>) -> f64 {
    let n = set.len();
    let mut best = f64::INFINITY;
    for mask in 0u64..1 << n {
        if mask.count_ones() as usize * 2 != n {
            continue;
        }
        let mut y = vec![0.0; t.rows()];
        for (k, &a) in set.atoms().iter().enumerate() {
            let s = if mask >> k & 1 == 1 { 1.0 } else { -1.0 };
            y.iter_mut().zip(t.column(a)).for_each(|(o, &x)| *o += s * x);
        }
        best = best.min(t.target().norm(&y));
    }
    best
}

pub fn sign_optimizer_soundness() -> Outcome {
    let mut r = rng(0x5160);
    let instances = 200;
    let mut equal = 0;
    for i in 0..instances {
        let space = DyadicSpace::new(4, 1.0).unwrap();
        let n = [10, 12][i % 2];
        let mut atoms: Vec<usize> = (0..16).collect();
        atoms.shuffle(&mut r);
        atoms.truncate(n);
        let set = AtomSet::from_unsorted(space, atoms).unwrap();
        let q = [1.0, 2.0, 3.0][r.gen_range(0..3)];
        let d = r.gen_range(2..=4);
        let target = NormedTarget::ellq(d, q).unwrap();
        let t = random_operator(&space, target, 1.0, r.gen()).map_err(err)?;
        let exact = sign_defect(&t, &set, &SignOptions::exact()).map_err(err)?;
        ensure!(exact.optimality == Optimality::Exact, "instance {i}: exact mode not exact");
        ensure!(is_sign(&exact.sign, &set), "instance {i}: exact result is not a sign");
        let oracle = brute_force_defect(&t, &set);
        ensure!(
            (exact.value.lower - oracle).abs() <= 1e-12 * (1.0 + oracle),
            "instance {i}: exact {} vs enumeration {oracle}",
            exact.value.lower
        );
        let heur = sign_defect(&t, &set, &SignOptions::heuristic().with_seed(i as u64)).map_err(err)?;
        ensure!(is_sign(&heur.sign, &set), "instance {i}: heuristic result is not a sign");
        ensure!(
            heur.value.lower >= exact.value.lower - 1e-12 * (1.0 + oracle),
            "instance {i}: heuristic {} below exact {}",
            heur.value.lower,
            exact.value.lower
        );
        if (heur.value.lower - exact.value.lower).abs() <= 1e-12 * (1.0 + oracle) {
            equal += 1;
        }
    }
    let rate = equal as f64 / instances as f64;
    ensure!(rate >= 0.95, "heuristic optimal on only {equal}/{instances}");
    Ok(format!("exact = enumeration on {instances}/{instances}, heuristic optimal on {equal}/{instances}"))
}

pub fn small_tree_construction() -> Outcome {
    let mut r = rng(0x5a11);
    let mut nodes = 0;
    for i in 0..20 {
        let depth = r.gen_range(2..=6u32);
        let levels = r.gen_range(1..=depth as usize);
        let p = [1.0, 2.0, 4.0][i % 3];
        let space = DyadicSpace::new(depth, p).unwrap();
        let d = r.gen_range(1..=4);
        let x: Vec<f64> = (0..d).map(|_| r.gen_range(-2.0..2.0)).collect();
        let t = integration(&space, &x, NormedTarget::ellq(d, 2.0).unwrap()).map_err(err)?;
        let set = space.full();
        let schedule = epsilon_schedule(0.1, levels, p, set.measure()).map_err(err)?;
        let tree = build_small_tree(&t, &set, &schedule, levels, &SignOptions::default().with_seed(i as u64)).map_err(err)?;
        let worst = tree.achieved.iter().map(|e| e.upper).fold(0.0, f64::max);
        ensure!(worst == 0.0, "integration instance {i}: ‖Th_α‖ up to {worst:e}, x = {x:?}");
        nodes += tree.achieved.len();
    }
    for (depth, atoms) in [(3u32, None), (4, Some(8usize)), (5, Some(16))] {
        let space = DyadicSpace::new(depth, 1.0).unwrap();
        let set = match atoms {
            None => space.full(),
            Some(k) => AtomSet::new(space, (0..k).collect()).unwrap(),
        };
        let t = identity_like(&space).map_err(err)?;
        let schedule = epsilon_schedule(0.1, 2, 1.0, set.measure()).map_err(err)?;
        match build_small_tree(&t, &set, &schedule, 2, &SignOptions::default()) {
            Err(Error::ToleranceUnachievable { node, achieved, .. }) => {
                ensure!(node == MultiIndex::root(), "identity on depth {depth}: failed at {node}, not ∅");
                ensure!(achieved == set.measure(), "identity: witness defect {achieved} ≠ μ(A) = {}", set.measure());
            }
            other => return Err(format!("identity on depth {depth}: expected a failure at ∅, got {other:?}")),
        }
    }
    Ok(format!("{nodes} integration nodes at exactly 0; identity fails at ∅ with defect μ(A)"))
}

pub fn non_hpp_counterexample() -> Outcome {
    let mut details = Vec::new();
    for (ds, dt) in [(1u32, 1u32), (2, 2), (2, 3), (3, 2), (3, 3)] {
        for p in [1.0, 2.0] {
            let t = counterexample_operator::<f64>(ds, dt, p).map_err(err)?;
            let full = t.source().full();
            let grid = 0.5f64.powi(dt as i32);
            let pp = sign_defect(&t, &full, &SignOptions::default()).map_err(err)?;
            ensure!(is_sign(&pp.sign, &full), "({ds},{dt}): not a sign");
            ensure!(pp.value.upper <= grid, "({ds},{dt}), p = {p}: sign defect {} > grid scale {grid}", pp.value.upper);
            let part = s_coordinate_partition(t.source(), ds).map_err(err)?;
            let blocks = part.blocks().len();
            let h = hpp_defect(&t, &full, &PartitionSampler::Fixed(vec![part]), blocks, &SignOptions::default()).map_err(err)?;
            ensure!(
                h.estimate.lower == full.measure() && h.estimate.upper == full.measure(),
                "({ds},{dt}), p = {p}: HPP defect [{}, {}] ≠ μ(A) = {}",
                h.estimate.lower,
                h.estimate.upper,
                full.measure()
            );
            details.push(pp.value.upper);
        }
    }
    let worst = details.iter().cloned().fold(0.0, f64::max);
    Ok(format!("10 grids: sign defect ≤ grid scale (max {worst}), s-partition HPP defect = μ(A)"))
}

pub fn factorization_certificates() -> Outcome {
    let (eps, levels) = (0.1, 3);
    let space = DyadicSpace::new(5, 1.0).unwrap();
    let (mut ok, mut failed) = (0, 0);
    for i in 0..50u64 {
        let terms = 1 + i as usize % 8;
        let target = NormedTarget::ellq(8, 1.0).unwrap();
        let series = random_rank_one_series(&space, target, terms, 0.005, i).map_err(err)?;
        let budget = SearchBudget { seed: i, ..SearchBudget::default() };
        let series = SeriesRep::new(series, budget).map_err(err)?;
        match factorize(&series, &space.full(), eps, levels, &SignOptions::default().with_seed(i)) {
            Ok(res) => {
                res.recheck().map_err(|e| format!("instance {i}: {e}"))?;
                let d = res.lift.summation.dim;
                let mut prev = 1;
                for (rk, h) in res.system.functions().iter().enumerate() {
                    let y = res.lift.lift.apply(h).map_err(err)?;
                    let (u, v) = (&res.u_images[rk], &res.v_images[rk]);
                    ensure!(
                        y.iter().zip(u).zip(v).all(|((&y, &u), &v)| u + v == y),
                        "instance {i}, node {}: U + V ≠ T̃",
                        MultiIndex::from_rank(rk)
                    );
                    let (lo, hi) = (res.starts[rk], res.cuts[rk]);
                    ensure!(lo == prev && hi > lo, "instance {i}: cuts not increasing at rank {rk}");
                    prev = hi;
                    let outside = u.chunks(d).enumerate().any(|(b, blk)| (b + 1 < lo || b + 1 >= hi) && blk.iter().any(|&x| x != 0.0));
                    ensure!(!outside, "instance {i}, rank {rk}: U h_α leaves its blocks");
                    let vn: f64 = res.lift.space.norm_bounds(v).upper;
                    let bound = res.schedule.values[rk];
                    let vn = vn.min(res.v_node_norms[rk].upper);
                    ensure!(vn <= bound * (1.0 + 1e-12), "instance {i}, rank {rk}: ‖V h_α‖ = {vn} > ε_α = {bound}");
                }
                let v_norm = op_norm(&res.v_operator().map_err(err)?, Subspace::Span(&res.system), budget);
                ensure!(v_norm.upper <= eps, "instance {i}: op_norm(V).upper = {} > {eps}", v_norm.upper);
                ok += 1;
            }
            Err(Error::ToleranceUnachievable { node, achieved, required }) => {
                ensure!(achieved > required, "instance {i}: witness at {node} has {achieved} ≤ {required}");
                failed += 1;
            }
            Err(e) => return Err(format!("instance {i}: uncertified failure {e}")),
        }
    }
    Ok(format!("{ok} certified factorizations, {failed} certified failures"))
}

pub fn bounded_sign_residuals() -> Outcome {
    let depth = 10;
    let space = DyadicSpace::new(depth, 1.0).unwrap();
    let sys = haar_system(classical_tree(&space, depth as usize).map_err(err)?);
    let mut finals = Vec::new();
    let mut failure = None;
    for m in [2u64, 4, 8] {
        let res = bounded_sign_with_m(&sys, m).map_err(err)?;
        let step = 1.0 / m as f64;
        let mut partial = space.zero();
        for n in 0..depth as usize {
            let mut f_n = space.zero();
            for (rk, h) in sys.functions().iter().enumerate() {
                if MultiIndex::from_rank(rk).level() == n {
                    f_n = f_n.axpy(res.coefficients.0[rk], h);
                }
            }
            partial = partial.axpy(1.0, &f_n);
            let b_n = partial.values().iter().filter(|v: &&f64| v.abs() < 1.0).count() as f64 * space.atom_measure();
            let inc = f_n.norm_p(1.0);
            ensure!(b_n <= m as f64 * inc, "m = {m}, level {n}: μ(B_n) = {b_n} > m‖f_n‖₁ = {}", m as f64 * inc);
            let rec = &res.levels[n];
            ensure!(rec.residual_measure == b_n && rec.increment_l1 == inc, "m = {m}, level {n}: recorded level disagrees");
        }
        ensure!(partial.values() == res.function.values(), "m = {m}: function ≠ Σ a_α h_α");
        ensure!(res.function.integral() == 0.0, "m = {m}: integral {}", res.function.integral());
        let sup = res.coefficients.sup_abs();
        ensure!(sup <= step, "m = {m}: sup|a_α| = {sup} > 1/m");
        if m == 2 && !(res.residual_measure < 0.01) && failure.is_none() {
            failure = Some(format!("m = 2: final μ(B) = {} ≥ 0.01", res.residual_measure));
        }
        finals.push(format!("m={m}: μ(B)={}", res.residual_measure));
    }
    match failure {
        Some(f) => Err(format!("{f} (level bounds, integral and sup hold; {})", finals.join(", "))),
        None => Ok(finals.join(", ")),
    }
}

pub fn sign_pipeline_end_to_end() -> Outcome {
    let eps = 0.2;
    let space = DyadicSpace::new(8, 1.0).unwrap();
    let mut worst: f64 = 0.0;
    let mut within = 0;
    for i in 0..20u64 {
        let t = random_operator(&space, NormedTarget::ellq(6, 2.0).unwrap(), 1.0, i).map_err(err)?;
        let norm = op_norm(&t, Subspace::All, SearchBudget::default());
        ensure!(norm.upper <= 1.0 + 1e-12, "instance {i}: ‖T‖ = {} > 1", norm.upper);
        let budget = SearchBudget { seed: i, ..SearchBudget::default() };
        let series = rank1_series(&t, &TargetBasis::Coordinate, budget).map_err(err)?;
        let full = space.full();
        let rep = narrowops::theorem43_pipeline(&series, &full, eps, 2, &SignOptions::default().with_seed(i), budget)
            .map_err(|e| format!("instance {i}: {e}"))?;
        ensure!(is_sign(&rep.sign, &full) && rep.sign.integral() == 0.0, "instance {i}: not an exact sign");
        let measured = t.target().norm(&t.apply(&rep.sign).map_err(err)?);
        let slack = rep.completion.correction_image.map_or(0.0, |e| e.upper);
        ensure!(
            measured <= eps + slack + 1e-12,
            "instance {i}: ‖Tf‖ = {measured} > ε + slack = {}",
            eps + slack
        );
        worst = worst.max(measured);
        within += usize::from(measured <= eps);
    }
    Ok(format!("20 exact signs, max ‖Tf‖ = {worst:.4}, {within}/20 within ε without slack"))
}

/// Frozen `p = 4` lower bounds by depth from the seed-0 run of the bundled
/// manifest. Regression values, not ground truth.
pub const UNCOND_P4_BASELINE: [f64; 6] = [
    1.0,
    1.0000000000000002,
    1.4142135623730951,
    1.5445210906900528,
    1.7417344598581248,
    1.8601274463738606,
];

pub fn uncond_sanity() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let m = Manifest::load(&manifest_dir().join("uncond_haar.toml")).map_err(err)?;
    let out = run_cli(Experiment::Uncond, &m, dir.path())?;
    let rows = read_csv(&out.table_path("uncond.csv"))?;
    let mut p4 = Vec::new();
    for row in 1..rows.len() {
        let p = parse(field(&rows, row, "p")?)?;
        let depth: usize = field(&rows, row, "depth")?.parse().map_err(err)?;
        let lower = parse(field(&rows, row, "constant_lower")?)?;
        if p == 2.0 {
            ensure!(lower == 1.0, "p = 2, depth {depth}: lower bound {lower} ≠ 1");
        } else if p == 4.0 {
            ensure!(lower <= 3.0 + 1e-9, "p = 4, depth {depth}: lower bound {lower} exceeds β₄ = 3");
            p4.push((depth, lower));
        }
    }
    ensure!(p4.len() == 6, "expected p = 4 rows for depths 1..=6, got {}", p4.len());
    for w in p4.windows(2) {
        ensure!(w[1].1 >= w[0].1, "p = 4: lower bound drops from {} to {} at depth {}", w[0].1, w[1].1, w[1].0);
    }
    for &(depth, lower) in &p4 {
        let base = UNCOND_P4_BASELINE[depth - 1];
        ensure!((lower - base).abs() <= 1e-12 * base, "p = 4, depth {depth}: {lower} drifted from baseline {base}");
    }
    Ok(format!("p = 2 exactly 1 at depths 1..=6; p = 4 nondecreasing up to {:.4} ≤ 3", p4[5].1))
}

pub fn lower_bound_chain() -> Outcome {
    let (eps, c, levels) = (0.1, 1.0, 3);
    let budget = SearchBudget::default();
    let mut parts = Vec::new();
    for p in [1.5, 4.0] {
        let space = DyadicSpace::new(5, p).unwrap();
        let hs = haar_slicing(&space, space.atom_count(), budget).map_err(err)?;
        let res = factorize(&hs.series, &space.full(), eps, levels, &SignOptions::default()).map_err(|e| format!("p = {p}: {e}"))?;
        let rep = check_lower_bound(&res, c, hs.m, budget).map_err(|e| format!("p = {p}: {e}"))?;
        let bound = (hs.m.upper + eps) / (c - eps);
        ensure!(
            rep.haar_constant.lower <= bound + 1e-9,
            "p = {p}: Haar constant {} > (M+ε)/(c−ε) = {bound}",
            rep.haar_constant.lower
        );
        ensure!(rep.holds, "p = {p}: check reported a violation");
        parts.push(format!("p={p}: {:.4} ≤ {bound:.4}", rep.haar_constant.lower));
    }
    Ok(parts.join(", "))
}

fn run_bytes(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut files = Vec::new();
    for e in fs::read_dir(dir).map_err(err)? {
        let path = e.map_err(err)?.path();
        if path.extension().is_some_and(|x| x == "csv" || x == "json") {
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            files.push((name, fs::read(&path).map_err(err)?));
        }
    }
    files.sort();
    Ok(files)
}

pub fn determinism() -> Outcome {
    let bundled = [
        ("burkholder.toml", Experiment::Burkholder),
        ("thm43_8atoms.toml", Experiment::Thm43),
        ("signbuild_depth10.toml", Experiment::Signbuild),
        ("counterexample.toml", Experiment::Counterexample),
        ("tree_integration.toml", Experiment::Tree),
        ("uncond_haar.toml", Experiment::Uncond),
    ];
    let mut runs: Vec<(Experiment, Manifest)> = Vec::new();
    for (file, exp) in bundled {
        runs.push((exp, Manifest::load(&manifest_dir().join(file)).map_err(err)?));
    }
    for exp in Experiment::ALL {
        let m = Manifest {
            name: format!("small-{}", exp.name()),
            depth: 3,
            levels: 1,
            slices: Some(8),
            instances: 2,
            ..Manifest::default()
        };
        runs.push((exp, m));
    }
    let (a, b) = (tempfile::tempdir().map_err(err)?, tempfile::tempdir().map_err(err)?);
    let mut files = 0;
    for (exp, m) in &runs {
        let x = run_bytes(&run_cli(*exp, m, a.path())?.dir)?;
        let y = run_bytes(&run_cli(*exp, m, b.path())?.dir)?;
        ensure!(x.len() == y.len(), "{}: different file sets", m.name);
        for ((nx, bx), (ny, by)) in x.iter().zip(&y) {
            ensure!(nx == ny && bx == by, "{}: {nx} differs between runs", m.name);
        }
        files += x.len();
    }
    Ok(format!("{} manifests rerun, {files} files byte-identical", runs.len()))
}
