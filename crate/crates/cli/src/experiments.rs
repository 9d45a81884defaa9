//! The subcommands: each turns a manifest into tables, certificates and
//! per-instance diagnostics.

use narrowops::narrowness::HppDefect;
use narrowops::operators::{identity_like, integration, s_coordinate_partition};
use narrowops::uncond::uncond_constant_search;
use narrowops::{
    bounded_sign_with_m, build_small_tree, burkholder_beta, check_lower_bound, classical_tree, corollary44_demo,
    counterexample_operator, epsilon_schedule, factorize, haar_slicing, haar_system, hpp_defect, random_operator,
    random_rank_one_series, rank1_series, sign_defect, theorem33_experiment, theorem43_pipeline, BasicSequence, DyadicSpace,
    FactorizationResult, FiniteOperator, Method, MultiIndex, NormEstimate, NormedTarget, PartitionSampler,
    SearchBudget, SeriesRep, SignMode, SignOptions, SignSearchResult, TargetBasis, Theorem43Report,
};
use rayon::prelude::*;

use crate::manifest::{Manifest, OperatorSpec};
use crate::report::{est, num, tagged, CertificateSummary, Diagnostic, Table};
use crate::verify::Check;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Defect,
    Tree,
    Hpp,
    Uncond,
    Burkholder,
    Factorize,
    LbCheck,
    Thm33,
    Thm43,
    Cor44,
    Counterexample,
    Signbuild,
}

impl Experiment {
    pub const ALL: [Experiment; 12] = [
        Experiment::Defect,
        Experiment::Tree,
        Experiment::Hpp,
        Experiment::Uncond,
        Experiment::Burkholder,
        Experiment::Factorize,
        Experiment::LbCheck,
        Experiment::Thm33,
        Experiment::Thm43,
        Experiment::Cor44,
        Experiment::Counterexample,
        Experiment::Signbuild,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Defect => "defect",
            Experiment::Tree => "tree",
            Experiment::Hpp => "hpp",
            Experiment::Uncond => "uncond",
            Experiment::Burkholder => "burkholder",
            Experiment::Factorize => "factorize",
            Experiment::LbCheck => "lb-check",
            Experiment::Thm33 => "thm33",
            Experiment::Thm43 => "thm43",
            Experiment::Cor44 => "cor44",
            Experiment::Counterexample => "counterexample",
            Experiment::Signbuild => "signbuild",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == name)
    }
}

#[derive(Debug, Default)]
pub struct Output {
    pub tables: Vec<Table>,
    pub checks: Vec<Check>,
    pub certificates: Vec<CertificateSummary>,
    pub diagnostics: Vec<Diagnostic>,
}

impl Output {
    /// Keeps per-instance mathematical failures as diagnostics; anything
    /// else aborts the run.
    fn absorb<T>(&mut self, label: String, r: narrowops::Result<T>) -> Result<Option<T>, CliError> {
        match r {
            Ok(v) => Ok(Some(v)),
            Err(e) => match Diagnostic::from_error(label, &e) {
                Some(d) => {
                    self.diagnostics.push(d);
                    Ok(None)
                }
                None => Err(e.into()),
            },
        }
    }

    fn certify(&mut self, check: Check) {
        let (passed, detail) = match check.verify() {
            Ok(()) => (true, String::new()),
            Err(f) => (false, f.to_string()),
        };
        self.certificates.push(CertificateSummary {
            name: check.name(),
            passed,
            detail,
        });
        self.checks.push(check);
    }
}

pub fn execute(exp: Experiment, m: &Manifest) -> Result<Output, CliError> {
    let mut out = Output::default();
    match exp {
        Experiment::Defect => defect(m, &mut out)?,
        Experiment::Tree => tree(m, &mut out)?,
        Experiment::Hpp => hpp(m, &mut out)?,
        Experiment::Uncond => uncond(m, &mut out)?,
        Experiment::Burkholder => burkholder(m, &mut out)?,
        Experiment::Factorize => factorize_batch(m, &mut out)?,
        Experiment::LbCheck => lb_check(m, &mut out)?,
        Experiment::Thm33 => thm33(m, &mut out)?,
        Experiment::Thm43 => sign_pipeline(m, &mut out, "thm43", false)?,
        Experiment::Cor44 => sign_pipeline(m, &mut out, "cor44", true)?,
        Experiment::Counterexample => counterexample(m, &mut out)?,
        Experiment::Signbuild => signbuild(m, &mut out)?,
    }
    if let Some(c) = out.certificates.iter().find(|c| !c.passed) {
        return Err(narrowops::Error::certificate(c.name.clone(), c.detail.clone()).into());
    }
    Ok(out)
}

fn instance_seed(m: &Manifest, i: usize) -> u64 {
    m.seed.wrapping_add(i as u64)
}

fn sign_options(m: &Manifest, seed: u64) -> SignOptions {
    SignOptions {
        mode: SignMode::Auto,
        budget: m.budget.sign_evaluations,
        seed,
        exact_cap: m.budget.exact_cap,
    }
}

fn search_budget(m: &Manifest, seed: u64) -> SearchBudget {
    SearchBudget {
        restarts: m.budget.restarts,
        sweeps: m.budget.sweeps,
        seed,
    }
}

fn first_p(m: &Manifest) -> f64 {
    m.p.first().copied().unwrap_or(1.0)
}

/// The operator of instance `i` on `L_p` over `2^depth` atoms.
pub fn build_operator(m: &Manifest, p: f64, i: usize) -> Result<FiniteOperator<f64>, CliError> {
    let space = DyadicSpace::new(m.depth, p)?;
    let target = || NormedTarget::ellq(m.target_dim, m.target_q);
    Ok(match &m.operator {
        OperatorSpec::Random { scale } => random_operator(&space, target()?, *scale, instance_seed(m, i))?,
        OperatorSpec::Integration { x } => {
            let x = if x.is_empty() { vec![1.0; m.target_dim] } else { x.clone() };
            integration(&space, &x, target()?)?
        }
        OperatorSpec::Identity => identity_like(&space)?,
        OperatorSpec::Counterexample => counterexample_operator(m.depth_s, m.depth_t, p)?,
        OperatorSpec::RankOneSeries { .. } => {
            let series = build_series(m, p, i)?;
            let terms = series.terms();
            let mut sum = terms[0].clone();
            for t in &terms[1..] {
                sum = sum.axpy(1.0, t)?;
            }
            sum
        }
        OperatorSpec::File { .. } => {
            let path = m.operator_path().expect("file operator has a path");
            let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
            FiniteOperator::from_json(&text)?
        }
    })
}

/// The series of instance `i`: the generated terms for a rank-one series,
/// otherwise the operator sliced along the coordinates of its target.
pub fn build_series(m: &Manifest, p: f64, i: usize) -> Result<SeriesRep<f64>, CliError> {
    let budget = search_budget(m, instance_seed(m, i));
    match &m.operator {
        OperatorSpec::RankOneSeries { max_terms, scale } => {
            let space = DyadicSpace::new(m.depth, p)?;
            let target = NormedTarget::ellq(m.target_dim, m.target_q)?;
            let terms = random_rank_one_series(&space, target, 1 + i % max_terms, *scale, instance_seed(m, i))?;
            Ok(SeriesRep::new(terms, budget)?)
        }
        _ => Ok(rank1_series(&build_operator(m, p, i)?, &TargetBasis::Coordinate, budget)?),
    }
}

fn sign_check(name: String, t: &FiniteOperator<f64>, res: &SignSearchResult<f64>, bound: Option<f64>) -> Check {
    Check::Sign {
        name,
        operator: t.to_record(),
        set: t.source().full().atoms().to_vec(),
        sign: res.sign.values().to_vec(),
        value: res.value.upper,
        bound,
    }
}

fn optimality(o: narrowops::narrowness::Optimality) -> &'static str {
    match o {
        narrowops::narrowness::Optimality::Exact => "exact",
        narrowops::narrowness::Optimality::Heuristic => "heuristic",
    }
}

fn defect(m: &Manifest, out: &mut Output) -> Result<(), CliError> {
    let p = first_p(m);
    let runs: Vec<_> = (0..m.instances)
        .into_par_iter()
        .map(|i| -> Result<_, CliError> {
            let t = build_operator(m, p, i)?;
            let res = sign_defect(&t, &t.source().full(), &sign_options(m, instance_seed(m, i)))?;
            Ok((t, res))
        })
        .collect::<Result<_, _>>()?;
    let mut table = Table::new(
        "defect",
        &["instance", "atoms", "defect_lower", "defect_upper", "defect_method", "optimality", "evaluations"],
    );
    let mut signs = Table::new("signs", &["instance", "atom", "sign", "sign_method"]);
    for (i, (t, res)) in runs.iter().enumerate() {
        let [lo, hi, method] = est(&res.value);
        table.push(vec![
            i.to_string(),
            t.cols().to_string(),
            lo,
            hi,
            method,
            optimality(res.optimality).into(),
            res.evaluations.to_string(),
        ]);
        push_signs(&mut signs, i, res.sign.values());
        out.certify(sign_check(format!("defect[{i}]"), t, res, None));
    }
    out.tables.extend([table, signs]);
    Ok(())
}

fn push_signs(table: &mut Table, instance: usize, values: &[f64]) {
    for (a, &v) in values.iter().enumerate() {
        let [s, method] = tagged(v, Method::Exact);
        table.push(vec![instance.to_string(), a.to_string(), s, method]);
    }
}

fn failure_cells(d: Option<&Diagnostic>) -> [String; 5] {
    match d {
        Some(d) => [
            d.node.clone().unwrap_or_default(),
            d.achieved.map(num).unwrap_or_default(),
            d.achieved.map_or(String::new(), |_| Method::Bound.to_string()),
            d.required.map(num).unwrap_or_default(),
            d.required.map_or(String::new(), |_| Method::Exact.to_string()),
        ],
        None => Default::default(),
    }
}

fn tree(m: &Manifest, out: &mut Output) -> Result<(), CliError> {
    let p = first_p(m);
    let runs: Vec<_> = (0..m.instances)
        .into_par_iter()
        .map(|i| -> Result<_, CliError> {
            let t = build_operator(m, p, i)?;
            let full = t.source().full();
            let schedule = epsilon_schedule(m.epsilon, m.levels, t.source().exponent(), full.measure())?;
            let res = build_small_tree(&t, &full, &schedule, m.levels, &sign_options(m, instance_seed(m, i)));
            Ok((t, schedule, res))
        })
        .collect::<Result<_, _>>()?;
    let mut table = Table::new(
        "tree",
        &[
            "instance",
            "status",
            "node",
            "level",
            "atoms",
            "achieved_lower",
            "achieved_upper",
            "achieved_method",
            "required",
            "required_method",
            "optimality",
        ],
    );
    for (i, (t, schedule, res)) in runs.into_iter().enumerate() {
        let Some(small) = out.absorb(format!("tree[{i}]"), res)? else {
            let [node, achieved, a_method, required, r_method] = failure_cells(out.diagnostics.last());
            let level = node.parse::<MultiIndex>().map_or(String::new(), |a| a.level().to_string());
            table.push(vec![
                i.to_string(),
                "infeasible".into(),
                node,
                level,
                String::new(),
                String::new(),
                achieved,
                a_method,
                required,
                r_method,
                String::new(),
            ]);
            continue;
        };
        let sys = &small.system;
        for (r, e) in small.achieved.iter().enumerate() {
            let alpha = MultiIndex::from_rank(r);
            let [lo, hi, method] = est(e);
            let [req, req_method] = tagged(schedule.values[r], Method::Exact);
            table.push(vec![
                i.to_string(),
                "ok".into(),
                alpha.to_string(),
                alpha.level().to_string(),
                sys.tree().node_by_rank(r).len().to_string(),
                lo,
                hi,
                method,
                req,
                req_method,
                optimality(small.optimality[r]).into(),
            ]);
        }
        out.certify(Check::Tree {
            name: format!("tree[{i}]"),
            operator: t.to_record(),
            tree: sys.tree().to_record(),
            achieved: small.achieved.iter().map(|e| e.upper).collect(),
            required: schedule.values[..sys.len()].to_vec(),
        });
    }
    out.tables.push(table);
    Ok(())
}

const HPP_ENUM_ATOMS: usize = 12;
const HPP_ENUM_BLOCKS: usize = 8;

fn hpp(m: &Manifest, out: &mut Output) -> Result<(), CliError> {
    let p = first_p(m);
    let runs: Vec<_> = (0..m.instances)
        .into_par_iter()
        .map(|i| -> Result<_, CliError> {
            let t = build_operator(m, p, i)?;
            let full = t.source().full();
            let seed = instance_seed(m, i);
            let opts = sign_options(m, seed);
            let sampler = if full.len() <= HPP_ENUM_ATOMS && m.blocks <= HPP_ENUM_BLOCKS {
                PartitionSampler::Enumerate
            } else {
                PartitionSampler::Random {
                    count: m.partitions,
                    seed,
                }
            };
            let h: HppDefect<f64> = hpp_defect(&t, &full, &sampler, m.blocks, &opts)?;
            let pp = sign_defect(&t, &full, &opts)?;
            let worst = match &h.worst {
                Some(part) => {
                    let r = t.restrict(part)?;
                    let s = sign_defect(&r, &r.source().full(), &opts)?;
                    Some((r, s))
                }
                None => None,
            };
            Ok((t, h, pp, worst))
        })
        .collect::<Result<_, _>>()?;
    let mut table = Table::new(
        "hpp",
        &[
            "instance",
            "blocks",
            "partitions",
            "exhaustive",
            "hpp_lower",
            "hpp_upper",
            "hpp_method",
            "pp_lower",
            "pp_upper",
            "pp_method",
        ],
    );
    for (i, (t, h, pp, worst)) in runs.iter().enumerate() {
        let mut row = vec![
            i.to_string(),
            m.blocks.to_string(),
            h.partitions.to_string(),
            h.exhaustive.to_string(),
        ];
        row.extend(est(&h.estimate));
        row.extend(est(&pp.value));
        table.push(row);
        out.certify(sign_check(format!("hpp[{i}] full"), t, pp, None));
        if let Some((r, s)) = worst {
            out.certify(sign_check(format!("hpp[{i}] worst partition"), r, s, None));
        }
    }
    out.tables.push(table);
    Ok(())
}

fn uncond(m: &Manifest, out: &mut Output) -> Result<(), CliError> {
    let mut table = Table::new("uncond", &["p", "depth", "functions", "constant_lower", "constant_upper", "constant_method"]);
    let budget = search_budget(m, m.seed);
    for p in m.p_list(&[2.0, 4.0]) {
        let mut warm = None;
        for depth in 1..=m.depth {
            let space = DyadicSpace::new(depth, p)?;
            let sys = haar_system(classical_tree(&space, depth as usize)?);
            let seq = BasicSequence::from_system(&sys)?;
            let start = warm.as_ref().map(|w: &narrowops::uncond::UncondWitness<f64>| w.padded(seq.len()));
            let res = uncond_constant_search(&seq, budget, start.as_ref())?;
            let mut row = vec![num(p), depth.to_string(), seq.len().to_string()];
            row.extend(est(&res.estimate));
            table.push(row);
            if let Some(w) = &res.witness {
                out.certify(Check::Witness {
                    name: format!("uncond[p={p}, depth={depth}]"),
                    target: seq.target().clone(),
                    vectors: seq.vectors().to_vec(),
                    signs: w.signs.clone(),
                    coefficients: w.coefficients.clone(),
                    ratio: w.ratio,
                });
            }
            warm = res.witness;
        }
    }
    out.tables.push(table);
    Ok(())
}

fn burkholder(m: &Manifest, out: &mut Output) -> Result<(), CliError> {
    let mut table = Table::new("burkholder", &["p", "beta", "beta_method"]);
    for p in m.p_list(&[1.5, 2.0, 3.0, 4.0]) {
        let beta = burkholder_beta(p)?;
        let [b, method] = tagged(beta, Method::Exact);
        table.push(vec![num(p), b, method]);
        out.certify(Check::Burkholder { p, beta });
    }
    out.tables.push(table);
    Ok(())
}

fn factorization_check(name: String, res: &FactorizationResult<f64>, terms: &[FiniteOperator<f64>], m: NormEstimate<f64>) -> Check {
    Check::Factorization {
        name,
        terms: terms.iter().map(FiniteOperator::to_record).collect(),
        m,
        tree: res.system.tree().to_record(),
        cuts: res.cuts.clone(),
        epsilon: res.epsilon,
        v_bound: res.v_bound,
    }
}

fn cuts_table() -> Table {
    Table::new(
        "cuts",
        &[
            "instance",
            "node",
            "start",
            "cut",
            "head_lower",
            "head_upper",
            "head_method",
            "tail_lower",
            "tail_upper",
            "tail_method",
            "v_lower",
            "v_upper",
            "v_method",
            "tolerance",
            "tolerance_method",
        ],
    )
}

fn push_cuts(table: &mut Table, instance: &str, res: &FactorizationResult<f64>) {
    for r in 0..res.cuts.len() {
        let mut row = vec![
            instance.to_string(),
            MultiIndex::from_rank(r).to_string(),
            res.starts[r].to_string(),
            res.cuts[r].to_string(),
        ];
        row.extend(est(&res.head_defects[r]));
        row.extend(est(&res.tail_norms[r]));
        row.extend(est(&res.v_node_norms[r]));
        row.extend(tagged(res.schedule.values[r], Method::Exact));
        table.push(row);
    }
}

fn factorize_batch(m: &Manifest, out: &mut Output) -> Result<(), CliError> {
    let p = first_p(m);
    let runs: Vec<_> = (0..m.instances)
        .into_par_iter()
        .map(|i| -> Result<_, CliError> {
            let seed = instance_seed(m, i);
            let series = build_series(m, p, i)?;
            let full = series.terms()[0].source().full();
            let res = factorize(&series, &full, m.epsilon, m.levels, &sign_options(m, seed));
            let v_norm = match &res {
                Ok(r) => Some(r.v_norm(search_budget(m, seed))?),
                Err(_) => None,
            };
            Ok((series, res, v_norm))
        })
        .collect::<Result<_, _>>()?;
    let mut table = Table::new(
        "factorize",
        &[
            "instance",
            "status",
            "terms",
            "m_lower",
            "m_upper",
            "m_method",
            "v_bound",
            "v_bound_method",
            "v_norm_lower",
            "v_norm_upper",
            "v_norm_method",
            "node",
            "achieved",
            "achieved_method",
            "required",
            "required_method",
        ],
    );
    let mut cuts = cuts_table();
    for (i, (series, res, v_norm)) in runs.into_iter().enumerate() {
        let mut row = vec![i.to_string(), String::new(), series.len().to_string()];
        row.extend(est(&series.m()));
        match out.absorb(format!("factorize[{i}]"), res)? {
            Some(res) => {
                row[1] = "ok".into();
                row.extend(tagged(res.v_bound, Method::Bound));
                row.extend(est(&v_norm.expect("computed on success")));
                row.extend(failure_cells(None));
                push_cuts(&mut cuts, &i.to_string(), &res);
                if v_norm.is_some_and(|v| v.upper > m.epsilon) {
                    return Err(narrowops::Error::certificate(
                        format!("factorize[{i}]: op_norm(V) ≤ ε"),
                        format!("{} > {}", v_norm.unwrap().upper, m.epsilon),
                    )
                    .into());
                }
                out.certify(factorization_check(format!("factorize[{i}]"), &res, series.terms(), series.m()));
            }
            None => {
                row[1] = "infeasible".into();
                row.extend(std::iter::repeat(String::new()).take(5));
                row.extend(failure_cells(out.diagnostics.last()));
            }
        }
        table.push(row);
    }
    out.tables.extend([table, cuts]);
    Ok(())
}

fn lb_check(m: &Manifest, out: &mut Output) -> Result<(), CliError> {
    let budget = search_budget(m, m.seed);
    let opts = sign_options(m, m.seed);
    let mut table = Table::new(
        "lbcheck",
        &[
            "p",
            "status",
            "slices",
            "c",
            "epsilon",
            "m_lower",
            "m_upper",
            "m_method",
            "slice_haar_lower",
            "slice_haar_upper",
            "slice_haar_method",
            "tree_haar_lower",
            "tree_haar_upper",
            "tree_haar_method",
            "bound",
            "bound_method",
            "min_ratio",
            "min_ratio_method",
            "samples",
            "holds",
        ],
    );
    let mut cuts = cuts_table();
    for p in m.p_list(&[1.5, 4.0]) {
        let space = DyadicSpace::new(m.depth, p)?;
        let n_slices = m.slices.unwrap_or(space.atom_count());
        let hs = haar_slicing(&space, n_slices, budget)?;
        let label = format!("lb-check[p={p}]");
        let mut row = vec![num(p), String::new(), n_slices.to_string(), num(m.c), num(m.epsilon)];
        row.extend(est(&hs.m));
        row.extend(est(&hs.haar_constant));
        let Some(res) = out.absorb(label.clone(), factorize(&hs.series, &space.full(), m.epsilon, m.levels, &opts))? else {
            row[1] = "infeasible".into();
            row.extend(std::iter::repeat(String::new()).take(9));
            table.push(row);
            continue;
        };
        push_cuts(&mut cuts, &num(p), &res);
        out.certify(factorization_check(label.clone(), &res, hs.series.terms(), hs.m));
        match out.absorb(label, check_lower_bound(&res, m.c, hs.m, budget))? {
            Some(rep) => {
                row[1] = if rep.holds { "ok" } else { "bound_violated" }.into();
                row.extend(est(&rep.haar_constant));
                row.extend(tagged(rep.bound, Method::Bound));
                row.extend(tagged(rep.min_ratio, Method::Search));
                row.push(rep.samples.to_string());
                row.push(rep.holds.to_string());
                if !rep.holds {
                    return Err(narrowops::Error::certificate(
                        format!("lb-check[p={p}]: Haar constant ≤ (M+ε)/(c−ε)"),
                        format!("{} > {}", rep.haar_constant.lower, rep.bound),
                    )
                    .into());
                }
            }
            None => {
                row[1] = "claim_rejected".into();
                row.extend(std::iter::repeat(String::new()).take(9));
            }
        }
        table.push(row);
    }
    out.tables.extend([table, cuts]);
    Ok(())
}

fn thm33(m: &Manifest, out: &mut Output) -> Result<(), CliError> {
    let n_slices = m.slices.unwrap_or(1 << m.depth);
    let rows = theorem33_experiment(&m.p_list(&[4.0, 3.0, 2.0]), m.depth, n_slices, search_budget(m, m.seed))?;
    let mut table = Table::new(
        "thm33",
        &[
            "p",
            "slices",
            "m_lower",
            "m_upper",
            "m_method",
            "haar_lower",
            "haar_upper",
            "haar_method",
            "beta",
            "beta_method",
            "consistent",
        ],
    );
    for r in rows {
        let mut row = vec![num(r.p), n_slices.to_string()];
        row.extend(est(&r.m));
        row.extend(est(&r.haar_constant));
        row.extend(tagged(r.beta, Method::Exact));
        row.push(r.consistent.to_string());
        table.push(row);
        out.certify(Check::Burkholder { p: r.p, beta: r.beta });
    }
    out.tables.push(table);
    Ok(())
}

/// `thm43` slices a random operator along the coordinates of its target and
/// runs the pipeline; `cor44` goes through the basis-validating wrapper.
fn sign_pipeline(m: &Manifest, out: &mut Output, name: &str, via_basis: bool) -> Result<(), CliError> {
    let p = first_p(m);
    let runs: Vec<_> = (0..m.instances)
        .into_par_iter()
        .map(|i| -> Result<_, CliError> {
            let seed = instance_seed(m, i);
            let t = build_operator(m, p, i)?;
            let full = t.source().full();
            let (budget, opts) = (search_budget(m, seed), sign_options(m, seed));
            let series = build_series(m, p, i)?;
            let res: narrowops::Result<Theorem43Report<f64>> = if via_basis {
                corollary44_demo(&t, &TargetBasis::Coordinate, &full, m.epsilon, m.levels, &opts, budget)
            } else {
                theorem43_pipeline(&series, &full, m.epsilon, m.levels, &opts, budget)
            };
            Ok((t, res, series))
        })
        .collect::<Result<_, _>>()?;
    let mut table = Table::new(
        name,
        &[
            "instance",
            "status",
            "epsilon",
            "measured_lower",
            "measured_upper",
            "measured_method",
            "pre_completion_lower",
            "pre_completion_upper",
            "pre_completion_method",
            "correction_lower",
            "correction_upper",
            "correction_method",
            "bound",
            "bound_method",
            "slack_l1",
            "slack_l1_method",
            "residual_measure",
            "residual_measure_method",
            "m",
            "delta",
            "delta_method",
            "within_epsilon",
            "node",
            "achieved",
            "achieved_method",
            "required",
            "required_method",
        ],
    );
    let mut signs = Table::new("signs", &["instance", "atom", "sign", "sign_method"]);
    for (i, (t, res, series)) in runs.into_iter().enumerate() {
        let label = format!("{name}[{i}]");
        let mut row = vec![i.to_string(), String::new(), num(m.epsilon)];
        match out.absorb(label.clone(), res)? {
            Some(rep) => {
                let correction = rep.completion.correction_image.unwrap_or(NormEstimate::exact(0.0));
                let bound = m.epsilon + correction.upper;
                row[1] = "ok".into();
                row.extend(est(&rep.measured));
                row.extend(est(&rep.pre_completion));
                row.extend(est(&correction));
                row.extend(tagged(bound, Method::Bound));
                row.extend(tagged(rep.completion.slack, Method::Exact));
                row.extend(tagged(rep.bounded.residual_measure, Method::Exact));
                row.push(rep.bounded.m.to_string());
                row.extend(tagged(rep.delta, Method::Exact));
                row.push(rep.within_epsilon.to_string());
                row.extend(failure_cells(None));
                push_signs(&mut signs, i, rep.sign.values());
                out.certify(Check::Sign {
                    name: label.clone(),
                    operator: t.to_record(),
                    set: t.source().full().atoms().to_vec(),
                    sign: rep.sign.values().to_vec(),
                    value: rep.measured.upper,
                    bound: Some(bound + 1e-9 * (1.0 + bound)),
                });
                out.certify(factorization_check(
                    format!("{label} factorization"),
                    &rep.factorization,
                    series.terms(),
                    series.m(),
                ));
            }
            None => {
                row[1] = "infeasible".into();
                row.extend(std::iter::repeat(String::new()).take(19));
                row.extend(failure_cells(out.diagnostics.last()));
            }
        }
        table.push(row);
    }
    out.tables.extend([table, signs]);
    Ok(())
}

fn counterexample(m: &Manifest, out: &mut Output) -> Result<(), CliError> {
    let t = counterexample_operator(m.depth_s, m.depth_t, first_p(m))?;
    let full = t.source().full();
    let opts = sign_options(m, m.seed);
    let pp = sign_defect(&t, &full, &opts)?;
    let partition = s_coordinate_partition(t.source(), m.depth_s)?;
    let blocks = partition.blocks().len();
    let h = hpp_defect(&t, &full, &PartitionSampler::Fixed(vec![partition.clone()]), blocks, &opts)?;
    let restricted = t.restrict(&partition)?;
    let coarse = sign_defect(&restricted, &restricted.source().full(), &opts)?;
    let mut table = Table::new("counterexample", &["quantity", "lower", "upper", "method"]);
    let mut push = |q: &str, e: &NormEstimate<f64>| {
        let mut row = vec![q.to_string()];
        row.extend(est(e));
        table.push(row);
    };
    push("measure", &NormEstimate::exact(full.measure()));
    push("grid_scale", &NormEstimate::exact(0.5f64.powi(m.depth_t as i32)));
    push("sign_defect", &pp.value);
    push("hpp_defect_s_partition", &h.estimate);
    out.tables.push(table);
    out.certify(sign_check("counterexample full σ-algebra".into(), &t, &pp, None));
    out.certify(sign_check("counterexample s-partition".into(), &restricted, &coarse, None));
    Ok(())
}

fn signbuild(m: &Manifest, out: &mut Output) -> Result<(), CliError> {
    let mut levels = Table::new(
        "signbuild",
        &[
            "m",
            "depth",
            "level",
            "increment_l1",
            "increment_l1_method",
            "residual_measure",
            "residual_measure_method",
            "residual_bound",
            "residual_bound_method",
            "holds",
        ],
    );
    let mut finals = Table::new(
        "signbuild_final",
        &[
            "m",
            "depth",
            "residual_measure",
            "residual_measure_method",
            "integral",
            "integral_method",
            "sup_coefficient",
            "sup_coefficient_method",
        ],
    );
    for &step in &m.m {
        for depth in m.sign_depths() {
            let space = DyadicSpace::new(depth, 1.0)?;
            let sys = haar_system(classical_tree(&space, depth as usize)?);
            let res = bounded_sign_with_m(&sys, step)?;
            for l in &res.levels {
                let bound = step as f64 * l.increment_l1;
                let mut row = vec![step.to_string(), depth.to_string(), l.level.to_string()];
                row.extend(tagged(l.increment_l1, Method::Exact));
                row.extend(tagged(l.residual_measure, Method::Exact));
                row.extend(tagged(bound, Method::Exact));
                row.push((l.residual_measure <= bound).to_string());
                levels.push(row);
            }
            let integral = res.function.integral();
            let sup = res.coefficients.sup_abs();
            let mut row = vec![step.to_string(), depth.to_string()];
            row.extend(tagged(res.residual_measure, Method::Exact));
            row.extend(tagged(integral, Method::Exact));
            row.extend(tagged(sup, Method::Exact));
            finals.push(row);
            out.certify(Check::BoundedSign {
                name: format!("signbuild[m={step}, depth={depth}]"),
                depth,
                m: step,
                increments: res.levels.iter().map(|l| l.increment_l1).collect(),
                residuals: res.levels.iter().map(|l| l.residual_measure).collect(),
                integral,
                sup_coefficient: sup,
            });
        }
    }
    out.tables.extend([levels, finals]);
    Ok(())
}
