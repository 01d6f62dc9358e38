//! Experiment harness: runs one mode on one chain and reports CSV rows.

use std::io::{Read, Write};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::chain::{
    asymmetric_walk, load_spec, single_state, symmetric_two_state, two_state_example,
};
use crate::conditioned::{phi_ode, phi_semigroup};
use crate::error::{Error, Result};
use crate::fv::{
    check_type_bound, estimate_profile, estimate_stationary, profile_samples, StationaryOptions,
};
use crate::graphical::{coupling_bound, estimate_i_probability, perfect_sample};
use crate::qsd::{qsd_power, qsd_via_yaglom};
use crate::rng::derive_key;
use crate::{validate_chain, Distribution, RateMatrix};

pub const BUILDERS: &[&str] = &[
    "two_state_example",
    "symmetric_two_state",
    "single_state",
    "asymmetric_walk",
];

#[derive(Debug, Clone, PartialEq)]
pub enum ChainSource {
    Spec(PathBuf),
    Builder {
        name: String,
        p: Option<f64>,
        l: Option<usize>,
        c: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    SolveQsd,
    Evolve,
    Simulate,
    Stationary,
    PerfectSample,
    VerifyBounds,
    Sweep,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::SolveQsd => "solve-qsd",
            Mode::Evolve => "evolve",
            Mode::Simulate => "simulate",
            Mode::Stationary => "stationary",
            Mode::PerfectSample => "perfect-sample",
            Mode::VerifyBounds => "verify-bounds",
            Mode::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QsdMethod {
    Power,
    Yaglom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub chain: ChainSource,
    pub mode: Mode,
    pub n_list: Vec<usize>,
    pub t: f64,
    pub replicas: usize,
    pub seed: u64,
    pub tol: f64,
    pub burn_in: f64,
    pub horizon: f64,
    /// Initial state label; the first state when absent.
    pub start: Option<String>,
    pub method: QsdMethod,
    pub step: f64,
    pub k_max: u32,
    pub repetitions: usize,
    pub batches: usize,
}

impl ExperimentConfig {
    pub fn new(chain: ChainSource, mode: Mode, seed: u64) -> Self {
        Self {
            chain,
            mode,
            n_list: vec![100],
            t: 1.0,
            replicas: 1000,
            seed,
            tol: 1e-12,
            burn_in: 10.0,
            horizon: 1e4,
            start: None,
            method: QsdMethod::Power,
            step: 1e-3,
            k_max: 5,
            repetitions: 5,
            batches: crate::fv::DEFAULT_BATCHES,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceSource {
    Paper,
    SemigroupOracle,
    QsdSolver,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment_id: String,
    pub mode: String,
    pub chain_name: String,
    #[serde(rename = "N")]
    pub n: Option<usize>,
    pub t: Option<f64>,
    pub state_label: String,
    pub estimate: f64,
    pub stderr: f64,
    pub reference_value: Option<f64>,
    pub reference_source: ReferenceSource,
    pub replicas: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub rows: Vec<ResultRow>,
    /// Rows whose estimate broke its bound (verify-bounds only).
    pub violations: Vec<String>,
}

fn need<T>(v: Option<T>, flag: &str, builder: &str) -> Result<T> {
    v.ok_or_else(|| Error::InvalidArgument(format!("builder {builder} needs --{flag}")))
}

pub fn load_chain(source: &ChainSource) -> Result<(String, RateMatrix<f64>)> {
    match source {
        ChainSource::Spec(path) => {
            let text = std::fs::read_to_string(path)?;
            let name = path
                .file_stem()
                .map_or_else(|| "chain".into(), |s| s.to_string_lossy().into_owned());
            Ok((name, load_spec(&text)?))
        }
        ChainSource::Builder { name, p, l, c } => {
            let rates = match name.as_str() {
                "two_state_example" => two_state_example(),
                "symmetric_two_state" => symmetric_two_state(need(*c, "c", name)?)?,
                "single_state" => single_state(need(*c, "c", name)?)?,
                "asymmetric_walk" => asymmetric_walk(need(*p, "p", name)?, need(*l, "L", name)?)?,
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "unknown builder {other}; known: {}",
                        BUILDERS.join(", ")
                    )))
                }
            };
            Ok((name.clone(), rates))
        }
    }
}

fn is_two_state_example(cfg: &ExperimentConfig) -> bool {
    matches!(&cfg.chain, ChainSource::Builder { name, .. } if name == "two_state_example")
}

fn initial_law(cfg: &ExperimentConfig, rates: &RateMatrix<f64>) -> Result<Distribution<f64>> {
    let x = match &cfg.start {
        None => 0,
        Some(label) => rates
            .space()
            .index_of(label)
            .ok_or_else(|| Error::InvalidArgument(format!("--start: unknown state {label}")))?,
    };
    Ok(Distribution::point_mass(rates.space().clone(), x))
}

fn phi_reference(rates: &RateMatrix<f64>, mu: &Distribution<f64>, t: f64) -> Result<Vec<f64>> {
    Ok(phi_semigroup(rates, mu, t)?.into_weights())
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Sample mean of `r` values and its standard error.
fn mean_se(values: impl Iterator<Item = f64> + Clone, r: f64) -> (f64, f64) {
    let mean = values.clone().sum::<f64>() / r;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1.0);
    (mean, (var / r).sqrt())
}

struct Rows<'a> {
    cfg: &'a ExperimentConfig,
    id: String,
    chain: String,
    rows: Vec<ResultRow>,
}

impl Rows<'_> {
    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        n: Option<usize>,
        t: Option<f64>,
        label: String,
        estimate: f64,
        stderr: f64,
        reference: Option<f64>,
        source: ReferenceSource,
        replicas: usize,
    ) {
        self.rows.push(ResultRow {
            experiment_id: self.id.clone(),
            mode: self.cfg.mode.name().into(),
            chain_name: self.chain.clone(),
            n,
            t,
            state_label: label,
            estimate,
            stderr,
            reference_value: reference,
            reference_source: if reference.is_some() {
                source
            } else {
                ReferenceSource::None
            },
            replicas,
            seed: self.cfg.seed,
        });
    }
}

fn check_particles(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.n_list.is_empty() || cfg.n_list.iter().any(|&n| n < 2) {
        return Err(Error::InvalidArgument("--N needs values >= 2".into()));
    }
    Ok(())
}

/// Runs the configured mode.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let (chain, rates) = load_chain(&cfg.chain)?;
    let summary = validate_chain(&rates)?;
    let labels = rates.space().labels().to_vec();
    let mut out = Rows {
        cfg,
        id: format!("{}-{}-{}", cfg.mode.name(), chain, cfg.seed),
        chain,
        rows: Vec::new(),
    };
    let mut violations = Vec::new();
    let two_state = is_two_state_example(cfg);
    use ReferenceSource as R;
    match cfg.mode {
        Mode::SolveQsd => {
            let (res, other) = match cfg.method {
                QsdMethod::Power => (
                    qsd_power(&rates, cfg.tol, 10_000_000)?,
                    qsd_via_yaglom(&rates, cfg.tol)?,
                ),
                QsdMethod::Yaglom => (
                    qsd_via_yaglom(&rates, cfg.tol)?,
                    qsd_power(&rates, cfg.tol, 10_000_000)?,
                ),
            };
            let s5 = 5f64.sqrt();
            for (x, label) in labels.iter().enumerate() {
                let (reference, source) = if two_state {
                    ([(3.0 - s5) / 2.0, (s5 - 1.0) / 2.0][x], R::Paper)
                } else {
                    (*other.nu.get(x), R::QsdSolver)
                };
                out.push(
                    None,
                    None,
                    label.clone(),
                    *res.nu.get(x),
                    0.0,
                    Some(reference),
                    source,
                    0,
                );
            }
        }
        Mode::Evolve => {
            let mu = initial_law(cfg, &rates)?;
            let path = phi_ode(&rates, &mu, cfg.t, cfg.step)?;
            let reference = phi_reference(&rates, &mu, cfg.t)?;
            for (x, label) in labels.iter().enumerate() {
                out.push(
                    None,
                    Some(cfg.t),
                    label.clone(),
                    *path.last().get(x),
                    0.0,
                    Some(reference[x]),
                    R::SemigroupOracle,
                    0,
                );
            }
        }
        Mode::Simulate => {
            check_particles(cfg)?;
            let mu = initial_law(cfg, &rates)?;
            let reference = phi_reference(&rates, &mu, cfg.t)?;
            for &n in &cfg.n_list {
                let m = estimate_profile(
                    &rates,
                    &mu,
                    n,
                    cfg.t,
                    cfg.replicas,
                    derive_key(cfg.seed, &[n as u64]),
                )?;
                for (x, label) in labels.iter().enumerate() {
                    out.push(
                        Some(n),
                        Some(cfg.t),
                        label.clone(),
                        m.mean_profile[x],
                        m.stderr[x],
                        Some(reference[x]),
                        R::SemigroupOracle,
                        cfg.replicas,
                    );
                }
            }
        }
        Mode::Stationary => {
            check_particles(cfg)?;
            let nu = qsd_power(&rates, 1e-12, 10_000_000)?.nu;
            let opts = StationaryOptions {
                batches: cfg.batches,
                ..StationaryOptions::default()
            };
            for &n in &cfg.n_list {
                let s = estimate_stationary(
                    &rates,
                    n,
                    cfg.burn_in,
                    cfg.horizon,
                    derive_key(cfg.seed, &[n as u64]),
                    &opts,
                )?;
                for (x, label) in labels.iter().enumerate() {
                    let (reference, source) = if two_state && n == 2 {
                        ([0.4, 0.6][x], R::Paper)
                    } else {
                        (*nu.get(x), R::QsdSolver)
                    };
                    out.push(
                        Some(n),
                        None,
                        label.clone(),
                        s.moments.mean_profile[x],
                        s.moments.stderr[x],
                        Some(reference),
                        source,
                        cfg.batches,
                    );
                }
            }
        }
        Mode::PerfectSample => {
            check_particles(cfg)?;
            for &n in &cfg.n_list {
                let samples: Vec<Vec<f64>> = (0..cfg.replicas as u64)
                    .map(|r| {
                        perfect_sample(&rates, n, derive_key(cfg.seed, &[n as u64, r]))
                            .map(|p| p.config.occupation(rates.len()).profile())
                    })
                    .collect::<Result<_>>()?;
                let m = crate::fv::MomentEstimate::from_samples(&samples)?;
                for (x, label) in labels.iter().enumerate() {
                    let reference = (two_state && n == 2).then(|| [0.4, 0.6][x]);
                    out.push(
                        Some(n),
                        None,
                        label.clone(),
                        m.mean_profile[x],
                        m.stderr[x],
                        reference,
                        R::Paper,
                        cfg.replicas,
                    );
                }
            }
        }
        Mode::VerifyBounds => {
            check_particles(cfg)?;
            let mu = initial_law(cfg, &rates)?;
            let c = summary.c;
            let alpha = summary.alpha;
            for &n in &cfg.n_list {
                let nf = n as f64;
                let key = |tag: u64| derive_key(cfg.seed, &[n as u64, tag]);
                let types =
                    check_type_bound(&rates, &mu, n, cfg.t, cfg.replicas, cfg.k_max, key(0))?;
                for row in &types.rows {
                    let label = match row.k {
                        Some(k) => format!("type{k}:{}", labels[row.state]),
                        None => format!("total:{}", labels[row.state]),
                    };
                    if !row.holds {
                        violations.push(format!("N={n} {label}"));
                    }
                    out.push(
                        Some(n),
                        Some(cfg.t),
                        label,
                        row.estimate,
                        row.stderr,
                        Some(row.bound),
                        R::Paper,
                        cfg.replicas,
                    );
                }
                let m = estimate_profile(&rates, &mu, n, cfg.t, cfg.replicas, key(1))?;
                let bound = (2.0 * c * cfg.t).exp();
                for x in 0..labels.len() {
                    for y in x..labels.len() {
                        let label = format!("cov:{},{}", labels[x], labels[y]);
                        let (est, se) = (nf * m.cov(x, y).abs(), nf * m.cov_stderr(x, y));
                        if est > bound + 3.0 * se {
                            violations.push(format!("N={n} {label}"));
                        }
                        out.push(
                            Some(n),
                            Some(cfg.t),
                            label,
                            est,
                            se,
                            Some(bound),
                            R::Paper,
                            cfg.replicas,
                        );
                    }
                }
                if alpha > c {
                    let opts = StationaryOptions {
                        batches: cfg.batches,
                        ..StationaryOptions::default()
                    };
                    let s =
                        estimate_stationary(&rates, n, cfg.burn_in, cfg.horizon, key(2), &opts)?;
                    let bound = alpha / (alpha - c);
                    for x in 0..labels.len() {
                        for y in x..labels.len() {
                            let label = format!("stationary-cov:{},{}", labels[x], labels[y]);
                            let est = nf * s.moments.cov(x, y).abs();
                            let se = nf * s.moments.cov_stderr(x, y);
                            if est > bound + 3.0 * se {
                                violations.push(format!("N={n} {label}"));
                            }
                            out.push(
                                Some(n),
                                None,
                                label,
                                est,
                                se,
                                Some(bound),
                                R::Paper,
                                cfg.batches,
                            );
                        }
                    }
                }
                let ind = estimate_i_probability(&rates, n, cfg.t, cfg.replicas, key(3))?;
                debug_assert_eq!(ind.bound, coupling_bound(alpha, c, n, cfg.t));
                if !ind.holds {
                    violations.push(format!("N={n} coupling"));
                }
                out.push(
                    Some(n),
                    Some(cfg.t),
                    "coupling".into(),
                    ind.estimate,
                    ind.stderr,
                    Some(ind.bound),
                    R::Paper,
                    cfg.replicas,
                );
            }
        }
        Mode::Sweep => {
            check_particles(cfg)?;
            if cfg.repetitions == 0 || cfg.replicas < 2 {
                return Err(Error::InvalidArgument(
                    "sweep needs --repetitions >= 1 and --replicas >= 2".into(),
                ));
            }
            let mu = initial_law(cfg, &rates)?;
            let phi = phi_reference(&rates, &mu, cfg.t)?;
            for &n in &cfg.n_list {
                let k = labels.len();
                // (estimate, standard error) per repetition.
                let mut means = vec![Vec::new(); k];
                let mut errors = vec![Vec::new(); k];
                for rep in 0..cfg.repetitions as u64 {
                    let s = profile_samples(
                        &rates,
                        &mu,
                        n,
                        cfg.t,
                        cfg.replicas,
                        derive_key(cfg.seed, &[n as u64, rep]),
                    )?;
                    let r = s.len() as f64;
                    for x in 0..k {
                        means[x].push(mean_se(s.iter().map(|v| v[x]), r));
                        errors[x].push(mean_se(s.iter().map(|v| (v[x] - phi[x]).powi(2)), r));
                    }
                }
                let medians = |v: &[(f64, f64)]| {
                    (
                        median(v.iter().map(|p| p.0).collect()),
                        median(v.iter().map(|p| p.1).collect()),
                    )
                };
                for (x, label) in labels.iter().enumerate() {
                    let (mean, mean_err) = medians(&means[x]);
                    let (l2, l2_err) = medians(&errors[x]);
                    out.push(
                        Some(n),
                        Some(cfg.t),
                        label.clone(),
                        mean,
                        mean_err,
                        Some(phi[x]),
                        R::SemigroupOracle,
                        cfg.replicas,
                    );
                    out.push(
                        Some(n),
                        Some(cfg.t),
                        format!("L2:{label}"),
                        l2,
                        l2_err,
                        Some(0.0),
                        R::SemigroupOracle,
                        cfg.replicas,
                    );
                }
            }
        }
    }
    Ok(RunOutput {
        rows: out.rows,
        violations,
    })
}

pub fn write_csv<W: Write>(rows: &[ResultRow], w: W) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().has_headers(true).from_writer(w);
    if rows.is_empty() {
        wr.write_record([
            "experiment_id",
            "mode",
            "chain_name",
            "N",
            "t",
            "state_label",
            "estimate",
            "stderr",
            "reference_value",
            "reference_source",
            "replicas",
            "seed",
        ])?;
    }
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<Vec<ResultRow>> {
    csv::Reader::from_reader(r)
        .deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Delta {
    pub state_label: String,
    #[serde(rename = "N")]
    pub n: Option<usize>,
    pub t: Option<f64>,
    pub a: f64,
    pub b: f64,
    pub delta: f64,
    /// `max(tol, 3 sqrt(se_a² + se_b²))`.
    pub allowed: f64,
    pub flagged: bool,
}

type Key = (String, Option<usize>, Option<u64>);

fn key(r: &ResultRow) -> Key {
    (r.state_label.clone(), r.n, r.t.map(f64::to_bits))
}

/// Joins two reports on `(state, N, t)`. Every key must appear in both.
pub fn compare(a: &[ResultRow], b: &[ResultRow], tol: f64) -> Result<Vec<Delta>> {
    let index = |rows: &[ResultRow]| -> Result<std::collections::BTreeMap<Key, (f64, f64)>> {
        let mut m = std::collections::BTreeMap::new();
        for r in rows {
            if m.insert(key(r), (r.estimate, r.stderr)).is_some() {
                return Err(Error::KeyMismatch(format!(
                    "duplicate row for state {} N {:?} t {:?}",
                    r.state_label, r.n, r.t
                )));
            }
        }
        Ok(m)
    };
    let (ia, ib) = (index(a)?, index(b)?);
    let only = |x: &std::collections::BTreeMap<Key, _>, y: &std::collections::BTreeMap<Key, _>| {
        x.keys()
            .filter(|k| !y.contains_key(*k))
            .map(|k| format!("({}, {:?}, {:?})", k.0, k.1, k.2.map(f64::from_bits)))
            .collect::<Vec<_>>()
    };
    let (oa, ob) = (only(&ia, &ib), only(&ib, &ia));
    if !oa.is_empty() || !ob.is_empty() {
        return Err(Error::KeyMismatch(format!(
            "only in first: [{}]; only in second: [{}]",
            oa.join(" "),
            ob.join(" ")
        )));
    }
    Ok(ia
        .into_iter()
        .map(|(k, (ea, sa))| {
            let (eb, sb) = ib[&k];
            let delta = (ea - eb).abs();
            let allowed = tol.max(3.0 * (sa * sa + sb * sb).sqrt());
            Delta {
                state_label: k.0,
                n: k.1,
                t: k.2.map(f64::from_bits),
                a: ea,
                b: eb,
                delta,
                allowed,
                flagged: !(delta <= allowed),
            }
        })
        .collect())
}

pub fn write_deltas<W: Write>(deltas: &[Delta], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for d in deltas {
        wr.serialize(d)?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b2(mode: Mode) -> ExperimentConfig {
        ExperimentConfig::new(
            ChainSource::Builder {
                name: "two_state_example".into(),
                p: None,
                l: None,
                c: None,
            },
            mode,
            7,
        )
    }

    #[test]
    fn solve_qsd_rows() {
        let out = run(&b2(Mode::SolveQsd)).unwrap();
        assert_eq!(out.rows.len(), 2);
        let r = &out.rows[0];
        assert!((r.estimate - 0.3819660113).abs() < 1e-10);
        assert_eq!(r.stderr, 0.0);
        assert_eq!(r.reference_source, ReferenceSource::Paper);
        assert!(compare(&out.rows, &out.rows, 0.0)
            .unwrap()
            .iter()
            .all(|d| d.delta == 0.0 && !d.flagged));
    }

    #[test]
    fn evolve_at_time_zero_returns_start() {
        let mut cfg = b2(Mode::Evolve);
        cfg.t = 0.0;
        cfg.start = Some("2".into());
        let out = run(&cfg).unwrap();
        assert_eq!(out.rows[0].estimate, 0.0);
        assert_eq!(out.rows[1].estimate, 1.0);
        cfg.start = Some("7".into());
        assert!(run(&cfg).is_err());
    }

    #[test]
    fn csv_round_trip_is_stable() {
        let mut cfg = b2(Mode::Simulate);
        cfg.n_list = vec![5, 10];
        cfg.replicas = 20;
        let out = run(&cfg).unwrap();
        let mut a = Vec::new();
        write_csv(&out.rows, &mut a).unwrap();
        let mut b = Vec::new();
        write_csv(&run(&cfg).unwrap().rows, &mut b).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a.clone()).unwrap();
        assert!(text.starts_with("experiment_id,mode,chain_name,N,t,state_label"));
        assert!(text.ends_with('\n'));
        assert_eq!(read_csv(&a[..]).unwrap(), out.rows);
    }

    #[test]
    fn compare_reports_mismatched_keys() {
        let out = run(&b2(Mode::SolveQsd)).unwrap();
        let err = compare(&out.rows, &out.rows[..1], 1e-9).unwrap_err();
        assert!(matches!(err, Error::KeyMismatch(_)), "{err}");
    }

    #[test]
    fn builders_need_parameters() {
        let cfg = ExperimentConfig::new(
            ChainSource::Builder {
                name: "asymmetric_walk".into(),
                p: Some(0.3),
                l: None,
                c: None,
            },
            Mode::SolveQsd,
            1,
        );
        assert!(run(&cfg).unwrap_err().to_string().contains("--L"));
        let mut bad = cfg.clone();
        bad.chain = ChainSource::Builder {
            name: "nope".into(),
            p: None,
            l: None,
            c: None,
        };
        assert!(run(&bad)
            .unwrap_err()
            .to_string()
            .contains("unknown builder"));
    }
}
