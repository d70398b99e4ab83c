//! Subcommands. Each one turns its parameters into a list of artifacts; the
//! caller handles persistence and the manifest.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{ArgAction, Args, Subcommand};
use serde::{Deserialize, Serialize};

use toral_nodal::arithmetic::{
    lattice_points, min_quasi_correlation, spectral_correlations, CorrelationMethod, WorkBudget,
    DEFAULT_MAX_E, DEFAULT_WORK_CEILING,
};
use toral_nodal::derand::{
    heavy_arcs, moment_test_b, moment_test_f, random_center, refinement_study,
    standard_order_tuples, ArcPartition, Ball, BallRule,
};
use toral_nodal::eigenfunction::{build_flat_random, EigenfunctionSpec};
use toral_nodal::measure::SpectralMeasure;
use toral_nodal::nodal::{
    count_nodal_domains, faber_krahn_spacing, nodal_segments, sample_spec, Region,
};
use toral_nodal::ns_constant::{estimate_cns, theorem3_experiment};
use toral_nodal::Error;

use crate::artifacts::Artifact;
use crate::plot;

#[derive(Subcommand, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Command {
    /// Lattice points on the circle |ξ|² = E.
    Lattice(LatticeArgs),
    /// Number of zero-sum tuples of lattice points.
    Correlations(CorrelationArgs),
    /// Smallest nonzero norm of a signed sum of lattice points.
    Quasi(QuasiArgs),
    /// Nodal domains and nodal length of an eigenfunction in a disc.
    NodalCount(NodalArgs),
    /// Moment tests for the arc coefficients and for f over a small ball.
    Derand(DerandArgs),
    /// Monte Carlo estimate of the nodal-domain constant of a spectral measure.
    NsEstimate(NsArgs),
    /// Nodal counts of a flat eigenfunction in small balls against the prediction.
    Theorem3(Theorem3Args),
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeArgs {
    pub e: u64,
    /// Emit JSON instead of CSV.
    #[arg(long, action = ArgAction::Set, num_args = 0..=1, default_value_t = false, default_missing_value = "true")]
    pub json: bool,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationArgs {
    pub e: u64,
    #[arg(long, default_value_t = 4)]
    pub len: usize,
    #[arg(long, default_value = "meet_in_middle")]
    pub method: String,
    #[arg(long = "max-work", default_value_t = DEFAULT_WORK_CEILING)]
    pub max_work: f64,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiArgs {
    pub e: u64,
    #[arg(long, default_value_t = 4)]
    pub len: usize,
    #[arg(long = "max-work", default_value_t = DEFAULT_WORK_CEILING)]
    pub max_work: f64,
}

/// Where an eigenfunction comes from.
#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpecSource {
    /// Text record: `E`, then `xi_x xi_y re im` per line.
    #[arg(long = "spec-file", conflicts_with = "flat")]
    pub spec_file: Option<PathBuf>,
    /// Flat random eigenfunction with eigenvalue E.
    #[arg(long)]
    pub flat: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl SpecSource {
    fn load(&self) -> Result<EigenfunctionSpec> {
        match (&self.spec_file, self.flat) {
            (Some(path), _) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    Error::InvalidParameter(format!("cannot read {}: {e}", path.display()))
                })?;
                Ok(EigenfunctionSpec::from_text(&text)?)
            }
            (None, Some(e)) => Ok(build_flat_random(e, self.seed)?),
            (None, None) => Err(Error::InvalidParameter(
                "one of --spec-file or --flat is required".into(),
            )
            .into()),
        }
    }
}

fn parse_point(s: &str) -> std::result::Result<[f64; 2], String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected 'x,y', got '{s}'"))?;
    let f = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("'{t}': {e}"));
    Ok([f(a)?, f(b)?])
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodalArgs {
    #[command(flatten)]
    pub source: SpecSource,
    /// Disc radius.
    #[arg(long)]
    pub s: f64,
    #[arg(long, value_parser = parse_point, default_value = "0.5,0.5")]
    pub center: [f64; 2],
    /// Grid spacing; defaults to a twelfth of the wavelength.
    #[arg(long)]
    pub spacing: Option<f64>,
    /// Also write the zero-set segments.
    #[arg(long, action = ArgAction::Set, num_args = 0..=1, default_value_t = false, default_missing_value = "true")]
    pub polylines: bool,
    #[arg(long, action = ArgAction::Set, num_args = 0..=1, default_value_t = false, default_missing_value = "true")]
    pub plot: bool,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerandArgs {
    #[command(flatten)]
    pub source: SpecSource,
    /// Ball radius; overrides --s-exponent.
    #[arg(long)]
    pub s: Option<f64>,
    /// Ball radius E^x.
    #[arg(long = "s-exponent", default_value_t = -0.4, allow_negative_numbers = true)]
    pub s_exponent: f64,
    /// Ball centre; drawn from the seed when absent.
    #[arg(long, value_parser = parse_point)]
    pub center: Option<[f64; 2]>,
    #[arg(long = "K", default_value_t = 32)]
    pub k: usize,
    /// Heavy-arc threshold; defaults to 1/K².
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long = "max-order", default_value_t = 8)]
    pub max_order: u32,
    #[arg(long = "max-arcs", default_value_t = 3)]
    pub max_arcs: usize,
    #[arg(long = "R", default_value_t = 8.0)]
    pub r: f64,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long = "max-l", default_value_t = 2)]
    pub max_l: u32,
    /// Partition sizes for the C¹ refinement study at the ball centre.
    #[arg(long = "refine-k", value_delimiter = ',', default_value = "8,16,32,64")]
    pub refine_k: Vec<usize>,
    #[arg(long, action = ArgAction::Set, num_args = 0..=1, default_value_t = false, default_missing_value = "true")]
    pub plot: bool,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NsArgs {
    /// nu, nu_tilde or lebesgue.
    #[arg(long, default_value = "lebesgue")]
    pub measure: String,
    #[arg(long = "R", value_delimiter = ',', default_value = "50")]
    pub r: Vec<f64>,
    #[arg(long = "K", default_value_t = 64)]
    pub k: usize,
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, action = ArgAction::Set, num_args = 0..=1, default_value_t = false, default_missing_value = "true")]
    pub plot: bool,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem3Args {
    #[arg(long = "E")]
    pub e: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "s-exponent", default_value_t = -0.35, allow_negative_numbers = true)]
    pub s_exponent: f64,
    #[arg(long, default_value_t = 8)]
    pub centers: usize,
    #[arg(long = "R", default_value_t = 50.0)]
    pub r: f64,
    #[arg(long = "K", default_value_t = 64)]
    pub k: usize,
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long, action = ArgAction::Set, num_args = 0..=1, default_value_t = false, default_missing_value = "true")]
    pub plot: bool,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Lattice(_) => "lattice",
            Self::Correlations(_) => "correlations",
            Self::Quasi(_) => "quasi",
            Self::NodalCount(_) => "nodal-count",
            Self::Derand(_) => "derand",
            Self::NsEstimate(_) => "ns-estimate",
            Self::Theorem3(_) => "theorem3",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Self::NodalCount(a) => Some(a.source.seed),
            Self::Derand(a) => Some(a.source.seed),
            Self::NsEstimate(a) => Some(a.seed),
            Self::Theorem3(a) => Some(a.seed),
            _ => None,
        }
    }

    pub fn execute(&self) -> Result<Vec<Artifact>> {
        match self {
            Self::Lattice(a) => lattice(a),
            Self::Correlations(a) => correlations(a),
            Self::Quasi(a) => quasi(a),
            Self::NodalCount(a) => nodal_count(a),
            Self::Derand(a) => derand(a),
            Self::NsEstimate(a) => ns_estimate(a),
            Self::Theorem3(a) => theorem3(a),
        }
    }
}

fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().context("flushing csv")
}

/// Header-only CSV for an empty listing.
fn csv_header(cols: &[&str]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(cols)?;
    w.into_inner().context("flushing csv")
}

fn jsonl<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for r in rows {
        serde_json::to_writer(&mut out, r)?;
        out.push(b'\n');
    }
    Ok(out)
}

#[derive(Serialize)]
struct LatticeRow {
    e: u64,
    n: usize,
    x: i64,
    y: i64,
}

fn lattice(a: &LatticeArgs) -> Result<Vec<Artifact>> {
    if a.e > DEFAULT_MAX_E {
        return Err(Error::BudgetExceeded {
            estimated: a.e as f64,
            ceiling: DEFAULT_MAX_E as f64,
        }
        .into());
    }
    let pts = lattice_points(a.e);
    let n = pts.len();
    if a.json {
        let obj = serde_json::json!({
            "e": a.e,
            "multiplicity": n,
            "points": pts.iter().map(|p| [p.x, p.y]).collect::<Vec<_>>(),
        });
        return Ok(vec![Artifact::new("points", "jsonl", jsonl(&[obj])?)]);
    }
    let rows: Vec<LatticeRow> = pts
        .iter()
        .map(|p| LatticeRow {
            e: a.e,
            n,
            x: p.x,
            y: p.y,
        })
        .collect();
    let bytes = if rows.is_empty() {
        csv_header(&["e", "n", "x", "y"])?
    } else {
        csv_bytes(&rows)?
    };
    Ok(vec![Artifact::new("points", "csv", bytes)])
}

fn correlations(a: &CorrelationArgs) -> Result<Vec<Artifact>> {
    let method: CorrelationMethod = a.method.parse()?;
    let report = spectral_correlations(
        a.e,
        a.len,
        method,
        &WorkBudget {
            ceiling: a.max_work,
        },
    )?;
    Ok(vec![
        Artifact::new("report", "csv", csv_bytes(&[&report])?),
        Artifact::new("report", "jsonl", jsonl(&[&report])?),
    ])
}

#[derive(Serialize)]
struct QuasiRow {
    e: u64,
    tuple_len: usize,
    min_nonzero_norm_sq: u64,
    min_nonzero_norm: f64,
    attaining_tuple: String,
}

fn quasi(a: &QuasiArgs) -> Result<Vec<Artifact>> {
    let r = min_quasi_correlation(
        a.e,
        a.len,
        &WorkBudget {
            ceiling: a.max_work,
        },
    )?;
    let row = QuasiRow {
        e: r.e,
        tuple_len: r.tuple_len,
        min_nonzero_norm_sq: r.min_nonzero_norm_sq,
        min_nonzero_norm: r.min_nonzero_norm,
        attaining_tuple: r
            .attaining_tuple
            .iter()
            .map(|p| format!("{}:{}", p.x, p.y))
            .collect::<Vec<_>>()
            .join(";"),
    };
    Ok(vec![
        Artifact::new("report", "csv", csv_bytes(&[row])?),
        Artifact::new("report", "jsonl", jsonl(&[&r])?),
    ])
}

#[derive(Serialize)]
struct NodalRow {
    e: u64,
    center_x: f64,
    center_y: f64,
    radius: f64,
    spacing: f64,
    domains_inside: usize,
    domains_touching_boundary: usize,
    positive_inside: usize,
    negative_inside: usize,
    nodal_length: f64,
}

#[derive(Serialize)]
struct SegmentRow {
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
}

fn nodal_count(a: &NodalArgs) -> Result<Vec<Artifact>> {
    let spec = a.source.load()?;
    let spacing = a
        .spacing
        .unwrap_or_else(|| faber_krahn_spacing(spec.frequency_radius()));
    let region = Region::disc(a.center, a.s);
    let field = sample_spec(&spec, &region, spacing)?;
    let rep = count_nodal_domains(&field, &region)?;
    let row = NodalRow {
        e: spec.e(),
        center_x: a.center[0],
        center_y: a.center[1],
        radius: a.s,
        spacing: rep.grid_spacing_used,
        domains_inside: rep.domains_inside,
        domains_touching_boundary: rep.domains_touching_boundary,
        positive_inside: rep.positive_inside,
        negative_inside: rep.negative_inside,
        nodal_length: rep.nodal_length,
    };
    let mut out = vec![Artifact::new("report", "csv", csv_bytes(&[row])?)];
    if a.polylines || a.plot {
        let segs = nodal_segments(&field, &region)?;
        if a.polylines {
            let rows: Vec<SegmentRow> = segs
                .iter()
                .map(|s| SegmentRow {
                    x0: s[0][0],
                    y0: s[0][1],
                    x1: s[1][0],
                    y1: s[1][1],
                })
                .collect();
            let bytes = if rows.is_empty() {
                csv_header(&["x0", "y0", "x1", "y1"])?
            } else {
                csv_bytes(&rows)?
            };
            out.push(Artifact::new("segments", "csv", bytes));
        }
        if a.plot {
            out.push(Artifact::new(
                "nodal-set",
                "svg",
                plot::nodal_set(&segs, a.center, a.s).into_bytes(),
            ));
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct BMomentRow {
    orders: String,
    empirical_re: f64,
    empirical_im: f64,
    gaussian: f64,
    deviation: f64,
    std_error: f64,
}

#[derive(Serialize)]
struct FMomentCsvRow {
    l: u32,
    direct: f64,
    lattice_total: Option<f64>,
    lattice_constant: Option<f64>,
    lattice_oscillatory: Option<f64>,
    correlation_constant: Option<f64>,
    gaussian: f64,
}

#[derive(Serialize)]
struct DerandSummary {
    e: u64,
    seed: u64,
    s: f64,
    center: [f64; 2],
    k: usize,
    delta: f64,
    heavy_arcs: usize,
    n_samples: usize,
    order_tuples: usize,
    /// Largest z-score among moments with nonzero sampling error.
    max_z_score: f64,
    /// Moments that are constant over the ball yet miss the Gaussian value.
    degenerate_moments: usize,
}

fn derand(a: &DerandArgs) -> Result<Vec<Artifact>> {
    let spec = a.source.load()?;
    let s = a.s.unwrap_or_else(|| (spec.e() as f64).powf(a.s_exponent));
    let center = a.center.unwrap_or_else(|| random_center(a.source.seed));
    let ball = Ball::new(center, s)?;
    let part = ArcPartition::new(a.k)?;
    let delta = a.delta.unwrap_or(1.0 / (a.k * a.k) as f64);
    let kset = heavy_arcs(&spec.spectral_measure(), &part, delta);
    let orders = standard_order_tuples(&part, &kset, a.max_order, a.max_arcs);
    let b = moment_test_b(
        &spec,
        &part,
        &kset,
        &ball,
        &orders,
        a.max_order,
        a.samples,
        a.source.seed,
    )?;
    let f = moment_test_f(&spec, &ball, a.max_l, BallRule::auto(&spec, s, a.max_l))?;
    let refinement = refinement_study(&spec, center, a.r, &a.refine_k, 0.05)?;

    let b_rows: Vec<BMomentRow> = b
        .orders
        .iter()
        .enumerate()
        .map(|(i, t)| BMomentRow {
            orders: t
                .iter()
                .map(|o| format!("{}:{}:{}", o.arc, o.r, o.s))
                .collect::<Vec<_>>()
                .join(";"),
            empirical_re: b.empirical[i].re,
            empirical_im: b.empirical[i].im,
            gaussian: b.gaussian[i].re,
            deviation: b.deviations[i],
            std_error: b.std_errors[i],
        })
        .collect();
    let f_rows: Vec<FMomentCsvRow> = f
        .rows
        .iter()
        .map(|r| FMomentCsvRow {
            l: r.l,
            direct: r.direct,
            lattice_total: r.lattice.as_ref().map(|x| x.total),
            lattice_constant: r.lattice.as_ref().map(|x| x.constant),
            lattice_oscillatory: r.lattice.as_ref().map(|x| x.oscillatory),
            correlation_constant: r.lattice.as_ref().map(|x| x.correlation_constant),
            gaussian: r.gaussian,
        })
        .collect();
    let summary = DerandSummary {
        e: spec.e(),
        seed: a.source.seed,
        s,
        center,
        k: a.k,
        delta,
        heavy_arcs: kset.len(),
        n_samples: a.samples,
        order_tuples: orders.len(),
        max_z_score: b
            .deviations
            .iter()
            .zip(&b.std_errors)
            .filter(|(_, se)| **se > 0.0)
            .map(|(d, se)| d / se)
            .fold(0.0, f64::max),
        degenerate_moments: b
            .deviations
            .iter()
            .zip(&b.std_errors)
            .filter(|(d, se)| **se == 0.0 && **d > 1e-12)
            .count(),
    };
    let mut out = vec![
        Artifact::new("summary", "jsonl", jsonl(&[summary])?),
        Artifact::new(
            "b-moments",
            "csv",
            if b_rows.is_empty() {
                csv_header(&[
                    "orders",
                    "empirical_re",
                    "empirical_im",
                    "gaussian",
                    "deviation",
                    "std_error",
                ])?
            } else {
                csv_bytes(&b_rows)?
            },
        ),
        Artifact::new("f-moments", "csv", csv_bytes(&f_rows)?),
        Artifact::new("refinement", "csv", csv_bytes(&refinement)?),
    ];
    if a.plot {
        let z: Vec<f64> = b
            .deviations
            .iter()
            .zip(&b.std_errors)
            .map(|(d, se)| if *se > 0.0 { d / se } else { 0.0 })
            .collect();
        out.push(Artifact::new(
            "deviations",
            "svg",
            plot::bars("|empirical - gaussian| / standard error", &z, 5.0).into_bytes(),
        ));
    }
    Ok(out)
}

pub fn parse_measure(name: &str) -> Result<SpectralMeasure> {
    match name {
        "nu" => Ok(SpectralMeasure::nu()),
        "nu_tilde" | "nu-tilde" => Ok(SpectralMeasure::nu_tilde()),
        "lebesgue" => Ok(SpectralMeasure::lebesgue()),
        other => Err(Error::InvalidParameter(format!("unknown measure '{other}'")).into()),
    }
}

#[derive(Serialize)]
struct CountRow {
    r: f64,
    realization: usize,
    count: usize,
}

#[derive(Serialize)]
struct EstimateRow {
    measure: String,
    r: f64,
    k: usize,
    n_realizations: usize,
    mean_count: f64,
    estimate: f64,
    std_error: f64,
    seed: u64,
}

fn ns_estimate(a: &NsArgs) -> Result<Vec<Artifact>> {
    let measure = parse_measure(&a.measure)?;
    let mut rows = Vec::new();
    let mut counts = Vec::new();
    for &r in &a.r {
        let est = estimate_cns(&measure, r, a.k, a.n, a.seed)?;
        counts.extend(est.counts.iter().enumerate().map(|(i, &c)| CountRow {
            r,
            realization: i,
            count: c,
        }));
        rows.push(EstimateRow {
            measure: est.measure,
            r,
            k: est.k,
            n_realizations: est.n_realizations,
            mean_count: est.mean_count,
            estimate: est.estimate,
            std_error: est.std_error,
            seed: est.seed,
        });
    }
    let mut out = vec![
        Artifact::new("estimates", "csv", csv_bytes(&rows)?),
        Artifact::new("counts", "csv", csv_bytes(&counts)?),
    ];
    if a.plot {
        let xs: Vec<f64> = rows.iter().map(|r| r.r).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.estimate).collect();
        let es: Vec<f64> = rows.iter().map(|r| r.std_error).collect();
        out.push(Artifact::new(
            "estimate-vs-r",
            "svg",
            plot::curve(&format!("{}: estimate against R", a.measure), &xs, &ys, &es).into_bytes(),
        ));
    }
    Ok(out)
}

#[derive(Serialize)]
struct CenterRow {
    center_x: f64,
    center_y: f64,
    count: usize,
    ratio: f64,
    raw_ratio: f64,
}

fn theorem3(a: &Theorem3Args) -> Result<Vec<Artifact>> {
    let rep = theorem3_experiment(a.e, a.seed, a.s_exponent, a.centers, a.r, a.k, a.n)?;
    let rows: Vec<CenterRow> = rep
        .centers
        .iter()
        .map(|c| CenterRow {
            center_x: c.center[0],
            center_y: c.center[1],
            count: c.count,
            ratio: c.ratio,
            raw_ratio: c.raw_ratio,
        })
        .collect();
    let mut out = vec![
        Artifact::new("report", "jsonl", jsonl(&[&rep])?),
        Artifact::new("centers", "csv", csv_bytes(&rows)?),
    ];
    if a.plot {
        let spec = build_flat_random(a.e, a.seed)?;
        let c = rep.centers[0].center;
        let region = Region::disc(c, rep.s);
        let field = sample_spec(&spec, &region, faber_krahn_spacing(spec.frequency_radius()))?;
        let segs = nodal_segments(&field, &region)?;
        out.push(Artifact::new(
            "nodal-set",
            "svg",
            plot::nodal_set(&segs, c, rep.s).into_bytes(),
        ));
    }
    Ok(out)
}
