use clap::Args;
use dpmqkd::channel::{
    key_rate, rate_vs_distance, tolerable_excess_noise, ChannelParams,
    DEFAULT_ATTENUATION_DB_PER_KM,
};
use dpmqkd::finite_size::{
    cutoff_distance, finite_size_sweep, FiniteSizeParams, FiniteSizeRow, Mode,
    DEFAULT_BLOCK_SIZES, DEFAULT_FAILURE_PROBABILITY,
};
use dpmqkd::Error;

use crate::output::{float, CsvDoc};
use crate::{Context, Failure};

const MAX_GRID_POINTS: usize = 1_000_000;

#[derive(Args, Debug, Clone, Default)]
pub struct ChannelFlags {
    /// Total variance V of each sender's states (SNU).
    #[arg(long = "v", allow_negative_numbers = true)]
    v: Option<f64>,
    /// Reconciliation efficiency.
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    /// Input-referred excess noise (SNU).
    #[arg(long, allow_negative_numbers = true)]
    eps: Option<f64>,
    /// Fiber loss in dB/km.
    #[arg(long, allow_negative_numbers = true)]
    alpha_db_km: Option<f64>,
}

impl ChannelFlags {
    pub fn resolve(&self, ctx: &Context) -> Result<ChannelParams, Failure> {
        let d = ChannelParams::default();
        let c = &ctx.config;
        let p = ChannelParams {
            total_distance_km: 0.0,
            modulation_variance: c.pick(self.v, "v", d.modulation_variance)?,
            beta: c.pick(self.beta, "beta", d.beta)?,
            excess_noise: c.pick(self.eps, "eps", d.excess_noise)?,
            attenuation_db_per_km: c.pick(self.alpha_db_km, "alpha-db-km", DEFAULT_ATTENUATION_DB_PER_KM)?,
        };
        p.validate()?;
        Ok(p)
    }
}

pub fn describe_channel(doc: &mut CsvDoc, p: &ChannelParams, with_eps: bool) {
    doc.meta("v_snu", float(p.modulation_variance)).meta("beta", float(p.beta));
    if with_eps {
        doc.meta("eps_snu", float(p.excess_noise));
    }
    doc.meta("alpha_db_per_km", float(p.attenuation_db_per_km))
        .meta("arms", "symmetric, each arm half the total distance");
}

#[derive(Args, Debug, Clone, Default)]
pub struct GridFlags {
    /// First total distance (km).
    #[arg(long, allow_negative_numbers = true)]
    dmin: Option<f64>,
    /// Last total distance (km), inclusive.
    #[arg(long, allow_negative_numbers = true)]
    dmax: Option<f64>,
    /// Distance step (km).
    #[arg(long, allow_negative_numbers = true)]
    dstep: Option<f64>,
}

impl GridFlags {
    fn resolve(&self, ctx: &Context, default: (f64, f64, f64)) -> Result<Vec<f64>, Failure> {
        let c = &ctx.config;
        let dmin = c.pick(self.dmin, "dmin", default.0)?;
        let dmax = c.pick(self.dmax, "dmax", default.1)?;
        let dstep = c.pick(self.dstep, "dstep", default.2)?;
        distance_grid(dmin, dmax, dstep)
    }
}

/// `dmin, dmin + dstep, …` up to `dmax` (tolerating rounding at the end).
pub fn distance_grid(dmin: f64, dmax: f64, dstep: f64) -> Result<Vec<f64>, Failure> {
    if !(dmin.is_finite() && dmin >= 0.0) {
        return Err(Failure::Usage(format!("--dmin must be a non-negative number, got {dmin}")));
    }
    if !(dmax.is_finite() && dmax >= dmin) {
        return Err(Failure::Usage(format!("--dmax must be at least --dmin, got {dmax}")));
    }
    if dmax == dmin {
        return Ok(vec![dmin]);
    }
    if !(dstep.is_finite() && dstep > 0.0) {
        return Err(Failure::Usage(format!("--dstep must be positive, got {dstep}")));
    }
    let steps = ((dmax - dmin) / dstep + 1e-9).floor();
    if steps >= MAX_GRID_POINTS as f64 {
        return Err(Failure::Usage(format!("grid exceeds {MAX_GRID_POINTS} points")));
    }
    Ok((0..=steps as usize).map(|i| dmin + i as f64 * dstep).collect())
}

#[derive(Args, Debug)]
pub struct AsymptoticArgs {
    #[command(flatten)]
    channel: ChannelFlags,
    #[command(flatten)]
    grid: GridFlags,
}

pub fn asymptotic(ctx: &Context, args: AsymptoticArgs) -> Result<(), Failure> {
    let p = args.channel.resolve(ctx)?;
    let grid = args.grid.resolve(ctx, (0.0, 40.0, 0.2))?;
    ctx.config.check_all_used()?;
    let points = rate_vs_distance(&p, &grid)?;
    let mut doc = CsvDoc::new(
        ctx.command,
        &[
            "distance_km",
            "transmittance_per_arm",
            "a",
            "b",
            "c",
            "mutual_info_bits",
            "holevo_bits",
            "key_rate_bits_per_pulse",
        ],
    );
    describe_channel(&mut doc, &p, true);
    doc.meta("detection", "heterodyne");
    for r in points {
        doc.row(vec![
            float(r.distance_km),
            float(r.arm_transmittance),
            float(r.covariance.a),
            float(r.covariance.b),
            float(r.covariance.c),
            float(r.mutual_info),
            float(r.holevo),
            float(r.key_rate),
        ]);
    }
    doc.emit(ctx.target().as_deref(), ctx.timestamp)
}

#[derive(Args, Debug)]
pub struct TolerableArgs {
    #[command(flatten)]
    channel: ChannelFlags,
    #[command(flatten)]
    grid: GridFlags,
    /// Add a column with the key rate at the returned noise.
    #[arg(long)]
    emit_residuals: bool,
}

pub fn tolerable(ctx: &Context, args: TolerableArgs) -> Result<(), Failure> {
    let p = args.channel.resolve(ctx)?;
    let grid = args.grid.resolve(ctx, (0.0, 20.0, 0.1))?;
    let residuals = ctx.config.flag(args.emit_residuals, "emit-residuals")?;
    ctx.config.check_all_used()?;

    let results: Vec<Result<f64, Error>> = {
        use rayon::prelude::*;
        grid.par_iter().map(|&d| tolerable_excess_noise(&p, d)).collect()
    };
    let mut columns = vec!["distance_km", "tolerable_excess_noise_snu"];
    if residuals {
        columns.push("residual_key_rate");
    }
    let mut doc = CsvDoc::new(ctx.command, &columns);
    describe_channel(&mut doc, &p, false);
    let mut unreachable = Vec::new();
    for (&d, res) in grid.iter().zip(results) {
        let (eps, resid) = match res {
            Ok(eps) => (eps, key_rate(&p.with_distance(d).with_excess_noise(eps))?),
            Err(Error::NoPositiveRate { .. }) => {
                unreachable.push(d);
                (f64::NAN, f64::NAN)
            }
            Err(e) => return Err(e.into()),
        };
        let mut row = vec![float(d), float(eps)];
        if residuals {
            row.push(float(resid));
        }
        doc.row(row);
    }
    if let (Some(first), Some(last)) = (unreachable.first(), unreachable.last()) {
        eprintln!(
            "dpmqkd: warning: no positive key rate even without excess noise at {} distance(s) \
             between {first} and {last} km; written as nan",
            unreachable.len()
        );
    }
    doc.emit(ctx.target().as_deref(), ctx.timestamp)
}

#[derive(Args, Debug)]
pub struct FiniteArgs {
    #[command(flatten)]
    channel: ChannelFlags,
    #[command(flatten)]
    grid: GridFlags,
    /// Comma-separated block sizes N (scientific notation accepted).
    #[arg(long)]
    blocks: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    eps_smooth: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    eps_pe: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    eps_pa: Option<f64>,
    /// Verify the local-versus-conventional orderings; exit 3 on violation.
    #[arg(long)]
    self_check: bool,
}

fn parse_blocks(text: &str) -> Result<Vec<u64>, Failure> {
    text.split(',')
        .map(|s| {
            let s = s.trim();
            let v: f64 = s.parse().map_err(|_| Failure::Usage(format!("bad block size {s:?}")))?;
            if !(v >= 2.0 && v <= 1e18 && v.fract() == 0.0) {
                return Err(Failure::Usage(format!("block size must be an integer >= 2, got {s}")));
            }
            Ok(v as u64)
        })
        .collect()
}

pub fn finite(ctx: &Context, args: FiniteArgs) -> Result<(), Failure> {
    let c = &ctx.config;
    let p = args.channel.resolve(ctx)?;
    let grid = args.grid.resolve(ctx, (0.0, 40.0, 0.5))?;
    let blocks = match c.lookup(args.blocks, "blocks")? {
        Some(text) => parse_blocks(&text)?,
        None => DEFAULT_BLOCK_SIZES.to_vec(),
    };
    let template = FiniteSizeParams::for_mode(blocks[0], Mode::LocalEstimation)
        .with_failure_probabilities(
            c.pick(args.eps_smooth, "eps-smooth", DEFAULT_FAILURE_PROBABILITY)?,
            c.pick(args.eps_pe, "eps-pe", DEFAULT_FAILURE_PROBABILITY)?,
            c.pick(args.eps_pa, "eps-pa", DEFAULT_FAILURE_PROBABILITY)?,
        );
    template.validate()?;
    let self_check = c.flag(args.self_check, "self-check")?;
    c.check_all_used()?;

    let rows = finite_size_sweep(&p, &template, &blocks, &grid)?;
    let mut doc = CsvDoc::new(
        ctx.command,
        &["block_size_N", "mode", "distance_km", "key_rate_bits_per_pulse"],
    );
    describe_channel(&mut doc, &p, true);
    doc.meta("eps_smooth", float(template.eps_smooth))
        .meta("eps_pe", float(template.eps_pe))
        .meta("eps_pa", float(template.eps_pa))
        .meta("mode_local", "key from n = N signals, parameters estimated from the same data")
        .meta("mode_conventional", "n = N/2 key signals, worst-case bounds from the other N/2");
    for r in &rows {
        doc.row(vec![
            r.block_size.to_string(),
            r.mode.to_string(),
            float(r.distance_km),
            float(r.key_rate),
        ]);
    }
    doc.emit(ctx.target().as_deref(), ctx.timestamp)?;
    if self_check {
        let problems = ordering_violations(&rows, &blocks);
        if !problems.is_empty() {
            return Err(Failure::SelfCheck(problems.join("; ")));
        }
        eprintln!("dpmqkd: self-check passed");
    }
    Ok(())
}

fn cutoff(rows: &[FiniteSizeRow], n: u64, mode: Mode) -> Option<f64> {
    cutoff_distance(
        rows.iter()
            .filter(|r| r.block_size == n && r.mode == mode)
            .map(|r| (r.distance_km, r.key_rate)),
    )
}

/// Local rate ≥ conventional rate row by row, local cutoff ≥ conventional
/// cutoff per block size, and cutoffs non-decreasing in N for each mode.
/// A missing cutoff (no positive rate) counts as shorter than any distance.
pub fn ordering_violations(rows: &[FiniteSizeRow], blocks: &[u64]) -> Vec<String> {
    let mut out = Vec::new();
    for local in rows.iter().filter(|r| r.mode == Mode::LocalEstimation) {
        let conv = rows.iter().find(|r| {
            r.mode == Mode::Conventional
                && r.block_size == local.block_size
                && r.distance_km == local.distance_km
        });
        if let Some(conv) = conv {
            if local.key_rate < conv.key_rate {
                out.push(format!(
                    "N={} d={}: local {} < conventional {}",
                    local.block_size, local.distance_km, local.key_rate, conv.key_rate
                ));
            }
        }
    }
    let key = |c: Option<f64>| c.unwrap_or(f64::NEG_INFINITY);
    for &n in blocks {
        let (l, c) = (cutoff(rows, n, Mode::LocalEstimation), cutoff(rows, n, Mode::Conventional));
        if key(l) < key(c) {
            out.push(format!("N={n}: local cutoff {l:?} below conventional {c:?}"));
        }
    }
    let mut sorted = blocks.to_vec();
    sorted.sort_unstable();
    for mode in Mode::ALL {
        for w in sorted.windows(2) {
            let (a, b) = (cutoff(rows, w[0], mode), cutoff(rows, w[1], mode));
            if key(b) < key(a) {
                out.push(format!("{mode}: cutoff shrinks from N={} to N={}", w[0], w[1]));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_edges() {
        assert_eq!(distance_grid(0.0, 0.0, 0.0).unwrap(), vec![0.0]);
        assert_eq!(distance_grid(0.0, 1.0, 0.1).unwrap().len(), 11);
        assert_eq!(distance_grid(2.0, 3.0, 0.4).unwrap(), vec![2.0, 2.4, 2.8]);
        assert!(distance_grid(-1.0, 1.0, 0.1).is_err());
        assert!(distance_grid(1.0, 0.5, 0.1).is_err());
        assert!(distance_grid(0.0, 1.0, 0.0).is_err());
        assert!(distance_grid(0.0, 1e9, 1e-3).is_err());
    }

    #[test]
    fn block_lists() {
        assert_eq!(parse_blocks("1e4, 100000").unwrap(), vec![10_000, 100_000]);
        assert!(parse_blocks("1.5").is_err());
        assert!(parse_blocks("abc").is_err());
        assert!(parse_blocks("1").is_err());
    }

    #[test]
    fn ordering_detects_inversions() {
        let row = |n, mode, d, k| FiniteSizeRow { block_size: n, mode, distance_km: d, key_rate: k };
        let good = vec![
            row(10, Mode::LocalEstimation, 0.0, 1.0),
            row(10, Mode::LocalEstimation, 1.0, 0.5),
            row(10, Mode::Conventional, 0.0, 0.2),
            row(10, Mode::Conventional, 1.0, -0.1),
        ];
        assert!(ordering_violations(&good, &[10]).is_empty());
        let mut bad = good.clone();
        bad[2].key_rate = 2.0;
        assert_eq!(ordering_violations(&bad, &[10]).len(), 1);
    }
}
