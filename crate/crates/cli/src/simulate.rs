use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use clap::Args;
use dpmqkd::channel::{covariance_from_arms, transmittance_from_distance};
use dpmqkd::protocol_sim::{
    optimize_gain_from_moments, run_simulation, write_records_csv, Gain, SimConfig,
    SimulationReport, DISPLACEMENT_SIGNS,
};

use crate::output::{float, CsvDoc};
use crate::sweeps::{describe_channel, ChannelFlags};
use crate::{Context, Failure};

const QUADRATURES: [&str; 6] = ["xa_p", "pa_p", "xb_p", "pb_p", "xz", "pz"];

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    channel: ChannelFlags,
    /// Total Alice-Bob distance (km), split evenly between the arms.
    #[arg(long, allow_negative_numbers = true)]
    distance: Option<f64>,
    #[arg(long)]
    pulses: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Displacement gain k: `auto` or a number.
    #[arg(long)]
    gain: Option<String>,
    /// Worker threads (results do not depend on this).
    #[arg(long)]
    threads: Option<usize>,
    /// Also write every round to this CSV file.
    #[arg(long)]
    emit_records: Option<PathBuf>,
}

fn parse_gain(text: &str) -> Result<Gain, Failure> {
    if text.eq_ignore_ascii_case("auto") {
        return Ok(Gain::Auto);
    }
    match text.parse::<f64>() {
        Ok(k) if k.is_finite() => Ok(Gain::Fixed(k)),
        _ => Err(Failure::Usage(format!("--gain must be `auto` or a finite number, got {text:?}"))),
    }
}

pub fn run(ctx: &Context, args: SimulateArgs) -> Result<(), Failure> {
    let c = &ctx.config;
    let p = args.channel.resolve(ctx)?;
    let distance = c.pick(args.distance, "distance", 10.0)?;
    let pulses = c.pick(args.pulses, "pulses", 1_000_000)?;
    let seed = c.pick(args.seed, "seed", 7)?;
    let gain = parse_gain(&c.pick(args.gain, "gain", "auto".to_string())?)?;
    let threads = c.lookup(args.threads, "threads")?;
    let records_path = c.lookup(args.emit_records, "emit-records")?;
    c.check_all_used()?;
    if !(distance.is_finite() && distance >= 0.0) {
        return Err(Failure::Usage(format!("--distance must be non-negative, got {distance}")));
    }

    let t = transmittance_from_distance(distance / 2.0, p.attenuation_db_per_km);
    let cfg = SimConfig {
        variance_a: p.modulation_variance,
        variance_b: p.modulation_variance,
        t1: t,
        t2: t,
        excess_noise: p.excess_noise,
        gain,
        num_pulses: pulses,
        seed,
    };
    let work = || -> Result<_, Failure> {
        let (records, report) = run_simulation(&cfg, p.beta)?;
        if let Some(path) = &records_path {
            let file = File::create(path)
                .map_err(|e| Failure::Usage(format!("cannot create {}: {e}", path.display())))?;
            write_records_csv(&records, BufWriter::new(file))?;
        }
        Ok(report)
    };
    let report = match threads {
        None => work()?,
        Some(0) => return Err(Failure::Usage("--threads must be positive".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Failure::Numeric(format!("thread pool: {e}")))?
            .install(work)?,
    };

    if report.insufficient_statistics {
        eprintln!(
            "dpmqkd: warning: insufficient statistics for {pulses} pulses; estimates are unreliable"
        );
    }
    let mut doc = summary(ctx, &cfg, &report)?;
    describe_channel(&mut doc, &p, true);
    doc.meta("distance_km", float(distance))
        .meta("transmittance_per_arm", float(t))
        .meta("pulses", pulses)
        .meta("seed", seed)
        .meta(
            "gain",
            match gain {
                Gain::Auto => "auto".to_string(),
                Gain::Fixed(k) => float(k),
            },
        )
        .meta("bell_measurement", "x_Z = (x_A - x_B)/sqrt2, p_Z = (p_A + p_B)/sqrt2")
        .meta(
            "displacement",
            format!(
                "key = prepared - s k Z with s = {:?} for (x_A, p_A, x_B, p_B)",
                DISPLACEMENT_SIGNS
            ),
        )
        .meta("prepared_variance", "V - 1 per quadrature")
        .meta("effective_covariance", "entangled-equivalent state from fitted T1, T2, eps");
    doc.emit(ctx.target().as_deref(), ctx.timestamp)
}

fn summary(ctx: &Context, cfg: &SimConfig, r: &SimulationReport) -> Result<CsvDoc, Failure> {
    let mut doc = CsvDoc::new(ctx.command, &["quantity", "empirical", "analytic"]);
    let mut put = |name: String, emp: f64, ana: f64| doc.row(vec![name, float(emp), float(ana)]);
    let (emp, ana) = (r.tripartite.to_matrix(), r.analytic.to_matrix());
    for i in 0..6 {
        for j in i..6 {
            put(format!("gamma_{}_{}", QUADRATURES[i], QUADRATURES[j]), emp[(i, j)], ana[(i, j)]);
        }
    }
    put("max_abs_z_score".into(), r.max_z_score, f64::NAN);
    let analytic_gain = optimize_gain_from_moments(&r.analytic).unwrap_or(f64::NAN);
    put("gain_k".into(), r.gain, analytic_gain);
    put("gain_fallback".into(), f64::from(u8::from(r.gain_fallback)), f64::NAN);

    let model = covariance_from_arms(cfg.t1, cfg.t2, cfg.excess_noise, cfg.variance_a)?;
    let nan = f64::NAN;
    match &r.effective {
        Some(e) => {
            put("displaced_var_xa".into(), e.displaced.var_xa, nan);
            put("displaced_var_pa".into(), e.displaced.var_pa, nan);
            put("displaced_var_xb".into(), e.displaced.var_xb, nan);
            put("displaced_var_pb".into(), e.displaced.var_pb, nan);
            put("displaced_cov_xa_xb".into(), e.displaced.c_x, nan);
            put("displaced_cov_pa_pb".into(), e.displaced.c_p, nan);
            put("t1".into(), e.channel.t1, cfg.t1);
            put("t2".into(), e.channel.t2, cfg.t2);
            put("excess_noise".into(), e.channel.excess_noise, cfg.excess_noise);
            put("a".into(), e.covariance.a, model.a);
            put("b".into(), e.covariance.b, model.b);
            put("c".into(), e.covariance.c, model.c);
        }
        None => {
            for name in [
                "displaced_var_xa",
                "displaced_var_pa",
                "displaced_var_xb",
                "displaced_var_pb",
                "displaced_cov_xa_xb",
                "displaced_cov_pa_pb",
                "t1",
                "t2",
                "excess_noise",
                "a",
                "b",
                "c",
            ] {
                put(name.into(), nan, nan);
            }
        }
    }
    put("key_rate_bits_per_pulse".into(), r.empirical_key_rate, r.analytic_key_rate);
    put("relative_key_rate_error".into(), r.relative_error, nan);
    put(
        "insufficient_statistics".into(),
        f64::from(u8::from(r.insufficient_statistics)),
        nan,
    );
    Ok(doc)
}
